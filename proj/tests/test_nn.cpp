#include <doctest.h>

#include <cmath>

#include "covq/nn/gradcheck.hpp"
#include "covq/nn/layers.hpp"
#include "covq/qmodel.hpp"

using namespace covq;
using namespace covq::nn;

namespace {

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

void fill_random(Tensor<double>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& x : t.data) x = rng.uniform(lo, hi);
}

void check_finite(const Tensor<double>& t) {
    for (double v : t.data) CHECK(std::isfinite(v));
}

}  // namespace

TEST_CASE("conv identity kernel center-crops the input") {
    Rng rng(1);
    Conv2d<double> conv(1, 1, 3, 1, rng);
    conv.weight.value.fill(0.0);
    conv.weight.value.at(0, 0, 1, 1) = 1.0;
    conv.bias.value.fill(0.0);

    Tensor<double> x({1, 1, 5, 6});
    fill_random(x, rng);
    const Tensor<double> y = conv.forward(x);
    CHECK(y.shape == std::vector<int>{1, 1, 3, 4});
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            CHECK(y.at(0, 0, r, c) == x.at(0, 0, r + 1, c + 1));
        }
    }
}

TEST_CASE("conv of zero input is the broadcast bias") {
    Rng rng(2);
    Conv2d<double> conv(3, 5, 2, 1, rng);
    const Tensor<double> y = conv.forward(Tensor<double>({2, 3, 4, 4}));
    for (int b = 0; b < 2; ++b) {
        for (int co = 0; co < 5; ++co) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) {
                    CHECK(y.at(b, co, r, c) == conv.bias.value[co]);
                }
            }
        }
    }
}

TEST_CASE("conv output size follows the valid-padding formula") {
    Rng rng(3);
    for (const auto& [h, w, k, s] : std::vector<std::array<int, 4>>{
             {16, 16, 5, 1}, {12, 12, 5, 1}, {8, 8, 4, 1}, {9, 7, 3, 2}, {5, 5, 5, 1}}) {
        Conv2d<double> conv(2, 3, k, s, rng);
        Tensor<double> x({1, 2, h, w});
        fill_random(x, rng);
        const Tensor<double> y = conv.forward(x);
        CHECK(y.shape == std::vector<int>{1, 3, (h - k) / s + 1, (w - k) / s + 1});
        check_finite(y);
    }
    Conv2d<double> conv(1, 1, 5, 1, rng);
    CHECK_THROWS_AS(conv.forward(Tensor<double>({1, 1, 4, 4})), ShapeMismatchError);
    CHECK_THROWS_AS(conv.forward(Tensor<double>({1, 2, 8, 8})), ShapeMismatchError);
}

TEST_CASE("conv gradients match finite differences at full size") {
    Rng rng(4);
    Conv2d<double> conv(4, 16, 5, 1, rng);
    Param<double> x({1, 4, 16, 16});
    fill_random(x.value, rng);
    Tensor<double> proj({1, 16, 12, 12});
    fill_random(proj, rng);

    auto loss = [&]() { return dot(conv.forward(x.value), proj); };
    loss();
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    x.grad = conv.backward(proj);

    const auto report = gradient_check<double>(
        loss, {{"weight", &conv.weight}, {"bias", &conv.bias}, {"input", &x}});
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("batchnorm leaves normalized input untouched") {
    BatchNorm2d<double> bn(2);
    // Per-channel values {-1, +1} in equal measure: zero mean, unit variance.
    Tensor<double> x({2, 2, 1, 2});
    x.at(0, 0, 0, 0) = -1.0;
    x.at(0, 0, 0, 1) = 1.0;
    x.at(1, 0, 0, 0) = 1.0;
    x.at(1, 0, 0, 1) = -1.0;
    x.at(0, 1, 0, 0) = 1.0;
    x.at(0, 1, 0, 1) = -1.0;
    x.at(1, 1, 0, 0) = -1.0;
    x.at(1, 1, 0, 1) = 1.0;
    const Tensor<double> y = bn.forward(x, BnMode::Train);
    for (int64_t i = 0; i < x.numel(); ++i) {
        CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-4));
    }
}

TEST_CASE("batchnorm with zero gamma is constant beta") {
    Rng rng(5);
    BatchNorm2d<double> bn(3);
    bn.gamma.value.fill(0.0);
    bn.beta.value = Tensor<double>({3}, {0.5, -1.0, 2.0});
    Tensor<double> x({2, 3, 2, 2});
    fill_random(x, rng);
    for (const BnMode mode : {BnMode::Train, BnMode::Eval}) {
        const Tensor<double> y = bn.forward(x, mode);
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) CHECK(y.at(b, c, i, j) == bn.beta.value[c]);
    }
}

TEST_CASE("batchnorm gradients match finite differences in both modes") {
    for (const BnMode mode : {BnMode::Train, BnMode::Eval}) {
        Rng rng(6);
        BatchNorm2d<double> bn(3);
        fill_random(bn.gamma.value, rng, 0.5, 1.5);
        fill_random(bn.beta.value, rng);
        fill_random(bn.running_mean, rng);
        fill_random(bn.running_var, rng, 0.5, 2.0);
        const Tensor<double> rm = bn.running_mean;
        const Tensor<double> rv = bn.running_var;

        Param<double> x({4, 3, 3, 3});
        fill_random(x.value, rng);
        Tensor<double> proj({4, 3, 3, 3});
        fill_random(proj, rng);

        auto loss = [&]() {
            // Keep running stats frozen so Eval probes see a fixed function.
            bn.running_mean = rm;
            bn.running_var = rv;
            return dot(bn.forward(x.value, mode), proj);
        };
        loss();
        bn.gamma.zero_grad();
        bn.beta.zero_grad();
        x.grad = bn.backward(proj);

        const auto report = gradient_check<double>(
            loss, {{"gamma", &bn.gamma}, {"beta", &bn.beta}, {"input", &x}});
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("batchnorm running stats update only in train mode") {
    Rng rng(7);
    BatchNorm2d<double> bn(2);
    Tensor<double> x({3, 2, 2, 2});
    fill_random(x, rng);
    const Tensor<double> rm0 = bn.running_mean;
    bn.forward(x, BnMode::Eval);
    CHECK(bn.running_mean.data == rm0.data);
    bn.forward(x, BnMode::Train);
    CHECK(bn.running_mean.data != rm0.data);
}

TEST_CASE("lstm with all-zero parameters and state emits zeros") {
    Rng rng(8);
    LstmCell<double> cell(4, 3, rng);
    cell.w_ih.value.fill(0.0);
    cell.w_hh.value.fill(0.0);
    cell.b.value.fill(0.0);
    Tensor<double> x({2, 4});
    fill_random(x, rng);
    const auto st = cell.forward(x, cell.zero_state(2));
    for (double v : st.h.data) CHECK(v == 0.0);
}

TEST_CASE("saturated forget gate preserves the cell state") {
    Rng rng(9);
    LstmCell<double> cell(3, 2, rng);
    cell.w_ih.value.fill(0.0);
    cell.w_hh.value.fill(0.0);
    cell.b.value.fill(0.0);
    for (int j = 0; j < 2; ++j) {
        cell.b.value[2 + j] = 50.0;       // forget gate ~ 1
        cell.b.value[j] = -50.0;          // input gate ~ 0
    }
    LstmState<double> st{Tensor<double>({1, 2}), Tensor<double>({1, 2}, {0.7, -0.3})};
    Tensor<double> x({1, 3});
    for (int t = 0; t < 4; ++t) {
        fill_random(x, rng);
        st = cell.forward(x, st);
        CHECK(st.c.at(0, 0) == doctest::Approx(0.7).epsilon(1e-9));
        CHECK(st.c.at(0, 1) == doctest::Approx(-0.3).epsilon(1e-9));
    }
}

TEST_CASE("lstm BPTT gradients match finite differences over 3 steps") {
    Rng rng(10);
    const int in = 6, hidden = 5, batch = 2, steps = 3;
    LstmCell<double> cell(in, hidden, rng);
    std::vector<Param<double>> xs;
    std::vector<Tensor<double>> projs;
    for (int t = 0; t < steps; ++t) {
        Param<double> x({batch, in});
        fill_random(x.value, rng);
        xs.push_back(std::move(x));
        Tensor<double> p({batch, hidden});
        fill_random(p, rng);
        projs.push_back(std::move(p));
    }

    auto loss = [&]() {
        LstmState<double> st = cell.zero_state(batch);
        double total = 0.0;
        for (int t = 0; t < steps; ++t) {
            st = cell.forward(xs[static_cast<size_t>(t)].value, st);
            total += dot(st.h, projs[static_cast<size_t>(t)]);
        }
        return total;
    };

    // Analytic pass: forward with caches, then backward through time.
    std::vector<LstmCache<double>> caches(steps);
    LstmState<double> st = cell.zero_state(batch);
    for (int t = 0; t < steps; ++t) {
        st = cell.forward(xs[static_cast<size_t>(t)].value, st, &caches[static_cast<size_t>(t)]);
    }
    cell.w_ih.zero_grad();
    cell.w_hh.zero_grad();
    cell.b.zero_grad();
    Tensor<double> dh_carry, dc_carry;
    for (int t = steps - 1; t >= 0; --t) {
        Tensor<double> dh = projs[static_cast<size_t>(t)];
        if (dh_carry.numel() > 0) {
            for (int64_t i = 0; i < dh.numel(); ++i) dh[i] += dh_carry[i];
        }
        auto back = cell.backward(caches[static_cast<size_t>(t)], dh, dc_carry);
        xs[static_cast<size_t>(t)].grad = std::move(back.dx);
        dh_carry = std::move(back.dh_prev);
        dc_carry = std::move(back.dc_prev);
    }

    std::vector<std::pair<std::string, Param<double>*>> params = {
        {"w_ih", &cell.w_ih}, {"w_hh", &cell.w_hh}, {"b", &cell.b}};
    for (int t = 0; t < steps; ++t) {
        params.emplace_back("x" + std::to_string(t), &xs[static_cast<size_t>(t)]);
    }
    const auto report = gradient_check<double>(loss, params);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("linear basics") {
    Rng rng(11);
    Linear<double> lin(3, 3, rng);
    lin.weight.value.fill(0.0);
    for (int i = 0; i < 3; ++i) lin.weight.value.at(i, i) = 1.0;
    lin.bias.value.fill(0.0);
    Tensor<double> x({2, 3});
    fill_random(x, rng);
    CHECK(lin.forward(x).data == x.data);

    Linear<double> lin2(4, 2, rng);
    const Tensor<double> y = lin2.forward(Tensor<double>({3, 4}));
    for (int b = 0; b < 3; ++b)
        for (int o = 0; o < 2; ++o) CHECK(y.at(b, o) == lin2.bias.value[o]);

    CHECK_THROWS_AS(lin.forward(Tensor<double>({2, 5})), ShapeMismatchError);
}

TEST_CASE("linear gradients match finite differences (128 -> 4)") {
    Rng rng(12);
    Linear<double> lin(128, 4, rng);
    Param<double> x({3, 128});
    fill_random(x.value, rng);
    Tensor<double> proj({3, 4});
    fill_random(proj, rng);

    auto loss = [&]() { return dot(lin.forward(x.value), proj); };
    loss();
    lin.weight.zero_grad();
    lin.bias.zero_grad();
    x.grad = lin.backward(proj);
    const auto report = gradient_check<double>(
        loss, {{"weight", &lin.weight}, {"bias", &lin.bias}, {"input", &x}});
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("mse loss") {
    Tensor<double> pred({4}, {1.0, 2.0, 3.0, 4.0});
    Tensor<double> w({4}, {1.0, 1.0, 1.0, 1.0});

    auto same = mse_loss(pred, pred, w);
    CHECK(same.loss == 0.0);
    for (double g : same.grad.data) CHECK(g == 0.0);

    Tensor<double> target({4}, {0.0, 1.0, 2.0, 3.0});
    CHECK(mse_loss(pred, target, w).loss == 1.0);

    Rng rng(13);
    Tensor<double> p({6}), t({6}), pw({6});
    fill_random(p, rng);
    fill_random(t, rng);
    fill_random(pw, rng, 0.1, 1.0);
    const auto got = mse_loss(p, t, pw);
    double direct = 0.0;
    for (int i = 0; i < 6; ++i) direct += pw[i] * (p[i] - t[i]) * (p[i] - t[i]);
    direct /= 6.0;
    CHECK(got.loss == doctest::Approx(direct).epsilon(1e-12));
    for (int i = 0; i < 6; ++i) {
        CHECK(got.grad[i] == doctest::Approx(2.0 * pw[i] * (p[i] - t[i]) / 6.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(mse_loss(p, Tensor<double>({4}), pw), ShapeMismatchError);
}

TEST_CASE("adam first step and no-op behavior") {
    AdamConfig cfg;
    Param<double> p({3});
    p.value = Tensor<double>({3}, {1.0, -2.0, 0.5});

    const Tensor<double> before = p.value;
    p.zero_grad();
    adam_update(p, cfg);
    CHECK(p.value.data == before.data);  // zero gradient: exact no-op
    CHECK(p.step == 1);

    Param<double> fresh({3});
    fresh.value = before;
    fresh.grad = Tensor<double>({3}, {0.3, -4.0, 1e-3});
    adam_update(fresh, cfg);  // first step from zero moments
    for (int i = 0; i < 3; ++i) {
        const double g = fresh.grad[i];
        const double want = before[i] - cfg.lr * g / (std::abs(g) + cfg.eps);
        CHECK(fresh.value[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("adam steps approach lr under a constant gradient") {
    AdamConfig cfg;
    Param<double> p({1});
    p.grad[0] = 0.37;  // constant gradient direction
    double prev = p.value[0];
    double step_size = 0.0;
    for (int i = 0; i < 500; ++i) {
        adam_update(p, cfg);
        step_size = std::abs(p.value[0] - prev);
        prev = p.value[0];
    }
    CHECK(step_size == doctest::Approx(cfg.lr).epsilon(0.01));
}

TEST_CASE("gradient check harness flags a corrupted gradient") {
    Rng rng(14);
    Linear<double> lin(4, 2, rng);
    Param<double> x({1, 4});
    fill_random(x.value, rng);
    Tensor<double> proj({1, 2});
    fill_random(proj, rng);
    auto loss = [&]() { return dot(lin.forward(x.value), proj); };
    loss();
    lin.weight.zero_grad();
    lin.bias.zero_grad();
    lin.backward(proj);
    lin.weight.grad[0] += 0.5;  // sabotage
    CHECK_THROWS_AS(
        require_gradients<double>(loss, {{"weight", &lin.weight}}, 1e-4),
        ToleranceExceededError);
}

TEST_CASE("assembled network gradients match finite differences") {
    QNetworkConfig cfg;
    cfg.rows = 6;
    cfg.cols = 6;
    cfg.kernel = 3;
    cfg.conv_channels = 3;
    cfg.hidden = 6;

    for (const Variant variant : {Variant::Recurrent, Variant::CnnBaseline}) {
        cfg.variant = variant;
        Rng rng(15);
        QNetwork<double> net(cfg, rng);

        const int batch = 2;
        Param<double> x({batch, 4, 6, 6});
        fill_random(x.value, rng);
        Tensor<double> budgets({batch}, {0.8, -0.2});
        Tensor<double> proj({batch, 4});
        fill_random(proj, rng);

        auto loss = [&]() {
            return dot(net.forward_batch(x.value, budgets, net.zero_state(batch),
                                         BnMode::Train, false),
                       proj);
        };
        net.forward_batch(x.value, budgets, net.zero_state(batch), BnMode::Train, true);
        net.zero_grad();
        net.backward_batch(proj);

        const auto report = gradient_check<double>(loss, net.named_params());
        CHECK(report.max_rel_error < 1e-4);
    }
}

TEST_CASE("forward passes are deterministic and finite") {
    QNetworkConfig cfg = QNetworkConfig::for_map(8, 8, Variant::Recurrent, 16);
    cfg.conv_channels = 4;
    Rng rng(16);
    QNetwork<double> net(cfg, rng);
    Tensor<double> x({2, 4, 8, 8});
    fill_random(x, rng, 0.0, 1.0);
    Tensor<double> budgets({2}, {1.0, 0.4});
    const auto a = net.forward_batch(x, budgets, net.zero_state(2), BnMode::Eval, false);
    const auto b = net.forward_batch(x, budgets, net.zero_state(2), BnMode::Eval, false);
    CHECK(a.data == b.data);
    check_finite(a);
}
