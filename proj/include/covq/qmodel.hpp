#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "covq/nn/gradcheck.hpp"
#include "covq/nn/layers.hpp"
#include "covq/state_codec.hpp"

namespace covq {

enum class Variant { Recurrent, CnnBaseline };

inline const char* variant_name(Variant v) {
    return v == Variant::Recurrent ? "recurrent" : "cnn";
}
inline std::optional<Variant> variant_from_name(const std::string& s) {
    if (s == "recurrent") return Variant::Recurrent;
    if (s == "cnn") return Variant::CnnBaseline;
    return std::nullopt;
}

struct QNetworkConfig {
    int rows = 16;
    int cols = 16;
    int in_channels = kStateChannels;
    int conv_channels = 16;
    int kernel = 5;
    int stride = 1;
    int hidden = 128;
    int actions = kNumActions;
    Variant variant = Variant::Recurrent;

    // Kernel 5 as long as two valid-padding convolutions fit; smaller maps
    // shrink the kernel so the trunk still produces a non-empty feature map.
    static QNetworkConfig for_map(int rows, int cols, Variant v, int hidden = 128) {
        QNetworkConfig cfg;
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.variant = v;
        cfg.hidden = hidden;
        const int side = std::min(rows, cols);
        cfg.kernel = std::min(5, (side + 1) / 2);
        return cfg;
    }

    int conv1_out(int in) const { return (in - kernel) / stride + 1; }
    int feat_rows() const { return conv1_out(conv1_out(rows)); }
    int feat_cols() const { return conv1_out(conv1_out(cols)); }
    int flat_size() const { return conv_channels * feat_rows() * feat_cols(); }
    int recurrent_input() const { return flat_size() + 1; }  // + budget scalar
};

// Q over the four move actions with infeasible entries masked out; masked
// entries behave as -infinity in any argmax.
struct MaskedQ {
    std::array<double, kNumActions> q{};
    std::array<bool, kNumActions> mask{};  // true = allowed
};

inline int masked_argmax(const MaskedQ& mq) {
    int best = -1;
    for (int a = 0; a < kNumActions; ++a) {
        if (!mq.mask[a]) continue;
        if (best == -1 || mq.q[a] > mq.q[best]) best = a;  // ties keep the lowest index
    }
    if (best == -1) throw AllMaskedError("masked_argmax: all four actions masked");
    return best;
}

// The recurrent Q-network (conv->bn->relu twice, flatten, concat budget,
// LSTM, linear head) and the CNN baseline, which swaps the LSTM for a
// linear+ReLU of the same width and ignores the hidden state.
template <class T>
class QNetwork {
public:
    QNetwork(const QNetworkConfig& cfg, Rng& rng)
        : cfg_(cfg),
          conv1_(cfg.in_channels, cfg.conv_channels, cfg.kernel, cfg.stride, rng),
          bn1_(cfg.conv_channels),
          conv2_(cfg.conv_channels, cfg.conv_channels, cfg.kernel, cfg.stride, rng),
          bn2_(cfg.conv_channels),
          head_(cfg.hidden, cfg.actions, rng) {
        if (cfg_.feat_rows() <= 0 || cfg_.feat_cols() <= 0) {
            throw ShapeMismatchError("map too small for two valid convolutions");
        }
        if (cfg_.variant == Variant::Recurrent) {
            lstm_ = std::make_unique<nn::LstmCell<T>>(cfg_.recurrent_input(), cfg_.hidden, rng);
        } else {
            fc_mid_ = std::make_unique<nn::Linear<T>>(cfg_.recurrent_input(), cfg_.hidden, rng);
        }
    }

    QNetwork(const QNetwork& other) : QNetwork(other.cfg_, dummy_rng()) { copy_from(other); }
    QNetwork(QNetwork&&) noexcept = default;
    QNetwork& operator=(const QNetwork&) = delete;
    QNetwork& operator=(QNetwork&&) noexcept = default;

    const QNetworkConfig& config() const { return cfg_; }
    Variant variant() const { return cfg_.variant; }

    nn::LstmState<T> zero_state(int batch = 1) const {
        return nn::LstmState<T>{nn::Tensor<T>({batch, cfg_.hidden}),
                                nn::Tensor<T>({batch, cfg_.hidden})};
    }

    // Batched forward: states [B, 4, rows, cols], budgets [B], initial
    // hidden [B, H]. Returns Q [B, actions]; if next_state is non-null the
    // advanced recurrent state is written there (the baseline passes h0
    // through unchanged). cache=true retains activations for backward_batch.
    nn::Tensor<T> forward_batch(const nn::Tensor<T>& states, const nn::Tensor<T>& budgets,
                                const nn::LstmState<T>& h0, nn::BnMode mode, bool cache,
                                nn::LstmState<T>* next_state = nullptr) {
        states.require_shape({states.dim(0), cfg_.in_channels, cfg_.rows, cfg_.cols},
                             "qnetwork input");
        const int b = states.dim(0);
        budgets.require_shape({b}, "qnetwork budget input");

        nn::Tensor<T> x1 = conv1_.forward(states);
        nn::Tensor<T> x2 = bn1_.forward(x1, mode);
        nn::Tensor<T> x3 = nn::relu(x2);
        nn::Tensor<T> x4 = conv2_.forward(x3);
        nn::Tensor<T> x5 = bn2_.forward(x4, mode);
        nn::Tensor<T> x6 = nn::relu(x5);

        const int flat = cfg_.flat_size();
        nn::Tensor<T> joined({b, flat + 1});
        for (int bi = 0; bi < b; ++bi) {
            const T* src = x6.ptr() + static_cast<size_t>(bi) * flat;
            T* dst = joined.ptr() + static_cast<size_t>(bi) * (flat + 1);
            std::copy(src, src + flat, dst);
            dst[flat] = budgets[bi];
        }

        nn::Tensor<T> feat;
        if (cfg_.variant == Variant::Recurrent) {
            nn::LstmState<T> st = lstm_->forward(joined, h0, cache ? &lstm_cache_ : nullptr);
            feat = st.h;
            if (next_state) *next_state = std::move(st);
        } else {
            nn::Tensor<T> mid = fc_mid_->forward(joined);
            feat = nn::relu(mid);
            if (cache) fc_pre_ = std::move(mid);
            if (next_state) *next_state = h0;
        }

        if (cache) {
            bn1_out_ = std::move(x2);
            bn2_out_ = std::move(x5);
        }
        return head_.forward(feat);
    }

    // Backward through the cached training forward. dq is [B, actions].
    void backward_batch(const nn::Tensor<T>& dq) {
        nn::Tensor<T> dfeat = head_.backward(dq);
        nn::Tensor<T> djoined;
        if (cfg_.variant == Variant::Recurrent) {
            nn::Tensor<T> empty;
            auto back = lstm_->backward(lstm_cache_, dfeat, empty);
            djoined = std::move(back.dx);
        } else {
            nn::Tensor<T> dmid = nn::relu_backward(dfeat, fc_pre_);
            djoined = fc_mid_->backward(dmid);
        }

        const int b = djoined.dim(0);
        const int flat = cfg_.flat_size();
        nn::Tensor<T> dx6({b, cfg_.conv_channels, cfg_.feat_rows(), cfg_.feat_cols()});
        for (int bi = 0; bi < b; ++bi) {
            const T* src = djoined.ptr() + static_cast<size_t>(bi) * (flat + 1);
            T* dst = dx6.ptr() + static_cast<size_t>(bi) * flat;
            std::copy(src, src + flat, dst);  // budget slot gets no gradient sink
        }

        nn::Tensor<T> dx5 = nn::relu_backward(dx6, bn2_out_);
        nn::Tensor<T> dx4 = bn2_.backward(dx5);
        nn::Tensor<T> dx3 = conv2_.backward(dx4);
        nn::Tensor<T> dx2 = nn::relu_backward(dx3, bn1_out_);
        nn::Tensor<T> dx1 = bn1_.backward(dx2);
        conv1_.backward(dx1);
    }

    // Single-state rollout forward: batch-norm in eval mode, recurrent state
    // carried explicitly. Returns the four Q-values as doubles.
    std::pair<std::array<double, kNumActions>, nn::LstmState<T>> forward(
        const StateTensor<T>& s, const nn::LstmState<T>& hidden) {
        nn::Tensor<T> states({1, cfg_.in_channels, cfg_.rows, cfg_.cols}, s.channels.data);
        nn::Tensor<T> budgets({1}, {s.budget_scalar});
        nn::LstmState<T> next = zero_state(1);
        nn::Tensor<T> q =
            forward_batch(states, budgets, hidden, nn::BnMode::Eval, false, &next);
        std::array<double, kNumActions> out{};
        for (int a = 0; a < cfg_.actions; ++a) out[a] = static_cast<double>(q.at(0, a));
        return {out, std::move(next)};
    }

    void zero_grad() {
        for (auto& [name, p] : named_params()) p->zero_grad();
    }

    void adam_step(const nn::AdamConfig& cfg) {
        for (auto& [name, p] : named_params()) nn::adam_update(*p, cfg);
    }

    std::vector<std::pair<std::string, nn::Param<T>*>> named_params() {
        std::vector<std::pair<std::string, nn::Param<T>*>> out = {
            {"conv1.weight", &conv1_.weight}, {"conv1.bias", &conv1_.bias},
            {"bn1.gamma", &bn1_.gamma},       {"bn1.beta", &bn1_.beta},
            {"conv2.weight", &conv2_.weight}, {"conv2.bias", &conv2_.bias},
            {"bn2.gamma", &bn2_.gamma},       {"bn2.beta", &bn2_.beta},
        };
        if (cfg_.variant == Variant::Recurrent) {
            out.emplace_back("lstm.w_ih", &lstm_->w_ih);
            out.emplace_back("lstm.w_hh", &lstm_->w_hh);
            out.emplace_back("lstm.b", &lstm_->b);
        } else {
            out.emplace_back("fc_mid.weight", &fc_mid_->weight);
            out.emplace_back("fc_mid.bias", &fc_mid_->bias);
        }
        out.emplace_back("head.weight", &head_.weight);
        out.emplace_back("head.bias", &head_.bias);
        return out;
    }

    std::vector<std::pair<std::string, nn::Tensor<T>*>> named_buffers() {
        return {
            {"bn1.running_mean", &bn1_.running_mean},
            {"bn1.running_var", &bn1_.running_var},
            {"bn2.running_mean", &bn2_.running_mean},
            {"bn2.running_var", &bn2_.running_var},
        };
    }

    int64_t param_count() {
        int64_t n = 0;
        for (auto& [name, p] : named_params()) n += p->value.numel();
        return n;
    }

    void copy_from(const QNetwork& other) {
        auto dst = named_params();
        auto src = const_cast<QNetwork&>(other).named_params();
        if (dst.size() != src.size()) throw ShapeMismatchError("copy_from: variant mismatch");
        for (size_t i = 0; i < dst.size(); ++i) dst[i].second->value = src[i].second->value;
        auto dbuf = named_buffers();
        auto sbuf = const_cast<QNetwork&>(other).named_buffers();
        for (size_t i = 0; i < dbuf.size(); ++i) *dbuf[i].second = *sbuf[i].second;
    }

    uint64_t params_hash() {
        uint64_t h = 0xcbf29ce484222325ull;
        for (auto& [name, p] : named_params()) {
            h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(T), h);
        }
        for (auto& [name, b] : named_buffers()) {
            h = fnv1a64(b->data.data(), b->data.size() * sizeof(T), h);
        }
        return h;
    }

private:
    static Rng& dummy_rng() {
        static Rng rng(0);
        return rng;
    }

    QNetworkConfig cfg_;
    nn::Conv2d<T> conv1_;
    nn::BatchNorm2d<T> bn1_;
    nn::Conv2d<T> conv2_;
    nn::BatchNorm2d<T> bn2_;
    std::unique_ptr<nn::LstmCell<T>> lstm_;
    std::unique_ptr<nn::Linear<T>> fc_mid_;
    nn::Linear<T> head_;

    // caches from the last cached forward
    nn::Tensor<T> bn1_out_, bn2_out_, fc_pre_;
    nn::LstmCache<T> lstm_cache_;
};

}  // namespace covq
