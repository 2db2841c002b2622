#pragma once

#include <cmath>
#include <utility>

#include "covq/nn/tensor.hpp"
#include "covq/rng.hpp"

namespace covq {
namespace nn {

// One learnable tensor with its gradient and Adam moment buffers.
template <class T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m;
    Tensor<T> v;
    int64_t step = 0;

    Param() = default;
    explicit Param(std::vector<int> shape)
        : value(shape), grad(shape), m(shape), v(std::move(shape)) {}

    void zero_grad() { grad.fill(T(0)); }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam step, applied in place. Epsilon sits outside the
// square root, so the very first step from zero moments moves each weight
// by exactly lr * g / (|g| + eps).
template <class T>
void adam_update(Param<T>& p, const AdamConfig& cfg) {
    p.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    const int64_t n = p.value.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double g = static_cast<double>(p.grad[i]);
        const double m = cfg.beta1 * static_cast<double>(p.m[i]) + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * static_cast<double>(p.v[i]) + (1.0 - cfg.beta2) * g * g;
        p.m[i] = static_cast<T>(m);
        p.v[i] = static_cast<T>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) -
                                    cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
}

template <class T>
void init_uniform_fan_in(Tensor<T>& t, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : t.data) x = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// Convolution, valid padding: H' = (H - K) / stride + 1.

template <class T>
class Conv2d {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, Rng& rng)
        : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride),
          weight({out_ch, in_ch, kernel, kernel}), bias({out_ch}) {
        init_uniform_fan_in(weight.value, in_ch * kernel * kernel, rng);
        init_uniform_fan_in(bias.value, in_ch * kernel * kernel, rng);
    }

    int out_size(int in) const { return (in - kernel_) / stride_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape.size() != 4 || x.dim(1) != in_ch_) {
            throw ShapeMismatchError("conv2d: expected [B, C_in, H, W] input");
        }
        if (x.dim(2) < kernel_ || x.dim(3) < kernel_) {
            throw ShapeMismatchError("conv2d: input smaller than kernel");
        }
        const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int oh = out_size(h), ow = out_size(w);
        const int patch = in_ch_ * kernel_ * kernel_;
        const int rows = b * oh * ow;

        cols_ = Tensor<T>({rows, patch});
        T* col = cols_.ptr();
        for (int bi = 0; bi < b; ++bi) {
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    for (int ci = 0; ci < in_ch_; ++ci) {
                        for (int ky = 0; ky < kernel_; ++ky) {
                            const T* src = &x.at(bi, ci, y * stride_ + ky, xx * stride_);
                            for (int kx = 0; kx < kernel_; ++kx) *col++ = src[kx];
                        }
                    }
                }
            }
        }
        xshape_ = x.shape;

        Tensor<T> out_mat({rows, out_ch_});
        gemm_nt(cols_.ptr(), weight.value.ptr(), out_mat.ptr(), rows, patch, out_ch_);

        Tensor<T> y({b, out_ch_, oh, ow});
        for (int bi = 0; bi < b; ++bi) {
            for (int yy = 0; yy < oh; ++yy) {
                for (int xx = 0; xx < ow; ++xx) {
                    const T* row = &out_mat.at((bi * oh + yy) * ow + xx, 0);
                    for (int co = 0; co < out_ch_; ++co) {
                        y.at(bi, co, yy, xx) = row[co] + bias.value[co];
                    }
                }
            }
        }
        return y;
    }

    // Accumulates weight/bias gradients; returns gradient wrt the input.
    Tensor<T> backward(const Tensor<T>& dy) {
        const int b = xshape_[0], h = xshape_[2], w = xshape_[3];
        const int oh = out_size(h), ow = out_size(w);
        const int patch = in_ch_ * kernel_ * kernel_;
        const int rows = b * oh * ow;
        dy.require_shape({b, out_ch_, oh, ow}, "conv2d backward");

        Tensor<T> dy_mat({rows, out_ch_});
        for (int bi = 0; bi < b; ++bi) {
            for (int yy = 0; yy < oh; ++yy) {
                for (int xx = 0; xx < ow; ++xx) {
                    T* row = &dy_mat.at((bi * oh + yy) * ow + xx, 0);
                    for (int co = 0; co < out_ch_; ++co) row[co] = dy.at(bi, co, yy, xx);
                }
            }
        }

        gemm_tn(dy_mat.ptr(), cols_.ptr(), weight.grad.ptr(), out_ch_, rows, patch, true);
        for (int r = 0; r < rows; ++r) {
            for (int co = 0; co < out_ch_; ++co) bias.grad[co] += dy_mat.at(r, co);
        }

        Tensor<T> dcols({rows, patch});
        gemm(dy_mat.ptr(), weight.value.ptr(), dcols.ptr(), rows, out_ch_, patch);

        Tensor<T> dx(xshape_);
        const T* col = dcols.ptr();
        for (int bi = 0; bi < b; ++bi) {
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    for (int ci = 0; ci < in_ch_; ++ci) {
                        for (int ky = 0; ky < kernel_; ++ky) {
                            T* dst = &dx.at(bi, ci, y * stride_ + ky, xx * stride_);
                            for (int kx = 0; kx < kernel_; ++kx) dst[kx] += *col++;
                        }
                    }
                }
            }
        }
        return dx;
    }

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }
    int kernel() const { return kernel_; }

    Param<T> weight;  // [C_out, C_in, K, K]
    Param<T> bias;    // [C_out]

private:
    int in_ch_, out_ch_, kernel_, stride_;
    Tensor<T> cols_;
    std::vector<int> xshape_;
};

// ---------------------------------------------------------------------------
// Batch normalization over [B, C, H, W], per-channel statistics.

enum class BnMode { Train, Eval };

template <class T>
class BatchNorm2d {
public:
    explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1)
        : channels_(channels), eps_(eps), momentum_(momentum),
          gamma({channels}), beta({channels}),
          running_mean({channels}), running_var({channels}) {
        gamma.value.fill(T(1));
        running_var.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, BnMode mode) {
        if (x.shape.size() != 4 || x.dim(1) != channels_) {
            throw ShapeMismatchError("batchnorm2d: expected [B, C, H, W] input");
        }
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const int64_t m = static_cast<int64_t>(b) * h * w;
        mode_ = mode;
        xhat_ = Tensor<T>(x.shape);
        inv_std_.assign(c, T(0));

        Tensor<T> y(x.shape);
        for (int ci = 0; ci < c; ++ci) {
            double mean, var;
            if (mode == BnMode::Train) {
                double sum = 0.0;
                for (int bi = 0; bi < b; ++bi)
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx) sum += x.at(bi, ci, yy, xx);
                mean = sum / static_cast<double>(m);
                double sq = 0.0;
                for (int bi = 0; bi < b; ++bi)
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx) {
                            const double d = x.at(bi, ci, yy, xx) - mean;
                            sq += d * d;
                        }
                var = sq / static_cast<double>(m);
                const double var_running =
                    m > 1 ? sq / static_cast<double>(m - 1) : var;  // unbiased when possible
                running_mean[ci] = static_cast<T>((1.0 - momentum_) * running_mean[ci] +
                                                  momentum_ * mean);
                running_var[ci] = static_cast<T>((1.0 - momentum_) * running_var[ci] +
                                                 momentum_ * var_running);
            } else {
                mean = running_mean[ci];
                var = running_var[ci];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[ci] = static_cast<T>(inv);
            const double g = gamma.value[ci], bb = beta.value[ci];
            for (int bi = 0; bi < b; ++bi)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const double xh = (x.at(bi, ci, yy, xx) - mean) * inv;
                        xhat_.at(bi, ci, yy, xx) = static_cast<T>(xh);
                        y.at(bi, ci, yy, xx) = static_cast<T>(g * xh + bb);
                    }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        dy.require_shape(xhat_.shape, "batchnorm2d backward");
        const int b = dy.dim(0), c = dy.dim(1), h = dy.dim(2), w = dy.dim(3);
        const int64_t m = static_cast<int64_t>(b) * h * w;

        Tensor<T> dx(dy.shape);
        for (int ci = 0; ci < c; ++ci) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int bi = 0; bi < b; ++bi)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const double d = dy.at(bi, ci, yy, xx);
                        sum_dy += d;
                        sum_dy_xhat += d * xhat_.at(bi, ci, yy, xx);
                    }
            gamma.grad[ci] += static_cast<T>(sum_dy_xhat);
            beta.grad[ci] += static_cast<T>(sum_dy);

            const double g = gamma.value[ci];
            const double inv = inv_std_[ci];
            if (mode_ == BnMode::Train) {
                // Batch statistics depend on the input, so the mean/variance
                // paths contribute to dx.
                const double md = static_cast<double>(m);
                for (int bi = 0; bi < b; ++bi)
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx) {
                            const double d = dy.at(bi, ci, yy, xx);
                            const double xh = xhat_.at(bi, ci, yy, xx);
                            dx.at(bi, ci, yy, xx) = static_cast<T>(
                                g * inv / md * (md * d - sum_dy - xh * sum_dy_xhat));
                        }
            } else {
                for (int bi = 0; bi < b; ++bi)
                    for (int yy = 0; yy < h; ++yy)
                        for (int xx = 0; xx < w; ++xx) {
                            dx.at(bi, ci, yy, xx) =
                                static_cast<T>(g * inv * dy.at(bi, ci, yy, xx));
                        }
            }
        }
        return dx;
    }

    int channels() const { return channels_; }

    Param<T> gamma;
    Param<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;

private:
    int channels_;
    double eps_, momentum_;
    BnMode mode_ = BnMode::Train;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& x) {
    dy.require_shape(x.shape, "relu backward");
    Tensor<T> dx(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    return dx;
}

// ---------------------------------------------------------------------------

template <class T>
class Linear {
public:
    Linear(int in, int out, Rng& rng) : in_(in), out_(out), weight({in, out}), bias({out}) {
        init_uniform_fan_in(weight.value, in, rng);
        init_uniform_fan_in(bias.value, in, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape.size() != 2 || x.dim(1) != in_) {
            throw ShapeMismatchError("linear: expected [B, in] input");
        }
        const int b = x.dim(0);
        x_ = x;
        Tensor<T> y({b, out_});
        gemm(x.ptr(), weight.value.ptr(), y.ptr(), b, in_, out_);
        for (int bi = 0; bi < b; ++bi)
            for (int o = 0; o < out_; ++o) y.at(bi, o) += bias.value[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int b = x_.dim(0);
        dy.require_shape({b, out_}, "linear backward");
        gemm_tn(x_.ptr(), dy.ptr(), weight.grad.ptr(), in_, b, out_, true);
        for (int bi = 0; bi < b; ++bi)
            for (int o = 0; o < out_; ++o) bias.grad[o] += dy.at(bi, o);
        Tensor<T> dx({b, in_});
        gemm_nt(dy.ptr(), weight.value.ptr(), dx.ptr(), b, out_, in_);
        return dx;
    }

    int in_features() const { return in_; }
    int out_features() const { return out_; }

    Param<T> weight;  // [in, out]; forward-friendly layout
    Param<T> bias;    // [out]

private:
    int in_, out_;
    Tensor<T> x_;
};

// ---------------------------------------------------------------------------
// LSTM cell. Gate order in the stacked parameters is i, f, g, o.

template <class T>
struct LstmState {
    Tensor<T> h;  // [B, H]
    Tensor<T> c;  // [B, H]
};

template <class T>
struct LstmCache {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> i, f, g, o;  // post-activation gates, [B, H]
    Tensor<T> c_new, tanh_c;
};

template <class T>
class LstmCell {
public:
    LstmCell(int input, int hidden, Rng& rng)
        : in_(input), hidden_(hidden),
          w_ih({input, 4 * hidden}), w_hh({hidden, 4 * hidden}), b({4 * hidden}) {
        init_uniform_fan_in(w_ih.value, input, rng);
        init_uniform_fan_in(w_hh.value, hidden, rng);
        // Forget-gate bias starts at 1 so early training does not wipe the
        // cell state.
        for (int j = 0; j < hidden; ++j) b.value[hidden + j] = T(1);
    }

    LstmState<T> zero_state(int batch) const {
        return {Tensor<T>({batch, hidden_}), Tensor<T>({batch, hidden_})};
    }

    // Returns the new state; h of the returned state is the step output.
    LstmState<T> forward(const Tensor<T>& x, const LstmState<T>& st, LstmCache<T>* cache = nullptr) const {
        if (x.shape.size() != 2 || x.dim(1) != in_) {
            throw ShapeMismatchError("lstm: expected [B, in] input");
        }
        const int bsz = x.dim(0);
        st.h.require_shape({bsz, hidden_}, "lstm hidden");
        st.c.require_shape({bsz, hidden_}, "lstm cell");

        Tensor<T> gates({bsz, 4 * hidden_});
        gemm(x.ptr(), w_ih.value.ptr(), gates.ptr(), bsz, in_, 4 * hidden_);
        gemm(st.h.ptr(), w_hh.value.ptr(), gates.ptr(), bsz, hidden_, 4 * hidden_, true);
        for (int bi = 0; bi < bsz; ++bi)
            for (int j = 0; j < 4 * hidden_; ++j) gates.at(bi, j) += b.value[j];

        Tensor<T> ig({bsz, hidden_}), fg({bsz, hidden_}), gg({bsz, hidden_}), og({bsz, hidden_});
        Tensor<T> c_new({bsz, hidden_}), tanh_c({bsz, hidden_}), h_new({bsz, hidden_});
        for (int bi = 0; bi < bsz; ++bi) {
            for (int j = 0; j < hidden_; ++j) {
                const double iv = sigmoid(gates.at(bi, j));
                const double fv = sigmoid(gates.at(bi, hidden_ + j));
                const double gv = std::tanh(static_cast<double>(gates.at(bi, 2 * hidden_ + j)));
                const double ov = sigmoid(gates.at(bi, 3 * hidden_ + j));
                const double cv = fv * st.c.at(bi, j) + iv * gv;
                const double tc = std::tanh(cv);
                ig.at(bi, j) = static_cast<T>(iv);
                fg.at(bi, j) = static_cast<T>(fv);
                gg.at(bi, j) = static_cast<T>(gv);
                og.at(bi, j) = static_cast<T>(ov);
                c_new.at(bi, j) = static_cast<T>(cv);
                tanh_c.at(bi, j) = static_cast<T>(tc);
                h_new.at(bi, j) = static_cast<T>(ov * tc);
            }
        }
        if (cache) {
            *cache = LstmCache<T>{x, st.h, st.c, std::move(ig), std::move(fg), std::move(gg),
                                  std::move(og), c_new, std::move(tanh_c)};
        }
        return {std::move(h_new), std::move(c_new)};
    }

    // dh/dc are the gradients wrt this step's outputs (dc may be empty when
    // no gradient flows in through the cell path). Accumulates parameter
    // gradients; returns (dx, dh_prev, dc_prev) for unrolling backward
    // through time.
    struct Backward {
        Tensor<T> dx, dh_prev, dc_prev;
    };
    Backward backward(const LstmCache<T>& cache, const Tensor<T>& dh, const Tensor<T>& dc_in) {
        const int bsz = cache.x.dim(0);
        Tensor<T> dgates({bsz, 4 * hidden_});
        Tensor<T> dc_prev({bsz, hidden_});
        for (int bi = 0; bi < bsz; ++bi) {
            for (int j = 0; j < hidden_; ++j) {
                const double iv = cache.i.at(bi, j), fv = cache.f.at(bi, j);
                const double gv = cache.g.at(bi, j), ov = cache.o.at(bi, j);
                const double tc = cache.tanh_c.at(bi, j);
                const double dhv = dh.at(bi, j);
                double dc = dhv * ov * (1.0 - tc * tc);
                if (dc_in.numel() > 0) dc += dc_in.at(bi, j);
                const double dov = dhv * tc;
                const double div = dc * gv;
                const double dfv = dc * cache.c_prev.at(bi, j);
                const double dgv = dc * iv;
                dgates.at(bi, j) = static_cast<T>(div * iv * (1.0 - iv));
                dgates.at(bi, hidden_ + j) = static_cast<T>(dfv * fv * (1.0 - fv));
                dgates.at(bi, 2 * hidden_ + j) = static_cast<T>(dgv * (1.0 - gv * gv));
                dgates.at(bi, 3 * hidden_ + j) = static_cast<T>(dov * ov * (1.0 - ov));
                dc_prev.at(bi, j) = static_cast<T>(dc * fv);
            }
        }

        gemm_tn(cache.x.ptr(), dgates.ptr(), w_ih.grad.ptr(), in_, bsz, 4 * hidden_, true);
        gemm_tn(cache.h_prev.ptr(), dgates.ptr(), w_hh.grad.ptr(), hidden_, bsz, 4 * hidden_, true);
        for (int bi = 0; bi < bsz; ++bi)
            for (int j = 0; j < 4 * hidden_; ++j) b.grad[j] += dgates.at(bi, j);

        Backward out;
        out.dx = Tensor<T>({bsz, in_});
        gemm_nt(dgates.ptr(), w_ih.value.ptr(), out.dx.ptr(), bsz, 4 * hidden_, in_);
        out.dh_prev = Tensor<T>({bsz, hidden_});
        gemm_nt(dgates.ptr(), w_hh.value.ptr(), out.dh_prev.ptr(), bsz, 4 * hidden_, hidden_);
        out.dc_prev = std::move(dc_prev);
        return out;
    }

    int input_size() const { return in_; }
    int hidden_size() const { return hidden_; }

    Param<T> w_ih;  // [4H, in]
    Param<T> w_hh;  // [4H, H]
    Param<T> b;     // [4H]

private:
    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    int in_, hidden_;
};

// ---------------------------------------------------------------------------

// Importance-weighted mean squared error over per-sample scalars.
// loss = sum_i w_i (pred_i - target_i)^2 / B, d loss/d pred_i = 2 w_i e_i / B.
template <class T>
struct MseResult {
    double loss = 0.0;
    Tensor<T> grad;
};

template <class T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weights) {
    if (pred.shape != target.shape || pred.shape != weights.shape) {
        throw ShapeMismatchError("mse_loss: pred/target/weights shapes differ");
    }
    const int64_t n = pred.numel();
    MseResult<T> out;
    out.grad = Tensor<T>(pred.shape);
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        const double w = weights[i];
        loss += w * e * e;
        out.grad[i] = static_cast<T>(2.0 * w * e / static_cast<double>(n));
    }
    out.loss = loss / static_cast<double>(n);
    return out;
}

}  // namespace nn
}  // namespace covq
