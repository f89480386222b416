#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tensor.hpp"

namespace ganash {

enum class Padding { same, valid };

enum class BatchNormMode { train, infer };

/// Axis selection for reductions.
struct Axes {
    bool b = false;
    bool h = false;
    bool w = false;
    bool c = false;

    static constexpr Axes all() { return {true, true, true, true}; }
    static constexpr Axes spatial() { return {false, true, true, false}; }
    constexpr bool any() const { return b || h || w || c; }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline void require_same_shape(const Shape4& a, const Shape4& b, const char* op)
{
    if (!(a == b)) throw DimensionError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

struct ConvGeometry {
    std::size_t kh, kw, cin, cout, stride;
    std::size_t pad_top, pad_left;
    std::size_t out_h, out_w;
};

inline ConvGeometry conv_geometry(const Shape4& in, const Shape4& k, std::size_t stride, Padding padding)
{
    ConvGeometry g{k.b, k.h, k.w, k.c, stride, 0, 0, 0, 0};
    if (stride == 0) throw ValidationError("conv2d: stride must be positive");
    if (g.kh % 2 == 0 || g.kw % 2 == 0) {
        throw DimensionError("conv2d: kernel extents must be odd, got kh=" + std::to_string(g.kh) +
                             " kw=" + std::to_string(g.kw));
    }
    if (in.c != g.cin) {
        throw DimensionError("conv2d: input channels (axis C) = " + std::to_string(in.c) +
                             " but kernel Cin = " + std::to_string(g.cin));
    }
    if (padding == Padding::same) {
        g.pad_top = (g.kh - 1) / 2;
        g.pad_left = (g.kw - 1) / 2;
        g.out_h = (in.h + stride - 1) / stride;
        g.out_w = (in.w + stride - 1) / stride;
    } else {
        if (in.h < g.kh || in.w < g.kw) {
            throw DimensionError("conv2d: valid padding needs H,W >= kernel, got input " + in.str());
        }
        g.out_h = (in.h - g.kh) / stride + 1;
        g.out_w = (in.w - g.kw) / stride + 1;
    }
    return g;
}

// Unfolds every receptive field into one row of length kh*kw*Cin.
template <typename T>
void im2col(const T* x, const Shape4& in, const ConvGeometry& g, T* cols)
{
    const std::size_t row_len = g.kh * g.kw * g.cin;
    std::size_t row = 0;
    for (std::size_t b = 0; b < in.b; ++b) {
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            for (std::size_t ox = 0; ox < g.out_w; ++ox, ++row) {
                T* dst = cols + row * row_len;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_top);
                    for (std::size_t kx = 0; kx < g.kw; ++kx, dst += g.cin) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_left);
                        if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) {
                            std::fill(dst, dst + g.cin, T(0));
                        } else {
                            const T* src = x + in.index(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
                            std::copy(src, src + g.cin, dst);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, const Shape4& in, const ConvGeometry& g, T* dx)
{
    const std::size_t row_len = g.kh * g.kw * g.cin;
    std::size_t row = 0;
    for (std::size_t b = 0; b < in.b; ++b) {
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            for (std::size_t ox = 0; ox < g.out_w; ++ox, ++row) {
                const T* src = cols + row * row_len;
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_top);
                    for (std::size_t kx = 0; kx < g.kw; ++kx, src += g.cin) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_left);
                        if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) continue;
                        T* dst = dx + in.index(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
                        for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }
}

template <typename T, typename F, typename G>
Tensor<T> unary_map(const Tensor<T>& x, F forward, G derivative)
{
    std::vector<T> out(x.numel());
    const auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
    auto xn = x.node();
    return make_result<T>(x.shape(), std::move(out), {xn}, [xn, derivative](Node<T>& self) {
        if (!xn->requires_grad) return;
        T* __restrict gx = xn->grad.data();
        const T* __restrict gy = self.grad.data();
        const T* __restrict xv = xn->data.data();
        const T* __restrict yv = self.data.data();
        const std::size_t n = self.grad.size();
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * derivative(xv[i], yv[i]);
    });
}

}  // namespace detail

namespace detail {

// Stride-1 convolution as one small GEMM per kernel tap over a zero-padded
// copy of the input. Output row r of the padded grid reads input row
// r + ky * Wp + kx, so every tap is a contiguous (M x Cin) window.
struct TapLayout {
    std::size_t hp, wp, m;
};

inline TapLayout tap_layout(const Shape4& in, const ConvGeometry& g)
{
    const std::size_t hp = in.h + 2 * g.pad_top;
    const std::size_t wp = in.w + 2 * g.pad_left;
    return {hp, wp, (in.b - 1) * hp * wp + (g.out_h - 1) * wp + g.out_w};
}

template <typename T>
std::vector<T> pad_input(const T* x, const Shape4& in, const ConvGeometry& g, const TapLayout& t)
{
    std::vector<T> p(in.b * t.hp * t.wp * in.c, T(0));
    for (std::size_t b = 0; b < in.b; ++b) {
        for (std::size_t y = 0; y < in.h; ++y) {
            const T* src = x + in.index(b, y, 0, 0);
            T* dst = p.data() + ((b * t.hp + y + g.pad_top) * t.wp + g.pad_left) * in.c;
            std::copy_n(src, in.w * in.c, dst);
        }
    }
    return p;
}

inline std::size_t padded_row(const TapLayout& t, std::size_t b, std::size_t y, std::size_t x)
{
    return (b * t.hp + y) * t.wp + x;
}

inline bool use_taps(const ConvGeometry& g) { return g.stride == 1 && g.cin >= 16; }

}  // namespace detail

/// 2-D convolution over NHWC input with (kh, kw, Cin, Cout) kernels and a
/// length-Cout bias stored as a (1, 1, 1, Cout) tensor.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias, std::size_t stride = 1,
                 Padding padding = Padding::same)
{
    const Shape4 in = input.shape();
    const auto g = detail::conv_geometry(in, kernels.shape(), stride, padding);
    if (bias.numel() != g.cout) {
        throw DimensionError("conv2d: bias length " + std::to_string(bias.numel()) + " but kernel Cout = " +
                             std::to_string(g.cout));
    }
    const Shape4 out_shape{in.b, g.out_h, g.out_w, g.cout};
    const std::size_t rows = in.b * g.out_h * g.out_w;
    const std::size_t row_len = g.kh * g.kw * g.cin;
    const T* bias_data = bias.data().data();
    std::vector<T> out(rows * g.cout);

    auto xn = input.node();
    auto wn = kernels.node();
    auto bn = bias.node();
    auto bias_grad = [bn, g](const T* dy, std::size_t n) {
        if (!bn->requires_grad) return;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < g.cout; ++c) bn->grad[c] += dy[r * g.cout + c];
        }
    };

    if (detail::use_taps(g)) {
        const auto t = detail::tap_layout(in, g);
        const std::vector<T> padded = detail::pad_input(input.data().data(), in, g, t);
        detail::RowMat<T> yp(t.m, g.cout);
        yp.setZero();
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const std::size_t off = ky * t.wp + kx;
                detail::ConstMatMap<T> xs(padded.data() + off * g.cin, t.m, g.cin);
                detail::ConstMatMap<T> w(kernels.data().data() + (ky * g.kw + kx) * g.cin * g.cout, g.cin, g.cout);
                yp.noalias() += xs * w;
            }
        }
        for (std::size_t b = 0; b < in.b; ++b) {
            for (std::size_t y = 0; y < g.out_h; ++y) {
                for (std::size_t x = 0; x < g.out_w; ++x) {
                    const T* src = yp.data() + detail::padded_row(t, b, y, x) * g.cout;
                    T* dst = out.data() + out_shape.index(b, y, x, 0);
                    for (std::size_t c = 0; c < g.cout; ++c) dst[c] = src[c] + bias_data[c];
                }
            }
        }
        return make_result<T>(out_shape, std::move(out), {xn, wn, bn},
                              [xn, wn, g, in, t, out_shape, bias_grad](detail::Node<T>& self) {
            bias_grad(self.grad.data(), self.grad.size() / g.cout);
            if (!wn->requires_grad && !xn->requires_grad) return;
            detail::RowMat<T> dyp = detail::RowMat<T>::Zero(t.m, g.cout);
            for (std::size_t b = 0; b < in.b; ++b) {
                for (std::size_t y = 0; y < g.out_h; ++y) {
                    std::copy_n(self.grad.data() + out_shape.index(b, y, 0, 0), g.out_w * g.cout,
                                dyp.data() + detail::padded_row(t, b, y, 0) * g.cout);
                }
            }
            if (wn->requires_grad) {
                const std::vector<T> padded = detail::pad_input(xn->data.data(), in, g, t);
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        detail::ConstMatMap<T> xs(padded.data() + (ky * t.wp + kx) * g.cin, t.m, g.cin);
                        detail::MatMap<T> dw(wn->grad.data() + (ky * g.kw + kx) * g.cin * g.cout, g.cin, g.cout);
                        dw.noalias() += xs.transpose() * dyp;
                    }
                }
            }
            if (xn->requires_grad) {
                std::vector<T> dpad(in.b * t.hp * t.wp * g.cin, T(0));
                for (std::size_t ky = 0; ky < g.kh; ++ky) {
                    for (std::size_t kx = 0; kx < g.kw; ++kx) {
                        detail::MatMap<T> dxs(dpad.data() + (ky * t.wp + kx) * g.cin, t.m, g.cin);
                        detail::ConstMatMap<T> w(wn->data.data() + (ky * g.kw + kx) * g.cin * g.cout, g.cin, g.cout);
                        dxs.noalias() += dyp * w.transpose();
                    }
                }
                for (std::size_t b = 0; b < in.b; ++b) {
                    for (std::size_t y = 0; y < in.h; ++y) {
                        const T* src = dpad.data() + detail::padded_row(t, b, y + g.pad_top, g.pad_left) * g.cin;
                        T* dst = xn->grad.data() + in.index(b, y, 0, 0);
                        for (std::size_t k = 0; k < in.w * g.cin; ++k) dst[k] += src[k];
                    }
                }
            }
        });
    }

    std::vector<T> cols(rows * row_len);
    detail::im2col(input.data().data(), in, g, cols.data());
    {
        detail::ConstMatMap<T> a(cols.data(), rows, row_len);
        detail::ConstMatMap<T> w(kernels.data().data(), row_len, g.cout);
        detail::MatMap<T> y(out.data(), rows, g.cout);
        y.noalias() = a * w;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < g.cout; ++c) y(r, c) += bias_data[c];
        }
    }
    return make_result<T>(out_shape, std::move(out), {xn, wn, bn},
                          [xn, wn, g, in, rows, row_len, bias_grad](detail::Node<T>& self) {
        bias_grad(self.grad.data(), rows);
        if (!wn->requires_grad && !xn->requires_grad) return;
        // Recomputed rather than kept alive between forward and backward.
        std::vector<T> cols(rows * row_len);
        detail::im2col(xn->data.data(), in, g, cols.data());
        detail::ConstMatMap<T> dy(self.grad.data(), rows, g.cout);
        detail::ConstMatMap<T> a(cols.data(), rows, row_len);
        detail::ConstMatMap<T> w(wn->data.data(), row_len, g.cout);
        if (wn->requires_grad) {
            detail::MatMap<T> dw(wn->grad.data(), row_len, g.cout);
            dw.noalias() += a.transpose() * dy;
        }
        if (xn->requires_grad) {
            detail::MatMap<T> dcols(cols.data(), rows, row_len);
            dcols.noalias() = dy * w.transpose();
            detail::col2im_add(cols.data(), in, g, xn->grad.data());
        }
    });
}

/// Per-channel running statistics for batch normalization.
template <typename T>
struct RunningStats {
    Tensor<T> mean;
    Tensor<T> var;
};

/// Batch normalization over (B, H, W) per channel.
///
/// Train mode normalizes with batch statistics and folds them into `running`
/// (new = momentum * old + (1 - momentum) * batch, unbiased variance). Infer
/// mode normalizes with `running` and leaves it untouched.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta, RunningStats<T>& running,
                     BatchNormMode mode, double eps = 1e-5, double momentum = 0.9)
{
    const Shape4 s = input.shape();
    const std::size_t channels = s.c;
    const std::size_t n = s.b * s.h * s.w;
    if (n == 0) throw DimensionError("batch_norm: zero-size batch " + s.str());
    if (gamma.numel() != channels || beta.numel() != channels) {
        throw DimensionError("batch_norm: gamma/beta length must equal input C = " + std::to_string(channels));
    }
    if (running.mean.numel() != channels || running.var.numel() != channels) {
        throw DimensionError("batch_norm: running stats length must equal input C = " + std::to_string(channels));
    }
    if (!(eps > 0)) throw ValidationError("batch_norm: eps must be positive");

    const auto x = input.data();
    std::vector<T> mean(channels), inv_std(channels);
    if (mode == BatchNormMode::train) {
        std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < channels; ++c) sum[c] += static_cast<double>(x[i * channels + c]);
        }
        for (std::size_t c = 0; c < channels; ++c) sum[c] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < channels; ++c) {
                const double d = static_cast<double>(x[i * channels + c]) - sum[c];
                sq[c] += d * d;
            }
        }
        auto rm = running.mean.mutable_data();
        auto rv = running.var.mutable_data();
        for (std::size_t c = 0; c < channels; ++c) {
            const double var = sq[c] / static_cast<double>(n);
            const double unbiased = n > 1 ? sq[c] / static_cast<double>(n - 1) : var;
            mean[c] = static_cast<T>(sum[c]);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
            rm[c] = static_cast<T>(momentum * rm[c] + (1.0 - momentum) * sum[c]);
            rv[c] = static_cast<T>(momentum * rv[c] + (1.0 - momentum) * unbiased);
        }
    } else {
        const auto rm = running.mean.data();
        const auto rv = running.var.data();
        for (std::size_t c = 0; c < channels; ++c) {
            mean[c] = rm[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + eps));
        }
    }

    const auto gm = gamma.data();
    const auto bt = beta.data();
    std::vector<T> xhat(x.size()), out(x.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t k = i * channels + c;
            xhat[k] = (x[k] - mean[c]) * inv_std[c];
            out[k] = gm[c] * xhat[k] + bt[c];
        }
    }

    auto xn = input.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    const bool batch_stats = mode == BatchNormMode::train;
    return make_result<T>(s, std::move(out), {xn, gn, bn},
                          [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), n, channels,
                           batch_stats](detail::Node<T>& self) {
        const auto& dy = self.grad;
        std::vector<double> dgamma(channels, 0.0), dbeta(channels, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t k = i * channels + c;
                dbeta[c] += static_cast<double>(dy[k]);
                dgamma[c] += static_cast<double>(dy[k]) * static_cast<double>(xhat[k]);
            }
        }
        if (gn->requires_grad) {
            for (std::size_t c = 0; c < channels; ++c) gn->grad[c] += static_cast<T>(dgamma[c]);
        }
        if (bn->requires_grad) {
            for (std::size_t c = 0; c < channels; ++c) bn->grad[c] += static_cast<T>(dbeta[c]);
        }
        if (!xn->requires_grad) return;
        const auto& gm = gn->data;
        if (batch_stats) {
            // dx = g * inv_std / n * (n * dy - sum(dy) - xhat * sum(dy * xhat))
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t k = i * channels + c;
                    const double term = static_cast<double>(n) * dy[k] - dbeta[c] - xhat[k] * dgamma[c];
                    xn->grad[k] += static_cast<T>(gm[c] * inv_std[c] * term / static_cast<double>(n));
                }
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t k = i * channels + c;
                    xn->grad[k] += dy[k] * gm[c] * inv_std[c];
                }
            }
        }
    });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha = T(0.2))
{
    if (!(alpha > T(0) && alpha < T(1))) throw ValidationError("leaky_relu: alpha must lie in (0, 1)");
    return detail::unary_map(
        x, [alpha](T v) { return v > T(0) ? v : alpha * v; },
        [alpha](T v, T) { return v > T(0) ? T(1) : alpha; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x)
{
    return detail::unary_map(
        x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x)
{
    return detail::unary_map(
        x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

/// Element-wise inverse tanh; inputs must lie strictly inside (-1, 1).
template <typename T>
Tensor<T> atanh(const Tensor<T>& x)
{
    for (T v : x.data()) {
        if (!(v > T(-1) && v < T(1))) throw ValidationError("atanh: input outside (-1, 1)");
    }
    return detail::unary_map(
        x, [](T v) { return std::atanh(v); }, [](T v, T) { return T(1) / (T(1) - v * v); });
}

/// Element-wise clamp to [lo, hi]; the gradient is zero where clamping applied.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi)
{
    return detail::unary_map(
        x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
        [lo, hi](T v, T) { return v >= lo && v <= hi ? T(1) : T(0); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x)
{
    return detail::unary_map(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a.shape(), b.shape(), "add");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node<T>& self) {
        const std::size_t n = self.grad.size();
        const T* __restrict gy = self.grad.data();
        if (an->requires_grad) {
            T* __restrict ga = an->grad.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i];
        }
        if (bn->requires_grad) {
            T* __restrict gb = bn->grad.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a.shape(), b.shape(), "sub");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node<T>& self) {
        const std::size_t n = self.grad.size();
        const T* __restrict gy = self.grad.data();
        if (an->requires_grad) {
            T* __restrict ga = an->grad.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i];
        }
        if (bn->requires_grad) {
            T* __restrict gb = bn->grad.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] -= gy[i];
        }
    });
}

/// Sum of any number of same-shape tensors.
template <typename T>
Tensor<T> add_n(const std::vector<Tensor<T>>& terms)
{
    if (terms.empty()) throw ValidationError("add_n: no terms");
    Tensor<T> acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

/// Stacks the channels of `b` after those of `a`.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b)
{
    const Shape4 sa = a.shape();
    const Shape4 sb = b.shape();
    if (sa.b != sb.b || sa.h != sb.h || sa.w != sb.w) {
        throw DimensionError("concat_channels: B/H/W must agree, got " + sa.str() + " and " + sb.str());
    }
    const std::size_t pixels = sa.b * sa.h * sa.w;
    const Shape4 so{sa.b, sa.h, sa.w, sa.c + sb.c};
    std::vector<T> out(so.numel());
    for (std::size_t p = 0; p < pixels; ++p) {
        std::copy_n(a.data().data() + p * sa.c, sa.c, out.data() + p * so.c);
        std::copy_n(b.data().data() + p * sb.c, sb.c, out.data() + p * so.c + sa.c);
    }
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>(so, std::move(out), {an, bn}, [an, bn, pixels, ca = sa.c, cb = sb.c](detail::Node<T>& self) {
        const std::size_t co = ca + cb;
        for (std::size_t p = 0; p < pixels; ++p) {
            if (an->requires_grad) {
                for (std::size_t c = 0; c < ca; ++c) an->grad[p * ca + c] += self.grad[p * co + c];
            }
            if (bn->requires_grad) {
                for (std::size_t c = 0; c < cb; ++c) bn->grad[p * cb + c] += self.grad[p * co + ca + c];
            }
        }
    });
}

/// Arithmetic mean over the selected axes; reduced axes keep extent 1.
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, Axes axes)
{
    if (!axes.any()) throw ValidationError("reduce_mean: no axes selected");
    const Shape4 s = x.shape();
    const Shape4 so{axes.b ? 1 : s.b, axes.h ? 1 : s.h, axes.w ? 1 : s.w, axes.c ? 1 : s.c};
    const std::size_t count = s.numel() / std::max<std::size_t>(so.numel(), 1);
    if (count == 0) throw DimensionError("reduce_mean: empty tensor " + s.str());
    auto target = [s, so, axes](std::size_t i) {
        std::size_t c = i % s.c;
        std::size_t rest = i / s.c;
        std::size_t w = rest % s.w;
        rest /= s.w;
        std::size_t h = rest % s.h;
        std::size_t b = rest / s.h;
        return so.index(axes.b ? 0 : b, axes.h ? 0 : h, axes.w ? 0 : w, axes.c ? 0 : c);
    };
    std::vector<double> acc(so.numel(), 0.0);
    for (std::size_t i = 0; i < s.numel(); ++i) acc[target(i)] += static_cast<double>(x.data()[i]);
    std::vector<T> out(so.numel());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>(acc[j] / static_cast<double>(count));
    auto xn = x.node();
    return make_result<T>(so, std::move(out), {xn}, [xn, target, count](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        const T scale = T(1) / static_cast<T>(count);
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[target(i)] * scale;
    });
}

/// Sum of all elements as a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x)
{
    double acc = 0.0;
    for (T v : x.data()) acc += static_cast<double>(v);
    auto xn = x.node();
    return make_result<T>({1, 1, 1, 1}, {static_cast<T>(acc)}, {xn}, [xn](detail::Node<T>& self) {
        if (!xn->requires_grad) return;
        for (auto& g : xn->grad) g += self.grad[0];
    });
}

/// Mean of squared element-wise differences, as a scalar tensor.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a.shape(), b.shape(), "mse_loss");
    const std::size_t n = a.numel();
    if (n == 0) throw DimensionError("mse_loss: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
        acc += d * d;
    }
    auto an = a.node();
    auto bn = b.node();
    return make_result<T>({1, 1, 1, 1}, {static_cast<T>(acc / static_cast<double>(n))}, {an, bn},
                          [an, bn, n](detail::Node<T>& self) {
        const T scale = T(2) * self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = an->data[i] - bn->data[i];
            if (an->requires_grad) an->grad[i] += scale * d;
            if (bn->requires_grad) bn->grad[i] -= scale * d;
        }
    });
}

/// Mean sigmoid cross-entropy between logits and {0,1} targets.
///
/// Evaluated as max(x, 0) - x t + log1p(exp(-|x|)), which stays finite for
/// any finite logit.
template <typename T>
Tensor<T> sce_loss(const Tensor<T>& logits, const Tensor<T>& targets)
{
    detail::require_same_shape(logits.shape(), targets.shape(), "sce_loss");
    const std::size_t n = logits.numel();
    if (n == 0) throw DimensionError("sce_loss: empty tensors");
    for (T t : targets.data()) {
        if (t != T(0) && t != T(1)) throw ValidationError("sce_loss: targets must be 0 or 1");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(logits.data()[i]);
        const double t = static_cast<double>(targets.data()[i]);
        acc += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    auto ln = logits.node();
    auto tn = targets.node();
    return make_result<T>({1, 1, 1, 1}, {static_cast<T>(acc / static_cast<double>(n))}, {ln},
                          [ln, tn, n](detail::Node<T>& self) {
        const double scale = static_cast<double>(self.grad[0]) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(ln->data[i]);
            const double sig = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            ln->grad[i] += static_cast<T>(scale * (sig - static_cast<double>(tn->data[i])));
        }
    });
}

}  // namespace ganash
