#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ops.hpp"
#include "optimizer.hpp"
#include "tensor.hpp"

namespace ganash {

enum class Arch : std::uint8_t { critic = 0, encoder = 1, decoder = 2 };

inline const char* arch_name(Arch a)
{
    switch (a) {
    case Arch::critic: return "critic";
    case Arch::encoder: return "encoder";
    case Arch::decoder: return "decoder";
    }
    return "unknown";
}

inline constexpr int stage_count = 4;
inline constexpr int default_hidden_dims = 32;

/// Parameters of one network: per stage a conv kernel and bias, and for
/// stages 1-3 batch-norm gamma/beta plus running statistics.
///
/// Tensor names follow "stage<k>.conv.weight", "stage<k>.conv.bias",
/// "stage<k>.bn.gamma", "stage<k>.bn.beta", "stage<k>.bn.running_mean" and
/// "stage<k>.bn.running_var". Running statistics are not trainable.
template <typename T>
struct NetworkParams {
    Arch arch = Arch::critic;
    int data_depth = 1;
    int hidden_dims = default_hidden_dims;
    int kernel_size = 3;
    T leaky_alpha = T(0.2);
    std::vector<NamedTensor<T>> tensors;

    Tensor<T>& at(const std::string& name)
    {
        for (auto& t : tensors) {
            if (t.name == name) return t.value;
        }
        throw ValidationError(std::string(arch_name(arch)) + " has no tensor '" + name + "'");
    }
    const Tensor<T>& at(const std::string& name) const { return const_cast<NetworkParams*>(this)->at(name); }

    RunningStats<T> running(int stage)
    {
        const std::string p = "stage" + std::to_string(stage) + ".bn.";
        return {at(p + "running_mean"), at(p + "running_var")};
    }

    std::size_t trainable_count() const
    {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.trainable ? t.value.numel() : 0;
        return n;
    }

    /// Deep copy (handles in `tensors` otherwise share storage).
    NetworkParams clone() const
    {
        NetworkParams out = *this;
        for (auto& t : out.tensors) {
            const bool rg = t.value.requires_grad();
            t.value = t.value.detach();
            t.value.set_requires_grad(rg);
        }
        return out;
    }

    template <typename U>
    NetworkParams<U> cast() const
    {
        NetworkParams<U> out;
        out.arch = arch;
        out.data_depth = data_depth;
        out.hidden_dims = hidden_dims;
        out.kernel_size = kernel_size;
        out.leaky_alpha = static_cast<U>(leaky_alpha);
        for (const auto& t : tensors) {
            auto v = t.value.template cast<U>();
            v.set_requires_grad(t.trainable);
            out.tensors.push_back({t.name, v, t.trainable});
        }
        return out;
    }
};

/// Input/output channel count of the conv in `stage` (1-based).
inline std::pair<std::size_t, std::size_t> stage_channels(Arch arch, int stage, int data_depth, int hidden)
{
    const auto h = static_cast<std::size_t>(hidden);
    std::size_t in = h;
    if (stage == 1) in = arch == Arch::encoder ? 3 + static_cast<std::size_t>(data_depth) : 3;
    std::size_t out = h;
    if (stage == stage_count) {
        out = arch == Arch::critic ? 1 : arch == Arch::encoder ? 3 : static_cast<std::size_t>(data_depth);
    }
    return {in, out};
}

inline std::size_t stage_kernel(Arch arch, int stage, int kernel_size)
{
    return arch == Arch::critic && stage == stage_count ? 1 : static_cast<std::size_t>(kernel_size);
}

namespace detail {

// 53-bit uniform in [0, 1) straight from the engine, so draws do not depend
// on the standard library's distribution implementation.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Fresh parameters for one architecture.
///
/// Conv kernels are He-uniform, U(-b, b) with b = sqrt(6 / fan_in), except
/// the encoder's last kernel, which starts at zero so an untrained encoder
/// reproduces its cover. Biases and beta start at 0, gamma at 1, running
/// mean at 0 and running variance at 1.
template <typename T = float>
NetworkParams<T> init_params(Arch arch, int data_depth, std::uint64_t seed, int hidden_dims = default_hidden_dims,
                             int kernel_size = 3)
{
    if (data_depth < 1) throw ValidationError("data depth must be at least 1");
    if (hidden_dims < 1) throw ValidationError("hidden_dims must be at least 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ValidationError("kernel size must be odd");
    NetworkParams<T> p;
    p.arch = arch;
    p.data_depth = data_depth;
    p.hidden_dims = hidden_dims;
    p.kernel_size = kernel_size;
    std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(arch)));

    for (int stage = 1; stage <= stage_count; ++stage) {
        const auto [cin, cout] = stage_channels(arch, stage, data_depth, hidden_dims);
        const std::size_t k = stage_kernel(arch, stage, kernel_size);
        const std::string prefix = "stage" + std::to_string(stage) + ".";
        std::vector<T> w(k * k * cin * cout, T(0));
        const bool zero_kernel = arch == Arch::encoder && stage == stage_count;
        if (!zero_kernel) {
            const double bound = std::sqrt(6.0 / static_cast<double>(k * k * cin));
            for (auto& v : w) v = static_cast<T>((2.0 * detail::uniform01(rng) - 1.0) * bound);
        }
        p.tensors.push_back({prefix + "conv.weight", Tensor<T>::from_data({k, k, cin, cout}, std::move(w), true), true});
        p.tensors.push_back({prefix + "conv.bias", Tensor<T>::zeros({1, 1, 1, cout}, true), true});
        if (stage < stage_count) {
            const Shape4 cs{1, 1, 1, cout};
            p.tensors.push_back({prefix + "bn.gamma", Tensor<T>::full(cs, T(1), true), true});
            p.tensors.push_back({prefix + "bn.beta", Tensor<T>::zeros(cs, true), true});
            p.tensors.push_back({prefix + "bn.running_mean", Tensor<T>::zeros(cs), false});
            p.tensors.push_back({prefix + "bn.running_var", Tensor<T>::full(cs, T(1)), false});
        }
    }
    return p;
}

namespace detail {

template <typename T>
void require_arch(const NetworkParams<T>& p, Arch expected)
{
    if (p.arch != expected) {
        throw ValidationError(std::string("expected ") + arch_name(expected) + " parameters, got " + arch_name(p.arch));
    }
}

template <typename T>
void require_channels(const Tensor<T>& x, std::size_t c, const char* what)
{
    if (x.shape().c != c) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(c) + " channels, got " +
                             x.shape().str());
    }
}

template <typename T>
Tensor<T> conv_stage(NetworkParams<T>& p, int stage, const Tensor<T>& x)
{
    const std::string prefix = "stage" + std::to_string(stage) + ".conv.";
    return conv2d(x, p.at(prefix + "weight"), p.at(prefix + "bias"), 1, Padding::same);
}

template <typename T>
Tensor<T> bn_stage(NetworkParams<T>& p, int stage, const Tensor<T>& x, BatchNormMode mode)
{
    const std::string prefix = "stage" + std::to_string(stage) + ".bn.";
    auto stats = p.running(stage);
    return batch_norm(x, p.at(prefix + "gamma"), p.at(prefix + "beta"), stats, mode);
}

}  // namespace detail

/// Critic: three (conv 3x3 -> leaky relu -> batch norm) stages, then a 1x1
/// conv to one channel averaged over H and W. Returns B x 1 x 1 x 1 scores.
template <typename T>
Tensor<T> critic_forward(NetworkParams<T>& p, const Tensor<T>& y, BatchNormMode mode = BatchNormMode::train)
{
    detail::require_arch(p, Arch::critic);
    detail::require_channels(y, 3, "critic_forward");
    Tensor<T> x = y;
    for (int stage = 1; stage < stage_count; ++stage) {
        x = detail::conv_stage(p, stage, x);
        x = leaky_relu(x, p.leaky_alpha);
        x = detail::bn_stage(p, stage, x, mode);
    }
    x = detail::conv_stage(p, stage_count, x);
    return reduce_mean(x, Axes::spatial());
}

/// Bound applied to cover values before the inverse tanh in the encoder's
/// skip path; keeps 0 and 255 exactly reproducible after rounding.
inline constexpr double cover_skip_bound = 1.0 - 1.0 / 512.0;

/// Encoder: cover and message planes concatenated channel-wise, three
/// (conv 3x3 -> batch norm) stages, then conv 3x3 to 3 channels and tanh.
/// The last pre-activation also receives atanh(cover), so the output is
/// tanh(atanh(cover) + residual) and stays strictly inside (-1, 1).
template <typename T>
Tensor<T> encoder_forward(NetworkParams<T>& p, const Tensor<T>& cover, const Tensor<T>& message,
                          BatchNormMode mode = BatchNormMode::train)
{
    detail::require_arch(p, Arch::encoder);
    detail::require_channels(cover, 3, "encoder_forward cover");
    detail::require_channels(message, static_cast<std::size_t>(p.data_depth), "encoder_forward message");
    const Shape4 cs = cover.shape();
    const Shape4 ms = message.shape();
    if (cs.b != ms.b || cs.h != ms.h || cs.w != ms.w) {
        throw DimensionError("encoder_forward: cover " + cs.str() + " and message " + ms.str() + " disagree on B/H/W");
    }
    Tensor<T> x = concat_channels(cover, message);
    for (int stage = 1; stage < stage_count; ++stage) {
        x = detail::conv_stage(p, stage, x);
        x = detail::bn_stage(p, stage, x, mode);
    }
    x = detail::conv_stage(p, stage_count, x);
    const T bound = static_cast<T>(cover_skip_bound);
    Tensor<T> skip = atanh(clamp(cover, -bound, bound));
    return tanh(add(x, skip));
}

/// Decoder: three (conv 3x3 -> batch norm) stages, then conv 3x3 to D
/// channels. Returns raw logits, B x H x W x D.
template <typename T>
Tensor<T> decoder_forward(NetworkParams<T>& p, const Tensor<T>& stego, BatchNormMode mode = BatchNormMode::train)
{
    detail::require_arch(p, Arch::decoder);
    detail::require_channels(stego, 3, "decoder_forward");
    Tensor<T> x = stego;
    for (int stage = 1; stage < stage_count; ++stage) {
        x = detail::conv_stage(p, stage, x);
        x = detail::bn_stage(p, stage, x, mode);
    }
    return detail::conv_stage(p, stage_count, x);
}

template <typename T>
void apply_update(NetworkParams<T>& p, OptimizerState<T>& opt)
{
    apply_update(p.tensors, opt);
}

template <typename T>
void zero_grad(NetworkParams<T>& p)
{
    zero_grad(p.tensors);
}

}  // namespace ganash
