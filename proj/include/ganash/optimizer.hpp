#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace ganash {

/// A tensor owned by a network, addressed by a stable name.
template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> value;
    bool trainable = true;
};

enum class OptimizerKind : std::uint8_t { adam = 0, sgd = 1 };

/// Update rule configuration plus per-parameter moment estimates.
///
/// Gradients are clamped element-wise to [clip_lo, clip_hi] before either
/// rule sees them. Moments are laid out in the order of the trainable
/// parameters they belong to.
template <typename T>
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_lo = -0.1;
    double clip_hi = 0.1;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;

    // Extremes of the clamped gradients applied by the most recent update.
    double last_applied_min = 0.0;
    double last_applied_max = 0.0;

    void validate() const
    {
        if (!(clip_lo < clip_hi)) throw ValidationError("optimizer clip bounds must satisfy lo < hi");
        if (!(lr >= 0)) throw ValidationError("optimizer learning rate must be non-negative");
    }
};

/// Applies one descent step to every trainable tensor from its accumulated
/// gradient, then clears the gradients.
///
/// Throws ValidationError naming the first trainable tensor that has no
/// gradient; in that case no parameter is modified.
template <typename T>
void apply_update(std::vector<NamedTensor<T>>& params, OptimizerState<T>& opt)
{
    opt.validate();
    for (const auto& p : params) {
        if (p.trainable && !p.value.has_grad()) {
            throw ValidationError("apply_update: missing gradient for parameter '" + p.name + "'");
        }
    }

    std::size_t slot = 0;
    std::size_t trainable = 0;
    for (const auto& p : params) trainable += p.trainable ? 1 : 0;
    if (opt.first_moment.size() != trainable) {
        if (!opt.first_moment.empty()) throw StateError("apply_update: optimizer state belongs to a different network");
        opt.first_moment.resize(trainable);
        opt.second_moment.resize(trainable);
    }

    ++opt.step;
    const double bias1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bias2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    double lo_seen = std::numeric_limits<double>::infinity();
    double hi_seen = -std::numeric_limits<double>::infinity();

    for (auto& p : params) {
        if (!p.trainable) continue;
        auto w = p.value.mutable_data();
        auto g = p.value.mutable_grad();
        auto& m = opt.first_moment[slot];
        auto& v = opt.second_moment[slot];
        ++slot;
        if (m.empty()) {
            m.assign(w.size(), T(0));
            v.assign(w.size(), T(0));
        } else if (m.size() != w.size()) {
            throw StateError("apply_update: moment shape differs from parameter '" + p.name + "'");
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = std::clamp(static_cast<double>(g[i]), opt.clip_lo, opt.clip_hi);
            lo_seen = std::min(lo_seen, gi);
            hi_seen = std::max(hi_seen, gi);
            if (opt.kind == OptimizerKind::sgd) {
                w[i] = static_cast<T>(static_cast<double>(w[i]) - opt.lr * gi);
            } else {
                const double mi = opt.beta1 * static_cast<double>(m[i]) + (1.0 - opt.beta1) * gi;
                const double vi = opt.beta2 * static_cast<double>(v[i]) + (1.0 - opt.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double step = opt.lr * (mi / bias1) / (std::sqrt(vi / bias2) + opt.eps);
                w[i] = static_cast<T>(static_cast<double>(w[i]) - step);
            }
        }
        p.value.zero_grad();
    }
    opt.last_applied_min = lo_seen;
    opt.last_applied_max = hi_seen;
}

/// Clears accumulated gradients without updating.
template <typename T>
void zero_grad(std::vector<NamedTensor<T>>& params)
{
    for (auto& p : params) p.value.zero_grad();
}

}  // namespace ganash
