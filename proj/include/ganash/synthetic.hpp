#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "image.hpp"
#include "networks.hpp"

namespace ganash {

/// Smooth random RGB image with roughly 1/f spectral falloff: Gaussian
/// grids at cell sizes 2..32 pixels, bilinearly upsampled and weighted by
/// cell size, then centered and scaled to 90% of the byte range.
///
/// Real photographs are not available in every environment; these stand in
/// wherever a test needs covers whose pixels are spatially correlated.
inline ImageBuffer natural_image(std::size_t width, std::size_t height, std::uint64_t seed)
{
    std::mt19937_64 rng(detail::mix_seed(seed, 0x1f1f1f1fULL));
    auto gauss = [&rng] {
        const double u1 = 1.0 - detail::uniform01(rng);
        const double u2 = detail::uniform01(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    };
    std::vector<double> acc(width * height * 3, 0.0);
    for (std::size_t cell : {2u, 4u, 8u, 16u, 32u}) {
        const std::size_t gw = width / cell + 2;
        const std::size_t gh = height / cell + 2;
        std::vector<double> grid(gw * gh * 3);
        for (auto& v : grid) v = gauss();
        const double weight = static_cast<double>(cell) / 32.0;
        for (std::size_t y = 0; y < height; ++y) {
            const double sy = std::max(0.0, (static_cast<double>(y) + 0.5) / static_cast<double>(cell) - 0.5);
            const auto y0 = static_cast<std::size_t>(sy);
            const double fy = sy - static_cast<double>(y0);
            for (std::size_t x = 0; x < width; ++x) {
                const double sx = std::max(0.0, (static_cast<double>(x) + 0.5) / static_cast<double>(cell) - 0.5);
                const auto x0 = static_cast<std::size_t>(sx);
                const double fx = sx - static_cast<double>(x0);
                for (std::size_t c = 0; c < 3; ++c) {
                    auto g = [&](std::size_t yy, std::size_t xx) { return grid[(yy * gw + xx) * 3 + c]; };
                    const double top = g(y0, x0) * (1 - fx) + g(y0, x0 + 1) * fx;
                    const double bottom = g(y0 + 1, x0) * (1 - fx) + g(y0 + 1, x0 + 1) * fx;
                    acc[(y * width + x) * 3 + c] += weight * (top * (1 - fy) + bottom * fy);
                }
            }
        }
    }
    double mean = 0.0;
    for (double v : acc) mean += v;
    mean /= static_cast<double>(acc.size());
    double peak = 1e-12;
    for (double& v : acc) {
        v -= mean;
        peak = std::max(peak, std::abs(v));
    }
    ImageBuffer img(width, height, 3);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double s = acc[i] / peak * 0.9;
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround((s + 1.0) * 127.5), 0L, 255L));
    }
    return img;
}

}  // namespace ganash
