#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace ganash {

/// 8-bit interleaved pixels, row-major, `channels` bytes per pixel.
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 3;
    std::vector<std::uint8_t> pixels;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, std::size_t c = 3, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill)
    {
    }

    std::size_t size() const noexcept { return pixels.size(); }
    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

    bool same_dims(const ImageBuffer& o) const noexcept
    {
        return width == o.width && height == o.height && channels == o.channels;
    }

    std::string dims() const
    {
        return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels);
    }

    ImageBuffer crop(std::size_t top, std::size_t left, std::size_t h, std::size_t w) const
    {
        if (top + h > height || left + w > width) {
            throw DimensionError("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" + std::to_string(top) +
                                 "," + std::to_string(left) + ") exceeds image " + dims());
        }
        ImageBuffer out(w, h, channels);
        for (std::size_t y = 0; y < h; ++y) {
            const auto* src = pixels.data() + ((top + y) * width + left) * channels;
            std::copy_n(src, w * channels, out.pixels.data() + y * w * channels);
        }
        return out;
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

enum class PixelRange {
    symmetric,  // v / 127.5 - 1, in [-1, 1]
    unit,       // v / 255, in [0, 1]
};

/// Stacks same-sized images into a B x H x W x C tensor.
template <typename T = float>
Tensor<T> images_to_tensor(std::span<const ImageBuffer> images, PixelRange range = PixelRange::symmetric)
{
    if (images.empty()) throw ValidationError("images_to_tensor: no images");
    const auto& first = images.front();
    const Shape4 shape{images.size(), first.height, first.width, first.channels};
    std::vector<T> data;
    data.reserve(shape.numel());
    for (const auto& img : images) {
        if (!img.same_dims(first)) {
            throw DimensionError("images_to_tensor: image " + img.dims() + " differs from " + first.dims());
        }
        for (auto v : img.pixels) {
            data.push_back(range == PixelRange::symmetric ? static_cast<T>(v) / T(127.5) - T(1)
                                                          : static_cast<T>(v) / T(255));
        }
    }
    return Tensor<T>::from_data(shape, std::move(data));
}

template <typename T = float>
Tensor<T> image_to_tensor(const ImageBuffer& image, PixelRange range = PixelRange::symmetric)
{
    return images_to_tensor<T>(std::span<const ImageBuffer>(&image, 1), range);
}

/// Inverse of the symmetric mapping for one batch item, rounded and clamped to [0, 255].
template <typename T>
ImageBuffer tensor_to_image(const Tensor<T>& t, std::size_t batch_index = 0)
{
    const Shape4 s = t.shape();
    if (batch_index >= s.b) throw DimensionError("tensor_to_image: batch index out of range for " + s.str());
    ImageBuffer out(s.w, s.h, s.c);
    const std::size_t base = s.index(batch_index, 0, 0, 0);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double v = std::round((static_cast<double>(t.data()[base + i]) + 1.0) * 127.5);
        out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

}  // namespace ganash
