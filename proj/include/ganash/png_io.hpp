#pragma once

#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <png.h>

#include "image.hpp"

namespace ganash {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct PngImage {
    png_image image;
    PngImage()
    {
        std::memset(&image, 0, sizeof(image));
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

}  // namespace detail

/// Width and height from the PNG header, without decoding pixels.
inline std::pair<std::size_t, std::size_t> read_png_dims(const std::filesystem::path& path)
{
    detail::PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.string().c_str())) {
        throw ImageIoError("cannot read PNG '" + path.string() + "': " + png.image.message);
    }
    return {png.image.width, png.image.height};
}

/// Decodes any PNG into 8-bit RGB (alpha dropped, gray expanded).
inline ImageBuffer read_png(const std::filesystem::path& path)
{
    detail::PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.string().c_str())) {
        throw ImageIoError("cannot read PNG '" + path.string() + "': " + png.image.message);
    }
    png.image.format = PNG_FORMAT_RGB;
    ImageBuffer out(png.image.width, png.image.height, 3);
    if (!png_image_finish_read(&png.image, nullptr, out.pixels.data(), 0, nullptr)) {
        throw ImageIoError("corrupt PNG '" + path.string() + "': " + png.image.message);
    }
    return out;
}

inline void write_png(const std::filesystem::path& path, const ImageBuffer& img)
{
    if (img.channels != 3 && img.channels != 1) {
        throw ImageIoError("write_png supports 1 or 3 channels, got " + std::to_string(img.channels));
    }
    detail::PngImage png;
    png.image.width = static_cast<png_uint_32>(img.width);
    png.image.height = static_cast<png_uint_32>(img.height);
    png.image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png.image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
        throw ImageIoError("cannot write PNG '" + path.string() + "': " + png.image.message);
    }
}

}  // namespace ganash
