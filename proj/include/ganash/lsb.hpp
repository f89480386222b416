#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "codec.hpp"
#include "image.hpp"

namespace ganash {

/// Least-significant-bit embedding layout. Pixels are visited row-major,
/// channels in stored (R, G, B) order, and within each channel byte the
/// `planes` low bits are filled from the higher of them down.
struct LsbConfig {
    int planes = 1;

    void validate() const
    {
        if (planes != 1 && planes != 2) throw ValidationError("LSB planes must be 1 or 2");
    }
};

inline std::size_t lsb_capacity(const ImageBuffer& img, const LsbConfig& cfg)
{
    cfg.validate();
    return img.pixels.size() * static_cast<std::size_t>(cfg.planes);
}

inline ImageBuffer lsb_encode(const ImageBuffer& cover, std::span<const std::uint8_t> bits, const LsbConfig& cfg = {})
{
    const std::size_t capacity = lsb_capacity(cover, cfg);
    if (bits.size() > capacity) throw CapacityError(bits.size(), capacity);
    ImageBuffer stego = cover;
    const auto planes = static_cast<std::size_t>(cfg.planes);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const std::size_t byte = i / planes;
        const unsigned shift = static_cast<unsigned>(planes - 1 - i % planes);
        const auto mask = static_cast<std::uint8_t>(1u << shift);
        auto& px = stego.pixels[byte];
        px = static_cast<std::uint8_t>((px & ~mask) | ((bits[i] & 1u) << shift));
    }
    return stego;
}

inline ImageBuffer lsb_encode(const ImageBuffer& cover, const BitMessage& msg, const LsbConfig& cfg = {})
{
    return lsb_encode(cover, std::span<const std::uint8_t>(msg.bits), cfg);
}

/// Reads back `bit_count` bits in the same traversal. There is no detection:
/// a pristine image yields its literal low bits.
inline BitMessage lsb_decode(const ImageBuffer& stego, std::size_t bit_count, const LsbConfig& cfg = {})
{
    const std::size_t capacity = lsb_capacity(stego, cfg);
    if (bit_count > capacity) throw CapacityError(bit_count, capacity);
    BitMessage out;
    out.bits.resize(bit_count);
    const auto planes = static_cast<std::size_t>(cfg.planes);
    for (std::size_t i = 0; i < bit_count; ++i) {
        const unsigned shift = static_cast<unsigned>(planes - 1 - i % planes);
        out.bits[i] = static_cast<std::uint8_t>((stego.pixels[i / planes] >> shift) & 1u);
    }
    out.original_len = bit_count / 8;
    return out;
}

}  // namespace ganash
