#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "reed_solomon.hpp"
#include "tensor.hpp"

namespace ganash {

/// Payload bit sequence plus the Reed-Solomon framing used to produce it.
struct BitMessage {
    std::vector<std::uint8_t> bits;  // each element 0 or 1
    int parity_symbols = 0;
    std::size_t original_len = 0;  // payload bytes before coding

    std::size_t size() const noexcept { return bits.size(); }
    friend bool operator==(const BitMessage&, const BitMessage&) = default;
};

/// Message volume embedded in an image: H x W positions with `depth` bit planes.
struct MessageTensorSpec {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t depth = 1;
    /// Framed volumes carry a 32-bit length header and are tiled cyclically;
    /// raw volumes hold the bits as-is followed by zeros.
    bool framed = true;

    std::size_t capacity() const noexcept { return height * width * depth; }
};

/// How unpack_message interprets tensor values.
enum class MessageValues {
    bits,    // {0,1}-valued; 1 when value >= 0.5
    logits,  // raw decoder output; 1 when value >= 0
};

class CapacityError : public std::runtime_error {
public:
    CapacityError(std::size_t required, std::size_t available)
        : std::runtime_error("message needs " + std::to_string(required) + " bits but only " +
                             std::to_string(available) + " are available"),
          required_bits(required),
          available_bits(available)
    {
    }
    std::size_t required_bits;
    std::size_t available_bits;
};

/// Reed-Solomon block or framing header could not be recovered.
class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what, std::optional<std::size_t> block = std::nullopt)
        : std::runtime_error(what), block_index(block)
    {
    }
    std::optional<std::size_t> block_index;
};

inline constexpr int default_parity_symbols = 32;
inline constexpr std::size_t length_header_bits = 32;

namespace detail {

inline void check_parity(int parity)
{
    if (parity < 2 || parity > 254 || parity % 2 != 0) {
        throw ValidationError("parity_symbols must be even and in [2, 254], got " + std::to_string(parity));
    }
}

inline void append_byte(std::vector<std::uint8_t>& bits, std::uint8_t byte)
{
    for (int k = 7; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((byte >> k) & 1u));
}

}  // namespace detail

/// MSB-first bit expansion of a byte string.
inline std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes)
{
    std::vector<std::uint8_t> bits;
    bits.reserve(bytes.size() * 8);
    for (auto b : bytes) detail::append_byte(bits, b);
    return bits;
}

inline std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits)
{
    if (bits.size() % 8 != 0) throw ValidationError("bit count " + std::to_string(bits.size()) + " is not a multiple of 8");
    std::vector<std::uint8_t> bytes(bits.size() / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] > 1) throw ValidationError("bit values must be 0 or 1");
        bytes[i / 8] = static_cast<std::uint8_t>(bytes[i / 8] | (bits[i] << (7 - i % 8)));
    }
    return bytes;
}

/// Reed-Solomon codes `text` in blocks of at most 255 bytes, each holding up
/// to 255 - parity data bytes followed by `parity` check bytes, and expands
/// the result MSB-first.
inline BitMessage text_to_bits(std::string_view text, int parity_symbols = default_parity_symbols)
{
    if (text.empty()) throw ValidationError("message text must not be empty");
    detail::check_parity(parity_symbols);
    const rs::Codec codec(parity_symbols);
    const std::size_t chunk = codec.max_data_length();
    BitMessage msg;
    msg.parity_symbols = parity_symbols;
    msg.original_len = text.size();
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
    for (std::size_t off = 0; off < text.size(); off += chunk) {
        const std::size_t len = std::min(chunk, text.size() - off);
        for (auto b : codec.encode({bytes + off, len})) detail::append_byte(msg.bits, b);
    }
    return msg;
}

/// Inverse of text_to_bits, correcting up to parity/2 byte errors per block.
/// Throws DecodeError carrying the index of the first uncorrectable block.
inline std::string bits_to_text(const BitMessage& msg, int parity_symbols = default_parity_symbols)
{
    detail::check_parity(parity_symbols);
    if (msg.bits.empty() || msg.bits.size() % 8 != 0) {
        throw ValidationError("coded message must hold a positive multiple of 8 bits, got " +
                              std::to_string(msg.bits.size()));
    }
    const auto coded = bits_to_bytes(msg.bits);
    const rs::Codec codec(parity_symbols);
    std::string out;
    std::size_t index = 0;
    for (std::size_t off = 0; off < coded.size(); off += 255, ++index) {
        const std::size_t len = std::min<std::size_t>(255, coded.size() - off);
        if (len <= static_cast<std::size_t>(parity_symbols)) {
            throw DecodeError("block " + std::to_string(index) + " is shorter than its parity", index);
        }
        std::vector<std::uint8_t> block(coded.begin() + static_cast<std::ptrdiff_t>(off),
                                        coded.begin() + static_cast<std::ptrdiff_t>(off + len));
        try {
            codec.correct(block);
        } catch (const rs::UncorrectableError& e) {
            throw DecodeError("uncorrectable Reed-Solomon block " + std::to_string(index) + ": " + e.what(), index);
        }
        out.append(block.begin(), block.end() - parity_symbols);
    }
    return out;
}

/// Lays bits out row-major over (H, W, D) as a 1 x H x W x D tensor.
///
/// Framed layout: [32-bit MSB-first payload length || payload] repeated
/// cyclically until the volume is full (the last repetition may be cut).
/// Raw layout: the payload followed by zeros.
template <typename T = float>
Tensor<T> pack_message(std::span<const std::uint8_t> bits, const MessageTensorSpec& spec)
{
    if (spec.depth < 1) throw ValidationError("message depth must be at least 1");
    const std::size_t capacity = spec.capacity();
    std::vector<std::uint8_t> period;
    if (spec.framed) {
        if (bits.size() > 0xffffffffu) throw CapacityError(bits.size() + length_header_bits, capacity);
        const auto len = static_cast<std::uint32_t>(bits.size());
        for (int k = 31; k >= 0; --k) period.push_back(static_cast<std::uint8_t>((len >> k) & 1u));
    }
    period.insert(period.end(), bits.begin(), bits.end());
    if (period.size() > capacity) throw CapacityError(period.size(), capacity);

    std::vector<T> values(capacity, T(0));
    if (spec.framed) {
        for (std::size_t i = 0; i < capacity; ++i) values[i] = static_cast<T>(period[i % period.size()]);
    } else {
        for (std::size_t i = 0; i < period.size(); ++i) values[i] = static_cast<T>(period[i]);
    }
    return Tensor<T>::from_data({1, spec.height, spec.width, spec.depth}, std::move(values));
}

template <typename T = float>
Tensor<T> pack_message(const BitMessage& msg, const MessageTensorSpec& spec)
{
    return pack_message<T>(std::span<const std::uint8_t>(msg.bits), spec);
}

namespace detail {

// Majority vote of hard decisions; ties go to the sign of the summed scores.
struct Vote {
    int ones = 0;
    int zeros = 0;
    double score = 0.0;

    void add(double s)
    {
        (s >= 0 ? ones : zeros) += 1;
        score += s;
    }
    std::uint8_t bit() const
    {
        if (ones != zeros) return ones > zeros ? 1 : 0;
        return score >= 0 ? 1 : 0;
    }
};

inline std::uint32_t voted_header(std::span<const double> scores, std::size_t period, std::size_t* copies_agreeing,
                                  std::uint32_t expect)
{
    std::uint32_t header = 0;
    std::size_t agree = 0;
    std::vector<Vote> votes(length_header_bits);
    for (std::size_t start = 0; start + length_header_bits <= scores.size(); start += period) {
        std::uint32_t raw = 0;
        for (std::size_t k = 0; k < length_header_bits; ++k) {
            votes[k].add(scores[start + k]);
            raw = (raw << 1) | (scores[start + k] >= 0 ? 1u : 0u);
        }
        agree += raw == expect ? 1 : 0;
        if (period == 0) break;
    }
    for (std::size_t k = 0; k < length_header_bits; ++k) header = (header << 1) | votes[k].bit();
    if (copies_agreeing) *copies_agreeing = agree;
    return header;
}

}  // namespace detail

/// Recovers the payload written by pack_message.
///
/// Each element becomes a hard bit (see MessageValues). For framed volumes
/// the payload length is taken from the header, validated by majority vote
/// across every repetition, and each payload bit is the majority over its
/// repetitions. Throws DecodeError when no self-consistent header exists.
template <typename T>
BitMessage unpack_message(const Tensor<T>& tensor, const MessageTensorSpec& spec,
                          MessageValues values = MessageValues::bits)
{
    const Shape4 expected{1, spec.height, spec.width, spec.depth};
    if (!(tensor.shape() == expected)) {
        throw DimensionError("unpack_message: expected " + expected.str() + ", got " + tensor.shape().str());
    }
    const std::size_t capacity = spec.capacity();
    std::vector<double> scores(capacity);
    const double offset = values == MessageValues::bits ? 0.5 : 0.0;
    for (std::size_t i = 0; i < capacity; ++i) scores[i] = static_cast<double>(tensor.data()[i]) - offset;

    BitMessage out;
    if (!spec.framed) {
        out.bits.resize(capacity);
        for (std::size_t i = 0; i < capacity; ++i) out.bits[i] = scores[i] >= 0 ? 1 : 0;
        out.original_len = capacity / 8;
        return out;
    }
    if (capacity < length_header_bits) throw DecodeError("message volume smaller than the length header");

    auto consistent = [&](std::size_t len, std::size_t* agreeing) {
        const std::size_t period = length_header_bits + len;
        if (period > capacity) return false;
        return detail::voted_header(scores, period, agreeing, static_cast<std::uint32_t>(len)) == len;
    };

    std::uint32_t first = 0;
    for (std::size_t k = 0; k < length_header_bits; ++k) first = (first << 1) | (scores[k] >= 0 ? 1u : 0u);
    std::optional<std::size_t> length;
    std::size_t agreeing = 0;
    if (consistent(first, &agreeing)) {
        length = first;
    } else {
        std::size_t best = 0;
        for (std::size_t len = 0; len + length_header_bits <= capacity; ++len) {
            if (consistent(len, &agreeing) && (!length || agreeing > best)) {
                length = len;
                best = agreeing;
            }
        }
    }
    if (!length) throw DecodeError("no length header is consistent across message repetitions");

    const std::size_t period = length_header_bits + *length;
    out.bits.resize(*length);
    for (std::size_t i = 0; i < *length; ++i) {
        detail::Vote vote;
        for (std::size_t pos = length_header_bits + i; pos < capacity; pos += period) vote.add(scores[pos]);
        out.bits[i] = vote.bit();
    }
    out.original_len = *length / 8;
    return out;
}

}  // namespace ganash
