#pragma once

#include <string>
#include <string_view>

#include "codec.hpp"
#include "image.hpp"
#include "lsb.hpp"
#include "metrics.hpp"
#include "networks.hpp"

namespace ganash {

// Text-level embedding for both methods. The `seconds` fields time only the
// coding and model computation, never file or weight I/O.

struct EncodedImage {
    ImageBuffer stego;
    BitMessage message;       // coded bits as embedded (one copy, without header)
    Tensor<float> planes;     // learned method: the full framed H x W x D volume
    double seconds = 0.0;
};

struct DecodedText {
    std::string text;
    BitMessage received;
    Tensor<float> logits;     // learned method only
    double seconds = 0.0;
};

inline EncodedImage gan_encode_text(NetworkParams<float>& encoder, const ImageBuffer& cover, std::string_view text,
                                    int parity_symbols = default_parity_symbols)
{
    const MessageTensorSpec spec{cover.height, cover.width, static_cast<std::size_t>(encoder.data_depth), true};
    const Tensor<float> cover_t = image_to_tensor<float>(cover);
    EncodedImage out;
    auto [stego, seconds] = timed([&] {
        out.message = text_to_bits(text, parity_symbols);
        out.planes = pack_message<float>(out.message, spec);
        return tensor_to_image(encoder_forward(encoder, cover_t, out.planes, BatchNormMode::infer));
    });
    out.stego = std::move(stego);
    out.seconds = seconds;
    return out;
}

inline DecodedText gan_decode_text(NetworkParams<float>& decoder, const ImageBuffer& stego,
                                   int parity_symbols = default_parity_symbols)
{
    const MessageTensorSpec spec{stego.height, stego.width, static_cast<std::size_t>(decoder.data_depth), true};
    const Tensor<float> stego_t = image_to_tensor<float>(stego);
    DecodedText out;
    auto [text, seconds] = timed([&] {
        out.logits = decoder_forward(decoder, stego_t, BatchNormMode::infer);
        out.received = unpack_message(out.logits, spec, MessageValues::logits);
        return bits_to_text(out.received, parity_symbols);
    });
    out.text = std::move(text);
    out.seconds = seconds;
    return out;
}

namespace detail {

inline std::vector<std::uint8_t> lsb_payload(std::string_view text, int parity_symbols)
{
    if (text.empty()) throw ValidationError("message text must not be empty");
    std::vector<std::uint8_t> body;
    if (parity_symbols > 0) {
        body = text_to_bits(text, parity_symbols).bits;
    } else {
        body = bytes_to_bits({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    }
    std::vector<std::uint8_t> bits;
    const auto n = static_cast<std::uint32_t>(body.size());
    for (int k = 31; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((n >> k) & 1u));
    bits.insert(bits.end(), body.begin(), body.end());
    return bits;
}

}  // namespace detail

/// LSB embedding of [32-bit length || text bits]; with parity_symbols > 0
/// the text is Reed-Solomon coded first.
inline EncodedImage lsb_encode_text(const ImageBuffer& cover, std::string_view text, int parity_symbols = 0,
                                    const LsbConfig& cfg = {})
{
    EncodedImage out;
    auto [stego, seconds] = timed([&] {
        out.message.bits = detail::lsb_payload(text, parity_symbols);
        out.message.parity_symbols = parity_symbols;
        out.message.original_len = text.size();
        return lsb_encode(cover, out.message, cfg);
    });
    out.stego = std::move(stego);
    out.seconds = seconds;
    return out;
}

inline DecodedText lsb_decode_text(const ImageBuffer& stego, int parity_symbols = 0, const LsbConfig& cfg = {})
{
    DecodedText out;
    auto [text, seconds] = timed([&] {
        const std::size_t capacity = lsb_capacity(stego, cfg);
        if (capacity < length_header_bits) throw DecodeError("image too small for a length header");
        const BitMessage header = lsb_decode(stego, length_header_bits, cfg);
        std::size_t n = 0;
        for (auto b : header.bits) n = (n << 1) | b;
        if (n == 0 || n % 8 != 0 || n > capacity - length_header_bits) {
            throw DecodeError("LSB length header " + std::to_string(n) + " is invalid for this image");
        }
        BitMessage all = lsb_decode(stego, length_header_bits + n, cfg);
        out.received.bits.assign(all.bits.begin() + length_header_bits, all.bits.end());
        out.received.parity_symbols = parity_symbols;
        if (parity_symbols > 0) return bits_to_text(out.received, parity_symbols);
        const auto bytes = bits_to_bytes(out.received.bits);
        return std::string(bytes.begin(), bytes.end());
    });
    out.text = std::move(text);
    out.seconds = seconds;
    return out;
}

}  // namespace ganash
