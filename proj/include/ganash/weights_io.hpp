#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "networks.hpp"
#include "optimizer.hpp"

namespace ganash {

/// Header or structure does not describe the expected file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File ends early or holds inconsistent lengths.
class CorruptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 6> weights_magic{'G', 'A', 'N', 'A', 'S', 'H'};
inline constexpr std::uint8_t weights_version = 1;
inline constexpr std::array<char, 6> optimizer_magic{'G', 'A', 'N', 'O', 'P', 'T'};
inline constexpr std::uint8_t optimizer_version = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const char*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    template <typename U>
    void le(U v)
    {
        std::array<char, sizeof(U)> raw;
        std::memcpy(raw.data(), &v, sizeof(U));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        bytes(raw.data(), raw.size());
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void f32(float v) { le(v); }
    void f64(double v) { le(v); }
    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void save(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
    }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::filesystem::path& path) : name_(path.string())
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open '" + name_ + "'");
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void bytes(void* p, std::size_t n)
    {
        if (n > buf_.size() - pos_) throw CorruptionError("'" + name_ + "' is truncated");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <typename U>
    U le()
    {
        std::array<char, sizeof(U)> raw;
        bytes(raw.data(), raw.size());
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        U v;
        std::memcpy(&v, raw.data(), sizeof(U));
        return v;
    }
    std::uint8_t u8()
    {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    float f32() { return le<float>(); }
    double f64() { return le<double>(); }
    std::string str(std::size_t limit = 4096)
    {
        const std::uint32_t n = u32();
        if (n > limit) throw CorruptionError("'" + name_ + "' holds an implausible string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Writes parameters as: magic "GANASH", version byte, architecture tag
/// byte, D (u32), hidden_dims (u32), record count (u32), then per tensor:
/// name length (u32), name bytes, 4 dims (u32), little-endian float32 data.
template <typename T>
void save_params(const NetworkParams<T>& p, const std::filesystem::path& path)
{
    detail::ByteWriter w;
    w.bytes(weights_magic.data(), weights_magic.size());
    w.u8(weights_version);
    w.u8(static_cast<std::uint8_t>(p.arch));
    w.u32(static_cast<std::uint32_t>(p.data_depth));
    w.u32(static_cast<std::uint32_t>(p.hidden_dims));
    w.u32(static_cast<std::uint32_t>(p.tensors.size()));
    for (const auto& t : p.tensors) {
        w.str(t.name);
        const Shape4 s = t.value.shape();
        for (auto d : {s.b, s.h, s.w, s.c}) w.u32(static_cast<std::uint32_t>(d));
        for (T v : t.value.data()) w.f32(static_cast<float>(v));
    }
    w.save(path);
}

/// Reads a file written by save_params. When `expected` is given, a file
/// holding another architecture is rejected with FormatError naming both.
template <typename T = float>
NetworkParams<T> load_params(const std::filesystem::path& path, std::optional<Arch> expected = std::nullopt)
{
    detail::ByteReader r(path);
    std::array<char, 6> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != weights_magic) throw FormatError("'" + path.string() + "' is not a weight file (bad magic)");
    const std::uint8_t version = r.u8();
    if (version != weights_version) {
        throw FormatError("'" + path.string() + "' has weight format version " + std::to_string(version) +
                          ", expected " + std::to_string(weights_version));
    }
    const std::uint8_t tag = r.u8();
    if (tag > static_cast<std::uint8_t>(Arch::decoder)) {
        throw FormatError("'" + path.string() + "' has unknown architecture tag " + std::to_string(tag));
    }
    const auto arch = static_cast<Arch>(tag);
    if (expected && *expected != arch) {
        throw FormatError("'" + path.string() + "' holds " + arch_name(arch) + " weights (architecture tag " +
                          std::to_string(tag) + "), expected " + arch_name(*expected));
    }
    const auto depth = static_cast<int>(r.u32());
    const auto hidden = static_cast<int>(r.u32());
    const std::uint32_t count = r.u32();
    if (depth < 1 || depth > 4096 || hidden < 1 || hidden > 65536) {
        throw FormatError("'" + path.string() + "' has implausible D or hidden_dims");
    }

    std::vector<NamedTensor<T>> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        Shape4 s{r.u32(), r.u32(), r.u32(), r.u32()};
        if (s.numel() * 4 > r.remaining()) throw CorruptionError("'" + path.string() + "' is truncated");
        std::vector<T> data(s.numel());
        for (auto& v : data) v = static_cast<T>(r.f32());
        loaded.push_back({std::move(name), Tensor<T>::from_data(s, std::move(data)), true});
    }
    if (r.remaining() != 0) throw CorruptionError("'" + path.string() + "' has trailing bytes");

    // The conv kernel of stage 1 tells the kernel size.
    int kernel = 3;
    for (const auto& t : loaded) {
        if (t.name == "stage1.conv.weight") kernel = static_cast<int>(t.value.shape().b);
    }
    NetworkParams<T> p = init_params<T>(arch, depth, 0, hidden, kernel);
    if (p.tensors.size() != loaded.size()) {
        throw FormatError("'" + path.string() + "' holds " + std::to_string(loaded.size()) + " tensors, " +
                          arch_name(arch) + " needs " + std::to_string(p.tensors.size()));
    }
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        auto& want = p.tensors[i];
        auto& got = loaded[i];
        if (want.name != got.name || !(want.value.shape() == got.value.shape())) {
            throw FormatError("'" + path.string() + "' record " + std::to_string(i) + " is " + got.name +
                              got.value.shape().str() + ", expected " + want.name + want.value.shape().str());
        }
        got.value.set_requires_grad(want.trainable);
        want.value = got.value;
    }
    return p;
}

template <typename T>
void save_optimizer(const OptimizerState<T>& opt, const std::filesystem::path& path)
{
    detail::ByteWriter w;
    w.bytes(optimizer_magic.data(), optimizer_magic.size());
    w.u8(optimizer_version);
    w.u8(static_cast<std::uint8_t>(opt.kind));
    w.u64(opt.step);
    for (double v : {opt.lr, opt.beta1, opt.beta2, opt.eps, opt.clip_lo, opt.clip_hi}) w.f64(v);
    w.u32(static_cast<std::uint32_t>(opt.first_moment.size()));
    for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
        w.u32(static_cast<std::uint32_t>(opt.first_moment[i].size()));
        for (T v : opt.first_moment[i]) w.f32(static_cast<float>(v));
        for (T v : opt.second_moment[i]) w.f32(static_cast<float>(v));
    }
    w.save(path);
}

template <typename T = float>
OptimizerState<T> load_optimizer(const std::filesystem::path& path)
{
    detail::ByteReader r(path);
    std::array<char, 6> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != optimizer_magic) throw FormatError("'" + path.string() + "' is not an optimizer state file");
    if (r.u8() != optimizer_version) throw FormatError("'" + path.string() + "' has an unsupported version");
    OptimizerState<T> opt;
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw FormatError("'" + path.string() + "' has unknown optimizer kind");
    opt.kind = static_cast<OptimizerKind>(kind);
    opt.step = r.u64();
    opt.lr = r.f64();
    opt.beta1 = r.f64();
    opt.beta2 = r.f64();
    opt.eps = r.f64();
    opt.clip_lo = r.f64();
    opt.clip_hi = r.f64();
    const std::uint32_t slots = r.u32();
    for (std::uint32_t i = 0; i < slots; ++i) {
        const std::uint32_t n = r.u32();
        if (static_cast<std::size_t>(n) * 8 > r.remaining()) throw CorruptionError("'" + path.string() + "' is truncated");
        std::vector<T> m(n), v(n);
        for (auto& x : m) x = static_cast<T>(r.f32());
        for (auto& x : v) x = static_cast<T>(r.f32());
        opt.first_moment.push_back(std::move(m));
        opt.second_moment.push_back(std::move(v));
    }
    if (r.remaining() != 0) throw CorruptionError("'" + path.string() + "' has trailing bytes");
    return opt;
}

}  // namespace ganash
