#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "codec.hpp"
#include "image.hpp"

namespace ganash {

enum class PixelScale {
    unit,  // [0, 1]
    byte,  // [0, 255]
};

/// Message bits per cover pixel.
inline double payload(std::size_t bit_count, std::size_t height, std::size_t width)
{
    if (height == 0 || width == 0) throw ValidationError("payload: cover image has zero area");
    return static_cast<double>(bit_count) / static_cast<double>(height * width);
}

namespace detail {

inline void require_same_image_dims(const ImageBuffer& a, const ImageBuffer& b, const char* what)
{
    if (!a.same_dims(b)) throw DimensionError(std::string(what) + ": image " + a.dims() + " vs " + b.dims());
    if (a.pixels.empty()) throw DimensionError(std::string(what) + ": empty image");
}

}  // namespace detail

/// Mean squared pixel difference over every pixel and channel.
inline double mse_metric(const ImageBuffer& cover, const ImageBuffer& stego, PixelScale scale = PixelScale::byte)
{
    detail::require_same_image_dims(cover, stego, "mse_metric");
    double acc = 0.0;
    for (std::size_t i = 0; i < cover.pixels.size(); ++i) {
        const double d = static_cast<double>(cover.pixels[i]) - static_cast<double>(stego.pixels[i]);
        acc += d * d;
    }
    double mse = acc / static_cast<double>(cover.pixels.size());
    if (scale == PixelScale::unit) mse /= 255.0 * 255.0;
    return mse;
}

/// 10 log10(peak^2 / mse); +infinity when mse is zero.
inline double psnr_from_mse(double mse, double peak)
{
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/// PSNR with peak 2^n - 1 against the byte-scale MSE. Identical images give +infinity.
inline double psnr(const ImageBuffer& cover, const ImageBuffer& stego, int bits_per_sample = 8)
{
    const double peak = std::ldexp(1.0, bits_per_sample) - 1.0;
    return psnr_from_mse(mse_metric(cover, stego, PixelScale::byte), peak);
}

/// Pearson correlation over all pixel values, channels flattened together.
inline double cross_correlation(const ImageBuffer& cover, const ImageBuffer& stego)
{
    detail::require_same_image_dims(cover, stego, "cross_correlation");
    const double n = static_cast<double>(cover.pixels.size());
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < cover.pixels.size(); ++i) {
        m1 += cover.pixels[i];
        m2 += stego.pixels[i];
    }
    m1 /= n;
    m2 /= n;
    double num = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < cover.pixels.size(); ++i) {
        const double a = cover.pixels[i] - m1;
        const double b = stego.pixels[i] - m2;
        num += a * b;
        s1 += a * a;
        s2 += b * b;
    }
    if (s1 == 0.0 || s2 == 0.0) throw ValidationError("cross_correlation: undefined for a constant image");
    return num / std::sqrt(s1 * s2);
}

inline double bit_accuracy(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received)
{
    if (sent.size() != received.size()) {
        throw DimensionError("bit_accuracy: " + std::to_string(sent.size()) + " bits sent but " +
                             std::to_string(received.size()) + " received");
    }
    if (sent.empty()) return 1.0;
    std::size_t same = 0;
    for (std::size_t i = 0; i < sent.size(); ++i) same += (sent[i] != 0) == (received[i] != 0) ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(sent.size());
}

inline double bit_accuracy(const BitMessage& sent, const BitMessage& received)
{
    return bit_accuracy(std::span<const std::uint8_t>(sent.bits), std::span<const std::uint8_t>(received.bits));
}

/// Runs `fn` and returns its result with elapsed wall-clock seconds (steady clock).
template <typename F>
auto timed(F&& fn)
{
    const auto start = std::chrono::steady_clock::now();
    auto result = fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::pair{std::move(result), std::chrono::duration<double>(stop - start).count()};
}

/// One row of the comparison table.
struct MetricsReport {
    std::string method;
    double payload = 0.0;
    std::optional<double> t2e;
    std::optional<double> t2d;
    double mse = 0.0;       // byte scale
    double mse_unit = 0.0;  // unit scale
    double psnr = 0.0;      // dB, n = 8
    double r = 0.0;
    std::optional<double> bit_accuracy;
    std::string security;  // qualitative, not computed
};

inline const std::vector<std::string>& report_columns()
{
    static const std::vector<std::string> cols{
        "Method",
        "Max. payload (bits/pixels)",
        "Time to Encode (secs)",
        "Time to Decode (secs)",
        "Mean Squared Error(MSE)",
        "Mean Squared Error(MSE) unit scale",
        "PSNR (dB)",
        "Cross-Correlation coefficient",
        "Bit accuracy",
        "Security",
    };
    return cols;
}

namespace detail {

inline std::string fmt_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_number(*v) : std::string(); }

inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_number(const std::string& s)
{
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("not a number: '" + s + "'");
    return v;
}

inline std::optional<double> parse_optional(const std::string& s)
{
    if (s.empty()) return std::nullopt;
    return parse_number(s);
}

}  // namespace detail

inline std::string report_csv_header()
{
    std::string out;
    for (const auto& c : report_columns()) out += (out.empty() ? "" : ",") + detail::csv_quote(c);
    return out;
}

inline std::string report_csv_row(const MetricsReport& r)
{
    using namespace detail;
    std::vector<std::string> cells{csv_quote(r.method), fmt_number(r.payload), fmt_optional(r.t2e),
                                   fmt_optional(r.t2d), fmt_number(r.mse), fmt_number(r.mse_unit),
                                   fmt_number(r.psnr), fmt_number(r.r), fmt_optional(r.bit_accuracy),
                                   csv_quote(r.security)};
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out;
}

inline MetricsReport parse_report_csv_row(const std::string& line)
{
    const auto cells = detail::csv_split(line);
    if (cells.size() != report_columns().size()) {
        throw ValidationError("report row has " + std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(report_columns().size()));
    }
    MetricsReport r;
    r.method = cells[0];
    r.payload = detail::parse_number(cells[1]);
    r.t2e = detail::parse_optional(cells[2]);
    r.t2d = detail::parse_optional(cells[3]);
    r.mse = detail::parse_number(cells[4]);
    r.mse_unit = detail::parse_number(cells[5]);
    r.psnr = detail::parse_number(cells[6]);
    r.r = detail::parse_number(cells[7]);
    r.bit_accuracy = detail::parse_optional(cells[8]);
    r.security = cells[9];
    return r;
}

/// Human-readable two-column table; timings in seconds with 4 significant digits.
inline std::string report_table(const MetricsReport& r)
{
    std::ostringstream os;
    auto row = [&](const std::string& name, const std::string& value) {
        os << std::left << std::setw(36) << name << value << '\n';
    };
    auto num = [](double v, int prec) {
        if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
        std::ostringstream s;
        s << std::setprecision(prec) << v;
        return s.str();
    };
    const auto& cols = report_columns();
    row(cols[0], r.method);
    row(cols[1], num(r.payload, 6));
    row(cols[2], r.t2e ? num(*r.t2e, 4) : "n/a");
    row(cols[3], r.t2d ? num(*r.t2d, 4) : "n/a");
    row(cols[4], num(r.mse, 6));
    row(cols[5], num(r.mse_unit, 6));
    row(cols[6], num(r.psnr, 6));
    row(cols[7], num(r.r, 6));
    row(cols[8], r.bit_accuracy ? num(*r.bit_accuracy, 6) : "n/a");
    row(cols[9], r.security.empty() ? "n/a" : r.security);
    return os.str();
}

/// Quality metrics for a cover/stego pair; timing and accuracy fields are left to the caller.
inline MetricsReport measure(const ImageBuffer& cover, const ImageBuffer& stego, std::size_t payload_bits)
{
    MetricsReport r;
    r.payload = payload(payload_bits, cover.height, cover.width);
    r.mse = mse_metric(cover, stego, PixelScale::byte);
    r.mse_unit = mse_metric(cover, stego, PixelScale::unit);
    r.psnr = psnr_from_mse(r.mse, 255.0);
    try {
        r.r = cross_correlation(cover, stego);
    } catch (const ValidationError&) {
        r.r = std::numeric_limits<double>::quiet_NaN();  // constant image: correlation undefined
    }
    return r;
}

}  // namespace ganash
