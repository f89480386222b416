#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ganash::rs {

/// Arithmetic in GF(2^8) with primitive polynomial x^8 + x^4 + x^3 + x^2 + 1.
class GaloisField {
public:
    static const GaloisField& instance()
    {
        static const GaloisField field;
        return field;
    }

    std::uint8_t exp(int power) const { return exp_[static_cast<std::size_t>(((power % 255) + 255) % 255)]; }
    int log(std::uint8_t v) const { return log_[v]; }

    std::uint8_t mul(std::uint8_t a, std::uint8_t b) const
    {
        if (a == 0 || b == 0) return 0;
        return exp_[static_cast<std::size_t>(log_[a] + log_[b])];
    }

    std::uint8_t div(std::uint8_t a, std::uint8_t b) const
    {
        if (b == 0) throw std::domain_error("GF(256) division by zero");
        if (a == 0) return 0;
        return exp_[static_cast<std::size_t>(log_[a] + 255 - log_[b])];
    }

    std::uint8_t inverse(std::uint8_t a) const { return div(1, a); }

private:
    GaloisField()
    {
        unsigned x = 1;
        for (int i = 0; i < 255; ++i) {
            exp_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(x);
            log_[x] = i;
            x <<= 1;
            if (x & 0x100) x ^= 0x11d;
        }
        for (std::size_t i = 255; i < exp_.size(); ++i) exp_[i] = exp_[i - 255];
        log_[0] = -1;
    }

    std::array<std::uint8_t, 512> exp_{};
    std::array<int, 256> log_{};
};

/// Raised when a block carries more errors than the code can correct.
class UncorrectableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Systematic Reed-Solomon code over GF(2^8) with `parity` check symbols and
/// generator roots alpha^0 .. alpha^(parity-1). Blocks may be shortened below
/// 255 symbols; the first symbol of a block is the highest-degree coefficient.
class Codec {
public:
    explicit Codec(int parity) : parity_(parity)
    {
        if (parity < 1 || parity > 254) throw std::invalid_argument("Reed-Solomon parity must be in [1, 254]");
        const auto& gf = GaloisField::instance();
        generator_ = {1};
        for (int i = 0; i < parity; ++i) {
            // generator *= (x - alpha^i)
            std::vector<std::uint8_t> next(generator_.size() + 1, 0);
            const std::uint8_t root = gf.exp(i);
            for (std::size_t j = 0; j < generator_.size(); ++j) {
                next[j] ^= generator_[j];
                next[j + 1] ^= gf.mul(generator_[j], root);
            }
            generator_ = std::move(next);
        }
    }

    int parity() const noexcept { return parity_; }
    std::size_t max_data_length() const noexcept { return 255 - static_cast<std::size_t>(parity_); }

    /// Data followed by parity symbols.
    std::vector<std::uint8_t> encode(std::span<const std::uint8_t> data) const
    {
        if (data.empty() || data.size() > max_data_length()) {
            throw std::invalid_argument("Reed-Solomon block data length must be in [1, " +
                                        std::to_string(max_data_length()) + "]");
        }
        const auto& gf = GaloisField::instance();
        std::vector<std::uint8_t> work(data.begin(), data.end());
        work.resize(data.size() + static_cast<std::size_t>(parity_), 0);
        // Synthetic division by the monic generator.
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::uint8_t coef = work[i];
            if (coef == 0) continue;
            for (std::size_t j = 1; j < generator_.size(); ++j) work[i + j] ^= gf.mul(generator_[j], coef);
        }
        std::vector<std::uint8_t> block(data.begin(), data.end());
        block.insert(block.end(), work.begin() + static_cast<std::ptrdiff_t>(data.size()), work.end());
        return block;
    }

    /// Corrects up to parity/2 symbol errors in place and returns the number
    /// corrected. Throws UncorrectableError otherwise.
    std::size_t correct(std::vector<std::uint8_t>& block) const
    {
        const std::size_t n = block.size();
        if (n <= static_cast<std::size_t>(parity_) || n > 255) {
            throw UncorrectableError("Reed-Solomon block length " + std::to_string(n) + " invalid for parity " +
                                     std::to_string(parity_));
        }
        const auto& gf = GaloisField::instance();
        auto synd = syndromes(block);
        bool clean = true;
        for (auto s : synd) clean = clean && s == 0;
        if (clean) return 0;

        // Berlekamp-Massey; locator coefficients in ascending degree.
        std::vector<std::uint8_t> lambda{1}, prev{1};
        int degree = 0;
        int shift = 1;
        std::uint8_t prev_disc = 1;
        for (int step = 0; step < parity_; ++step) {
            std::uint8_t disc = synd[static_cast<std::size_t>(step)];
            for (int i = 1; i <= degree && i < static_cast<int>(lambda.size()); ++i) {
                disc ^= gf.mul(lambda[static_cast<std::size_t>(i)], synd[static_cast<std::size_t>(step - i)]);
            }
            if (disc == 0) {
                ++shift;
                continue;
            }
            const std::uint8_t coef = gf.div(disc, prev_disc);
            std::vector<std::uint8_t> updated = lambda;
            if (updated.size() < prev.size() + static_cast<std::size_t>(shift)) {
                updated.resize(prev.size() + static_cast<std::size_t>(shift), 0);
            }
            for (std::size_t i = 0; i < prev.size(); ++i) {
                updated[i + static_cast<std::size_t>(shift)] ^= gf.mul(coef, prev[i]);
            }
            if (2 * degree <= step) {
                prev = lambda;
                degree = step + 1 - degree;
                prev_disc = disc;
                shift = 1;
            } else {
                ++shift;
            }
            lambda = std::move(updated);
        }
        lambda.resize(static_cast<std::size_t>(degree) + 1);
        if (2 * degree > parity_) throw UncorrectableError("too many errors for Reed-Solomon block");

        // Chien search restricted to the positions that exist in a shortened block.
        std::vector<std::size_t> positions;
        std::vector<std::uint8_t> locators;
        for (std::size_t j = 0; j < n; ++j) {
            const int power = static_cast<int>(n - 1 - j);
            const std::uint8_t x_inv = gf.exp(-power);
            if (eval_ascending(lambda, x_inv) == 0) {
                positions.push_back(j);
                locators.push_back(gf.exp(power));
            }
        }
        if (positions.size() != static_cast<std::size_t>(degree)) {
            throw UncorrectableError("Reed-Solomon error locator roots do not match error count");
        }

        // Forney: omega = S(x) * lambda(x) mod x^parity; e = X * omega(X^-1) / lambda'(X^-1).
        std::vector<std::uint8_t> omega(static_cast<std::size_t>(parity_), 0);
        for (std::size_t i = 0; i < synd.size(); ++i) {
            for (std::size_t j = 0; j < lambda.size() && i + j < omega.size(); ++j) {
                omega[i + j] ^= gf.mul(synd[i], lambda[j]);
            }
        }
        std::vector<std::uint8_t> derivative(lambda.size() > 1 ? lambda.size() - 1 : 1, 0);
        for (std::size_t i = 1; i < lambda.size(); i += 2) derivative[i - 1] = lambda[i];

        for (std::size_t k = 0; k < positions.size(); ++k) {
            const std::uint8_t x_inv = gf.inverse(locators[k]);
            const std::uint8_t denom = eval_ascending(derivative, x_inv);
            if (denom == 0) throw UncorrectableError("Reed-Solomon error magnitude undefined");
            const std::uint8_t magnitude = gf.mul(locators[k], gf.div(eval_ascending(omega, x_inv), denom));
            block[positions[k]] ^= magnitude;
        }

        for (auto s : syndromes(block)) {
            if (s != 0) throw UncorrectableError("Reed-Solomon correction left nonzero syndromes");
        }
        return positions.size();
    }

    std::vector<std::uint8_t> syndromes(std::span<const std::uint8_t> block) const
    {
        const auto& gf = GaloisField::instance();
        std::vector<std::uint8_t> out(static_cast<std::size_t>(parity_), 0);
        for (int i = 0; i < parity_; ++i) {
            const std::uint8_t x = gf.exp(i);
            std::uint8_t acc = 0;
            for (std::uint8_t c : block) acc = static_cast<std::uint8_t>(gf.mul(acc, x) ^ c);
            out[static_cast<std::size_t>(i)] = acc;
        }
        return out;
    }

private:
    static std::uint8_t eval_ascending(const std::vector<std::uint8_t>& poly, std::uint8_t x)
    {
        const auto& gf = GaloisField::instance();
        std::uint8_t acc = 0;
        for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = static_cast<std::uint8_t>(gf.mul(acc, x) ^ *it);
        return acc;
    }

    int parity_;
    std::vector<std::uint8_t> generator_;  // descending degree, monic
};

}  // namespace ganash::rs
