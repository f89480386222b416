// Acceptance gate. Prints one PASS/FAIL line per criterion (1..8) and exits
// non-zero when any criterion fails for a reason other than the documented
// decoding-radius limit of criterion 3 (see README, "Known limits").

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "ganash/ganash.hpp"
#include "support/gradcheck.hpp"
#include "support/tempdir.hpp"

using namespace ganash;
using ganash::testing::check_gradients;
using ganash::testing::GradReport;
using ganash::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool known_limit = false;  // fails only because no decoder can satisfy it
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Metric oracles

ImageBuffer random_image(std::mt19937_64& rng, std::size_t w, std::size_t h)
{
    ImageBuffer img(w, h, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng());
    return img;
}

Outcome metric_oracles()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ImageBuffer a = random_image(rng, 8, 8);
        ImageBuffer b = a;
        // Mix of light and heavy distortion so PSNR spans a wide range.
        const int amp = 1 + trial % 64;
        for (auto& p : b.pixels) p = static_cast<std::uint8_t>(std::clamp<int>(p + static_cast<int>(rng() % (2 * amp + 1)) - amp, 0, 255));
        if (trial == 0) b = a;

        const std::size_t n = a.pixels.size();
        double sse = 0, sa = 0, sb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = double(a.pixels[i]) - double(b.pixels[i]);
            sse += d * d;
            sa += a.pixels[i];
            sb += b.pixels[i];
        }
        const double mse = sse / double(n);
        const double ma = sa / double(n), mb = sb / double(n);
        double cov = 0, va = 0, vb = 0;
        for (std::size_t i = 0; i < n; ++i) {
            cov += (a.pixels[i] - ma) * (b.pixels[i] - mb);
            va += (a.pixels[i] - ma) * (a.pixels[i] - ma);
            vb += (b.pixels[i] - mb) * (b.pixels[i] - mb);
        }
        const double r = cov / std::sqrt(va * vb);
        const std::size_t bits = rng() % 1000;

        worst = std::max(worst, std::abs(mse_metric(a, b) - mse));
        worst = std::max(worst, std::abs(mse_metric(a, b, PixelScale::unit) - mse / (255.0 * 255.0)));
        worst = std::max(worst, std::abs(cross_correlation(a, b) - r));
        worst = std::max(worst, std::abs(payload(bits, 8, 8) - double(bits) / 64.0));
        if (mse == 0) {
            if (!std::isinf(psnr(a, b))) worst = 1;
        } else {
            worst = std::max(worst, std::abs(psnr(a, b) - 10.0 * std::log10(255.0 * 255.0 / mse)));
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && t < 5, "100 pairs, max deviation " + fmt("%.3g", worst) + ", " + fmt("%.2f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Gradient suite

Tensor<double> bits_like(Shape4 s, std::mt19937_64& rng)
{
    std::vector<double> v(s.numel());
    for (auto& x : v) x = double(rng() & 1u);
    return Tensor<double>::from_data(s, std::move(v));
}

std::vector<Tensor<double>> trainable(NetworkParams<double>& p)
{
    std::vector<Tensor<double>> out;
    for (auto& t : p.tensors) {
        if (t.trainable) out.push_back(t.value);
    }
    return out;
}

Outcome gradient_suite()
{
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int instances = 20;
    std::mt19937_64 rng(77);
    using Check = std::function<GradReport(int)>;
    auto dims = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    auto target = [&](Shape4 s) { return random_tensor(s, rng, -1, 1, false); };

    std::vector<std::pair<std::string, Check>> suite;
    auto conv_case = [&](std::size_t cin, std::size_t stride, Padding pad) {
        return [&, cin, stride, pad](int) {
            const std::size_t h = dims(4, 6), w = dims(4, 6), cout = dims(1, 3), k = pad == Padding::valid ? 3 : 1 + 2 * (rng() % 2);
            auto x = random_tensor({2, h, w, cin}, rng);
            auto kern = random_tensor({k, k, cin, cout}, rng);
            auto b = random_tensor({1, 1, 1, cout}, rng);
            auto y = target(conv2d(x.detach(), kern.detach(), b.detach(), stride, pad).shape());
            return check_gradients({x, kern, b}, [&](const auto& in) { return mse_loss(conv2d(in[0], in[1], in[2], stride, pad), y); }, 24, rng());
        };
    };
    suite.emplace_back("conv2d (im2col)", conv_case(3, 1, Padding::same));
    suite.emplace_back("conv2d (tap GEMM)", conv_case(16, 1, Padding::same));
    suite.emplace_back("conv2d (stride 2)", conv_case(2, 2, Padding::same));
    suite.emplace_back("conv2d (valid)", conv_case(2, 1, Padding::valid));
    for (auto mode : {BatchNormMode::train, BatchNormMode::infer}) {
        suite.emplace_back(mode == BatchNormMode::train ? "batch_norm (train)" : "batch_norm (infer)", [&, mode](int) {
            const std::size_t c = dims(1, 3);
            auto x = random_tensor({2, dims(2, 3), dims(2, 3), c}, rng, -2, 2);
            auto g = random_tensor({1, 1, 1, c}, rng, 0.5, 1.5);
            auto be = random_tensor({1, 1, 1, c}, rng);
            RunningStats<double> rs{random_tensor({1, 1, 1, c}, rng, -1, 1, false), random_tensor({1, 1, 1, c}, rng, 0.5, 2, false)};
            auto y = target(x.shape());
            return check_gradients({x, g, be}, [&](const auto& in) { return mse_loss(batch_norm(in[0], in[1], in[2], rs, mode), y); });
        });
    }
    const std::vector<std::pair<std::string, std::function<Tensor<double>(const Tensor<double>&)>>> unary{
        {"leaky_relu", [](const Tensor<double>& x) { return leaky_relu(x, 0.2); }},
        {"tanh", [](const Tensor<double>& x) { return tanh(x); }},
        {"sigmoid", [](const Tensor<double>& x) { return sigmoid(x); }},
        {"atanh", [](const Tensor<double>& x) { return atanh(x); }},
        {"clamp", [](const Tensor<double>& x) { return clamp(x, -0.5, 0.5); }},
        {"square", [](const Tensor<double>& x) { return square(x); }},
    };
    for (const auto& [name, op] : unary) {
        suite.emplace_back(name, [&, op = op, atanh_case = name == "atanh"](int) {
            auto x = atanh_case ? random_tensor({1, dims(2, 4), dims(2, 4), 2}, rng, -0.9, 0.9)
                                : random_tensor({1, dims(2, 4), dims(2, 4), 2}, rng, -2, 2);
            auto y = target(x.shape());
            return check_gradients({x}, [&](const auto& in) { return mse_loss(op(in[0]), y); });
        });
    }
    suite.emplace_back("add", [&](int) {
        const Shape4 s{2, dims(1, 3), dims(1, 3), 2};
        auto a = random_tensor(s, rng), b = random_tensor(s, rng);
        return check_gradients({a, b}, [&](const auto& in) { return sum(square(add(in[0], in[1]))); });
    });
    suite.emplace_back("sub", [&](int) {
        const Shape4 s{2, dims(1, 3), dims(1, 3), 2};
        auto a = random_tensor(s, rng), b = random_tensor(s, rng);
        return check_gradients({a, b}, [&](const auto& in) { return sum(square(sub(in[0], in[1]))); });
    });
    suite.emplace_back("add_n", [&](int) {
        const Shape4 s{1, dims(1, 3), dims(1, 3), 2};
        auto a = random_tensor(s, rng), b = random_tensor(s, rng), c = random_tensor(s, rng);
        auto y = target(s);
        return check_gradients({a, b, c}, [&](const auto& in) { return mse_loss(add_n(std::vector{in[0], in[1], in[2]}), y); });
    });
    suite.emplace_back("concat_channels", [&](int) {
        const std::size_t h = dims(1, 3), w = dims(1, 3), ca = dims(1, 3), cb = dims(1, 3);
        auto a = random_tensor({2, h, w, ca}, rng), b = random_tensor({2, h, w, cb}, rng);
        auto y = target({2, h, w, ca + cb});
        return check_gradients({a, b}, [&](const auto& in) { return mse_loss(concat_channels(in[0], in[1]), y); });
    });
    suite.emplace_back("reduce_mean", [&](int k) {
        const Axes choices[] = {Axes::all(), Axes::spatial(), Axes{true, false, false, true}, Axes{false, true, false, false}};
        const Axes ax = choices[k % 4];
        auto a = random_tensor({2, dims(1, 3), dims(1, 3), 2}, rng);
        auto y = target(reduce_mean(a.detach(), ax).shape());
        return check_gradients({a}, [&](const auto& in) { return mse_loss(reduce_mean(in[0], ax), y); });
    });
    suite.emplace_back("sum", [&](int) {
        auto a = random_tensor({2, dims(1, 3), dims(1, 3), 2}, rng);
        return check_gradients({a}, [&](const auto& in) { return sum(tanh(in[0])); });
    });
    suite.emplace_back("mse_loss", [&](int) {
        const Shape4 s{2, dims(1, 3), dims(1, 3), 2};
        auto a = random_tensor(s, rng), b = random_tensor(s, rng);
        return check_gradients({a, b}, [&](const auto& in) { return mse_loss(in[0], in[1]); });
    });
    suite.emplace_back("sce_loss", [&](int) {
        const Shape4 s{2, dims(1, 3), dims(1, 3), 2};
        auto x = random_tensor(s, rng, -4, 4);
        auto t = bits_like(s, rng);
        return check_gradients({x}, [&](const auto& in) { return sce_loss(in[0], t); });
    });
    suite.emplace_back("critic_loss", [&](int) {
        auto a = random_tensor({3, 1, 1, 1}, rng), b = random_tensor({3, 1, 1, 1}, rng);
        return check_gradients({a, b}, [&](const auto& in) { return critic_loss(in[0], in[1]); });
    });
    suite.emplace_back("critic network", [&](int k) {
        auto p = init_params<double>(Arch::critic, 1, static_cast<std::uint64_t>(k), 4);
        auto y = random_tensor({2, dims(3, 6), dims(3, 6), 3}, rng, -0.9, 0.9, false);
        return check_gradients(trainable(p), [&](const auto&) { return sum(critic_forward(p, y)); }, 10, rng());
    });
    suite.emplace_back("encoder network", [&](int k) {
        const int d = 1 + k % 4;
        auto p = init_params<double>(Arch::encoder, d, static_cast<std::uint64_t>(k), 4);
        for (auto& v : p.at("stage4.conv.weight").mutable_data()) v = (double(rng() % 1000) / 1000 - 0.5) * 0.3;
        const std::size_t h = dims(3, 6), w = dims(3, 6);
        auto cover = random_tensor({1, h, w, 3}, rng, -0.9, 0.9, false);
        auto msg = bits_like({1, h, w, std::size_t(d)}, rng);
        return check_gradients(trainable(p), [&](const auto&) { return mse_loss(cover, encoder_forward(p, cover, msg)); }, 10, rng());
    });
    suite.emplace_back("decoder network", [&](int k) {
        const int d = 1 + k % 4;
        auto p = init_params<double>(Arch::decoder, d, static_cast<std::uint64_t>(k), 4);
        const std::size_t h = dims(3, 6), w = dims(3, 6);
        auto s = random_tensor({2, h, w, 3}, rng, -0.9, 0.9, false);
        auto msg = bits_like({2, h, w, std::size_t(d)}, rng);
        return check_gradients(trainable(p), [&](const auto&) { return sce_loss(decoder_forward(p, s), msg); }, 10, rng());
    });

    bool all = true;
    double worst = 0;
    std::string worst_name;
    std::size_t checked = 0, skipped = 0;
    std::ostringstream failures;
    for (auto& [name, check] : suite) {
        for (int k = 0; k < instances; ++k) {
            const GradReport rep = check(k);
            checked += rep.checked;
            skipped += rep.skipped;
            if (rep.worst > worst) {
                worst = rep.worst;
                worst_name = name;
            }
            if (!rep.ok()) {
                all = false;
                failures << " [" << name << " #" << k << ": " << rep.worst << " at " << rep.where << "]";
            }
        }
    }
    const double t = seconds_since(t0);
    return {all && t < 120,
            std::to_string(suite.size()) + " operators/networks x " + std::to_string(instances) + " instances, " +
                std::to_string(checked) + " entries, worst rel. error " + fmt("%.2e", worst) + " (" + worst_name + "), " +
                std::to_string(skipped) + " kink entries skipped, " + fmt("%.1f", t) + " s" + failures.str()};
}

// ---------------------------------------------------------------------------
// 3. Reed-Solomon

// Solves for the (unique up to scale) codeword supported on `support`,
// normalised so its last support entry is 1. Columns of the parity check
// are alpha^(i*(n-1-j)) for syndrome index i and position j.
std::vector<std::uint8_t> codeword_on(const std::vector<std::size_t>& support, std::size_t n, int parity)
{
    const auto& gf = rs::GaloisField::instance();
    const std::size_t m = static_cast<std::size_t>(parity);
    // Unknowns: values at support[0..m-1]; the last support entry is fixed to 1.
    std::vector<std::vector<std::uint8_t>> a(m, std::vector<std::uint8_t>(m + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k <= m; ++k) {
            const int power = static_cast<int>(i) * static_cast<int>(n - 1 - support[k]);
            a[i][k] = gf.exp(power);  // column k; column m moves to the right-hand side (char 2: no sign)
        }
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        while (a[piv][col] == 0) ++piv;
        std::swap(a[piv], a[col]);
        const std::uint8_t inv = gf.inverse(a[col][col]);
        for (auto& v : a[col]) v = gf.mul(v, inv);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col || a[r][col] == 0) continue;
            const std::uint8_t f = a[r][col];
            for (std::size_t k = 0; k <= m; ++k) a[r][k] ^= gf.mul(f, a[col][k]);
        }
    }
    std::vector<std::uint8_t> c(n, 0);
    for (std::size_t k = 0; k < m; ++k) c[support[k]] = a[k][m];
    c[support[m]] = 1;
    return c;
}

std::uint32_t pack_syndrome(const std::vector<std::uint8_t>& s)
{
    return std::uint32_t(s[0]) << 24 | std::uint32_t(s[1]) << 16 | std::uint32_t(s[2]) << 8 | s[3];
}

Outcome reed_solomon()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(31337);
    std::ostringstream why;
    bool contract = true;

    // Round trip on 1000 random texts with random parity and length.
    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string text(1 + rng() % 700, '\0');
        for (auto& ch : text) ch = static_cast<char>(rng());
        const int parity = 2 * static_cast<int>(1 + rng() % 32);
        round_trips += bits_to_text(text_to_bits(text, parity), parity) == text ? 1 : 0;
    }
    if (round_trips != 1000) {
        contract = false;
        why << " round trips " << round_trips << "/1000;";
    }

    // Exhaustive: every pattern of at most two symbol errors in a 10+4 block.
    rs::Codec codec(4);
    std::vector<std::uint8_t> data(10);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    const auto clean = codec.encode(data);
    const std::size_t n = clean.size();
    std::size_t corrected = 0, patterns = 0;
    std::vector<std::uint32_t> radius2;  // syndromes of all error patterns of weight <= 2
    radius2.reserve(6'000'000);
    radius2.push_back(0);
    std::vector<std::uint8_t> block;
    for (std::size_t p = 0; p < n; ++p) {
        for (unsigned v = 1; v < 256; ++v) {
            block = clean;
            block[p] ^= static_cast<std::uint8_t>(v);
            radius2.push_back(pack_syndrome(codec.syndromes(block)));
            ++patterns;
            if (codec.correct(block) == 1 && block == clean) ++corrected;
            for (std::size_t q = p + 1; q < n; ++q) {
                for (unsigned u = 1; u < 256; ++u) {
                    block = clean;
                    block[p] ^= static_cast<std::uint8_t>(v);
                    block[q] ^= static_cast<std::uint8_t>(u);
                    radius2.push_back(pack_syndrome(codec.syndromes(block)));
                    ++patterns;
                    if (codec.correct(block) == 2 && block == clean) ++corrected;
                }
            }
        }
    }
    std::sort(radius2.begin(), radius2.end());
    const bool distinct = std::adjacent_find(radius2.begin(), radius2.end()) == radius2.end();
    if (corrected != patterns || !distinct) {
        contract = false;
        why << " corrected " << corrected << "/" << patterns << (distinct ? "" : ", syndromes collide") << ";";
    }

    // Exhaustive: every weight-3 pattern that lies within distance 2 of
    // another codeword is a 3-subset of a weight-5 codeword's support.
    // Enumerate all C(14,5) * 255 weight-5 codewords and their 10 splits.
    std::size_t undetectable = 0, miscorrected_as_expected = 0;
    const auto& gf = rs::GaloisField::instance();
    std::vector<std::size_t> sup(5);
    for (sup[0] = 0; sup[0] < n; ++sup[0])
        for (sup[1] = sup[0] + 1; sup[1] < n; ++sup[1])
            for (sup[2] = sup[1] + 1; sup[2] < n; ++sup[2])
                for (sup[3] = sup[2] + 1; sup[3] < n; ++sup[3])
                    for (sup[4] = sup[3] + 1; sup[4] < n; ++sup[4]) {
                        const auto base = codeword_on(sup, n, 4);
                        for (unsigned scale = 1; scale < 256; ++scale) {
                            std::vector<std::uint8_t> c(n);
                            for (std::size_t j = 0; j < n; ++j) c[j] = gf.mul(base[j], static_cast<std::uint8_t>(scale));
                            std::vector<std::uint8_t> target = clean;
                            for (std::size_t j = 0; j < n; ++j) target[j] ^= c[j];
                            for (int mask = 0; mask < 32; ++mask) {
                                if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
                                block = clean;
                                for (int k = 0; k < 5; ++k) {
                                    if (mask >> k & 1) block[sup[static_cast<std::size_t>(k)]] ^= c[sup[static_cast<std::size_t>(k)]];
                                }
                                ++undetectable;
                                try {
                                    if (codec.correct(block) == 2 && block == target) ++miscorrected_as_expected;
                                } catch (const rs::UncorrectableError&) {
                                }
                            }
                        }
                    }
    const std::size_t weight3_total = 364ull * 255 * 255 * 255;
    if (miscorrected_as_expected != undetectable) {
        contract = false;
        why << " undetectable patterns handled " << miscorrected_as_expected << "/" << undetectable << ";";
    }

    // Sampled: beyond-radius patterns of weight 3..8 raise exactly when
    // their syndrome is not that of a weight <= 2 pattern.
    std::size_t sampled = 0, raised = 0, agree = 0;
    for (int trial = 0; trial < 400'000; ++trial) {
        const std::size_t weight = 3 + static_cast<std::size_t>(trial) % 6;
        std::vector<std::size_t> pos(n);
        std::iota(pos.begin(), pos.end(), 0);
        std::shuffle(pos.begin(), pos.end(), rng);
        block = clean;
        for (std::size_t e = 0; e < weight; ++e) block[pos[e]] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        const bool within = std::binary_search(radius2.begin(), radius2.end(), pack_syndrome(codec.syndromes(block)));
        bool threw = false;
        try {
            codec.correct(block);
        } catch (const rs::UncorrectableError&) {
            threw = true;
        }
        ++sampled;
        raised += threw ? 1 : 0;
        agree += threw != within ? 1 : 0;
    }
    if (agree != sampled) {
        contract = false;
        why << " bounded-distance contract held on " << agree << "/" << sampled << " samples;";
    }

    const double t = seconds_since(t0);
    if (t >= 60) {
        contract = false;
        why << " runtime " << t << " s;";
    }
    std::ostringstream detail;
    detail << "1000/1000 round trips; " << corrected << "/" << patterns
           << " patterns of <=2 errors corrected (exhaustive); beyond capability: " << undetectable << " of "
           << weight3_total << " weight-3 patterns (" << fmt("%.2e", double(undetectable) / double(weight3_total))
           << ") lie within distance 2 of another codeword and are necessarily miscorrected, not raised "
           << "(exhaustively enumerated); " << raised << "/" << sampled
           << " sampled weight 3..8 patterns raised, decoder agrees with the distance-2 syndrome oracle on all; "
           << fmt("%.1f", t) << " s" << why.str();
    // The literal requirement (every beyond-capability corruption raises) is
    // unsatisfiable for a code of minimum distance parity+1; everything a
    // decoder can guarantee is checked above.
    return {false, detail.str(), contract};
}

// ---------------------------------------------------------------------------
// 4. LSB

Outcome lsb_quality()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4);
    std::size_t total = 0, correct = 0;
    for (int i = 0; i < 10'000; ++i) {
        const LsbConfig cfg{1 + static_cast<int>(rng() % 2)};
        ImageBuffer cover(4 + rng() % 13, 4 + rng() % 13, 3);
        for (auto& p : cover.pixels) p = static_cast<std::uint8_t>(rng());
        std::vector<std::uint8_t> bits(rng() % (lsb_capacity(cover, cfg) + 1));
        for (auto& b : bits) b = rng() & 1u;
        const auto back = lsb_decode(lsb_encode(cover, bits, cfg), bits.size(), cfg).bits;
        total += bits.size();
        for (std::size_t k = 0; k < bits.size(); ++k) correct += back[k] == bits[k] ? 1 : 0;
    }
    const double accuracy = double(correct) / double(total);
    double min_psnr = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 20; ++i) {
        const ImageBuffer cover = natural_image(64, 64, 500 + static_cast<std::uint64_t>(i));
        std::vector<std::uint8_t> bits(lsb_capacity(cover, {1}));
        for (auto& b : bits) b = rng() & 1u;
        min_psnr = std::min(min_psnr, psnr(cover, lsb_encode(cover, bits)));
    }
    const ImageBuffer probe(64, 64, 3);
    const double lsb_payload = payload(lsb_capacity(probe, {1}), 64, 64);
    const double gan_payload = payload(64 * 64 * 4, 64, 64);
    const double t = seconds_since(t0);
    return {accuracy == 1.0 && min_psnr >= 51.0 && lsb_payload < gan_payload && t < 30,
            "bit accuracy " + fmt("%.6f", accuracy) + " over 10000 messages (" + std::to_string(total) +
                " bits); min PSNR at full capacity " + fmt("%.3f", min_psnr) + " dB on 20 images; max payload LSB " +
                fmt("%.0f", lsb_payload) + " < learned D=4 " + fmt("%.0f", gan_payload) + " bits/pixel; " +
                fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 5, 6. Desk-scale training and determinism

constexpr int desk_steps = 400;

struct DeskRun {
    TrainState<float> state;
    std::string csv;
    double seconds = 0;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrainConfig desk_config(const fs::path& images, const fs::path& ckpt)
{
    TrainConfig cfg;  // default learning rates and clip bounds
    cfg.image_dir = images.string();
    cfg.checkpoint_dir = ckpt.string();
    cfg.data_depth = 1;
    cfg.batch_size = 4;
    cfg.crop = 64;
    cfg.steps = desk_steps;
    cfg.checkpoint_every = desk_steps;
    cfg.seed = 0;
    return cfg;
}

DeskRun desk_run(const TrainConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    DeskRun r;
    r.state = train(cfg);
    r.seconds = seconds_since(t0);
    r.csv = slurp(fs::path(cfg.checkpoint_dir) / "losses.csv");
    return r;
}

Outcome desk_training(const DeskRun& run, const std::vector<ImageBuffer>& covers, double budget_seconds)
{
    auto enc = run.state.encoder;
    auto dec = run.state.decoder;
    const auto q = evaluate_channel(enc, dec, covers, 7);
    return {q.bit_accuracy >= 0.95 && q.psnr >= 30.0 && budget_seconds < 900,
            std::to_string(desk_steps) + " steps, bit accuracy " + fmt("%.6f", q.bit_accuracy) +
                " (fresh messages), PSNR " + fmt("%.2f", q.psnr) + " dB pooled, min " + fmt("%.2f", q.min_psnr) +
                " dB per image; " + fmt("%.0f", run.seconds) + " s per run, " + fmt("%.0f", budget_seconds) +
                " s for both runs"};
}

Outcome determinism(const DeskRun& a, const DeskRun& b, const fs::path& images)
{
    auto collect = [&](std::size_t workers) {
        auto src = scan_image_dir(images, 64, 64);
        src.workers = workers;
        src.batch_size = 4;
        src.seed = 0;
        std::vector<std::vector<float>> out;
        for (std::size_t epoch = 0; epoch < 3; ++epoch) {
            BatchStream stream(src, epoch);
            while (auto batch = stream.next()) out.emplace_back(batch->images.data().begin(), batch->images.data().end());
        }
        return out;
    };
    const bool same_csv = !a.csv.empty() && a.csv == b.csv;
    const auto one = collect(1), four = collect(4);
    const bool same_batches = one == four && !one.empty();
    return {same_csv && same_batches,
            std::string("loss CSVs ") + (same_csv ? "identical" : "DIFFER") + " (" +
                std::to_string(std::count(a.csv.begin(), a.csv.end(), '\n')) + " lines); coworkers 1 vs 4: " +
                std::to_string(one.size()) + " batches over 3 epochs " + (same_batches ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// 7. Fixpoint

Outcome fixpoint()
{
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig cfg;
    cfg.data_depth = 1;
    cfg.hidden_dims = 8;
    cfg.encoder_bypass = true;
    auto s = make_train_state<float>(cfg);
    std::vector<ImageBuffer> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(natural_image(16, 16, 900 + static_cast<std::uint64_t>(i)));
    const auto covers = images_to_tensor<float>(imgs);
    bool exact = true;
    for (std::uint64_t k = 1; k <= 5; ++k) {
        const auto rec = triplet_step(s, cfg, covers, sample_messages<float>({4, 16, 16, 1}, 0, k));
        exact = exact && rec.l_enc == 0.0 && rec.l_critic == 0.0;
    }
    const double t = seconds_since(t0);
    return {exact && t < 1, std::string("5 bypass steps: l_enc and l_critic ") + (exact ? "exactly 0" : "NONZERO") + ", " +
                                fmt("%.3f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 8. End-to-end CLI

int shell(const std::string& cmd)
{
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::optional<double> find_seconds(const std::string& text, const std::string& tag)
{
    std::smatch m;
    if (std::regex_search(text, m, std::regex(tag + " ([0-9.eE+-]+) s"))) return std::stod(m[1]);
    return std::nullopt;
}

Outcome end_to_end(const fs::path& ckpt, const fs::path& cover, const fs::path& work)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::string text;
    std::mt19937_64 rng(256);
    while (text.size() < 256) text += static_cast<char>(' ' + rng() % 95);
    {
        std::ofstream(work / "message.txt", std::ios::binary) << text;
    }
    const std::string cli = std::string("'") + GANASH_CLI + "'";
    auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    const int enc = shell(cli + " encode --weights " + q(ckpt) + " --data-depth 1 --cover " + q(cover) +
                          " --message-file " + q(work / "message.txt") + " --out " + q(work / "stego.png") + " >" +
                          q(work / "enc.out") + " 2>&1");
    const int dec = shell(cli + " decode --weights " + q(ckpt) + " --data-depth 1 --stego " + q(work / "stego.png") +
                          " --out " + q(work / "recovered.txt") + " >" + q(work / "dec.out") + " 2>&1");
    const auto t2e = find_seconds(slurp(work / "enc.out"), "T2E");
    const auto t2d = find_seconds(slurp(work / "dec.out"), "T2D");
    const bool exact = dec == 0 && slurp(work / "recovered.txt") == text;

    // Count the symbol errors RS had to repair.
    std::string note;
    if (exact) {
        auto decoder = load_params<float>(CheckpointPaths{ckpt}.weights(Arch::decoder), Arch::decoder);
        const auto d = gan_decode_text(decoder, read_png(work / "stego.png"));
        const auto sent = text_to_bits(text);
        if (d.received.bits.size() == sent.bits.size()) {
            note = ", channel bit accuracy " + fmt("%.6f", bit_accuracy(sent, d.received)) + " before RS";
        }
    }
    const double t = seconds_since(t0);
    const bool timed_ok = t2e && t2d && *t2e + *t2d < 1.0;
    return {enc == 0 && exact && timed_ok && t < 10,
            "256-byte text, parity 32: exit codes " + std::to_string(enc) + "/" + std::to_string(dec) + ", text " +
                (exact ? "recovered exactly" : "NOT recovered") + note + "; T2E " + (t2e ? fmt("%.4f", *t2e) : "?") +
                " s + T2D " + (t2d ? fmt("%.4f", *t2d) : "?") + " s; " + fmt("%.2f", t) + " s wall"};
}

}  // namespace

int main()
{
    std::cout << std::unitbuf;
    std::vector<Outcome> results(9);
    auto report = [&](int k, const std::string& title, Outcome o) {
        std::cout << "CRITERION " << k << " " << (o.pass ? "PASS" : "FAIL") << ": " << title << ": " << o.detail
                  << (o.known_limit ? " [known limit, see README]" : "") << '\n';
        results[static_cast<std::size_t>(k)] = std::move(o);
    };

    report(1, "metric oracle equivalence", metric_oracles());
    report(2, "gradient suite", gradient_suite());
    report(3, "codec suite", reed_solomon());
    report(4, "LSB exactness and quality", lsb_quality());

    ganash::testing::TempDir work;
    const fs::path images = work / "covers";
    fs::create_directories(images);
    std::vector<ImageBuffer> covers;
    for (int i = 0; i < 8; ++i) {
        covers.push_back(natural_image(64, 64, 100 + static_cast<std::uint64_t>(i)));
        write_png(images / ("cover" + std::to_string(i) + ".png"), covers.back());
    }
    const auto t0 = std::chrono::steady_clock::now();
    const DeskRun first = desk_run(desk_config(images, work / "run_a"));
    const DeskRun second = desk_run(desk_config(images, work / "run_b"));
    report(5, "desk-scale training", desk_training(first, covers, seconds_since(t0)));
    report(6, "determinism", determinism(first, second, images));
    report(7, "equal-distribution fixpoint", fixpoint());
    report(8, "end-to-end CLI", end_to_end(work / "run_a", images / "cover0.png", work.path()));

    int passed = 0, regressions = 0;
    for (int k = 1; k <= 8; ++k) {
        const auto& o = results[static_cast<std::size_t>(k)];
        passed += o.pass ? 1 : 0;
        regressions += !o.pass && !o.known_limit ? 1 : 0;
    }
    std::cout << "SUMMARY: " << passed << "/8 criteria pass";
    if (passed < 8) std::cout << "; " << (8 - passed - regressions) << " fail only on a documented impossibility";
    std::cout << '\n';
    return regressions == 0 ? 0 : 1;
}
