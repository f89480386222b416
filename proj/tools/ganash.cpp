// Command-line front end: train, encode, decode, evaluate and bench over PNG files.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ganash/ganash.hpp"

namespace fs = std::filesystem;
using namespace ganash;

namespace {

enum ExitCode : int { ok = 0, usage = 2, divergence = 3, capacity = 4, decode_failure = 5 };

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << bytes;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

NetworkParams<float> load_net(const fs::path& dir, Arch arch, std::optional<int> expected_depth)
{
    auto p = load_params<float>(CheckpointPaths{dir}.weights(arch), arch);
    if (expected_depth && *expected_depth != p.data_depth) {
        throw ValidationError("data depth mismatch: " + std::string(arch_name(arch)) + " weights have D=" +
                              std::to_string(p.data_depth) + " but --data-depth is " +
                              std::to_string(*expected_depth));
    }
    return p;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config, images, checkpoints;
    std::optional<int> steps, data_depth;
    std::optional<std::uint64_t> seed;
    bool resume = false;
    std::vector<std::string> overrides;
};

int run_train(const TrainArgs& a)
{
    TrainConfig cfg;
    if (!a.config.empty()) cfg = load_config(a.config);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (!a.images.empty()) cfg.image_dir = a.images;
    if (!a.checkpoints.empty()) cfg.checkpoint_dir = a.checkpoints;
    if (a.steps) cfg.steps = *a.steps;
    if (a.data_depth) cfg.data_depth = *a.data_depth;
    if (a.seed) cfg.seed = *a.seed;
    if (a.resume) cfg.resume = true;
    if (cfg.image_dir.empty()) throw ConfigError("image_dir", "no image directory: pass --images or set image_dir");
    if (!fs::is_directory(cfg.image_dir)) {
        throw ConfigError("image_dir", "--images: '" + cfg.image_dir + "' is not a readable directory");
    }

    TrainHooks hooks;
    const int report_every = std::max(1, cfg.steps / 20);
    hooks.on_step = [&](const LossRecord& r) {
        if (r.step % static_cast<std::uint64_t>(report_every) == 0 || r.step == static_cast<std::uint64_t>(cfg.steps)) {
            std::cerr << "step " << r.step << "/" << cfg.steps << "  l_enc " << r.l_enc << "  l_dec " << r.l_dec
                      << "  l_critic " << r.l_critic << "  l_T " << r.l_total << '\n';
        }
    };
    train(cfg, hooks);
    std::cerr << "checkpoints written to " << cfg.checkpoint_dir << '\n';
    return ok;
}

// ---------------------------------------------------------------------------

struct CodingArgs {
    std::string weights, method = "gan";
    std::optional<int> parity, data_depth;
    int planes = 1;

    bool lsb() const { return method == "lsb"; }
    int parity_or_default() const { return parity ? *parity : (lsb() ? 0 : default_parity_symbols); }

    void validate() const
    {
        if (method != "gan" && method != "lsb") throw ValidationError("--method must be gan or lsb");
        if (!lsb() && weights.empty()) throw ValidationError("--weights is required for --method gan");
    }
};

struct EncodeArgs : CodingArgs {
    std::string cover, out, text, message_file;
};

int run_encode(const EncodeArgs& a)
{
    a.validate();
    const std::string text = a.message_file.empty() ? a.text : read_file(a.message_file);
    if (text.empty()) throw ValidationError("message is empty");
    const ImageBuffer cover = read_png(a.cover);
    EncodedImage enc;
    if (a.lsb()) {
        enc = lsb_encode_text(cover, text, a.parity_or_default(), {a.planes});
    } else {
        auto encoder = load_net(a.weights, Arch::encoder, a.data_depth);
        enc = gan_encode_text(encoder, cover, text, a.parity_or_default());
    }
    write_png(a.out, enc.stego);
    const std::size_t bits = a.lsb() ? enc.message.size() : enc.planes.numel();
    std::cout << "T2E " << enc.seconds << " s\n"
              << "payload " << payload(bits, cover.height, cover.width) << " bits/pixel\n"
              << "message bits " << enc.message.size() << '\n';
    return ok;
}

struct DecodeArgs : CodingArgs {
    std::string stego, out;
};

int run_decode(const DecodeArgs& a)
{
    a.validate();
    const ImageBuffer stego = read_png(a.stego);
    DecodedText dec;
    if (a.lsb()) {
        dec = lsb_decode_text(stego, a.parity_or_default(), {a.planes});
    } else {
        auto decoder = load_net(a.weights, Arch::decoder, a.data_depth);
        dec = gan_decode_text(decoder, stego, a.parity_or_default());
    }
    if (a.out.empty()) {
        std::cout << dec.text;
        std::cout.flush();
    } else {
        write_file(a.out, dec.text);
    }
    std::cerr << "T2D " << dec.seconds << " s\n";
    return ok;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string cover, stego, sent, received, method = "unspecified", csv;
    std::optional<double> t2e, t2d;
    std::optional<std::size_t> payload_bits;
};

void write_report_csv(const fs::path& path, const std::vector<MetricsReport>& rows)
{
    std::ostringstream os;
    os << report_csv_header() << '\n';
    for (const auto& r : rows) os << report_csv_row(r) << '\n';
    write_file(path, os.str());
}

int run_evaluate(const EvaluateArgs& a)
{
    const ImageBuffer cover = read_png(a.cover);
    const ImageBuffer stego = read_png(a.stego);
    std::optional<std::string> sent, received;
    if (!a.sent.empty()) sent = read_file(a.sent);
    if (!a.received.empty()) received = read_file(a.received);
    std::size_t bits = 0;
    if (a.payload_bits) {
        bits = *a.payload_bits;
    } else if (sent) {
        bits = 8 * sent->size();
    }
    MetricsReport r = measure(cover, stego, bits);
    r.method = a.method;
    r.t2e = a.t2e;
    r.t2d = a.t2d;
    if (sent && received) {
        const auto to_bits = [](const std::string& s) {
            return bytes_to_bits({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
        };
        r.bit_accuracy = bit_accuracy(to_bits(*sent), to_bits(*received));
    }
    std::cout << report_table(r);
    if (!a.csv.empty()) write_report_csv(a.csv, {r});
    return ok;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string images, methods = "gan,lsb", weights, text, out;
    int parity = default_parity_symbols;
    int planes = 1;
};

MetricsReport aggregate(const std::string& method, const std::vector<MetricsReport>& rows)
{
    MetricsReport m;
    m.method = method;
    m.t2e = 0.0;
    m.t2d = 0.0;
    m.bit_accuracy = 0.0;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        m.payload += r.payload / n;
        *m.t2e += r.t2e.value_or(0.0) / n;
        *m.t2d += r.t2d.value_or(0.0) / n;
        m.mse += r.mse / n;
        m.mse_unit += r.mse_unit / n;
        m.psnr += r.psnr / n;
        m.r += r.r / n;
        *m.bit_accuracy += r.bit_accuracy.value_or(0.0) / n;
    }
    return m;
}

double channel_accuracy(const Tensor<float>& planes, const Tensor<float>& logits)
{
    std::size_t correct = 0;
    for (std::size_t i = 0; i < planes.numel(); ++i) {
        correct += (logits.data()[i] >= 0.0f) == (planes.data()[i] >= 0.5f) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(planes.numel());
}

int run_bench(const BenchArgs& a)
{
    const auto methods = split_list(a.methods);
    if (methods.empty()) throw ValidationError("--methods lists no method");
    for (const auto& m : methods) {
        if (m != "gan" && m != "lsb") throw ValidationError("unknown method '" + m + "' in --methods");
    }
    if (!fs::is_directory(a.images)) throw ValidationError("--images: '" + a.images + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.images)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("--images: no .png files in '" + a.images + "'");
    std::string text = a.text;
    if (text.empty()) {
        text = "The quick brown fox jumps over the lazy dog. ";
        while (text.size() < 256) text += text;
        text.resize(256);
    }

    std::optional<NetworkParams<float>> encoder, decoder;
    std::vector<MetricsReport> summary;
    for (const auto& method : methods) {
        const bool gan = method == "gan";
        if (gan && !encoder) {
            if (a.weights.empty()) throw ValidationError("--weights is required when --methods includes gan");
            encoder = load_net(a.weights, Arch::encoder, std::nullopt);
            decoder = load_net(a.weights, Arch::decoder, encoder->data_depth);
        }
        std::vector<MetricsReport> rows;
        std::size_t failures = 0;
        for (const auto& file : files) {
            try {
                const ImageBuffer cover = read_png(file);
                MetricsReport r;
                if (gan) {
                    const EncodedImage enc = gan_encode_text(*encoder, cover, text, a.parity);
                    const DecodedText dec = gan_decode_text(*decoder, enc.stego, a.parity);
                    if (dec.text != text) throw DecodeError("recovered text differs from the sent text");
                    r = measure(cover, enc.stego, enc.planes.numel());
                    r.t2e = enc.seconds;
                    r.t2d = dec.seconds;
                    r.bit_accuracy = channel_accuracy(enc.planes, dec.logits);
                } else {
                    const EncodedImage enc = lsb_encode_text(cover, text, 0, {a.planes});
                    const DecodedText dec = lsb_decode_text(enc.stego, 0, {a.planes});
                    r = measure(cover, enc.stego, enc.message.size());
                    r.t2e = enc.seconds;
                    r.t2d = dec.seconds;
                    r.bit_accuracy = bit_accuracy(std::span<const std::uint8_t>(enc.message.bits).subspan(length_header_bits),
                                                  std::span<const std::uint8_t>(dec.received.bits));
                }
                rows.push_back(r);
            } catch (const std::exception& e) {
                ++failures;
                std::cerr << "warning: " << method << " failed on " << file.filename().string() << ": " << e.what()
                          << '\n';
            }
        }
        if (failures) std::cerr << method << ": " << failures << " of " << files.size() << " images excluded\n";
        if (rows.empty()) {
            std::cerr << method << ": no successful images, no aggregate row\n";
            continue;
        }
        summary.push_back(aggregate(method, rows));
    }
    std::cout << report_csv_header() << '\n';
    for (const auto& r : summary) std::cout << report_csv_row(r) << '\n';
    if (!a.out.empty()) write_report_csv(a.out, summary);
    return ok;
}

// ---------------------------------------------------------------------------

template <typename F>
int guarded(F&& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "error: config key '" << e.key << "': " << e.what() << '\n';
        return usage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return divergence;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << " (required " << e.required_bits << ", available " << e.available_bits
                  << ")\n";
        return capacity;
    } catch (const DecodeError& e) {
        std::cerr << "error: " << e.what();
        if (e.block_index) std::cerr << " (block " << *e.block_index << ")";
        std::cerr << '\n';
        return decode_failure;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const CorruptionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const ImageIoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Image steganography with a learned encoder/decoder and an LSB baseline"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train encoder, decoder and critic on a directory of PNG images");
    train_cmd->add_option("--config", ta.config, "Config file (key = value lines)");
    train_cmd->add_option("--images", ta.images, "Directory of training PNGs (overrides image_dir)");
    train_cmd->add_option("--checkpoints", ta.checkpoints, "Checkpoint directory (overrides checkpoint_dir)");
    train_cmd->add_option("--steps", ta.steps, "Number of training steps");
    train_cmd->add_option("--seed", ta.seed, "Random seed");
    train_cmd->add_option("--data-depth", ta.data_depth, "Message planes per pixel (D)");
    train_cmd->add_flag("--resume", ta.resume, "Continue from the checkpoint in the checkpoint directory");
    train_cmd->add_option("--set", ta.overrides, "Override any config key, as key=value (repeatable)");

    EncodeArgs ea;
    auto* enc_cmd = app.add_subcommand("encode", "Hide a text message in a cover PNG");
    enc_cmd->add_option("--cover", ea.cover, "Cover PNG")->required()->check(CLI::ExistingFile);
    enc_cmd->add_option("--out", ea.out, "Output stego PNG")->required();
    auto* text_opt = enc_cmd->add_option("--text", ea.text, "Message text");
    auto* file_opt = enc_cmd->add_option("--message-file", ea.message_file, "File holding the message bytes")
                         ->check(CLI::ExistingFile);
    text_opt->excludes(file_opt);
    enc_cmd->add_option("--weights", ea.weights, "Checkpoint directory holding encoder.weights");
    enc_cmd->add_option("--method", ea.method, "gan or lsb")->check(CLI::IsMember({"gan", "lsb"}));
    enc_cmd->add_option("--parity", ea.parity, "Reed-Solomon parity bytes per block (gan default 32, lsb default 0 = none)");
    enc_cmd->add_option("--planes", ea.planes, "LSB planes per channel (1 or 2)");
    enc_cmd->add_option("--data-depth", ea.data_depth, "Expected D of the weights");

    DecodeArgs da;
    auto* dec_cmd = app.add_subcommand("decode", "Recover a text message from a stego PNG");
    dec_cmd->add_option("--stego", da.stego, "Stego PNG")->required()->check(CLI::ExistingFile);
    dec_cmd->add_option("--out", da.out, "Write the message here instead of stdout");
    dec_cmd->add_option("--weights", da.weights, "Checkpoint directory holding decoder.weights");
    dec_cmd->add_option("--method", da.method, "gan or lsb")->check(CLI::IsMember({"gan", "lsb"}));
    dec_cmd->add_option("--parity", da.parity, "Reed-Solomon parity bytes per block (must match encode)");
    dec_cmd->add_option("--planes", da.planes, "LSB planes per channel (1 or 2)");
    dec_cmd->add_option("--data-depth", da.data_depth, "Expected D of the weights");

    EvaluateArgs va;
    auto* eval_cmd = app.add_subcommand("evaluate", "Report distortion and accuracy metrics for a cover/stego pair");
    eval_cmd->add_option("--cover", va.cover, "Cover PNG")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--stego", va.stego, "Stego PNG")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--sent", va.sent, "File with the sent message")->check(CLI::ExistingFile);
    eval_cmd->add_option("--received", va.received, "File with the received message")->check(CLI::ExistingFile);
    eval_cmd->add_option("--t2e", va.t2e, "Time to encode, seconds");
    eval_cmd->add_option("--t2d", va.t2d, "Time to decode, seconds");
    eval_cmd->add_option("--method", va.method, "Method label for the report");
    eval_cmd->add_option("--payload-bits", va.payload_bits, "Embedded bit count (default: 8 x sent bytes)");
    eval_cmd->add_option("--csv", va.csv, "Also write the report as CSV");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "Compare methods over a directory of cover PNGs");
    bench_cmd->add_option("--images", ba.images, "Directory of cover PNGs")->required();
    bench_cmd->add_option("--methods", ba.methods, "Comma-separated list from {gan, lsb}");
    bench_cmd->add_option("--weights", ba.weights, "Checkpoint directory for the gan method");
    bench_cmd->add_option("--text", ba.text, "Message text (default: 256 bytes of sample prose)");
    bench_cmd->add_option("--parity", ba.parity, "Reed-Solomon parity bytes per block for gan");
    bench_cmd->add_option("--planes", ba.planes, "LSB planes per channel (1 or 2)");
    bench_cmd->add_option("--out", ba.out, "Write the aggregate CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return usage;
    }

    return guarded([&] {
        if (*train_cmd) return run_train(ta);
        if (*enc_cmd) return run_encode(ea);
        if (*dec_cmd) return run_decode(da);
        if (*eval_cmd) return run_evaluate(va);
        return run_bench(ba);
    });
}
