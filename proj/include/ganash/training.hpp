#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "image.hpp"
#include "loader.hpp"
#include "metrics.hpp"
#include "networks.hpp"
#include "ops.hpp"
#include "weights_io.hpp"

namespace ganash {

/// A loss became NaN or infinite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::string term, std::uint64_t step)
        : std::runtime_error(term + " is not finite at step " + std::to_string(step)), term(std::move(term)), step(step)
    {
    }
    std::string term;
    std::uint64_t step;
};

struct LossRecord {
    std::uint64_t step = 0;
    double l_enc = 0;
    double l_dec = 0;
    double l_critic = 0;
    double l_total = 0;
};

enum class Phase { critic, decoder, joint };

/// Everything the training loop mutates.
template <typename T = float>
struct TrainState {
    NetworkParams<T> critic;
    NetworkParams<T> encoder;
    NetworkParams<T> decoder;
    OptimizerState<T> critic_opt;
    OptimizerState<T> encoder_opt;
    OptimizerState<T> decoder_opt;
    std::uint64_t step = 0;
    std::vector<LossRecord> history;
    std::vector<Phase> phase_log;
    // Largest |clamped gradient| applied by any update so far.
    double max_applied_grad = 0.0;
};

template <typename T = float>
TrainState<T> make_train_state(const TrainConfig& cfg)
{
    cfg.validate();
    TrainState<T> s;
    s.critic = init_params<T>(Arch::critic, cfg.data_depth, cfg.seed, cfg.hidden_dims, cfg.kernel);
    s.encoder = init_params<T>(Arch::encoder, cfg.data_depth, cfg.seed, cfg.hidden_dims, cfg.kernel);
    s.decoder = init_params<T>(Arch::decoder, cfg.data_depth, cfg.seed, cfg.hidden_dims, cfg.kernel);
    for (auto* p : {&s.critic, &s.encoder, &s.decoder}) p->leaky_alpha = static_cast<T>(cfg.leaky_alpha);
    for (auto* o : {&s.critic_opt, &s.encoder_opt, &s.decoder_opt}) {
        o->kind = cfg.optimizer;
        o->clip_lo = cfg.clip_lo;
        o->clip_hi = cfg.clip_hi;
    }
    s.critic_opt.lr = cfg.lr_critic;
    s.encoder_opt.lr = cfg.lr_total;
    s.decoder_opt.lr = cfg.lr_decoder;
    return s;
}

/// Squared gap between critic scores on stego and cover batches.
template <typename T>
Tensor<T> critic_loss(const Tensor<T>& p_stego, const Tensor<T>& p_cover, CriticLossMode mode = CriticLossMode::mean_gap)
{
    if (!(p_stego.shape() == p_cover.shape())) {
        throw DimensionError("critic_loss: score shapes " + p_stego.shape().str() + " and " + p_cover.shape().str());
    }
    if (mode == CriticLossMode::per_sample_gap) return mse_loss(p_stego, p_cover);
    return square(sub(reduce_mean(p_stego, Axes::all()), reduce_mean(p_cover, Axes::all())));
}

/// Uniform random message planes for one training step.
template <typename T = float>
Tensor<T> sample_messages(Shape4 shape, std::uint64_t seed, std::uint64_t step)
{
    std::mt19937_64 rng(detail::mix_seed(seed, 0x6d657373ULL ^ (step << 8)));
    std::vector<T> bits(shape.numel());
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (i % 64 == 0) word = rng();
        bits[i] = static_cast<T>((word >> (i % 64)) & 1u);
    }
    return Tensor<T>::from_data(shape, std::move(bits));
}

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& loss, const char* term, std::uint64_t step)
{
    if (!std::isfinite(static_cast<double>(loss.item()))) throw DivergenceError(term, step);
}

template <typename T>
void update(TrainState<T>& s, NetworkParams<T>& p, OptimizerState<T>& opt, double lr)
{
    opt.lr = lr;
    apply_update(p, opt);
    s.max_applied_grad = std::max({s.max_applied_grad, std::abs(opt.last_applied_min), std::abs(opt.last_applied_max)});
}

template <typename T>
void zero_all(TrainState<T>& s)
{
    zero_grad(s.critic);
    zero_grad(s.encoder);
    zero_grad(s.decoder);
}

template <typename T>
Tensor<T> make_stego(TrainState<T>& s, const TrainConfig& cfg, const Tensor<T>& covers, const Tensor<T>& messages)
{
    if (cfg.encoder_bypass) return covers.detach();
    return encoder_forward(s.encoder, covers, messages, BatchNormMode::train);
}

}  // namespace detail

/// Phase 1 of a triplet step: the critic (and the encoder, unless frozen)
/// descend l_critic at lr_critic, `critic_iterations` times.
template <typename T>
void critic_phase(TrainState<T>& s, const TrainConfig& cfg, const Tensor<T>& covers, const Tensor<T>& messages)
{
    const std::uint64_t step = s.step + 1;
    for (int it = 0; it < cfg.critic_iterations; ++it) {
        s.phase_log.push_back(Phase::critic);
        detail::zero_all(s);
        Tensor<T> stego = detail::make_stego(s, cfg, covers, messages);
        Tensor<T> loss = critic_loss(critic_forward(s.critic, stego), critic_forward(s.critic, covers), cfg.critic_loss);
        detail::check_finite(loss, "l_critic", step);
        if (!loss.is_taped()) continue;
        backward(loss);
        detail::update(s, s.critic, s.critic_opt, cfg.lr_critic);
        if (!cfg.encoder_bypass && !cfg.freeze_encoder_in_critic_step) {
            detail::update(s, s.encoder, s.encoder_opt, cfg.lr_critic);
        }
    }
}

/// Phase 2: the decoder descends l_dec at lr_decoder. Returns l_dec as
/// evaluated before the update.
template <typename T>
double decoder_phase(TrainState<T>& s, const TrainConfig& cfg, const Tensor<T>& covers, const Tensor<T>& messages)
{
    s.phase_log.push_back(Phase::decoder);
    detail::zero_all(s);
    Tensor<T> stego = detail::make_stego(s, cfg, covers, messages);
    Tensor<T> loss = sce_loss(decoder_forward(s.decoder, stego), messages);
    detail::check_finite(loss, "l_dec", s.step + 1);
    const double value = loss.item();
    backward(loss);
    detail::update(s, s.decoder, s.decoder_opt, cfg.lr_decoder);
    return value;
}

/// Phase 3: encoder, decoder and critic descend
/// l_T = l_enc + l_dec + l_critic at lr_total. Returns the four losses.
template <typename T>
LossRecord joint_phase(TrainState<T>& s, const TrainConfig& cfg, const Tensor<T>& covers, const Tensor<T>& messages)
{
    const std::uint64_t step = s.step + 1;
    s.phase_log.push_back(Phase::joint);
    detail::zero_all(s);
    Tensor<T> stego = detail::make_stego(s, cfg, covers, messages);
    Tensor<T> l_enc = mse_loss(covers, stego);
    Tensor<T> l_dec = sce_loss(decoder_forward(s.decoder, stego), messages);
    Tensor<T> l_critic = critic_loss(critic_forward(s.critic, stego), critic_forward(s.critic, covers), cfg.critic_loss);
    Tensor<T> l_total = add(add(l_enc, l_dec), l_critic);
    detail::check_finite(l_enc, "l_enc", step);
    detail::check_finite(l_dec, "l_dec", step);
    detail::check_finite(l_critic, "l_critic", step);
    detail::check_finite(l_total, "l_T", step);
    LossRecord rec{step, l_enc.item(), l_dec.item(), l_critic.item(), l_total.item()};
    backward(l_total);
    if (!cfg.encoder_bypass) detail::update(s, s.encoder, s.encoder_opt, cfg.lr_total);
    detail::update(s, s.decoder, s.decoder_opt, cfg.lr_total);
    detail::update(s, s.critic, s.critic_opt, cfg.lr_total);
    return rec;
}

/// One iteration of triplet training: critic, decoder, then joint phase.
/// Returns the losses evaluated in the joint phase.
template <typename T>
LossRecord triplet_step(TrainState<T>& s, const TrainConfig& cfg, const Tensor<T>& covers, const Tensor<T>& messages)
{
    critic_phase(s, cfg, covers, messages);
    decoder_phase(s, cfg, covers, messages);
    const LossRecord rec = joint_phase(s, cfg, covers, messages);
    s.step = rec.step;
    s.history.push_back(rec);
    return rec;
}

// ---------------------------------------------------------------------------
// Checkpoints and loss log

inline std::string loss_csv_header() { return "step,l_enc,l_dec,l_critic,l_T"; }

inline std::string loss_csv_row(const LossRecord& r)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g", static_cast<unsigned long long>(r.step), r.l_enc,
                  r.l_dec, r.l_critic, r.l_total);
    return buf;
}

struct CheckpointPaths {
    std::filesystem::path dir;
    std::filesystem::path weights(Arch a) const { return dir / (std::string(arch_name(a)) + ".weights"); }
    std::filesystem::path optimizer(Arch a) const { return dir / (std::string(arch_name(a)) + ".opt"); }
    std::filesystem::path manifest() const { return dir / "manifest.txt"; }
    std::filesystem::path losses() const { return dir / "losses.csv"; }
};

/// Writes the three weight files, their optimizer states and a manifest
/// (config snapshot plus the completed step count).
template <typename T>
void save_checkpoint(const TrainState<T>& s, const TrainConfig& cfg, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const CheckpointPaths paths{dir};
    save_params(s.critic, paths.weights(Arch::critic));
    save_params(s.encoder, paths.weights(Arch::encoder));
    save_params(s.decoder, paths.weights(Arch::decoder));
    save_optimizer(s.critic_opt, paths.optimizer(Arch::critic));
    save_optimizer(s.encoder_opt, paths.optimizer(Arch::encoder));
    save_optimizer(s.decoder_opt, paths.optimizer(Arch::decoder));
    std::ofstream out(paths.manifest(), std::ios::trunc);
    out << "# training checkpoint\n" << "step = " << s.step << '\n' << config_to_text(cfg);
    if (!out) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
}

struct Manifest {
    std::uint64_t step = 0;
    TrainConfig config;
};

inline Manifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest '" + path.string() + "'");
    Manifest m;
    std::string line, rest;
    while (std::getline(in, line)) {
        const std::string t = detail::trim(line);
        if (t.rfind("step", 0) == 0 && t.find('=') != std::string::npos &&
            detail::trim(t.substr(0, t.find('='))) == "step") {
            m.step = std::stoull(detail::trim(t.substr(t.find('=') + 1)));
        } else {
            rest += line + "\n";
        }
    }
    apply_config_text(m.config, rest);
    return m;
}

template <typename T = float>
TrainState<T> load_checkpoint(const std::filesystem::path& dir)
{
    const CheckpointPaths paths{dir};
    const Manifest m = read_manifest(paths.manifest());
    TrainState<T> s = make_train_state<T>(m.config);
    s.critic = load_params<T>(paths.weights(Arch::critic), Arch::critic);
    s.encoder = load_params<T>(paths.weights(Arch::encoder), Arch::encoder);
    s.decoder = load_params<T>(paths.weights(Arch::decoder), Arch::decoder);
    for (auto* p : {&s.critic, &s.encoder, &s.decoder}) p->leaky_alpha = static_cast<T>(m.config.leaky_alpha);
    s.critic_opt = load_optimizer<T>(paths.optimizer(Arch::critic));
    s.encoder_opt = load_optimizer<T>(paths.optimizer(Arch::encoder));
    s.decoder_opt = load_optimizer<T>(paths.optimizer(Arch::decoder));
    s.step = m.step;
    return s;
}

struct TrainHooks {
    std::function<void(const LossRecord&)> on_step;
    WarningSink warn = warn_to_stderr;
};

/// Runs triplet steps over shuffled mini-batches until `cfg.steps` steps
/// have completed, checkpointing every `checkpoint_every` steps and at the
/// end, and appending each step's losses to <checkpoint_dir>/losses.csv.
/// With `cfg.resume` and an existing checkpoint, continues from it.
inline TrainState<float> train(const TrainConfig& cfg, const TrainHooks& hooks = {})
{
    cfg.validate();
    if (cfg.image_dir.empty()) throw ConfigError("image_dir", "image_dir is required");
    BatchSource src = scan_image_dir(cfg.image_dir, static_cast<std::size_t>(cfg.crop),
                                     static_cast<std::size_t>(cfg.crop), hooks.warn);
    src.seed = cfg.seed;
    src.workers = static_cast<std::size_t>(cfg.coworkers);
    src.buffer = static_cast<std::size_t>(cfg.buffer);
    src.batch_size = static_cast<std::size_t>(cfg.batch_size);

    const CheckpointPaths paths{cfg.checkpoint_dir};
    std::filesystem::create_directories(paths.dir);
    TrainState<float> state;
    std::vector<std::string> kept_rows;
    if (cfg.resume && std::filesystem::exists(paths.manifest())) {
        state = load_checkpoint<float>(paths.dir);
        std::ifstream old(paths.losses());
        std::string line;
        std::getline(old, line);
        while (std::getline(old, line)) {
            if (!line.empty() && std::stoull(line.substr(0, line.find(','))) <= state.step) kept_rows.push_back(line);
        }
    } else {
        state = make_train_state<float>(cfg);
    }

    std::ofstream csv(paths.losses(), std::ios::trunc);
    csv << loss_csv_header() << '\n';
    for (const auto& row : kept_rows) csv << row << '\n';
    csv.flush();

    const std::size_t per_epoch = src.batches_per_epoch();
    std::size_t epoch = static_cast<std::size_t>(state.step) / per_epoch;
    std::unique_ptr<BatchStream> stream = std::make_unique<BatchStream>(src, epoch, state.step % per_epoch);
    const Shape4 msg_shape_base{0, static_cast<std::size_t>(cfg.crop), static_cast<std::size_t>(cfg.crop),
                                static_cast<std::size_t>(cfg.data_depth)};

    while (state.step < static_cast<std::uint64_t>(cfg.steps)) {
        std::optional<Batch> batch = stream->next();
        if (!batch) {
            stream.reset();
            stream = std::make_unique<BatchStream>(src, ++epoch, 0);
            continue;
        }
        Shape4 ms = msg_shape_base;
        ms.b = batch->images.shape().b;
        const Tensor<float> messages = sample_messages<float>(ms, cfg.seed, state.step + 1);
        const LossRecord rec = triplet_step(state, cfg, batch->images, messages);
        csv << loss_csv_row(rec) << '\n';
        csv.flush();
        if (hooks.on_step) hooks.on_step(rec);
        if (state.step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0) save_checkpoint(state, cfg, paths.dir);
    }
    save_checkpoint(state, cfg, paths.dir);
    return state;
}

// ---------------------------------------------------------------------------
// Inference helpers

/// Embeds message planes into one cover image and returns the 8-bit stego.
template <typename T>
ImageBuffer encode_image(NetworkParams<T>& encoder, const ImageBuffer& cover, const Tensor<T>& message)
{
    const Tensor<T> c = image_to_tensor<T>(cover);
    return tensor_to_image(encoder_forward(encoder, c, message, BatchNormMode::infer));
}

/// Decoder logits for one stego image.
template <typename T>
Tensor<T> decode_logits(NetworkParams<T>& decoder, const ImageBuffer& stego)
{
    return decoder_forward(decoder, image_to_tensor<T>(stego), BatchNormMode::infer);
}

struct ChannelQuality {
    double bit_accuracy = 0;  // over all images and bits
    double psnr = 0;          // from the MSE pooled over all images, byte scale
    double min_psnr = 0;
};

/// Encodes fresh random planes into each cover, quantizes to 8 bits,
/// decodes, and scores the bit channel and the distortion.
template <typename T>
ChannelQuality evaluate_channel(NetworkParams<T>& encoder, NetworkParams<T>& decoder,
                                const std::vector<ImageBuffer>& covers, std::uint64_t seed)
{
    ChannelQuality q;
    q.min_psnr = std::numeric_limits<double>::infinity();
    std::size_t correct = 0, total = 0;
    double sq = 0.0;
    std::size_t values = 0;
    for (std::size_t i = 0; i < covers.size(); ++i) {
        const auto& cover = covers[i];
        const Shape4 ms{1, cover.height, cover.width, static_cast<std::size_t>(encoder.data_depth)};
        const Tensor<T> msg = sample_messages<T>(ms, seed, 0xe7a1ULL + i);
        const ImageBuffer stego = encode_image(encoder, cover, msg);
        const Tensor<T> logits = decode_logits(decoder, stego);
        for (std::size_t k = 0; k < msg.numel(); ++k) {
            correct += (logits.data()[k] >= T(0)) == (msg.data()[k] >= T(0.5)) ? 1 : 0;
        }
        total += msg.numel();
        const double mse = mse_metric(cover, stego, PixelScale::byte);
        sq += mse * static_cast<double>(cover.size());
        values += cover.size();
        q.min_psnr = std::min(q.min_psnr, psnr_from_mse(mse, 255.0));
    }
    q.bit_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    q.psnr = psnr_from_mse(values ? sq / static_cast<double>(values) : 0.0, 255.0);
    return q;
}

}  // namespace ganash
