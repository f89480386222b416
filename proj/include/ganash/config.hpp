#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optimizer.hpp"

namespace ganash {

/// Unknown key or unparsable value in a key-value configuration.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key(std::move(key)) {}
    std::string key;
};

enum class CriticLossMode {
    mean_gap,         // (mean p(S) - mean p(I))^2
    per_sample_gap,   // mean over items of (p(S_i) - p(I_i))^2
};

/// Training hyperparameters. Learning rates, clip bounds, hidden width,
/// kernel size, worker count and buffer depth default to the reference values.
struct TrainConfig {
    double lr_critic = 1e-5;
    double lr_decoder = 1e-2;
    double lr_total = 1e-5;
    double clip_lo = -0.1;
    double clip_hi = 0.1;
    int hidden_dims = 32;
    int data_depth = 4;
    int kernel = 3;
    int coworkers = 4;
    int buffer = 8;
    int batch_size = 4;
    int steps = 1000;
    int critic_iterations = 1;
    int crop = 64;
    std::uint64_t seed = 0;
    std::string image_dir;
    std::string checkpoint_dir = "checkpoints";
    int checkpoint_every = 100;
    OptimizerKind optimizer = OptimizerKind::adam;
    CriticLossMode critic_loss = CriticLossMode::mean_gap;
    bool freeze_encoder_in_critic_step = false;
    double leaky_alpha = 0.2;
    bool resume = false;
    // Test hook: the stego image is the cover itself.
    bool encoder_bypass = false;

    void validate() const
    {
        auto positive = [](const char* key, double v) {
            if (!(v > 0)) throw ConfigError(key, std::string(key) + " must be positive");
        };
        positive("lr_critic", lr_critic);
        positive("lr_decoder", lr_decoder);
        positive("lr_total", lr_total);
        if (!(clip_lo < clip_hi)) throw ConfigError("clip_lo", "clip_lo must be below clip_hi");
        if (data_depth < 1) throw ConfigError("data_depth", "data_depth must be at least 1");
        if (hidden_dims < 1) throw ConfigError("hidden_dims", "hidden_dims must be at least 1");
        if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel", "kernel must be odd");
        if (coworkers < 1) throw ConfigError("coworkers", "coworkers must be at least 1");
        if (buffer < 1) throw ConfigError("buffer", "buffer must be at least 1");
        if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be at least 1");
        if (steps < 0) throw ConfigError("steps", "steps must be non-negative");
        if (critic_iterations < 1) throw ConfigError("critic_iterations", "critic_iterations must be at least 1");
        if (crop < 3) throw ConfigError("crop", "crop must be at least 3");
        if (checkpoint_every < 1) throw ConfigError("checkpoint_every", "checkpoint_every must be at least 1");
        if (!(leaky_alpha > 0 && leaky_alpha < 1)) throw ConfigError("leaky_alpha", "leaky_alpha must lie in (0, 1)");
    }
};

namespace detail {

struct ConfigField {
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename V>
V parse_value(const std::string& key, const std::string& text)
{
    std::istringstream in(text);
    V v{};
    in >> v;
    if (!in || !(in >> std::ws).eof()) throw ConfigError(key, "invalid value '" + text + "' for " + key);
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key, "invalid boolean '" + text + "' for " + key);
}

inline std::string fmt_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline const std::map<std::string, ConfigField>& config_fields()
{
#define GANASH_NUM(field, type)                                                                                 \
    {                                                                                                           \
        #field, ConfigField{[](TrainConfig& c, const std::string& s) { c.field = parse_value<type>(#field, s); }, \
                            [](const TrainConfig& c) { return fmt_double(static_cast<double>(c.field)); } }       \
    }
#define GANASH_BOOL(field)                                                                                \
    {                                                                                                     \
        #field, ConfigField{[](TrainConfig& c, const std::string& s) { c.field = parse_bool(#field, s); }, \
                            [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); } } \
    }
    static const std::map<std::string, ConfigField> fields{
        GANASH_NUM(lr_critic, double),
        GANASH_NUM(lr_decoder, double),
        GANASH_NUM(lr_total, double),
        GANASH_NUM(clip_lo, double),
        GANASH_NUM(clip_hi, double),
        GANASH_NUM(hidden_dims, int),
        GANASH_NUM(data_depth, int),
        GANASH_NUM(kernel, int),
        GANASH_NUM(coworkers, int),
        GANASH_NUM(buffer, int),
        GANASH_NUM(batch_size, int),
        GANASH_NUM(steps, int),
        GANASH_NUM(critic_iterations, int),
        GANASH_NUM(crop, int),
        GANASH_NUM(checkpoint_every, int),
        GANASH_NUM(leaky_alpha, double),
        GANASH_BOOL(freeze_encoder_in_critic_step),
        GANASH_BOOL(resume),
        GANASH_BOOL(encoder_bypass),
        {"seed", ConfigField{[](TrainConfig& c, const std::string& s) { c.seed = parse_value<std::uint64_t>("seed", s); },
                             [](const TrainConfig& c) { return std::to_string(c.seed); }}},
        {"image_dir", ConfigField{[](TrainConfig& c, const std::string& s) { c.image_dir = s; },
                                  [](const TrainConfig& c) { return c.image_dir; }}},
        {"checkpoint_dir", ConfigField{[](TrainConfig& c, const std::string& s) { c.checkpoint_dir = s; },
                                       [](const TrainConfig& c) { return c.checkpoint_dir; }}},
        {"optimizer", ConfigField{[](TrainConfig& c, const std::string& s) {
                                      if (s == "adam") c.optimizer = OptimizerKind::adam;
                                      else if (s == "sgd") c.optimizer = OptimizerKind::sgd;
                                      else throw ConfigError("optimizer", "optimizer must be adam or sgd");
                                  },
                                  [](const TrainConfig& c) {
                                      return std::string(c.optimizer == OptimizerKind::adam ? "adam" : "sgd");
                                  }}},
        {"critic_loss", ConfigField{[](TrainConfig& c, const std::string& s) {
                                        if (s == "mean_gap") c.critic_loss = CriticLossMode::mean_gap;
                                        else if (s == "per_sample_gap") c.critic_loss = CriticLossMode::per_sample_gap;
                                        else throw ConfigError("critic_loss", "critic_loss must be mean_gap or per_sample_gap");
                                    },
                                    [](const TrainConfig& c) {
                                        return std::string(c.critic_loss == CriticLossMode::mean_gap ? "mean_gap"
                                                                                                     : "per_sample_gap");
                                    }}},
    };
#undef GANASH_NUM
#undef GANASH_BOOL
    return fields;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Sets one field by its name. Throws ConfigError for unknown keys.
inline void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& fields = detail::config_fields();
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(key, "unknown configuration key '" + key + "'");
    it->second.set(cfg, value);
}

/// Parses `key = value` lines; blank lines and lines starting with '#' are ignored.
inline void apply_config_text(TrainConfig& cfg, const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(t, "expected key = value, got '" + t + "'");
        set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {})
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(base, ss.str());
    return base;
}

/// One `key = value` line per field, in key order.
inline std::string config_to_text(const TrainConfig& cfg)
{
    std::string out;
    for (const auto& [key, field] : detail::config_fields()) out += key + " = " + field.get(cfg) + "\n";
    return out;
}

}  // namespace ganash
