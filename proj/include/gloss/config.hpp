#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gloss/encoder.hpp"

namespace gloss {

// =============================================================================
// Training configuration: the key = value config file schema, overrides,
// and validation against the recommended hyperparameter ranges.
// =============================================================================

enum class TrainMode { integrated, standalone };
enum class LossKind { gloss_o, gloss_sqrt, ce, scl, triplet, cosine };
enum class SigmaMode { fixed, sqrt };

inline const char* mode_name(TrainMode m) {
    return m == TrainMode::integrated ? "integrated" : "standalone";
}

inline const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::gloss_o: return "gloss_o";
        case LossKind::gloss_sqrt: return "gloss_sqrt";
        case LossKind::ce: return "ce";
        case LossKind::scl: return "scl";
        case LossKind::triplet: return "triplet";
        case LossKind::cosine: return "cosine";
    }
    return "?";
}

inline bool is_gloss(LossKind k) { return k == LossKind::gloss_o || k == LossKind::gloss_sqrt; }

struct TrainConfig {
    TrainMode mode = TrainMode::integrated;
    LossKind loss = LossKind::gloss_o;
    double lambda = 0.8;            // weight of the graph/representation term
    double lambda_baseline = -1.0;  // composite weight for non-gloss losses; <0 = use lambda
    double gamma = 0.6;             // labeled fraction of each batch
    SigmaMode sigma_mode = SigmaMode::fixed;
    double sigma = 1.0;             // kernel bandwidth in fixed mode
    double sigma_mult = 1.0;        // multiplier applied to the effective sigma
    double eta = 1e-3;              // learning rate
    int batch_size = 64;
    int max_epochs = 60;
    int patience = 10;
    uint64_t seed = 1;
    double tau = 0.1;               // SCL temperature
    double margin = 0.5;            // triplet margin alpha
    bool normalize_embeddings = true;
    Arch encoder_arch = Arch::mlp2;
    int hidden = 64;
    int embed_dim = 32;
    OptKind optimizer = OptKind::adam;
    // Minibatches are reshuffled every epoch (seeded by seed+epoch); the
    // gamma-split is redrawn on every batch visit (seeded by seed, epoch,
    // batch index). Set to false to freeze the epoch-1 batch order.
    bool reshuffle_each_epoch = true;
    bool stratify_gamma_split = true;
    int head_epochs = 200;   // standalone: epochs for the frozen-embedding head
    double head_eta = 0.05;  // standalone: head learning rate
    double train_frac = 0.7;
    double val_frac = 0.15;

    double effective_lambda() const {
        if (is_gloss(loss) || loss == LossKind::ce) return lambda;
        return lambda_baseline < 0.0 ? lambda : lambda_baseline;
    }
    SigmaMode effective_sigma_mode() const {
        return loss == LossKind::gloss_sqrt ? SigmaMode::sqrt : sigma_mode;
    }
};

// ------------------------------------------------------------------ parsing

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline double parse_double_cfg(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline long parse_int_cfg(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

} // namespace detail

// Applies one key = value setting; unknown keys are validation errors.
inline void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double_cfg;
    using detail::parse_int_cfg;
    if (key == "mode") {
        if (value == "integrated") cfg.mode = TrainMode::integrated;
        else if (value == "standalone") cfg.mode = TrainMode::standalone;
        else throw ValidationError("config: mode must be integrated|standalone, got '" + value + "'");
    } else if (key == "loss") {
        if (value == "gloss_o") cfg.loss = LossKind::gloss_o;
        else if (value == "gloss_sqrt") cfg.loss = LossKind::gloss_sqrt;
        else if (value == "ce") cfg.loss = LossKind::ce;
        else if (value == "scl") cfg.loss = LossKind::scl;
        else if (value == "triplet") cfg.loss = LossKind::triplet;
        else if (value == "cosine") cfg.loss = LossKind::cosine;
        else throw ValidationError("config: unknown loss '" + value + "'");
    } else if (key == "sigma_mode") {
        if (value == "fixed") cfg.sigma_mode = SigmaMode::fixed;
        else if (value == "sqrt") cfg.sigma_mode = SigmaMode::sqrt;
        else throw ValidationError("config: sigma_mode must be fixed|sqrt, got '" + value + "'");
    } else if (key == "encoder") {
        if (value == "linear") cfg.encoder_arch = Arch::linear;
        else if (value == "mlp2") cfg.encoder_arch = Arch::mlp2;
        else throw ValidationError("config: encoder must be linear|mlp2, got '" + value + "'");
    } else if (key == "optimizer") {
        if (value == "adam") cfg.optimizer = OptKind::adam;
        else if (value == "sgd") cfg.optimizer = OptKind::sgd;
        else throw ValidationError("config: optimizer must be adam|sgd, got '" + value + "'");
    } else if (key == "lambda") cfg.lambda = parse_double_cfg(value, key);
    else if (key == "lambda_baseline") cfg.lambda_baseline = parse_double_cfg(value, key);
    else if (key == "gamma") cfg.gamma = parse_double_cfg(value, key);
    else if (key == "sigma") cfg.sigma = parse_double_cfg(value, key);
    else if (key == "sigma_mult") cfg.sigma_mult = parse_double_cfg(value, key);
    else if (key == "eta") cfg.eta = parse_double_cfg(value, key);
    else if (key == "tau") cfg.tau = parse_double_cfg(value, key);
    else if (key == "margin") cfg.margin = parse_double_cfg(value, key);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "max_epochs") cfg.max_epochs = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "patience") cfg.patience = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int_cfg(value, key));
    else if (key == "hidden") cfg.hidden = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "embed_dim") cfg.embed_dim = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "head_epochs") cfg.head_epochs = static_cast<int>(parse_int_cfg(value, key));
    else if (key == "head_eta") cfg.head_eta = parse_double_cfg(value, key);
    else if (key == "train_frac") cfg.train_frac = parse_double_cfg(value, key);
    else if (key == "val_frac") cfg.val_frac = parse_double_cfg(value, key);
    else if (key == "normalize_embeddings") cfg.normalize_embeddings = parse_bool(value, key);
    else if (key == "reshuffle_each_epoch") cfg.reshuffle_each_epoch = parse_bool(value, key);
    else if (key == "stratify_gamma_split") cfg.stratify_gamma_split = parse_bool(value, key);
    else throw ValidationError("config: unknown key '" + key + "'");
}

// Config files are plain "key = value" lines; '#' starts a comment.
inline TrainConfig parse_config(std::istream& in, TrainConfig base = TrainConfig{}) {
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = line;
        t.erase(0, t.find_first_not_of(" \t\r\n"));
        if (t.empty()) continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config: expected key = value", line_no);
        auto strip = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r\n"));
            const size_t end = s.find_last_not_of(" \t\r\n");
            return end == std::string::npos ? std::string() : s.substr(0, end + 1);
        };
        apply_config_entry(base, strip(t.substr(0, eq)), strip(t.substr(eq + 1)));
    }
    return base;
}

inline TrainConfig load_config(const std::string& path, TrainConfig base = TrainConfig{}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    return parse_config(in, base);
}

// "key=value" command-line overrides.
inline void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const size_t eq = o.find('=');
        if (eq == std::string::npos)
            throw ValidationError("override '" + o + "' is not of the form key=value");
        apply_config_entry(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
}

// Hard errors for invalid settings; warnings when a value leaves the
// recommended search ranges (gamma in [0.1,0.9], sigma in [0.01,10],
// lambda in [0.1,0.9]).
inline void validate_config(const TrainConfig& cfg, std::vector<std::string>* warnings = nullptr) {
    if (!(cfg.lambda >= 0.0) || !(cfg.lambda <= 1.0))
        throw ValidationError("config: lambda must be in [0, 1]");
    if (cfg.lambda_baseline >= 0.0 && cfg.lambda_baseline > 1.0)
        throw ValidationError("config: lambda_baseline must be in [0, 1]");
    if (!(cfg.gamma > 0.0) || !(cfg.gamma < 1.0))
        throw ValidationError("config: gamma must be in (0, 1)");
    if (!(cfg.sigma > 0.0)) throw ValidationError("config: sigma must be > 0");
    if (!(cfg.sigma_mult > 0.0)) throw ValidationError("config: sigma_mult must be > 0");
    if (!(cfg.eta > 0.0)) throw ValidationError("config: eta must be > 0");
    if (!(cfg.tau > 0.0)) throw ValidationError("config: tau must be > 0");
    if (cfg.margin < 0.0) throw ValidationError("config: margin must be >= 0");
    if (cfg.batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (cfg.max_epochs < 1) throw ValidationError("config: max_epochs must be >= 1");
    if (cfg.patience < 1) throw ValidationError("config: patience must be >= 1");
    if (cfg.embed_dim < 1) throw ValidationError("config: embed_dim must be >= 1");
    if (cfg.encoder_arch == Arch::mlp2 && cfg.hidden < 1)
        throw ValidationError("config: hidden must be >= 1 for mlp2");
    if (cfg.head_epochs < 1) throw ValidationError("config: head_epochs must be >= 1");
    if (!(cfg.head_eta > 0.0)) throw ValidationError("config: head_eta must be > 0");
    if (cfg.mode == TrainMode::standalone && cfg.loss == LossKind::ce)
        throw ValidationError("config: standalone mode needs a representation loss, not ce");

    if (warnings) {
        if (cfg.gamma < 0.1 || cfg.gamma > 0.9)
            warnings->push_back("gamma=" + std::to_string(cfg.gamma) +
                                " outside recommended range [0.1, 0.9]");
        if (cfg.effective_sigma_mode() == SigmaMode::fixed &&
            (cfg.sigma < 0.01 || cfg.sigma > 10.0))
            warnings->push_back("sigma=" + std::to_string(cfg.sigma) +
                                " outside recommended range [0.01, 10]");
        if (cfg.lambda < 0.1 || cfg.lambda > 0.9)
            warnings->push_back("lambda=" + std::to_string(cfg.lambda) +
                                " outside recommended range [0.1, 0.9]");
    }
}

} // namespace gloss
