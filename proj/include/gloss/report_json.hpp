#pragma once

#include <ostream>

#include <json.hpp>

#include "gloss/trainer.hpp"

namespace gloss {

// JSON emission for training reports: one JSON line per epoch plus a final
// summary object. Non-finite metrics serialize as null.

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
    return nlohmann::json{
        {"mode", mode_name(cfg.mode)},
        {"loss", loss_name(cfg.loss)},
        {"lambda", cfg.lambda},
        {"lambda_baseline", cfg.lambda_baseline},
        {"gamma", cfg.gamma},
        {"sigma_mode", cfg.effective_sigma_mode() == SigmaMode::sqrt ? "sqrt" : "fixed"},
        {"sigma", cfg.sigma},
        {"sigma_mult", cfg.sigma_mult},
        {"eta", cfg.eta},
        {"batch_size", cfg.batch_size},
        {"max_epochs", cfg.max_epochs},
        {"patience", cfg.patience},
        {"seed", cfg.seed},
        {"tau", cfg.tau},
        {"margin", cfg.margin},
        {"normalize_embeddings", cfg.normalize_embeddings},
        {"encoder", arch_name(cfg.encoder_arch)},
        {"hidden", cfg.hidden},
        {"embed_dim", cfg.embed_dim},
        {"optimizer", cfg.optimizer == OptKind::adam ? "adam" : "sgd"},
    };
}

inline nlohmann::json epoch_to_json(const EpochRecord& e) {
    return nlohmann::json{
        {"epoch", e.epoch},
        {"loss_total", e.loss_total},
        {"loss_lg", e.loss_lg},
        {"loss_lce", e.loss_lce},
        {"val_accuracy", e.val_accuracy},
        {"val_macro_f1", e.val_macro_f1},
        {"val_macro_silhouette", e.val_macro_silhouette},
        {"timings",
         {{"forward", e.timings.forward},
          {"graph_build", e.timings.graph_build},
          {"lpa_solve", e.timings.lpa_solve},
          {"backward", e.timings.backward},
          {"optimizer", e.timings.optimizer},
          {"io", e.timings.io}}},
        {"epoch_wall", e.epoch_wall},
        {"rho_mean", e.rho_mean},
        {"rho_max", e.rho_max},
        {"fallbacks", e.fallbacks},
        {"skipped_batches", e.skipped_batches},
        {"max_row_mass", e.max_row_mass},
    };
}

inline nlohmann::json summary_json(const TrainReport& r) {
    return nlohmann::json{
        {"early_stop_epoch", r.early_stop_epoch},
        {"best_epoch", r.best_epoch},
        {"best_monitor", r.best_monitor},
        {"total_time", r.total_time},
        {"test_accuracy", r.test_accuracy},
        {"test_macro_f1", r.test_macro_f1},
        {"test_macro_silhouette", r.test_macro_silhouette},
        {"test_accesses", r.test_accesses},
        {"epochs_run", r.epochs.size()},
        {"config", config_to_json(r.config)},
    };
}

inline void write_report_jsonl(const TrainReport& r, std::ostream& out) {
    for (const auto& e : r.epochs) out << epoch_to_json(e).dump() << "\n";
}

} // namespace gloss
