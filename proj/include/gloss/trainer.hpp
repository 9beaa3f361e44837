#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gloss/config.hpp"
#include "gloss/dataset.hpp"
#include "gloss/encoder.hpp"
#include "gloss/evaluation.hpp"
#include "gloss/graph.hpp"
#include "gloss/losses.hpp"
#include "gloss/lpa.hpp"

namespace gloss {

// =============================================================================
// Training orchestration: per-batch graph build -> gamma-split -> propagate
// -> loss -> backward -> optimizer step, with the graph rebuilt from current
// embeddings on every visit. Integrated mode monitors validation macro-F1;
// standalone mode monitors validation macro-silhouette and fits a linear
// head on frozen embeddings afterwards. The test set is touched exactly once
// per run.
// =============================================================================

struct PhaseTimings {
    double forward = 0.0;
    double graph_build = 0.0;
    double lpa_solve = 0.0;
    double backward = 0.0;
    double optimizer = 0.0;
    double io = 0.0;

    double sum() const { return forward + graph_build + lpa_solve + backward + optimizer + io; }

    void add(const PhaseTimings& o) {
        forward += o.forward;
        graph_build += o.graph_build;
        lpa_solve += o.lpa_solve;
        backward += o.backward;
        optimizer += o.optimizer;
        io += o.io;
    }
};

struct EpochRecord {
    int epoch = 0;
    double loss_total = 0.0, loss_lg = 0.0, loss_lce = 0.0;
    double val_accuracy = 0.0, val_macro_f1 = 0.0, val_macro_silhouette = 0.0;
    PhaseTimings timings;
    double epoch_wall = 0.0;
    double rho_mean = 0.0, rho_max = 0.0;
    int fallbacks = 0, skipped_batches = 0;
    double max_row_mass = 0.0;  // diagnostic: > 1 flags departure from walk semantics
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int early_stop_epoch = 0;  // last epoch actually run
    int best_epoch = 0;
    double total_time = 0.0;
    double test_accuracy = 0.0, test_macro_f1 = 0.0, test_macro_silhouette = 0.0;
    long test_accesses = 0;
    double best_monitor = 0.0;
    TrainConfig config;
};

struct GraphObservation {
    int epoch = 0;
    int batch_index = 0;
    Matrix embeddings;  // the normalized embeddings the graph was built from
    Matrix w;
    double sigma = 0.0;
};

using GraphObserver = std::function<void(const GraphObservation&)>;

namespace detail {

class Timer {
public:
    Timer() : t0_(std::chrono::steady_clock::now()) {}
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }
    void reset() { t0_ = std::chrono::steady_clock::now(); }

private:
    std::chrono::steady_clock::time_point t0_;
};

} // namespace detail

// ------------------------------------------------------------------ predict

inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < m.cols(); ++j)
            if (m(i, j) > m(i, best)) best = j;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

inline Matrix logits_values(const ClassifierHead& head, const Matrix& z) {
    Tape tape;
    return tape.value(classify(tape, head, tape.input(z)));
}

inline std::vector<int> predict(const EncoderParams& params, const ClassifierHead& head,
                                const Matrix& x_raw) {
    return argmax_rows(logits_values(head, encode_values(params, x_raw)));
}

// ------------------------------------------------------------------ step

struct StepOutput {
    LossValue loss;
    double total_value = 0.0;  // forward value of loss.total (the tape dies with the step)
    std::vector<Matrix> encoder_grads;  // aligned with encoder_param_refs
    std::vector<Matrix> head_grads;     // aligned with head_param_refs; empty in standalone
    bool skipped = false;
    bool fallback = false;  // LPA singularity, batch trained on CE alone
    std::string skip_reason;
    double rho = std::numeric_limits<double>::quiet_NaN();
    double sigma = 0.0;
    double row_mass = 0.0;
    PhaseTimings timings;
    bool captured = false;
    Matrix z_value, w_value;  // populated when capture was requested
};

// One step of the fine-tuning loop on one batch. Executes encode ->
// (normalize) -> graph -> gamma-split -> closed-form propagation -> losses,
// then backward. The caller applies the optimizer. `split_seed` redraws the
// gamma-split per visit.
inline StepOutput train_step(const Batch& batch, const EncoderParams& params,
                             const ClassifierHead* head, const TrainConfig& cfg,
                             uint64_t split_seed, bool capture = false) {
    StepOutput out;
    const bool integrated = cfg.mode == TrainMode::integrated;
    if (!integrated && cfg.loss == LossKind::ce)
        throw ValidationError("train_step: standalone mode needs a representation loss");
    const double repr_weight = integrated ? cfg.effective_lambda() : 1.0;
    bool repr_active = cfg.loss != LossKind::ce && repr_weight > 0.0;
    const bool graph_loss = is_gloss(cfg.loss) && repr_active;

    if (graph_loss && batch.size() < 4) {
        out.skipped = true;
        out.skip_reason = "batch smaller than 4 in graph-loss mode";
        return out;
    }
    if (integrated && head == nullptr)
        throw ValidationError("train_step: integrated mode needs a classifier head");

    Tape tape;
    detail::Timer phase;
    EncoderNodes enc_nodes;
    const NodeId z = encode(tape, params, batch.x_raw, &enc_nodes);
    out.timings.forward += phase.elapsed();

    int num_classes = 0;
    for (int y : batch.y) num_classes = std::max(num_classes, y + 1);

    NodeId repr_node = -1;
    if (repr_active) {
        if (graph_loss) {
            phase.reset();
            const Matrix& zv = tape.value(z);
            out.sigma = cfg.sigma_mult * (cfg.effective_sigma_mode() == SigmaMode::sqrt
                                              ? sigma_sqrt(zv)
                                              : cfg.sigma);
            SimilarityGraph graph = build_similarity_graph(tape, z, out.sigma);
            LabelSplit split =
                gamma_split(batch.y, cfg.gamma, split_seed, cfg.stratify_gamma_split);
            TransitionView view = column_stochastic(tape, graph.a_norm, split);
            out.timings.graph_build += phase.elapsed();

            if (capture) {
                out.captured = true;
                out.z_value = tape.value(z);
                out.w_value = tape.value(graph.w);
            }

            phase.reset();
            std::vector<int> labeled_y, masked_y;
            for (int idx : split.labeled_idx) labeled_y.push_back(batch.y[static_cast<size_t>(idx)]);
            for (int idx : split.masked_idx) masked_y.push_back(batch.y[static_cast<size_t>(idx)]);
            try {
                const NodeId y_hat = propagate_closed_form(tape, view, one_hot(labeled_y, num_classes));
                out.rho = spectral_radius(tape.value(view.t_uu), 20, 7);
                out.row_mass = max_row_mass(tape.value(y_hat));
                const NodeId y_norm = normalize_soft_labels(tape, y_hat);
                out.timings.lpa_solve += phase.elapsed();

                phase.reset();
                repr_node = g_loss(tape, y_norm, one_hot(masked_y, num_classes));
                out.timings.forward += phase.elapsed();
            } catch (const SingularityError& e) {
                out.timings.lpa_solve += phase.elapsed();
                out.rho = e.rho_estimate;
                if (!integrated) {
                    out.skipped = true;
                    out.skip_reason = std::string("LPA singularity: ") + e.what();
                    return out;
                }
                out.fallback = true;
                repr_active = false;
            }
        } else {
            phase.reset();
            try {
                switch (cfg.loss) {
                    case LossKind::scl: repr_node = scl(tape, z, batch.y, cfg.tau); break;
                    case LossKind::triplet: repr_node = triplet(tape, z, batch.y, cfg.margin); break;
                    case LossKind::cosine: repr_node = cosine_pair(tape, z, batch.y); break;
                    default: break;
                }
            } catch (const DegenerateBatchError& e) {
                out.skipped = true;
                out.skip_reason = e.what();
                return out;
            }
            out.timings.forward += phase.elapsed();
        }
    }

    HeadNodes head_nodes;
    phase.reset();
    if (integrated) {
        const NodeId logits = classify(tape, *head, z, &head_nodes);
        const NodeId lce = cross_entropy(tape, logits, batch.y);
        if (repr_active) {
            out.loss = composite(tape, repr_node, lce, repr_weight);
        } else {
            out.loss.total = lce;
            out.loss.lce = tape.scalar_value(lce);
            out.loss.lg = 0.0;
            out.loss.lambda = cfg.loss == LossKind::ce ? 0.0 : repr_weight;
        }
        if (!is_gloss(cfg.loss) && cfg.loss != LossKind::ce && repr_active)
            out.loss.components[loss_name(cfg.loss)] = out.loss.lg;
    } else {
        out.loss.total = repr_node;
        out.loss.lg = tape.scalar_value(repr_node);
        out.loss.lce = std::numeric_limits<double>::quiet_NaN();
        out.loss.lambda = 1.0;
        out.loss.components[loss_name(cfg.loss)] = out.loss.lg;
    }
    out.timings.forward += phase.elapsed();
    out.total_value = tape.scalar_value(out.loss.total);

    phase.reset();
    const GradientMap grads = tape.backward(out.loss.total);
    out.encoder_grads.push_back(grads.at(enc_nodes.w1));
    out.encoder_grads.push_back(grads.at(enc_nodes.b1));
    if (params.arch == Arch::mlp2) {
        out.encoder_grads.push_back(grads.at(enc_nodes.w2));
        out.encoder_grads.push_back(grads.at(enc_nodes.b2));
    }
    if (integrated) {
        out.head_grads.push_back(grads.at(head_nodes.weight));
        out.head_grads.push_back(grads.at(head_nodes.bias));
    }
    out.timings.backward += phase.elapsed();
    return out;
}

// ------------------------------------------------------------------ head fit

// Full-batch cross-entropy training of a linear head on frozen embeddings;
// returns the best-validation-accuracy snapshot.
inline ClassifierHead fit_linear_head(const Matrix& z_train, const std::vector<int>& y_train,
                                      const Matrix& z_val, const std::vector<int>& y_val,
                                      double eta, int epochs, int num_classes, uint64_t seed) {
    if (!all_finite(z_train) || !all_finite(z_val))
        throw ValidationError("fit_linear_head: non-finite embeddings");
    ClassifierHead head = init_head(z_train.cols(), num_classes, mix_seed(seed, 0xf17ead));
    auto refs = head_param_refs(head);
    OptimizerState opt = OptimizerState::make(OptKind::adam, eta, refs);

    ClassifierHead best = head;
    double best_acc = -1.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Tape tape;
        HeadNodes nodes;
        const NodeId logits = classify(tape, head, tape.input(z_train), &nodes);
        const NodeId lce = cross_entropy(tape, logits, y_train);
        const GradientMap grads = tape.backward(lce);
        const Matrix gw = grads.at(nodes.weight);
        const Matrix gb = grads.at(nodes.bias);
        optimizer_step(opt, refs, {&gw, &gb});

        const double val_acc = accuracy(argmax_rows(logits_values(head, z_val)), y_val);
        if (val_acc > best_acc) {
            best_acc = val_acc;
            best = head;
        }
    }
    return best;
}

// ------------------------------------------------------------------ training

namespace detail {

struct ValSnapshot {
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double macro_f1 = std::numeric_limits<double>::quiet_NaN();
    double macro_silhouette = 0.0;
};

} // namespace detail

// Trained parameters of a finished run, for checkpointing.
struct TrainedModel {
    EncoderParams encoder;
    ClassifierHead head;
};

// Runs the full loop per config and returns the report. The observer, when
// set, receives the embeddings/W/sigma of the first graph batch of every
// epoch (the designated batch for graph dumps and dynamic-graph checks).
// `model_out`, when set, receives the restored best-epoch parameters (plus
// the frozen-embedding head in standalone mode).
inline TrainReport run_training(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                                const Dataset& test, const GraphObserver& observer = nullptr,
                                std::vector<std::string>* warnings = nullptr,
                                TrainedModel* model_out = nullptr) {
    validate_config(cfg, warnings);
    if (train.num_classes != val.num_classes || train.num_classes != test.num_classes)
        throw ValidationError("run_training: class counts differ across splits");
    if (cfg.batch_size > train.n())
        throw ValidationError("run_training: batch_size exceeds training rows");

    const bool integrated = cfg.mode == TrainMode::integrated;
    const int num_classes = train.num_classes;

    EncoderParams params = init_encoder(cfg.encoder_arch, train.dim(), cfg.hidden, cfg.embed_dim,
                                        cfg.normalize_embeddings, cfg.seed);
    ClassifierHead head = init_head(cfg.embed_dim, num_classes, mix_seed(cfg.seed, 0xead));

    std::vector<ParamRef> refs = encoder_param_refs(params);
    if (integrated)
        for (auto& r : head_param_refs(head)) refs.push_back(r);
    OptimizerState opt = OptimizerState::make(cfg.optimizer, cfg.eta, refs);

    TrainReport report;
    report.config = cfg;

    long test_accesses = 0;
    detail::Timer total_timer;

    EncoderParams best_params = params;
    ClassifierHead best_head = head;
    double best_monitor = -std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int since_best = 0;
    int last_epoch = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        last_epoch = epoch;
        detail::Timer epoch_timer;
        EpochRecord rec;
        rec.epoch = epoch;

        const uint64_t batch_seed =
            mix_seed(cfg.seed, 0xba7c, cfg.reshuffle_each_epoch ? static_cast<uint64_t>(epoch) : 1);
        const std::vector<Batch> batches = minibatches(train, cfg.batch_size, batch_seed, true);

        int steps = 0;
        double sum_total = 0.0, sum_lg = 0.0, sum_lce = 0.0, sum_rho = 0.0;
        int rho_count = 0;
        bool observed_this_epoch = false;

        for (size_t bi = 0; bi < batches.size(); ++bi) {
            const bool want_capture = observer && !observed_this_epoch;
            StepOutput step = train_step(batches[bi], params, integrated ? &head : nullptr, cfg,
                                         mix_seed(cfg.seed, static_cast<uint64_t>(epoch), bi),
                                         want_capture);
            rec.timings.add(step.timings);
            if (step.skipped) {
                ++rec.skipped_batches;
                continue;
            }
            if (step.fallback) ++rec.fallbacks;
            if (std::isfinite(step.rho)) {
                sum_rho += step.rho;
                rec.rho_max = std::max(rec.rho_max, step.rho);
                ++rho_count;
            }
            rec.max_row_mass = std::max(rec.max_row_mass, step.row_mass);
            if (step.captured) {
                observed_this_epoch = true;
                observer(GraphObservation{epoch, static_cast<int>(bi), std::move(step.z_value),
                                          std::move(step.w_value), step.sigma});
            }

            detail::Timer opt_timer;
            std::vector<const Matrix*> grad_ptrs;
            for (const Matrix& g : step.encoder_grads) grad_ptrs.push_back(&g);
            for (const Matrix& g : step.head_grads) grad_ptrs.push_back(&g);
            optimizer_step(opt, refs, grad_ptrs);
            rec.timings.optimizer += opt_timer.elapsed();

            sum_total += step.total_value;
            sum_lg += std::isnan(step.loss.lg) ? 0.0 : step.loss.lg;
            sum_lce += std::isnan(step.loss.lce) ? 0.0 : step.loss.lce;
            ++steps;
        }

        if (steps == 0)
            throw Error("run_training: every batch of epoch " + std::to_string(epoch) +
                        " was skipped");

        rec.loss_total = sum_total / steps;
        rec.loss_lg = sum_lg / steps;
        rec.loss_lce = sum_lce / steps;
        rec.rho_mean = rho_count > 0 ? sum_rho / rho_count : 0.0;

        // Validation metrics; anything not covered by the phase timers
        // (metric computation, bookkeeping) lands in the io bucket.
        const Matrix z_val = encode_values(params, val.features);
        detail::ValSnapshot vs;
        vs.macro_silhouette = macro_silhouette(z_val, val.labels);
        if (integrated) {
            const std::vector<int> pred = argmax_rows(logits_values(head, z_val));
            vs.accuracy = accuracy(pred, val.labels);
            vs.macro_f1 = macro_f1(pred, val.labels, num_classes);
        }
        rec.val_accuracy = vs.accuracy;
        rec.val_macro_f1 = vs.macro_f1;
        rec.val_macro_silhouette = vs.macro_silhouette;

        rec.epoch_wall = epoch_timer.elapsed();
        rec.timings.io = std::max(0.0, rec.epoch_wall - rec.timings.sum());
        report.epochs.push_back(rec);

        const double monitor = integrated ? vs.macro_f1 : vs.macro_silhouette;
        if (monitor > best_monitor) {
            best_monitor = monitor;
            best_params = params;
            best_head = head;
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;
    }

    report.early_stop_epoch = last_epoch;
    report.best_epoch = best_epoch;
    report.best_monitor = best_monitor;
    params = best_params;
    head = best_head;

    if (!integrated) {
        const Matrix z_train = encode_values(params, train.features);
        const Matrix z_val = encode_values(params, val.features);
        head = fit_linear_head(z_train, train.labels, z_val, val.labels, cfg.head_eta,
                               cfg.head_epochs, num_classes, cfg.seed);
    }

    if (model_out) *model_out = TrainedModel{params, head};

    // Final evaluation: the single test-set access of the run.
    ++test_accesses;
    const Matrix z_test = encode_values(params, test.features);
    const std::vector<int> pred = argmax_rows(logits_values(head, z_test));
    report.test_accuracy = accuracy(pred, test.labels);
    report.test_macro_f1 = macro_f1(pred, test.labels, num_classes);
    report.test_macro_silhouette = macro_silhouette(z_test, test.labels);
    report.test_accesses = test_accesses;
    report.total_time = total_timer.elapsed();
    return report;
}

// Joint encoder + classifier training on the composite loss, monitored by
// validation macro-F1.
inline TrainReport train_integrated(const TrainConfig& cfg, const Dataset& train,
                                    const Dataset& val, const Dataset& test,
                                    const GraphObserver& observer = nullptr) {
    if (cfg.mode != TrainMode::integrated)
        throw ValidationError("train_integrated: config.mode must be integrated");
    return run_training(cfg, train, val, test, observer);
}

// Representation-only training monitored by validation macro-silhouette;
// the classifier is fitted afterwards on frozen embeddings.
inline TrainReport train_standalone(const TrainConfig& cfg, const Dataset& train,
                                    const Dataset& val, const Dataset& test,
                                    const GraphObserver& observer = nullptr) {
    if (cfg.mode != TrainMode::standalone)
        throw ValidationError("train_standalone: config.mode must be standalone");
    return run_training(cfg, train, val, test, observer);
}

// ------------------------------------------------------------------ sweep

enum class SweepParam { gamma, sigma_mult, lambda };

inline const char* sweep_param_name(SweepParam p) {
    switch (p) {
        case SweepParam::gamma: return "gamma";
        case SweepParam::sigma_mult: return "sigma_mult";
        case SweepParam::lambda: return "lambda";
    }
    return "?";
}

struct SweepRun {
    SweepParam param{};
    double value = 0.0;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Metrics test;
    double total_time = 0.0;
    int early_stop_epoch = 0;
};

struct SweepSummaryRow {
    double value = 0.0;
    int runs_ok = 0;
    Metrics mean;
    double mean_time = 0.0;
    double accuracy_dev_from_best = 0.0;
    double f1_dev_from_best = 0.0;
};

// One full run per grid point per seed; individual failures are recorded and
// the sweep continues.
inline std::vector<SweepRun> sweep(const TrainConfig& base, SweepParam param,
                                   const std::vector<double>& values,
                                   const std::vector<uint64_t>& seeds, const Dataset& train,
                                   const Dataset& val, const Dataset& test) {
    if (values.empty()) throw ValidationError("sweep: empty grid");
    if (seeds.empty()) throw ValidationError("sweep: need at least one seed");
    std::vector<SweepRun> runs;
    for (double value : values) {
        for (uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.seed = seed;
            switch (param) {
                case SweepParam::gamma: cfg.gamma = value; break;
                case SweepParam::sigma_mult: cfg.sigma_mult = value; break;
                case SweepParam::lambda: cfg.lambda = value; break;
            }
            SweepRun run;
            run.param = param;
            run.value = value;
            run.seed = seed;
            try {
                const TrainReport rep = run_training(cfg, train, val, test);
                run.ok = true;
                run.test = Metrics{rep.test_accuracy, rep.test_macro_f1, rep.test_macro_silhouette};
                run.total_time = rep.total_time;
                run.early_stop_epoch = rep.early_stop_epoch;
            } catch (const std::exception& e) {
                run.ok = false;
                run.error = e.what();
            }
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

inline std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRun>& runs) {
    std::vector<double> values;
    for (const auto& r : runs)
        if (std::find(values.begin(), values.end(), r.value) == values.end())
            values.push_back(r.value);
    std::vector<SweepSummaryRow> rows;
    for (double v : values) {
        SweepSummaryRow row;
        row.value = v;
        for (const auto& r : runs) {
            if (r.value != v || !r.ok) continue;
            row.mean.accuracy += r.test.accuracy;
            row.mean.macro_f1 += r.test.macro_f1;
            row.mean.macro_silhouette += r.test.macro_silhouette;
            row.mean_time += r.total_time;
            ++row.runs_ok;
        }
        if (row.runs_ok > 0) {
            row.mean.accuracy /= row.runs_ok;
            row.mean.macro_f1 /= row.runs_ok;
            row.mean.macro_silhouette /= row.runs_ok;
            row.mean_time /= row.runs_ok;
        }
        rows.push_back(row);
    }
    double best_acc = 0.0, best_f1 = 0.0;
    for (const auto& r : rows) {
        best_acc = std::max(best_acc, r.mean.accuracy);
        best_f1 = std::max(best_f1, r.mean.macro_f1);
    }
    for (auto& r : rows) {
        r.accuracy_dev_from_best = best_acc - r.mean.accuracy;
        r.f1_dev_from_best = best_f1 - r.mean.macro_f1;
    }
    return rows;
}

// ------------------------------------------------------------------ compare

struct CompareRow {
    LossKind loss{};
    int seeds = 0;
    double acc_mean = 0.0, acc_var = 0.0;
    double f1_mean = 0.0, f1_var = 0.0;
    double sil_mean = 0.0;
    double total_time_mean = 0.0;
    double epoch_time_mean = 0.0;
    double early_stop_mean = 0.0;
    std::vector<double> per_seed_accuracy;
};

struct CompareTTest {
    std::string comparison;
    double mu_a = 0.0, mu_b = 0.0;
    TTestResult test;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<CompareTTest> ttests;
};

// Runs every loss under identical seeds and config, reports the Table-style
// metric columns plus paired t-tests of the first loss against each other
// loss over the per-seed accuracies.
inline CompareResult compare_losses(const TrainConfig& base, const std::vector<LossKind>& losses,
                                    const std::vector<uint64_t>& seeds, const Dataset& train,
                                    const Dataset& val, const Dataset& test) {
    if (losses.size() < 2) throw ValidationError("compare: need at least two losses");
    if (seeds.size() < 2) throw ValidationError("compare: need at least two seeds for t-tests");
    CompareResult result;
    for (LossKind loss : losses) {
        CompareRow row;
        row.loss = loss;
        row.seeds = static_cast<int>(seeds.size());
        std::vector<double> accs, f1s;
        for (uint64_t seed : seeds) {
            TrainConfig cfg = base;
            cfg.loss = loss;
            cfg.seed = seed;
            const TrainReport rep = run_training(cfg, train, val, test);
            accs.push_back(rep.test_accuracy);
            f1s.push_back(rep.test_macro_f1);
            row.sil_mean += rep.test_macro_silhouette;
            row.total_time_mean += rep.total_time;
            row.epoch_time_mean += rep.total_time / rep.early_stop_epoch;
            row.early_stop_mean += rep.early_stop_epoch;
        }
        const double n = static_cast<double>(seeds.size());
        for (double a : accs) row.acc_mean += a;
        for (double f : f1s) row.f1_mean += f;
        row.acc_mean /= n;
        row.f1_mean /= n;
        for (double a : accs) row.acc_var += (a - row.acc_mean) * (a - row.acc_mean);
        for (double f : f1s) row.f1_var += (f - row.f1_mean) * (f - row.f1_mean);
        row.acc_var /= (n - 1.0);
        row.f1_var /= (n - 1.0);
        row.sil_mean /= n;
        row.total_time_mean /= n;
        row.epoch_time_mean /= n;
        row.early_stop_mean /= n;
        row.per_seed_accuracy = accs;
        result.rows.push_back(std::move(row));
    }
    for (size_t i = 1; i < result.rows.size(); ++i) {
        CompareTTest tt;
        tt.comparison = std::string(loss_name(result.rows[0].loss)) + " vs " +
                        loss_name(result.rows[i].loss);
        tt.mu_a = result.rows[0].acc_mean;
        tt.mu_b = result.rows[i].acc_mean;
        tt.test = paired_t_test(result.rows[0].per_seed_accuracy, result.rows[i].per_seed_accuracy);
        result.ttests.push_back(std::move(tt));
    }
    return result;
}

} // namespace gloss
