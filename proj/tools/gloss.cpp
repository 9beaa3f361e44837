// gloss: command-line surface for the graph-guided fine-tuning toolkit.
//
// Subcommands: gen-blobs, train, sweep, lpa-verify, gradcheck, dump-graph,
// compare. All outputs are JSON/CSV; everything is deterministic given the
// seeds. Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gloss/config.hpp"
#include "gloss/dataset.hpp"
#include "gloss/report_json.hpp"
#include "gloss/trainer.hpp"
#include "gloss/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct DataOptions {
    std::string data;
    std::string train, val, test;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--data", opts.data, "single dataset file (split per config fractions)");
    cmd->add_option("--train", opts.train, "training split file (triple-file mode)");
    cmd->add_option("--val", opts.val, "validation split file (triple-file mode)");
    cmd->add_option("--test", opts.test, "test split file (triple-file mode)");
}

gloss::SplitResult load_splits(const DataOptions& opts, const gloss::TrainConfig& cfg,
                               std::vector<std::string>* warnings) {
    using namespace gloss;
    const bool triple = !opts.train.empty() || !opts.val.empty() || !opts.test.empty();
    if (triple) {
        if (opts.train.empty() || opts.val.empty() || opts.test.empty())
            throw ValidationError("triple-file mode needs --train, --val and --test together");
        if (!opts.data.empty())
            throw ValidationError("--data conflicts with --train/--val/--test");
        SplitResult s;
        s.train = load_dataset(opts.train, format_from_path(opts.train));
        s.val = load_dataset(opts.val, format_from_path(opts.val));
        s.test = load_dataset(opts.test, format_from_path(opts.test));
        return s;
    }
    if (opts.data.empty())
        throw ValidationError("need --data or the --train/--val/--test triple");
    const Dataset ds = load_dataset(opts.data, format_from_path(opts.data));
    return split(ds, cfg.train_frac, cfg.val_frac, cfg.seed, warnings);
}

gloss::TrainConfig build_config(const std::string& config_path,
                                const std::vector<std::string>& overrides,
                                std::optional<uint64_t> seed_flag) {
    gloss::TrainConfig cfg;
    if (!config_path.empty()) cfg = gloss::load_config(config_path);
    gloss::apply_overrides(cfg, overrides);
    if (seed_flag) cfg.seed = *seed_flag;
    return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(static_cast<uint64_t>(std::stoull(item)));
    return out;
}

void write_matrix_csv(const gloss::Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw gloss::Error("cannot open '" + path + "' for writing");
    char buf[40];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out.write(buf, len);
            if (j + 1 < m.cols()) out << ',';
        }
        out << '\n';
    }
}

// ------------------------------------------------------------------ train

int cmd_train(const gloss::TrainConfig& cfg, const DataOptions& data_opts,
              const std::string& out_dir) {
    using namespace gloss;
    std::vector<std::string> warnings;
    validate_config(cfg, &warnings);
    const SplitResult splits = load_splits(data_opts, cfg, &warnings);
    print_warnings(warnings);

    TrainedModel model;
    const TrainReport report =
        run_training(cfg, splits.train, splits.val, splits.test, nullptr, nullptr, &model);

    fs::create_directories(out_dir);
    {
        std::ofstream epochs(fs::path(out_dir) / "epochs.jsonl");
        write_report_jsonl(report, epochs);
    }
    {
        std::ofstream summary(fs::path(out_dir) / "summary.json");
        summary << summary_json(report).dump(2) << "\n";
    }
    save_checkpoint((fs::path(out_dir) / "encoder.glck").string(), model.encoder, &model.head);

    std::printf("mode=%s loss=%s seed=%llu\n", mode_name(cfg.mode), loss_name(cfg.loss),
                static_cast<unsigned long long>(cfg.seed));
    std::printf("epochs_run=%d best_epoch=%d early_stop_epoch=%d total_time=%.2fs\n",
                static_cast<int>(report.epochs.size()), report.best_epoch,
                report.early_stop_epoch, report.total_time);
    std::printf("test: accuracy=%.4f macro_f1=%.4f macro_silhouette=%.4f\n",
                report.test_accuracy, report.test_macro_f1, report.test_macro_silhouette);
    std::printf("outputs written to %s\n", out_dir.c_str());
    return 0;
}

// ------------------------------------------------------------------ sweep

int cmd_sweep(const gloss::TrainConfig& cfg, const DataOptions& data_opts,
              const std::string& out_dir, const std::string& param_name,
              const std::string& values_csv, const std::string& seeds_csv) {
    using namespace gloss;
    SweepParam param;
    if (param_name == "gamma") param = SweepParam::gamma;
    else if (param_name == "sigma_mult") param = SweepParam::sigma_mult;
    else if (param_name == "lambda") param = SweepParam::lambda;
    else throw ValidationError("sweep: --param must be gamma|sigma_mult|lambda");

    const std::vector<double> values = parse_double_list(values_csv);
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_csv);
    std::vector<std::string> warnings;
    const SplitResult splits = load_splits(data_opts, cfg, &warnings);
    print_warnings(warnings);

    const std::vector<SweepRun> runs = sweep(cfg, param, values, seeds, splits.train, splits.val,
                                             splits.test);
    const std::vector<SweepSummaryRow> summary = summarize_sweep(runs);

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "sweep_runs.csv");
        out << "param,value,seed,status,accuracy,macro_f1,macro_silhouette,total_time,"
               "early_stop_epoch\n";
        for (const auto& r : runs) {
            out << sweep_param_name(r.param) << ',' << r.value << ',' << r.seed << ','
                << (r.ok ? "ok" : "failed") << ',';
            if (r.ok)
                out << r.test.accuracy << ',' << r.test.macro_f1 << ',' << r.test.macro_silhouette
                    << ',' << r.total_time << ',' << r.early_stop_epoch << '\n';
            else
                out << ",,,," << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "sweep_summary.csv");
        out << "param,value,runs_ok,mean_accuracy,mean_macro_f1,mean_macro_silhouette,"
               "mean_total_time,accuracy_dev_from_best,f1_dev_from_best\n";
        for (const auto& r : summary)
            out << param_name << ',' << r.value << ',' << r.runs_ok << ',' << r.mean.accuracy
                << ',' << r.mean.macro_f1 << ',' << r.mean.macro_silhouette << ',' << r.mean_time
                << ',' << r.accuracy_dev_from_best << ',' << r.f1_dev_from_best << '\n';
    }

    std::printf("%-12s %-10s %-10s %-10s %-12s\n", param_name.c_str(), "acc", "macro_f1",
                "silhouette", "f1_dev_best");
    for (const auto& r : summary)
        std::printf("%-12g %-10.4f %-10.4f %-10.4f %-12.4f\n", r.value, r.mean.accuracy,
                    r.mean.macro_f1, r.mean.macro_silhouette, r.f1_dev_from_best);
    std::printf("outputs written to %s\n", out_dir.c_str());
    return 0;
}

// ------------------------------------------------------------------ verify

int cmd_lpa_verify(int instances, long walks, uint64_t seed) {
    using namespace gloss;
    const LpaTriangleReport rep = run_lpa_triangle(instances, std::max(1, instances / 5), walks, seed);
    std::printf("closed-form vs Neumann   : %d instances, max deviation %.3e\n",
                rep.neumann_instances, rep.max_closed_vs_neumann);
    std::printf("closed-form vs Monte-Carlo: %d instances, max deviation %.3e (%ld walks/node)\n",
                rep.mc_instances, rep.max_closed_vs_mc, walks);
    std::printf("max rho(T_uu) observed   : %.6f\n", rep.max_rho);
    const bool ok = rep.max_closed_vs_neumann < 1e-8 && rep.max_closed_vs_mc < 2e-2;
    std::printf("%s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_gradcheck(int trials, double tol, uint64_t seed) {
    using namespace gloss;
    double worst = 0.0;
    bool all_pass = true;
    for (int i = 0; i < trials; ++i) {
        const EndToEndGradCheck r = end_to_end_gradient_check(mix_seed(seed, 0x6c, i), 1e-5, tol);
        worst = std::max(worst, r.max_rel_err);
        all_pass = all_pass && r.pass;
        std::printf("trial %2d: %d tensors, max rel err %.3e %s\n", i + 1, r.tensors_checked,
                    r.max_rel_err, r.pass ? "ok" : "FAIL");
    }
    std::printf("overall max rel err %.3e at tol %.1e: %s\n", worst, tol,
                all_pass ? "PASS" : "FAIL");
    return all_pass ? 0 : 1;
}

// ------------------------------------------------------------------ dump-graph

int cmd_dump_graph(const gloss::TrainConfig& cfg, const DataOptions& data_opts, int epoch,
                   const std::string& out_path) {
    using namespace gloss;
    if (!is_gloss(cfg.loss))
        throw ValidationError("dump-graph: config must select a gloss_* loss");
    if (epoch < 1 || epoch > cfg.max_epochs)
        throw ValidationError("dump-graph: --epoch must be within [1, max_epochs]");
    std::vector<std::string> warnings;
    const SplitResult splits = load_splits(data_opts, cfg, &warnings);
    print_warnings(warnings);

    bool dumped = false;
    GraphObserver observer = [&](const GraphObservation& obs) {
        if (obs.epoch != epoch || dumped) return;
        write_matrix_csv(obs.w, out_path);
        dumped = true;
        std::printf("epoch %d batch %d: W is %dx%d, sigma=%.6f -> %s\n", obs.epoch,
                    obs.batch_index, obs.w.rows(), obs.w.cols(), obs.sigma, out_path.c_str());
    };
    run_training(cfg, splits.train, splits.val, splits.test, observer);
    if (!dumped)
        throw Error("dump-graph: training stopped before epoch " + std::to_string(epoch));
    return 0;
}

// ------------------------------------------------------------------ compare

int cmd_compare(const gloss::TrainConfig& cfg, const DataOptions& data_opts,
                const std::string& out_dir, const std::string& losses_csv,
                const std::string& seeds_csv) {
    using namespace gloss;
    std::vector<LossKind> losses;
    {
        std::stringstream ss(losses_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item == "gloss_o") losses.push_back(LossKind::gloss_o);
            else if (item == "gloss_sqrt") losses.push_back(LossKind::gloss_sqrt);
            else if (item == "ce") losses.push_back(LossKind::ce);
            else if (item == "scl") losses.push_back(LossKind::scl);
            else if (item == "triplet") losses.push_back(LossKind::triplet);
            else if (item == "cosine") losses.push_back(LossKind::cosine);
            else throw ValidationError("compare: unknown loss '" + item + "'");
        }
    }
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_csv);
    std::vector<std::string> warnings;
    const SplitResult splits = load_splits(data_opts, cfg, &warnings);
    print_warnings(warnings);

    const CompareResult result =
        compare_losses(cfg, losses, seeds, splits.train, splits.val, splits.test);

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "compare.csv");
        out << "loss,seeds,accuracy_mean,accuracy_var,macro_f1_mean,macro_f1_var,"
               "macro_silhouette_mean,total_time_mean,epoch_time_mean,early_stop_epoch_mean\n";
        for (const auto& r : result.rows)
            out << loss_name(r.loss) << ',' << r.seeds << ',' << r.acc_mean << ',' << r.acc_var
                << ',' << r.f1_mean << ',' << r.f1_var << ',' << r.sil_mean << ','
                << r.total_time_mean << ',' << r.epoch_time_mean << ',' << r.early_stop_mean
                << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "ttests.csv");
        out << "comparison,mu_a,mu_b,delta_mu,t_stat,p_value\n";
        for (const auto& t : result.ttests)
            out << t.comparison << ',' << t.mu_a << ',' << t.mu_b << ',' << t.test.mean_diff << ','
                << t.test.t_stat << ',' << t.test.p_value << '\n';
    }

    std::printf("%-12s %-18s %-18s %-12s %-12s %-12s %-10s\n", "loss", "accuracy", "macro_f1",
                "silhouette", "total_time", "epoch_time", "stop_epoch");
    for (const auto& r : result.rows)
        std::printf("%-12s %.4f+-%.4f    %.4f+-%.4f    %-12.4f %-12.2f %-12.3f %-10.1f\n",
                    loss_name(r.loss), r.acc_mean, r.acc_var, r.f1_mean, r.f1_var, r.sil_mean,
                    r.total_time_mean, r.epoch_time_mean, r.early_stop_mean);
    std::printf("\n%-28s %-10s %-10s %-10s %-12s\n", "comparison", "mu_a", "mu_b", "delta",
                "p_value");
    for (const auto& t : result.ttests)
        std::printf("%-28s %-10.4f %-10.4f %-10.4f %-12.6f\n", t.comparison.c_str(), t.mu_a,
                    t.mu_b, t.test.mean_diff, t.test.p_value);
    std::printf("outputs written to %s\n", out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"G-Loss graph-guided fine-tuning toolkit"};
    app.require_subcommand(1);

    // gen-blobs
    auto* gen = app.add_subcommand("gen-blobs", "generate a synthetic Gaussian-blob dataset");
    int gen_n = 600, gen_d = 20, gen_c = 3;
    double gen_sep = 5.0;
    uint64_t gen_seed = 1;
    std::string gen_out = "blobs.gld";
    gen->add_option("--n", gen_n, "number of rows");
    gen->add_option("--d", gen_d, "feature dimension");
    gen->add_option("--classes", gen_c, "number of classes");
    gen->add_option("--sep", gen_sep, "pairwise distance between cluster centers");
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--out", gen_out, "output file (binary GLDS1)");

    // shared train-ish options
    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed_flag;
    DataOptions data_opts;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
        cmd->add_option("--set", overrides, "config override key=value (repeatable)");
        cmd->add_option("--seed", seed_flag, "seed override");
        cmd->add_option("--out", out_dir, "output directory");
        add_data_options(cmd, data_opts);
    };

    auto* train = app.add_subcommand("train", "run one training job");
    add_common(train);

    auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep over gamma/sigma_mult/lambda");
    add_common(sweep_cmd);
    std::string sweep_param = "gamma", sweep_values = "0.1,0.3,0.5,0.7,0.9", sweep_seeds = "1,2,3";
    sweep_cmd->add_option("--param", sweep_param, "gamma|sigma_mult|lambda");
    sweep_cmd->add_option("--values", sweep_values, "comma-separated grid values");
    sweep_cmd->add_option("--seeds", sweep_seeds, "comma-separated seeds");

    auto* verify = app.add_subcommand("lpa-verify",
                                      "closed-form vs Neumann vs Monte-Carlo propagation triangle");
    int verify_instances = 50;
    long verify_walks = 100000;
    uint64_t verify_seed = 1;
    verify->add_option("--instances", verify_instances, "number of random instances");
    verify->add_option("--walks", verify_walks, "Monte-Carlo walks per masked node");
    verify->add_option("--seed", verify_seed, "rng seed");

    auto* gradcheck = app.add_subcommand("gradcheck",
                                         "finite-difference check of the end-to-end gradient");
    int gc_trials = 5;
    double gc_tol = 1e-4;
    uint64_t gc_seed = 1;
    gradcheck->add_option("--trials", gc_trials, "number of random configurations");
    gradcheck->add_option("--tol", gc_tol, "relative-error tolerance");
    gradcheck->add_option("--seed", gc_seed, "rng seed");

    auto* dump = app.add_subcommand("dump-graph", "write W of the designated batch as CSV");
    add_common(dump);
    int dump_epoch = 1;
    std::string dump_out = "graph.csv";
    dump->add_option("--epoch", dump_epoch, "epoch whose first graph batch is dumped");
    dump->add_option("--graph-out", dump_out, "output CSV path");

    auto* compare = app.add_subcommand("compare",
                                       "run several losses under identical seeds and tabulate");
    add_common(compare);
    std::string compare_losses_csv = "gloss_o,scl,triplet,cosine", compare_seeds = "1,2,3";
    compare->add_option("--losses", compare_losses_csv, "comma-separated losses; first is the reference");
    compare->add_option("--seeds", compare_seeds, "comma-separated seeds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const gloss::Dataset ds = gloss::make_blobs(gen_n, gen_d, gen_c, gen_sep, gen_seed);
            gloss::save_dataset(ds, gen_out, gloss::DataFormat::binary);
            std::printf("wrote %d rows (d=%d, C=%d, sep=%g) to %s\n", ds.n(), ds.dim(),
                        ds.num_classes, gen_sep, gen_out.c_str());
            return 0;
        }
        if (*train) return cmd_train(build_config(config_path, overrides, seed_flag), data_opts, out_dir);
        if (*sweep_cmd)
            return cmd_sweep(build_config(config_path, overrides, seed_flag), data_opts, out_dir,
                             sweep_param, sweep_values, sweep_seeds);
        if (*verify) return cmd_lpa_verify(verify_instances, verify_walks, verify_seed);
        if (*gradcheck) return cmd_gradcheck(gc_trials, gc_tol, gc_seed);
        if (*dump)
            return cmd_dump_graph(build_config(config_path, overrides, seed_flag), data_opts,
                                  dump_epoch, dump_out);
        if (*compare)
            return cmd_compare(build_config(config_path, overrides, seed_flag), data_opts, out_dir,
                               compare_losses_csv, compare_seeds);
    } catch (const gloss::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
