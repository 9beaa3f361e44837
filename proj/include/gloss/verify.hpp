#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gloss/encoder.hpp"
#include "gloss/graph.hpp"
#include "gloss/losses.hpp"
#include "gloss/lpa.hpp"
#include "gloss/rng.hpp"

namespace gloss {

// =============================================================================
// Verification harness shared by the CLI and the acceptance suite: the
// closed-form / Neumann / Monte-Carlo propagation triangle and the
// end-to-end gradient check of the composite loss.
// =============================================================================

// Symmetric Sinkhorn normalization: repeatedly divide by sqrt(r_i r_j) until
// every row (and, by symmetry, column) sums to one. For positive symmetric
// input this converges to a symmetric doubly-stochastic matrix, for which
// the closed-form propagation coincides exactly with the absorption
// probabilities of the column-stochastic random walk.
inline Matrix sinkhorn_doubly_stochastic(Matrix w, int max_iters = 1000, double tol = 1e-14) {
    if (w.rows() != w.cols()) throw ShapeError("sinkhorn: matrix must be square");
    const int n = w.rows();
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> r(static_cast<size_t>(n), 0.0);
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += w(i, j);
            if (!(s > 0.0)) throw Error("sinkhorn: zero row sum");
            r[static_cast<size_t>(i)] = std::sqrt(s);
            worst = std::max(worst, std::fabs(s - 1.0));
        }
        if (worst < tol) break;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                w(i, j) /= r[static_cast<size_t>(i)] * r[static_cast<size_t>(j)];
    }
    return w;
}

// Monte-Carlo absorption oracle: from each masked node, walks step with
// column-stochastic transitions (from state s, the next state is drawn from
// column s of T) until a labeled node absorbs them; tallies are grouped by
// the class of the absorbing node. Returns B_e x C absorption frequencies.
inline Matrix mc_absorption(const Matrix& t, const LabelSplit& split, const std::vector<int>& y,
                            int num_classes, long walks_per_node, uint64_t seed,
                            long max_steps_per_walk = 1000000) {
    const int b = t.rows();
    if (t.cols() != b) throw ShapeError("mc_absorption: T must be square");
    if (static_cast<int>(y.size()) != b)
        throw ShapeError("mc_absorption: labels length vs T size");
    std::vector<char> is_labeled(static_cast<size_t>(b), 0);
    for (int idx : split.labeled_idx) is_labeled[static_cast<size_t>(idx)] = 1;

    Matrix tally(static_cast<int>(split.masked_idx.size()), num_classes);
    Rng rng(mix_seed(seed, 0x3c0));
    for (size_t ui = 0; ui < split.masked_idx.size(); ++ui) {
        for (long walk = 0; walk < walks_per_node; ++walk) {
            int state = split.masked_idx[ui];
            for (long step = 0; step < max_steps_per_walk; ++step) {
                const double r = rng.uniform01();
                double acc = 0.0;
                int next = b - 1;
                for (int i = 0; i < b; ++i) {
                    acc += t(i, state);
                    if (r < acc) { next = i; break; }
                }
                state = next;
                if (is_labeled[static_cast<size_t>(state)]) break;
            }
            if (!is_labeled[static_cast<size_t>(state)])
                throw ConvergenceError("mc_absorption: walk failed to absorb", 0.0);
            tally(static_cast<int>(ui), y[static_cast<size_t>(state)]) += 1.0;
        }
    }
    return scale(tally, 1.0 / static_cast<double>(walks_per_node));
}

// ------------------------------------------------------------------ triangle

struct LpaTriangleReport {
    double max_closed_vs_neumann = 0.0;
    double max_closed_vs_mc = 0.0;
    int neumann_instances = 0;
    int mc_instances = 0;
    double max_rho = 0.0;
};

namespace detail {

inline Matrix random_unit_rows(Rng& rng, int rows, int cols) {
    Matrix x = rng.normal_matrix(rows, cols);
    for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) s += x(i, j) * x(i, j);
        const double norm = std::sqrt(s);
        for (int j = 0; j < cols; ++j) x(i, j) /= norm;
    }
    return x;
}

inline LabelSplit random_split(Rng& rng, const std::vector<int>& y) {
    const double gamma = rng.uniform(0.3, 0.7);
    return gamma_split(y, gamma, rng.next_u64(), true);
}

inline std::vector<int> random_labels(Rng& rng, int b, int c) {
    std::vector<int> y(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) y[static_cast<size_t>(i)] = i < c ? i : rng.uniform_int(c);
    return y;
}

} // namespace detail

// Closed form vs Neumann on random minibatch graphs, and closed form vs the
// Monte-Carlo walker on Sinkhorn-symmetrized kernels (where the closed form
// is exactly the walk's absorption-probability matrix).
inline LpaTriangleReport run_lpa_triangle(int neumann_instances, int mc_instances,
                                          long walks_per_node, uint64_t seed) {
    LpaTriangleReport report;
    Rng rng(mix_seed(seed, 0x7714));

    for (int inst = 0; inst < neumann_instances; ++inst) {
        const int b = 8 + rng.uniform_int(25);  // up to 32
        const int d = 3 + rng.uniform_int(6);
        const int c = 2 + rng.uniform_int(3);
        const Matrix x = detail::random_unit_rows(rng, b, d);
        const double sigma = rng.uniform(0.5, 1.5) * sigma_sqrt(x);
        const GraphValues g = graph_values(x, sigma);
        const std::vector<int> y = detail::random_labels(rng, b, c);
        const LabelSplit split = detail::random_split(rng, y);
        TransitionMatrix tm{g.t, split};
        std::vector<int> labeled_y;
        for (int idx : split.labeled_idx) labeled_y.push_back(y[static_cast<size_t>(idx)]);
        const Matrix y_l = one_hot(labeled_y, c);
        const Matrix closed = propagate_closed_form_values(tm.t_uu(), tm.t_ul(), y_l);
        const NeumannResult nm = propagate_neumann(tm.t_uu(), tm.t_ul(), y_l, 1e-10, 1000000);
        report.max_closed_vs_neumann =
            std::max(report.max_closed_vs_neumann, max_abs_diff(closed, nm.y_hat));
        report.max_rho = std::max(report.max_rho, spectral_radius(tm.t_uu(), 200, seed));
        ++report.neumann_instances;
    }

    for (int inst = 0; inst < mc_instances; ++inst) {
        const int b = 4 + rng.uniform_int(5);  // up to 8
        const int d = 3 + rng.uniform_int(4);
        const int c = 2 + rng.uniform_int(2);
        const Matrix x = detail::random_unit_rows(rng, b, d);
        const GraphValues g = graph_values(x, rng.uniform(0.6, 1.2));
        // Sinkhorn preserves the kernel's zero diagonal, so T cannot self-loop.
        const Matrix t = sinkhorn_doubly_stochastic(g.w);
        const std::vector<int> y = detail::random_labels(rng, b, c);
        const LabelSplit split = detail::random_split(rng, y);
        TransitionMatrix tm{t, split};
        std::vector<int> labeled_y;
        for (int idx : split.labeled_idx) labeled_y.push_back(y[static_cast<size_t>(idx)]);
        const Matrix y_l = one_hot(labeled_y, c);
        const Matrix closed = propagate_closed_form_values(tm.t_uu(), tm.t_ul(), y_l);
        const Matrix mc = mc_absorption(t, split, y, c, walks_per_node, rng.next_u64());
        report.max_closed_vs_mc = std::max(report.max_closed_vs_mc, max_abs_diff(closed, mc));
        ++report.mc_instances;
    }
    return report;
}

// ------------------------------------------------------------------ gradcheck

struct EndToEndGradCheck {
    double max_rel_err = 0.0;
    bool pass = false;
    int tensors_checked = 0;
};

// Gradient-checks the composite loss (graph build + gamma-split + linear
// solve + CE head) against central differences, parameter tensor by
// parameter tensor, on a randomly drawn configuration with B <= 12,
// d_in <= 8, C <= 4.
inline EndToEndGradCheck end_to_end_gradient_check(uint64_t seed, double eps = 1e-5,
                                                   double tol = 1e-4) {
    Rng rng(mix_seed(seed, 0x97adc));
    const int b = 6 + rng.uniform_int(7);       // 6..12
    const int d_in = 3 + rng.uniform_int(6);    // 3..8
    const int embed = 3 + rng.uniform_int(4);   // 3..6
    const int c = 2 + rng.uniform_int(3);       // 2..4
    const bool mlp = rng.uniform01() < 0.5;
    const int hidden = mlp ? 4 + rng.uniform_int(4) : 0;
    const double lambda = rng.uniform(0.3, 0.9);
    const double sigma = rng.uniform(0.5, 1.2);
    const double gamma = rng.uniform(0.4, 0.7);

    EncoderParams params = init_encoder(mlp ? Arch::mlp2 : Arch::linear, d_in, hidden, embed,
                                        true, rng.next_u64());
    // Nonzero biases keep small relu layers from zeroing a whole row, which
    // would land the normalization on an undefined point.
    for (double& v : params.b1.raw()) v = rng.uniform(0.05, 0.3);
    if (params.arch == Arch::mlp2)
        for (double& v : params.b2.raw()) v = rng.uniform(0.05, 0.3);
    ClassifierHead head = init_head(embed, c, rng.next_u64());
    const Matrix x_raw = rng.normal_matrix(b, d_in);
    const std::vector<int> y = detail::random_labels(rng, b, c);
    const LabelSplit split = gamma_split(y, gamma, rng.next_u64(), true);
    std::vector<int> labeled_y, masked_y;
    for (int idx : split.labeled_idx) labeled_y.push_back(y[static_cast<size_t>(idx)]);
    for (int idx : split.masked_idx) masked_y.push_back(y[static_cast<size_t>(idx)]);
    const Matrix y_l = one_hot(labeled_y, c);
    const Matrix y_m = one_hot(masked_y, c);

    // Rebuild the whole composite loss with tensor `which` spliced in as the
    // probed tape input; everything else enters as constants.
    auto make_program = [&](int which) {
        return [&, which](Tape& t, NodeId probe) -> NodeId {
            auto pick = [&](int slot, const Matrix& m) {
                return slot == which ? probe : t.input(m);
            };
            const NodeId xin = t.input(x_raw);
            const NodeId w1 = pick(0, params.w1);
            const NodeId b1 = pick(1, params.b1);
            NodeId z;
            if (params.arch == Arch::linear) {
                z = affine(t, xin, w1, b1);
            } else {
                const NodeId h = t.relu(affine(t, xin, w1, b1));
                z = affine(t, h, pick(2, params.w2), pick(3, params.b2));
            }
            z = t.l2_row_normalize(z);
            SimilarityGraph graph = build_similarity_graph(t, z, sigma);
            TransitionView view = column_stochastic(t, graph.a_norm, split);
            const NodeId y_hat = propagate_closed_form(t, view, y_l);
            const NodeId lg = g_loss(t, normalize_soft_labels(t, y_hat), y_m);
            const NodeId logits = affine(t, z, pick(4, head.weight), pick(5, head.bias));
            const NodeId lce = cross_entropy(t, logits, y);
            return composite(t, lg, lce, lambda).total;
        };
    };

    EndToEndGradCheck result;
    auto check = [&](int slot, const Matrix& tensor) {
        const GradCheckReport r = gradient_check(make_program(slot), tensor, eps, tol);
        result.max_rel_err = std::max(result.max_rel_err, r.max_rel_err);
        ++result.tensors_checked;
    };
    check(0, params.w1);
    check(1, params.b1);
    if (params.arch == Arch::mlp2) {
        check(2, params.w2);
        check(3, params.b2);
    }
    check(4, head.weight);
    check(5, head.bias);
    result.pass = result.max_rel_err <= tol;
    return result;
}

} // namespace gloss
