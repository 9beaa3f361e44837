#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gloss/tape.hpp"

namespace gloss {

// =============================================================================
// Training objectives. Each loss is a pure tape program returning a scalar
// node, differentiable back to the embeddings. One-hot targets are gathered
// through per-class masked_select blocks, so no op outside the engine's
// fixed set is needed. Pair, triplet and contrastive similarities are read
// off pairwise squared distances of unit-normalized rows (cos = 1 - d2/2),
// which keeps everything transpose-free.
// =============================================================================

struct LossValue {
    NodeId total = -1;
    double lg = 0.0;       // graph-loss component (forward value)
    double lce = 0.0;      // cross-entropy component (forward value)
    double lambda = 0.0;
    std::map<std::string, double> components;
};

namespace detail {

// sum_j M[j, labels[j]] as a scalar node, grouping rows by class so the
// gather costs at most C selects.
inline NodeId gather_by_label(Tape& tape, NodeId m, const std::vector<int>& labels) {
    const Matrix& v = tape.value(m);
    if (static_cast<int>(labels.size()) != v.rows())
        throw ShapeError("gather_by_label: labels length " + std::to_string(labels.size()) +
                         " vs " + v.shape_str());
    int max_label = 0;
    for (int l : labels) {
        if (l < 0 || l >= v.cols()) throw ShapeError("gather_by_label: label out of range");
        max_label = std::max(max_label, l);
    }
    std::vector<std::vector<int>> rows_of(static_cast<size_t>(max_label) + 1);
    for (size_t i = 0; i < labels.size(); ++i)
        rows_of[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));

    NodeId acc = -1;
    for (int c = 0; c <= max_label; ++c) {
        const auto& rows = rows_of[static_cast<size_t>(c)];
        if (rows.empty()) continue;
        const NodeId part = tape.reduce_sum(tape.masked_select(m, rows, {c}));
        acc = acc < 0 ? part : tape.add(acc, part);
    }
    return acc;
}

inline std::vector<int> labels_from_one_hot(const Matrix& y) {
    std::vector<int> labels(static_cast<size_t>(y.rows()), -1);
    for (int i = 0; i < y.rows(); ++i) {
        for (int j = 0; j < y.cols(); ++j) {
            const double v = y(i, j);
            if (v == 1.0) {
                if (labels[static_cast<size_t>(i)] >= 0)
                    throw ValidationError("expected one-hot rows, row " + std::to_string(i) +
                                          " has multiple ones");
                labels[static_cast<size_t>(i)] = j;
            } else if (v != 0.0) {
                throw ValidationError("expected one-hot rows, found entry " + std::to_string(v));
            }
        }
        if (labels[static_cast<size_t>(i)] < 0)
            throw ValidationError("expected one-hot rows, row " + std::to_string(i) + " is all zero");
    }
    return labels;
}

// Pairwise cosine similarities of rows: normalize, then 1 - d2/2.
inline NodeId cosine_similarities(Tape& tape, NodeId z) {
    const NodeId zn = tape.l2_row_normalize(z);
    const NodeId d2 = tape.pairwise_sqdist(zn);
    const Matrix& v = tape.value(d2);
    return tape.add(tape.scale(d2, -0.5), tape.input(Matrix::ones(v.rows(), v.cols())));
}

} // namespace detail

// ------------------------------------------------------------------ G-Loss

// Propagation loss: -(1/B_e) sum_j sum_c y_jc log(y_hat_jc) over the masked
// set. `y_hat` must already be row-normalized (see normalize_soft_labels).
inline NodeId g_loss(Tape& tape, NodeId y_hat, const Matrix& y_true_masked) {
    const Matrix& v = tape.value(y_hat);
    if (v.rows() != y_true_masked.rows() || v.cols() != y_true_masked.cols())
        throw ShapeError("g_loss: y_hat " + v.shape_str() + " vs y_true " +
                         y_true_masked.shape_str());
    for (int i = 0; i < v.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < v.cols(); ++j) s += v(i, j);
        if (std::fabs(s - 1.0) > 1e-6)
            throw ValidationError("g_loss: y_hat row " + std::to_string(i) +
                                  " does not sum to 1 (sum=" + std::to_string(s) + ")");
    }
    const std::vector<int> labels = detail::labels_from_one_hot(y_true_masked);
    const NodeId log_y = tape.log_clamped(y_hat);
    const NodeId gathered = detail::gather_by_label(tape, log_y, labels);
    return tape.scale(gathered, -1.0 / static_cast<double>(v.rows()));
}

// ------------------------------------------------------------------ CE

// Softmax cross-entropy averaged over the batch; stabilized by subtracting
// detached row maxima (exact, by shift invariance of softmax).
inline NodeId cross_entropy(Tape& tape, NodeId logits, const std::vector<int>& y) {
    const Matrix& v = tape.value(logits);
    if (static_cast<int>(y.size()) != v.rows())
        throw ShapeError("cross_entropy: labels length " + std::to_string(y.size()) + " vs " +
                         v.shape_str());
    if (!all_finite(v)) throw ValidationError("cross_entropy: non-finite logits");
    Matrix row_max(v.rows(), v.cols());
    for (int i = 0; i < v.rows(); ++i) {
        double m = v(i, 0);
        for (int j = 1; j < v.cols(); ++j) m = std::max(m, v(i, j));
        for (int j = 0; j < v.cols(); ++j) row_max(i, j) = m;
    }
    const NodeId shifted = tape.subtract(logits, tape.input(row_max));
    const NodeId probs = tape.row_normalize(tape.elementwise_exp(shifted));
    const NodeId log_probs = tape.log_clamped(probs);
    const NodeId gathered = detail::gather_by_label(tape, log_probs, y);
    return tape.scale(gathered, -1.0 / static_cast<double>(v.rows()));
}

// ------------------------------------------------------------------ composite

// total = lambda * lg + (1 - lambda) * lce. At the endpoints the unused term
// is dropped from the graph entirely, so lambda = 0 reduces bit-exactly to a
// plain cross-entropy program.
inline LossValue composite(Tape& tape, NodeId lg, NodeId lce, double lambda) {
    if (!(lambda >= 0.0) || !(lambda <= 1.0))
        throw ValidationError("composite: lambda must be in [0, 1]");
    LossValue out;
    out.lambda = lambda;
    out.lg = tape.scalar_value(lg);
    out.lce = tape.scalar_value(lce);
    if (lambda == 0.0) out.total = lce;
    else if (lambda == 1.0) out.total = lg;
    else out.total = tape.add(tape.scale(lg, lambda), tape.scale(lce, 1.0 - lambda));
    return out;
}

// ------------------------------------------------------------------ SCL

// Supervised contrastive loss over unit-normalized embeddings. The anchor's
// own column is excluded from the softmax by pushing the diagonal to -inf
// before exponentiation; anchors without positives are skipped and excluded
// from the averaging denominator.
inline NodeId scl(Tape& tape, NodeId z, const std::vector<int>& y, double tau) {
    if (!(tau > 0.0)) throw ValidationError("scl: tau must be > 0");
    const Matrix& zv = tape.value(z);
    const int b = zv.rows();
    if (static_cast<int>(y.size()) != b)
        throw ShapeError("scl: labels length " + std::to_string(y.size()) + " vs " + zv.shape_str());
    if (b < 2) throw ValidationError("scl: need at least 2 samples");

    const NodeId sim = detail::cosine_similarities(tape, z);
    const NodeId logits = tape.scale(sim, 1.0 / tau);

    // Detached row maxima over the candidate set, plus a huge diagonal shift
    // that zeroes self-similarity after exp.
    const Matrix& lv = tape.value(logits);
    Matrix shift(b, b);
    for (int i = 0; i < b; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < b; ++j)
            if (j != i) m = std::max(m, lv(i, j));
        for (int j = 0; j < b; ++j) shift(i, j) = (i == j) ? m + 1e9 : m;
    }
    const NodeId probs = tape.row_normalize(tape.elementwise_exp(tape.subtract(logits, tape.input(shift))));
    const NodeId log_probs = tape.log_clamped(probs);

    NodeId acc = -1;
    int anchors = 0;
    for (int i = 0; i < b; ++i) {
        std::vector<int> positives;
        for (int j = 0; j < b; ++j)
            if (j != i && y[static_cast<size_t>(j)] == y[static_cast<size_t>(i)])
                positives.push_back(j);
        if (positives.empty()) continue;
        const NodeId mean_pos = tape.scale(
            tape.reduce_sum(tape.masked_select(log_probs, {i}, positives)),
            1.0 / static_cast<double>(positives.size()));
        acc = acc < 0 ? mean_pos : tape.add(acc, mean_pos);
        ++anchors;
    }
    if (anchors == 0)
        throw DegenerateBatchError("scl: no anchor has a positive in this batch");
    return tape.scale(acc, -1.0 / static_cast<double>(anchors));
}

// ------------------------------------------------------------------ triplet

// Batch-all triplet loss: mean hinge over every valid (anchor, positive,
// negative) combination, on unit-normalized embeddings. Each anchor
// contributes an outer-difference block relu(d2(a,p) - d2(a,n) + alpha);
// symmetry of d2 provides the column orientation of the positive distances.
inline NodeId triplet(Tape& tape, NodeId z, const std::vector<int>& y, double alpha) {
    const Matrix& zv = tape.value(z);
    const int b = zv.rows();
    if (static_cast<int>(y.size()) != b)
        throw ShapeError("triplet: labels length " + std::to_string(y.size()) + " vs " +
                         zv.shape_str());
    const NodeId zn = tape.l2_row_normalize(z);
    const NodeId d2 = tape.pairwise_sqdist(zn);

    NodeId acc = -1;
    long total_triplets = 0;
    for (int a = 0; a < b; ++a) {
        std::vector<int> positives, negatives;
        for (int j = 0; j < b; ++j) {
            if (j == a) continue;
            if (y[static_cast<size_t>(j)] == y[static_cast<size_t>(a)]) positives.push_back(j);
            else negatives.push_back(j);
        }
        if (positives.empty() || negatives.empty()) continue;
        const int np = static_cast<int>(positives.size());
        const int nn = static_cast<int>(negatives.size());
        const NodeId pos_col = tape.masked_select(d2, positives, {a});
        const NodeId neg_row = tape.masked_select(d2, {a}, negatives);
        const NodeId pos_block = tape.matmul(pos_col, tape.input(Matrix::ones(1, nn)));
        const NodeId neg_block = tape.matmul(tape.input(Matrix::ones(np, 1)), neg_row);
        const NodeId margin = tape.add(tape.subtract(pos_block, neg_block),
                                       tape.input(Matrix::filled(np, nn, alpha)));
        const NodeId hinge_sum = tape.reduce_sum(tape.relu(margin));
        acc = acc < 0 ? hinge_sum : tape.add(acc, hinge_sum);
        total_triplets += static_cast<long>(np) * nn;
    }
    if (total_triplets == 0)
        throw DegenerateBatchError("triplet: no valid (anchor, positive, negative) in this batch");
    return tape.scale(acc, 1.0 / static_cast<double>(total_triplets));
}

// ------------------------------------------------------------------ cosine

// Mean squared error between pairwise cosine similarity and the same-class
// indicator over all unordered pairs. M = cos - label is symmetric with a
// zero diagonal, so sum_{i<j} M_ij^2 = trace(M M)/2 and the mean over
// unordered pairs equals trace(M M) / (B (B-1)).
inline NodeId cosine_pair(Tape& tape, NodeId z, const std::vector<int>& y) {
    const Matrix& zv = tape.value(z);
    const int b = zv.rows();
    if (b < 2) throw ValidationError("cosine_pair: need at least 2 samples");
    if (static_cast<int>(y.size()) != b)
        throw ShapeError("cosine_pair: labels length " + std::to_string(y.size()) + " vs " +
                         zv.shape_str());

    const NodeId sim = detail::cosine_similarities(tape, z);
    Matrix label(b, b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
            label(i, j) = (y[static_cast<size_t>(i)] == y[static_cast<size_t>(j)]) ? 1.0 : 0.0;
    const NodeId m = tape.subtract(sim, tape.input(label));
    const NodeId mm = tape.matmul(m, m);
    NodeId trace = -1;
    for (int i = 0; i < b; ++i) {
        const NodeId d = tape.masked_select(mm, {i}, {i});
        trace = trace < 0 ? d : tape.add(trace, d);
    }
    return tape.scale(trace, 1.0 / (static_cast<double>(b) * (b - 1)));
}

} // namespace gloss
