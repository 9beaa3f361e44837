#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gloss/tape.hpp"

namespace gloss {

// =============================================================================
// Per-minibatch similarity graph: pairwise squared distances, Gaussian
// kernel with a zeroed diagonal, symmetric normalization, and the
// column-stochastic transition matrix with labeled/masked block views.
// Everything except sigma estimation is recorded on the tape, so the whole
// chain is differentiable back to the embeddings.
// =============================================================================

// The gamma-partition of a minibatch into labeled and masked node sets.
struct LabelSplit {
    std::vector<int> labeled_idx;
    std::vector<int> masked_idx;
    double gamma = 0.0;

    int batch_size() const {
        return static_cast<int>(labeled_idx.size() + masked_idx.size());
    }
};

struct SimilarityGraph {
    NodeId d2 = -1;      // B x B squared distances
    NodeId w = -1;       // kernel weights, symmetric, zero diagonal
    NodeId a_norm = -1;  // D^{-1/2} W D^{-1/2}
    double sigma = 0.0;
    std::vector<double> degree;  // D_ii = sum_j w_ij (forward values)
};

// Tape handles to T and its block views, plus the split that ordered them.
struct TransitionView {
    NodeId t = -1;
    NodeId t_uu = -1;  // masked rows x masked cols
    NodeId t_ul = -1;  // masked rows x labeled cols
    LabelSplit split;
};

// Value-level counterpart used by diagnostics and verification paths.
struct TransitionMatrix {
    Matrix t;
    LabelSplit split;

    Matrix t_uu() const { return submatrix(t, split.masked_idx, split.masked_idx); }
    Matrix t_ul() const { return submatrix(t, split.masked_idx, split.labeled_idx); }
};

// ------------------------------------------------------------------ kernel

inline NodeId pairwise_sq_distances(Tape& tape, NodeId x) {
    const Matrix& v = tape.value(x);
    if (v.rows() < 2)
        throw ValidationError("pairwise_sq_distances: need at least 2 rows, got " +
                              std::to_string(v.rows()));
    if (!all_finite(v)) throw ValidationError("pairwise_sq_distances: non-finite input");
    return tape.pairwise_sqdist(x);
}

// W_ij = exp(-D2_ij / (2 sigma^2)), diagonal forced to exactly zero by
// subtracting the identity (exp(0) = 1 on the diagonal).
inline NodeId gaussian_kernel(Tape& tape, NodeId d2, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("gaussian_kernel: sigma must be > 0");
    const Matrix& v = tape.value(d2);
    const NodeId e = tape.elementwise_exp(tape.scale(d2, -1.0 / (2.0 * sigma * sigma)));
    return tape.subtract(e, tape.input(Matrix::identity(v.rows())));
}

// A_norm = D^{-1/2} W D^{-1/2}. Row and column degree vectors both come from
// multiplying the symmetric W by a ones vector, which keeps both orientations
// on the tape without a transpose op; the denominator exp(0.5(log d_i +
// log d_j)) is then an outer sum of the two.
inline NodeId symmetric_normalize(Tape& tape, NodeId w, std::vector<double>* degrees_out = nullptr) {
    const Matrix& wv = tape.value(w);
    const int b = wv.rows();
    if (b != wv.cols()) throw ShapeError("symmetric_normalize: W must be square");

    const NodeId dcol = tape.matmul(w, tape.input(Matrix::ones(b, 1)));
    const Matrix& dv = tape.value(dcol);
    for (int i = 0; i < b; ++i)
        if (!(dv(i, 0) >= kEpsLog))
            throw Error("symmetric_normalize: zero-degree row " + std::to_string(i));
    if (degrees_out) {
        degrees_out->resize(static_cast<size_t>(b));
        for (int i = 0; i < b; ++i) (*degrees_out)[static_cast<size_t>(i)] = dv(i, 0);
    }

    const NodeId drow = tape.matmul(tape.input(Matrix::ones(1, b)), w);
    const NodeId log_sum = tape.add(
        tape.matmul(tape.log_clamped(dcol), tape.input(Matrix::ones(1, b))),
        tape.matmul(tape.input(Matrix::ones(b, 1)), tape.log_clamped(drow)));
    const NodeId denom = tape.elementwise_exp(tape.scale(log_sum, 0.5));
    return tape.elementwise_divide(w, denom);
}

inline SimilarityGraph build_similarity_graph(Tape& tape, NodeId x, double sigma) {
    SimilarityGraph g;
    g.sigma = sigma;
    g.d2 = pairwise_sq_distances(tape, x);
    g.w = gaussian_kernel(tape, g.d2, sigma);
    g.a_norm = symmetric_normalize(tape, g.w, &g.degree);
    return g;
}

// ------------------------------------------------------------------ transition

// T_ij = A_norm_ij / sum_m A_norm_mj, with block views ordered by the split.
inline TransitionView column_stochastic(Tape& tape, NodeId a_norm, const LabelSplit& split) {
    if (split.labeled_idx.empty() || split.masked_idx.empty())
        throw ValidationError("column_stochastic: split must have labeled and masked nodes");
    TransitionView view;
    view.t = tape.column_normalize(a_norm);
    view.t_uu = tape.masked_select(view.t, split.masked_idx, split.masked_idx);
    view.t_ul = tape.masked_select(view.t, split.masked_idx, split.labeled_idx);
    view.split = split;
    return view;
}

// ------------------------------------------------------------------ sigma

// G-Loss-SQRT bandwidth: sigma = sqrt(median(offdiagonal pairwise squared
// distances) / 3), the inflection point of the kernel in sigma. The median
// of an even-length list is the lower-middle element. Sigma is a constant
// with respect to differentiation, hence the value-level signature.
inline double sigma_sqrt(const Matrix& x) {
    const int b = x.rows();
    if (b < 2) throw ValidationError("sigma_sqrt: need at least 2 rows");
    std::vector<double> d2;
    d2.reserve(static_cast<size_t>(b) * (b - 1) / 2);
    for (int i = 0; i < b; ++i)
        for (int j = i + 1; j < b; ++j) {
            double s = 0.0;
            for (int k = 0; k < x.cols(); ++k) {
                const double d = x(i, k) - x(j, k);
                s += d * d;
            }
            d2.push_back(s);
        }
    const size_t mid = (d2.size() - 1) / 2;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
    const double median = d2[mid];
    if (!(median > 0.0))
        throw ValidationError(
            "sigma_sqrt: median pairwise distance is zero (coincident points); "
            "set sigma explicitly");
    return std::sqrt(median / 3.0);
}

// ------------------------------------------------------------------ values

// Value-level rebuild of the graph chain via a throwaway tape. Shares the
// exact arithmetic with the training path, which the dynamic-graph contract
// (bit-comparing recomputed W against the step's W) relies on.
struct GraphValues {
    Matrix d2, w, a_norm, t;
    std::vector<double> degree;
};

inline GraphValues graph_values(const Matrix& x, double sigma) {
    Tape tape;
    const NodeId xin = tape.input(x);
    SimilarityGraph g = build_similarity_graph(tape, xin, sigma);
    GraphValues out;
    out.d2 = tape.value(g.d2);
    out.w = tape.value(g.w);
    out.a_norm = tape.value(g.a_norm);
    out.t = tape.value(tape.column_normalize(g.a_norm));
    out.degree = g.degree;
    return out;
}

} // namespace gloss
