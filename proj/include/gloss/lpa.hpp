#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gloss/graph.hpp"
#include "gloss/rng.hpp"

namespace gloss {

// =============================================================================
// Label propagation: gamma-split the batch, solve the closed form
// Y_hat = (I - T_uu)^{-1} T_ul Y_l on the tape, and provide an independent
// Neumann-series solver plus spectral diagnostics for verification.
// =============================================================================

using SoftLabels = Matrix;  // B_e x C, rows >= 0

inline Matrix one_hot(const std::vector<int>& labels, int num_classes) {
    Matrix m(static_cast<int>(labels.size()), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw ValidationError("one_hot: label out of range");
        m(static_cast<int>(i), labels[i]) = 1.0;
    }
    return m;
}

// ------------------------------------------------------------------ split

// Partition batch positions into labeled (size round(gamma*B)) and masked
// sets. With stratify on, every class present in the batch gets at least one
// labeled representative when the class count fits in the labeled budget.
// Index lists come out sorted, so block extraction order is canonical.
inline LabelSplit gamma_split(const std::vector<int>& y, double gamma, uint64_t seed,
                              bool stratify, std::vector<std::string>* warnings = nullptr) {
    const int b = static_cast<int>(y.size());
    if (b < 4) throw ValidationError("gamma_split: need batch size >= 4, got " + std::to_string(b));
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw ValidationError("gamma_split: gamma must be in (0, 1)");
    if ((gamma < 0.1 || gamma > 0.9) && warnings)
        warnings->push_back("gamma=" + std::to_string(gamma) +
                            " is outside the recommended range [0.1, 0.9]");

    const int b_l = static_cast<int>(std::lround(gamma * b));
    if (b_l < 1 || b_l >= b)
        throw ValidationError("gamma_split: gamma=" + std::to_string(gamma) +
                              " leaves an empty labeled or masked set for B=" +
                              std::to_string(b));

    Rng rng(mix_seed(seed, 0x6a3117));
    std::vector<int> labeled;
    labeled.reserve(static_cast<size_t>(b_l));
    std::vector<char> taken(static_cast<size_t>(b), 0);

    if (stratify) {
        int max_label = 0;
        for (int v : y) max_label = std::max(max_label, v);
        std::vector<std::vector<int>> by_class(static_cast<size_t>(max_label) + 1);
        for (int i = 0; i < b; ++i) by_class[static_cast<size_t>(y[static_cast<size_t>(i)])].push_back(i);
        for (auto& members : by_class) rng.shuffle(members);
        for (const auto& members : by_class) {
            if (members.empty() || static_cast<int>(labeled.size()) >= b_l) continue;
            labeled.push_back(members.front());
            taken[static_cast<size_t>(members.front())] = 1;
        }
        std::vector<int> pool;
        for (const auto& members : by_class)
            for (size_t i = 1; i < members.size(); ++i) pool.push_back(members[i]);
        rng.shuffle(pool);
        for (int idx : pool) {
            if (static_cast<int>(labeled.size()) >= b_l) break;
            labeled.push_back(idx);
            taken[static_cast<size_t>(idx)] = 1;
        }
    } else {
        std::vector<int> order(static_cast<size_t>(b));
        for (int i = 0; i < b; ++i) order[static_cast<size_t>(i)] = i;
        rng.shuffle(order);
        for (int i = 0; i < b_l; ++i) {
            labeled.push_back(order[static_cast<size_t>(i)]);
            taken[static_cast<size_t>(order[static_cast<size_t>(i)])] = 1;
        }
    }

    LabelSplit split;
    split.gamma = gamma;
    split.labeled_idx = std::move(labeled);
    std::sort(split.labeled_idx.begin(), split.labeled_idx.end());
    for (int i = 0; i < b; ++i)
        if (!taken[static_cast<size_t>(i)]) split.masked_idx.push_back(i);
    return split;
}

// ------------------------------------------------------------------ closed form

// Power-iteration estimate of the dominant eigenvalue magnitude.
inline double spectral_radius(const Matrix& m, int iters, uint64_t seed) {
    if (m.rows() != m.cols()) throw ShapeError("spectral_radius: matrix must be square");
    if (iters < 10) throw ValidationError("spectral_radius: need at least 10 iterations");
    Rng rng(mix_seed(seed, 0x10e0));
    Matrix v = rng.uniform_matrix(m.rows(), 1, 0.5, 1.5);
    double norm = 0.0;
    for (int i = 0; i < m.rows(); ++i) norm += v(i, 0) * v(i, 0);
    norm = std::sqrt(norm);
    for (int i = 0; i < m.rows(); ++i) v(i, 0) /= norm;

    double estimate = 0.0;
    for (int it = 0; it < iters; ++it) {
        Matrix u = matmul(m, v);
        double n = 0.0;
        for (int i = 0; i < m.rows(); ++i) n += u(i, 0) * u(i, 0);
        n = std::sqrt(n);
        if (n == 0.0) return 0.0;
        estimate = n;
        for (int i = 0; i < m.rows(); ++i) v(i, 0) = u(i, 0) / n;
    }
    return estimate;
}

// Closed-form propagation on the tape. Solve failure or an ill-conditioned
// system raises SingularityError carrying a spectral-radius estimate of the
// offending T_uu block.
inline NodeId propagate_closed_form(Tape& tape, const TransitionView& view,
                                    const Matrix& y_labeled) {
    const Matrix& tuu = tape.value(view.t_uu);
    const Matrix& tul = tape.value(view.t_ul);
    if (y_labeled.rows() != tul.cols())
        throw ShapeError("propagate_closed_form: one-hot rows " + y_labeled.shape_str() +
                         " vs labeled count " + std::to_string(tul.cols()));
    const NodeId system = tape.subtract(tape.input(Matrix::identity(tuu.rows())), view.t_uu);
    const NodeId rhs = tape.matmul(view.t_ul, tape.input(y_labeled));
    try {
        return tape.linear_solve(system, rhs);
    } catch (const Error& e) {
        const double rho = spectral_radius(tuu, 200, 7);
        throw SingularityError(std::string("propagate_closed_form: ") + e.what(), rho);
    }
}

// Value-level closed form for verification paths; negative entries within
// numerical noise of zero are clamped to zero.
inline SoftLabels propagate_closed_form_values(const Matrix& t_uu, const Matrix& t_ul,
                                               const Matrix& y_labeled) {
    Matrix system = subtract(Matrix::identity(t_uu.rows()), t_uu);
    LuFactors lu(system);
    if (lu.singular() || lu.pivot_ratio() > 1e12) {
        const double rho = spectral_radius(t_uu, 200, 7);
        throw SingularityError("propagate_closed_form: (I - T_uu) singular or ill-conditioned",
                               rho);
    }
    Matrix y = lu.solve(matmul(t_ul, y_labeled));
    for (double& v : y.raw())
        if (v < 0.0 && v > -1e-12) v = 0.0;
    return y;
}

// Clamp to the log floor and renormalize rows to sum one; applied
// immediately before the propagation loss takes logarithms.
inline NodeId normalize_soft_labels(Tape& tape, NodeId y_hat) {
    const Matrix& v = tape.value(y_hat);
    const NodeId floor_mat = tape.input(Matrix::filled(v.rows(), v.cols(), kEpsLog));
    const NodeId clamped = tape.add(tape.relu(tape.subtract(y_hat, floor_mat)), floor_mat);
    return tape.row_normalize(clamped);
}

// Largest row sum of raw propagated labels; > 1 signals that the batch
// departs from the absorbing-walk reading of the closed form.
inline double max_row_mass(const Matrix& y_hat) {
    double worst = 0.0;
    for (int i = 0; i < y_hat.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < y_hat.cols(); ++j) s += y_hat(i, j);
        worst = std::max(worst, s);
    }
    return worst;
}

// ------------------------------------------------------------------ Neumann

struct NeumannResult {
    SoftLabels y_hat;
    int iterations = 0;
};

// Partial sums of (I + T_uu + T_uu^2 + ...) T_ul Y_l. Stops when the
// geometric tail bound r_k * rho / (1 - rho), with rho estimated from the
// ratio of successive corrections, drops below tol.
inline NeumannResult propagate_neumann(const Matrix& t_uu, const Matrix& t_ul,
                                       const Matrix& y_labeled, double tol, int max_iter) {
    if (!(tol > 0.0)) throw ValidationError("propagate_neumann: tol must be > 0");
    if (max_iter < 1) throw ValidationError("propagate_neumann: max_iter must be >= 1");

    Matrix base = matmul(t_ul, y_labeled);
    Matrix current = base;
    double prev_residual = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        Matrix next = add(base, matmul(t_uu, current));
        const double residual = max_abs_diff(next, current);
        current = std::move(next);
        if (residual == 0.0) return NeumannResult{std::move(current), it};
        double rho_hat = prev_residual > 0.0 ? residual / prev_residual : 0.5;
        rho_hat = std::clamp(rho_hat, 0.0, 0.9999);
        if (residual * rho_hat / (1.0 - rho_hat) < tol)
            return NeumannResult{std::move(current), it};
        prev_residual = residual;
    }
    double final_residual = prev_residual;
    throw ConvergenceError("propagate_neumann: no convergence after " +
                           std::to_string(max_iter) + " iterations", final_residual);
}

inline NeumannResult propagate_neumann(const TransitionMatrix& tm, const Matrix& y_labeled,
                                       double tol, int max_iter) {
    return propagate_neumann(tm.t_uu(), tm.t_ul(), y_labeled, tol, max_iter);
}

} // namespace gloss
