#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gloss/matrix.hpp"

namespace gloss {

// =============================================================================
// Reverse-mode differentiation over dense matrices. Forward values are
// computed eagerly; each recorded node keeps whatever context its backward
// rule needs. The op set is fixed and small: just enough to express a kernel
// graph, its normalizations, a linear solve, and the training losses. No
// broadcasting beyond scalar*matrix, no views, no higher-order derivatives.
// =============================================================================

constexpr double kEpsLog = 1e-12;  // clamp floor for log_clamped

enum class Op {
    input,
    matmul,
    add,
    subtract,
    scale,
    elementwise_exp,
    elementwise_negate,
    elementwise_divide,
    pairwise_sqdist,
    row_normalize,
    column_normalize,
    linear_solve,
    log_clamped,
    masked_select,
    reduce_mean,
    reduce_sum,
    relu,
    l2_row_normalize,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::input: return "input";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::subtract: return "subtract";
        case Op::scale: return "scale";
        case Op::elementwise_exp: return "elementwise_exp";
        case Op::elementwise_negate: return "elementwise_negate";
        case Op::elementwise_divide: return "elementwise_divide";
        case Op::pairwise_sqdist: return "pairwise_sqdist";
        case Op::row_normalize: return "row_normalize";
        case Op::column_normalize: return "column_normalize";
        case Op::linear_solve: return "linear_solve";
        case Op::log_clamped: return "log_clamped";
        case Op::masked_select: return "masked_select";
        case Op::reduce_mean: return "reduce_mean";
        case Op::reduce_sum: return "reduce_sum";
        case Op::relu: return "relu";
        case Op::l2_row_normalize: return "l2_row_normalize";
    }
    return "?";
}

using NodeId = int;

// Adjoints for every node reachable from the backward root; unreachable
// nodes keep zero matrices of the right shape.
class GradientMap {
public:
    explicit GradientMap(std::vector<Matrix> adjoints) : adjoints_(std::move(adjoints)) {}
    const Matrix& at(NodeId id) const { return adjoints_.at(static_cast<size_t>(id)); }

private:
    std::vector<Matrix> adjoints_;
};

class Tape {
public:
    NodeId input(Matrix value) {
        Node n;
        n.op = Op::input;
        n.value = std::move(value);
        return push(std::move(n));
    }

    NodeId matmul(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        if (va.cols() != vb.rows()) shape_fail(Op::matmul, va, vb);
        Node n;
        n.value = gloss::matmul(va, vb);
        return push_binary(std::move(n), Op::matmul, a, b);
    }

    NodeId add(NodeId a, NodeId b) {
        if (!val(a).same_shape(val(b))) shape_fail(Op::add, val(a), val(b));
        Node n;
        n.value = gloss::add(val(a), val(b));
        return push_binary(std::move(n), Op::add, a, b);
    }

    NodeId subtract(NodeId a, NodeId b) {
        if (!val(a).same_shape(val(b))) shape_fail(Op::subtract, val(a), val(b));
        Node n;
        n.value = gloss::subtract(val(a), val(b));
        return push_binary(std::move(n), Op::subtract, a, b);
    }

    NodeId scale(NodeId a, double factor) {
        Node n;
        n.value = gloss::scale(val(a), factor);
        n.scalar = factor;
        return push_unary(std::move(n), Op::scale, a);
    }

    NodeId elementwise_exp(NodeId a) {
        Node n;
        n.value = val(a);
        for (double& v : n.value.raw()) v = std::exp(v);
        return push_unary(std::move(n), Op::elementwise_exp, a);
    }

    NodeId elementwise_negate(NodeId a) {
        Node n;
        n.value = gloss::scale(val(a), -1.0);
        return push_unary(std::move(n), Op::elementwise_negate, a);
    }

    NodeId elementwise_divide(NodeId a, NodeId b) {
        if (!val(a).same_shape(val(b))) shape_fail(Op::elementwise_divide, val(a), val(b));
        Node n;
        n.value = val(a);
        for (size_t i = 0; i < n.value.size(); ++i) n.value.raw()[i] /= val(b).raw()[i];
        return push_binary(std::move(n), Op::elementwise_divide, a, b);
    }

    // D2[i][j] = ||x_i - x_j||^2. Each pair is computed once and mirrored,
    // so the result is bitwise symmetric with an exactly zero diagonal.
    NodeId pairwise_sqdist(NodeId a) {
        const Matrix& x = val(a);
        const int b = x.rows();
        if (b < 1) shape_fail(Op::pairwise_sqdist, x, x);
        Node n;
        n.value = Matrix(b, b);
        for (int i = 0; i < b; ++i)
            for (int j = i + 1; j < b; ++j) {
                double s = 0.0;
                for (int k = 0; k < x.cols(); ++k) {
                    const double d = x(i, k) - x(j, k);
                    s += d * d;
                }
                n.value(i, j) = s;
                n.value(j, i) = s;
            }
        return push_unary(std::move(n), Op::pairwise_sqdist, a);
    }

    NodeId row_normalize(NodeId a) {
        const Matrix& x = val(a);
        Node n;
        n.value = x;
        n.saved.resize(static_cast<size_t>(x.rows()));
        for (int i = 0; i < x.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < x.cols(); ++j) s += x(i, j);
            if (s == 0.0)
                throw Error("row_normalize: zero row sum at row " + std::to_string(i));
            n.saved[static_cast<size_t>(i)] = s;
            for (int j = 0; j < x.cols(); ++j) n.value(i, j) /= s;
        }
        return push_unary(std::move(n), Op::row_normalize, a);
    }

    NodeId column_normalize(NodeId a) {
        const Matrix& x = val(a);
        Node n;
        n.value = x;
        n.saved.resize(static_cast<size_t>(x.cols()));
        for (int j = 0; j < x.cols(); ++j) {
            double s = 0.0;
            for (int i = 0; i < x.rows(); ++i) s += x(i, j);
            if (s == 0.0)
                throw Error("column_normalize: zero column sum at column " + std::to_string(j));
            n.saved[static_cast<size_t>(j)] = s;
            for (int i = 0; i < x.rows(); ++i) n.value(i, j) /= s;
        }
        return push_unary(std::move(n), Op::column_normalize, a);
    }

    // Solves A x = b by LU with partial pivoting. The factors are kept for
    // the adjoint pass: solve A^T u = x_bar, then b_bar = u, A_bar = -u x^T.
    NodeId linear_solve(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        if (va.rows() != va.cols() || va.rows() != vb.rows()) shape_fail(Op::linear_solve, va, vb);
        Node n;
        n.lu = std::make_shared<LuFactors>(va);
        if (n.lu->singular() || n.lu->pivot_ratio() > 1e12)
            throw Error("linear_solve: matrix singular or ill-conditioned (pivot ratio " +
                        std::to_string(n.lu->pivot_ratio()) + ")");
        n.value = n.lu->solve(vb);
        return push_binary(std::move(n), Op::linear_solve, a, b);
    }

    NodeId log_clamped(NodeId a) {
        Node n;
        n.value = val(a);
        n.scalar = kEpsLog;
        for (double& v : n.value.raw()) v = std::log(v < kEpsLog ? kEpsLog : v);
        return push_unary(std::move(n), Op::log_clamped, a);
    }

    // Submatrix selection: value[i][j] = parent[rows[i]][cols[j]].
    NodeId masked_select(NodeId a, std::vector<int> rows, std::vector<int> cols) {
        const Matrix& x = val(a);
        if (rows.empty() || cols.empty())
            throw ShapeError("masked_select: empty index set");
        Node n;
        n.value = submatrix(x, rows, cols);
        n.rows = std::move(rows);
        n.cols = std::move(cols);
        return push_unary(std::move(n), Op::masked_select, a);
    }

    NodeId reduce_mean(NodeId a) {
        const Matrix& x = val(a);
        double s = 0.0;
        for (double v : x.raw()) s += v;
        Node n;
        n.value = Matrix(1, 1);
        n.value(0, 0) = s / static_cast<double>(x.size());
        return push_unary(std::move(n), Op::reduce_mean, a);
    }

    NodeId reduce_sum(NodeId a) {
        const Matrix& x = val(a);
        double s = 0.0;
        for (double v : x.raw()) s += v;
        Node n;
        n.value = Matrix(1, 1);
        n.value(0, 0) = s;
        return push_unary(std::move(n), Op::reduce_sum, a);
    }

    NodeId relu(NodeId a) {
        Node n;
        n.value = val(a);
        for (double& v : n.value.raw()) v = v > 0.0 ? v : 0.0;
        return push_unary(std::move(n), Op::relu, a);
    }

    NodeId l2_row_normalize(NodeId a) {
        const Matrix& x = val(a);
        Node n;
        n.value = x;
        n.saved.resize(static_cast<size_t>(x.rows()));
        for (int i = 0; i < x.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
            const double norm = std::sqrt(s);
            if (norm == 0.0)
                throw Error("l2_row_normalize: zero-norm row " + std::to_string(i));
            n.saved[static_cast<size_t>(i)] = norm;
            for (int j = 0; j < x.cols(); ++j) n.value(i, j) /= norm;
        }
        return push_unary(std::move(n), Op::l2_row_normalize, a);
    }

    const Matrix& value(NodeId id) const { return nodes_.at(static_cast<size_t>(id)).value; }

    double scalar_value(NodeId id) const {
        const Matrix& v = value(id);
        if (v.rows() != 1 || v.cols() != 1)
            throw ShapeError("scalar_value: node is " + v.shape_str());
        return v(0, 0);
    }

    size_t node_count() const { return nodes_.size(); }

    GradientMap backward(NodeId root) const {
        if (nodes_.empty()) throw Error("backward: nothing recorded");
        if (root < 0 || static_cast<size_t>(root) >= nodes_.size())
            throw Error("backward: invalid root node");
        const Matrix& rv = nodes_[static_cast<size_t>(root)].value;
        if (rv.rows() != 1 || rv.cols() != 1)
            throw Error("backward: root must be scalar, got " + rv.shape_str());

        std::vector<Matrix> adj(nodes_.size());
        for (size_t i = 0; i < nodes_.size(); ++i)
            adj[i] = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
        adj[static_cast<size_t>(root)](0, 0) = 1.0;

        for (NodeId i = root; i >= 0; --i) {
            const Node& n = nodes_[static_cast<size_t>(i)];
            const Matrix& g = adj[static_cast<size_t>(i)];
            switch (n.op) {
                case Op::input:
                    break;
                case Op::matmul: {
                    const Matrix& a = nodes_[static_cast<size_t>(n.parents[0])].value;
                    const Matrix& b = nodes_[static_cast<size_t>(n.parents[1])].value;
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], matmul_nt(g, b));
                    add_in_place(adj[static_cast<size_t>(n.parents[1])], matmul_tn(a, g));
                    break;
                }
                case Op::add:
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], g);
                    add_in_place(adj[static_cast<size_t>(n.parents[1])], g);
                    break;
                case Op::subtract:
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], g);
                    add_in_place(adj[static_cast<size_t>(n.parents[1])], gloss::scale(g, -1.0));
                    break;
                case Op::scale:
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], gloss::scale(g, n.scalar));
                    break;
                case Op::elementwise_exp:
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], hadamard(g, n.value));
                    break;
                case Op::elementwise_negate:
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], gloss::scale(g, -1.0));
                    break;
                case Op::elementwise_divide: {
                    const Matrix& b = nodes_[static_cast<size_t>(n.parents[1])].value;
                    Matrix ga = g;
                    for (size_t k = 0; k < ga.size(); ++k) ga.raw()[k] /= b.raw()[k];
                    Matrix gb = hadamard(g, n.value);
                    for (size_t k = 0; k < gb.size(); ++k) gb.raw()[k] = -gb.raw()[k] / b.raw()[k];
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    add_in_place(adj[static_cast<size_t>(n.parents[1])], gb);
                    break;
                }
                case Op::pairwise_sqdist: {
                    // d/dX of sum_ij g_ij ||x_i-x_j||^2: with S = g + g^T,
                    // grad = 2 (diag(rowsum(S)) X - S X).
                    const Matrix& x = nodes_[static_cast<size_t>(n.parents[0])].value;
                    const int b = x.rows();
                    Matrix s(b, b);
                    for (int r = 0; r < b; ++r)
                        for (int c = 0; c < b; ++c) s(r, c) = g(r, c) + g(c, r);
                    Matrix sx = gloss::matmul(s, x);
                    Matrix gx(b, x.cols());
                    for (int r = 0; r < b; ++r) {
                        double rs = 0.0;
                        for (int c = 0; c < b; ++c) rs += s(r, c);
                        for (int k = 0; k < x.cols(); ++k)
                            gx(r, k) = 2.0 * (rs * x(r, k) - sx(r, k));
                    }
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], gx);
                    break;
                }
                case Op::row_normalize: {
                    Matrix ga(n.value.rows(), n.value.cols());
                    for (int r = 0; r < n.value.rows(); ++r) {
                        double dot = 0.0;
                        for (int c = 0; c < n.value.cols(); ++c) dot += g(r, c) * n.value(r, c);
                        const double s = n.saved[static_cast<size_t>(r)];
                        for (int c = 0; c < n.value.cols(); ++c)
                            ga(r, c) = (g(r, c) - dot) / s;
                    }
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    break;
                }
                case Op::column_normalize: {
                    Matrix ga(n.value.rows(), n.value.cols());
                    for (int c = 0; c < n.value.cols(); ++c) {
                        double dot = 0.0;
                        for (int r = 0; r < n.value.rows(); ++r) dot += g(r, c) * n.value(r, c);
                        const double s = n.saved[static_cast<size_t>(c)];
                        for (int r = 0; r < n.value.rows(); ++r)
                            ga(r, c) = (g(r, c) - dot) / s;
                    }
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    break;
                }
                case Op::linear_solve: {
                    Matrix u = n.lu->solve_transpose(g);
                    add_in_place(adj[static_cast<size_t>(n.parents[1])], u);
                    add_in_place(adj[static_cast<size_t>(n.parents[0])],
                                 gloss::scale(matmul_nt(u, n.value), -1.0));
                    break;
                }
                case Op::log_clamped: {
                    const Matrix& a = nodes_[static_cast<size_t>(n.parents[0])].value;
                    Matrix ga = g;
                    for (size_t k = 0; k < ga.size(); ++k)
                        ga.raw()[k] = a.raw()[k] < n.scalar ? 0.0 : ga.raw()[k] / a.raw()[k];
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    break;
                }
                case Op::masked_select: {
                    Matrix& pa = adj[static_cast<size_t>(n.parents[0])];
                    for (size_t r = 0; r < n.rows.size(); ++r)
                        for (size_t c = 0; c < n.cols.size(); ++c)
                            pa(n.rows[r], n.cols[c]) += g(static_cast<int>(r), static_cast<int>(c));
                    break;
                }
                case Op::reduce_mean: {
                    Matrix& pa = adj[static_cast<size_t>(n.parents[0])];
                    const double v = g(0, 0) / static_cast<double>(pa.size());
                    for (double& d : pa.raw()) d += v;
                    break;
                }
                case Op::reduce_sum: {
                    Matrix& pa = adj[static_cast<size_t>(n.parents[0])];
                    const double v = g(0, 0);
                    for (double& d : pa.raw()) d += v;
                    break;
                }
                case Op::relu: {
                    const Matrix& a = nodes_[static_cast<size_t>(n.parents[0])].value;
                    Matrix ga = g;
                    for (size_t k = 0; k < ga.size(); ++k)
                        if (a.raw()[k] <= 0.0) ga.raw()[k] = 0.0;
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    break;
                }
                case Op::l2_row_normalize: {
                    Matrix ga(n.value.rows(), n.value.cols());
                    for (int r = 0; r < n.value.rows(); ++r) {
                        double dot = 0.0;
                        for (int c = 0; c < n.value.cols(); ++c) dot += g(r, c) * n.value(r, c);
                        const double norm = n.saved[static_cast<size_t>(r)];
                        for (int c = 0; c < n.value.cols(); ++c)
                            ga(r, c) = (g(r, c) - dot * n.value(r, c)) / norm;
                    }
                    add_in_place(adj[static_cast<size_t>(n.parents[0])], ga);
                    break;
                }
            }
        }
        return GradientMap(std::move(adj));
    }

private:
    struct Node {
        Op op = Op::input;
        Matrix value;
        NodeId parents[2] = {-1, -1};
        std::vector<int> rows, cols;      // masked_select
        std::vector<double> saved;        // normalization sums / norms
        std::shared_ptr<LuFactors> lu;    // linear_solve
        double scalar = 0.0;              // scale factor, clamp floor
    };

    const Matrix& val(NodeId id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw Error("tape: invalid node id " + std::to_string(id));
        return nodes_[static_cast<size_t>(id)].value;
    }

    [[noreturn]] void shape_fail(Op op, const Matrix& a, const Matrix& b) const {
        throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                         a.shape_str() + " and " + b.shape_str());
    }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    NodeId push_unary(Node n, Op op, NodeId a) {
        val(a);
        n.op = op;
        n.parents[0] = a;
        return push(std::move(n));
    }

    NodeId push_binary(Node n, Op op, NodeId a, NodeId b) {
        val(a);
        val(b);
        n.op = op;
        n.parents[0] = a;
        n.parents[1] = b;
        return push(std::move(n));
    }

    // deque: references returned by value() must survive later recording
    std::deque<Node> nodes_;
};

// =============================================================================
// Gradient checking against central finite differences. `program` rebuilds
// the scalar function on a fresh tape for each probe, so the check is valid
// for any composite of the op set above.
// =============================================================================

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
};

using TapeProgram = std::function<NodeId(Tape&, NodeId)>;

inline double evaluate_program(const TapeProgram& program, const Matrix& x) {
    Tape t;
    NodeId root = program(t, t.input(x));
    const double v = t.scalar_value(root);
    if (!std::isfinite(v)) throw Error("gradient_check: non-finite value at probe");
    return v;
}

inline GradCheckReport gradient_check(const TapeProgram& program, const Matrix& x,
                                      double eps, double tol) {
    if (!(eps > 0.0)) throw ValidationError("gradient_check: eps must be > 0");
    if (!(tol > 0.0)) throw ValidationError("gradient_check: tol must be > 0");

    Tape t;
    const NodeId xin = t.input(x);
    const NodeId root = program(t, xin);
    if (!std::isfinite(t.scalar_value(root)))
        throw Error("gradient_check: non-finite value at base point");
    const GradientMap grads = t.backward(root);
    const Matrix& analytic = grads.at(xin);

    GradCheckReport report;
    Matrix probe = x;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double orig = probe(i, j);
            probe(i, j) = orig + eps;
            const double fp = evaluate_program(program, probe);
            probe(i, j) = orig - eps;
            const double fm = evaluate_program(program, probe);
            probe(i, j) = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double an = analytic(i, j);
            const double diff = std::fabs(an - fd);
            if (diff <= 1e-8) continue;  // absolute-error fallback near zero
            const double rel = diff / std::max(std::fabs(an), std::fabs(fd));
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    report.pass = report.max_rel_err <= tol;
    return report;
}

} // namespace gloss
