#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gloss/errors.hpp"

namespace gloss {

// =============================================================================
// Dense row-major f64 matrix. Small and boring on purpose: every consumer in
// this library works on minibatch-sized operands, so no blocking, no views,
// no expression templates. All reductions run in fixed index order so that
// identical inputs produce bit-identical outputs.
// =============================================================================

class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension");
    }

    static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
    static Matrix ones(int r, int c) { return Matrix(r, c, 1.0); }
    static Matrix filled(int r, int c, double v) { return Matrix(r, c, v); }
    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix row_vector(const std::vector<double>& v) {
        Matrix m(1, static_cast<int>(v.size()));
        m.data_ = v;
        return m;
    }
    static Matrix column_vector(const std::vector<double>& v) {
        Matrix m(static_cast<int>(v.size()), 1);
        m.data_ = v;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }
    bool operator!=(const Matrix& o) const { return !(*this == o); }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    int rows_, cols_;
    std::vector<double> data_;
};

// ------------------------------------------------------------------ basic ops

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions " + a.shape_str() + " * " + b.shape_str());
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

// a * b^T without materializing the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: inner dimensions " + a.shape_str() + " * " + b.shape_str() + "^T");
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    return c;
}

// a^T * b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: inner dimensions " + a.shape_str() + "^T * " + b.shape_str());
    Matrix c(a.cols(), b.cols());
    for (int k = 0; k < a.rows(); ++k)
        for (int i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.raw()[i] += b.raw()[i];
    return c;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "subtract");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.raw()[i] -= b.raw()[i];
    return c;
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.raw()) v *= s;
    return c;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (size_t i = 0; i < c.size(); ++i) c.raw()[i] *= b.raw()[i];
    return c;
}

inline void add_in_place(Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add_in_place");
    for (size_t i = 0; i < a.size(); ++i) a.raw()[i] += b.raw()[i];
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, std::fabs(v));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.raw()[i] - b.raw()[i]));
    return m;
}

inline bool all_finite(const Matrix& a) {
    for (double v : a.raw())
        if (!std::isfinite(v)) return false;
    return true;
}

inline Matrix submatrix(const Matrix& a, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
    Matrix s(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.rows())
            throw ShapeError("submatrix: row index out of range");
        for (size_t j = 0; j < cols.size(); ++j) {
            if (cols[j] < 0 || cols[j] >= a.cols())
                throw ShapeError("submatrix: column index out of range");
            s(static_cast<int>(i), static_cast<int>(j)) = a(rows[i], cols[j]);
        }
    }
    return s;
}

// =============================================================================
// LU factorization with partial pivoting. Factors are stored packed; the
// transpose solve reuses the same factors (needed by the adjoint of a linear
// solve). Condition is proxied by the pivot magnitude ratio, which is cheap
// and adequate for the near-singularity guard this library needs.
// =============================================================================

class LuFactors {
public:
    explicit LuFactors(const Matrix& a) : n_(a.rows()), lu_(a), perm_(a.rows()) {
        if (a.rows() != a.cols())
            throw ShapeError("lu: matrix must be square, got " + a.shape_str());
        for (int i = 0; i < n_; ++i) perm_[i] = i;
        factorize();
    }

    int n() const { return n_; }
    bool singular() const { return singular_; }
    // max |pivot| / min |pivot|; infinity when singular.
    double pivot_ratio() const { return pivot_ratio_; }

    // Solve A X = B for X (B may have multiple columns).
    Matrix solve(const Matrix& b) const {
        if (b.rows() != n_) throw ShapeError("lu solve: rhs rows " + b.shape_str());
        if (singular_) throw Error("lu solve: singular matrix");
        Matrix x(n_, b.cols());
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < b.cols(); ++j) x(i, j) = b(perm_[i], j);
        // forward: L y = P b  (unit lower)
        for (int i = 1; i < n_; ++i)
            for (int k = 0; k < i; ++k) {
                const double l = lu_(i, k);
                if (l == 0.0) continue;
                for (int j = 0; j < x.cols(); ++j) x(i, j) -= l * x(k, j);
            }
        // backward: U x = y
        for (int i = n_ - 1; i >= 0; --i) {
            for (int k = i + 1; k < n_; ++k) {
                const double u = lu_(i, k);
                if (u == 0.0) continue;
                for (int j = 0; j < x.cols(); ++j) x(i, j) -= u * x(k, j);
            }
            const double d = lu_(i, i);
            for (int j = 0; j < x.cols(); ++j) x(i, j) /= d;
        }
        return x;
    }

    // Solve A^T X = B using the factors of A: A^T = U^T L^T P.
    Matrix solve_transpose(const Matrix& b) const {
        if (b.rows() != n_) throw ShapeError("lu solve_transpose: rhs rows " + b.shape_str());
        if (singular_) throw Error("lu solve_transpose: singular matrix");
        Matrix y = b;
        // U^T v = b  (U^T is lower triangular)
        for (int i = 0; i < n_; ++i) {
            const double d = lu_(i, i);
            for (int j = 0; j < y.cols(); ++j) y(i, j) /= d;
            for (int k = i + 1; k < n_; ++k) {
                const double u = lu_(i, k);
                if (u == 0.0) continue;
                for (int j = 0; j < y.cols(); ++j) y(k, j) -= u * y(i, j);
            }
        }
        // L^T w = v  (L^T is unit upper triangular)
        for (int i = n_ - 1; i >= 0; --i)
            for (int k = i - 1; k >= 0; --k) {
                const double l = lu_(i, k);
                if (l == 0.0) continue;
                for (int j = 0; j < y.cols(); ++j) y(k, j) -= l * y(i, j);
            }
        // x = P^T w
        Matrix x(n_, b.cols());
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < b.cols(); ++j) x(perm_[i], j) = y(i, j);
        return x;
    }

private:
    void factorize() {
        double max_piv = 0.0, min_piv = 0.0;
        for (int col = 0; col < n_; ++col) {
            int piv = col;
            double best = std::fabs(lu_(col, col));
            for (int r = col + 1; r < n_; ++r) {
                const double v = std::fabs(lu_(r, col));
                if (v > best) { best = v; piv = r; }
            }
            if (piv != col) {
                for (int j = 0; j < n_; ++j) std::swap(lu_(col, j), lu_(piv, j));
                std::swap(perm_[col], perm_[piv]);
            }
            const double d = lu_(col, col);
            if (d == 0.0 || !std::isfinite(d)) { singular_ = true; pivot_ratio_ = inf(); return; }
            const double ad = std::fabs(d);
            max_piv = (col == 0) ? ad : std::max(max_piv, ad);
            min_piv = (col == 0) ? ad : std::min(min_piv, ad);
            for (int r = col + 1; r < n_; ++r) {
                const double l = lu_(r, col) / d;
                lu_(r, col) = l;
                if (l == 0.0) continue;
                for (int j = col + 1; j < n_; ++j) lu_(r, j) -= l * lu_(col, j);
            }
        }
        pivot_ratio_ = (min_piv > 0.0) ? max_piv / min_piv : inf();
    }

    static double inf() { return std::numeric_limits<double>::infinity(); }

    int n_;
    Matrix lu_;
    std::vector<int> perm_;
    bool singular_ = false;
    double pivot_ratio_ = 1.0;
};

} // namespace gloss
