#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gloss/matrix.hpp"

namespace gloss {

// =============================================================================
// Metrics: accuracy, macro-F1, macro-silhouette, and the paired t-test used
// by the loss-comparison harness. All pure functions.
// =============================================================================

struct Metrics {
    double accuracy = 0.0;          // [0, 1]
    double macro_f1 = 0.0;          // [0, 1]
    double macro_silhouette = 0.0;  // [-1, 1]
};

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw ValidationError("accuracy: need equal nonempty label vectors");
    long hits = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Unweighted mean of per-class F1. A class absent from both pred and truth
// contributes an F1 of zero and is still averaged.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                       int num_classes) {
    if (pred.size() != truth.size() || pred.empty())
        throw ValidationError("macro_f1: need equal nonempty label vectors");
    if (num_classes < 1) throw ValidationError("macro_f1: need at least one class");
    std::vector<long> tp(static_cast<size_t>(num_classes), 0),
        fp(static_cast<size_t>(num_classes), 0), fn(static_cast<size_t>(num_classes), 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], t = truth[i];
        if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
            throw ValidationError("macro_f1: label outside [0, C)");
        if (p == t) ++tp[static_cast<size_t>(p)];
        else {
            ++fp[static_cast<size_t>(p)];
            ++fn[static_cast<size_t>(t)];
        }
    }
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        const double denom = static_cast<double>(2 * tp[static_cast<size_t>(c)] +
                                                 fp[static_cast<size_t>(c)] +
                                                 fn[static_cast<size_t>(c)]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) / denom : 0.0;
    }
    return sum / static_cast<double>(num_classes);
}

// Macro-silhouette: s(x) = (b - a) / max(a, b) with a = mean Euclidean
// distance to same-class others and b = the smallest mean distance to any
// other present class; singleton classes take s = 0. Scores are averaged
// within each class first, then across present classes.
inline double macro_silhouette(const Matrix& z, const std::vector<int>& y) {
    const int n = z.rows();
    if (static_cast<int>(y.size()) != n)
        throw ValidationError("macro_silhouette: labels length vs embeddings rows");
    int max_label = 0;
    for (int l : y) {
        if (l < 0) throw ValidationError("macro_silhouette: negative label");
        max_label = std::max(max_label, l);
    }
    const int c = max_label + 1;
    std::vector<long> class_count(static_cast<size_t>(c), 0);
    for (int l : y) ++class_count[static_cast<size_t>(l)];
    int present = 0;
    for (long cc : class_count)
        if (cc > 0) ++present;
    if (present < 2)
        throw ValidationError("macro_silhouette: need at least two classes present");

    std::vector<double> class_sum(static_cast<size_t>(c), 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> dist_sum(static_cast<size_t>(c), 0.0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (int k = 0; k < z.cols(); ++k) {
                const double d = z(i, k) - z(j, k);
                s += d * d;
            }
            dist_sum[static_cast<size_t>(y[static_cast<size_t>(j)])] += std::sqrt(s);
        }
        const int own = y[static_cast<size_t>(i)];
        double score = 0.0;
        if (class_count[static_cast<size_t>(own)] > 1) {
            const double a = dist_sum[static_cast<size_t>(own)] /
                             static_cast<double>(class_count[static_cast<size_t>(own)] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (int cl = 0; cl < c; ++cl) {
                if (cl == own || class_count[static_cast<size_t>(cl)] == 0) continue;
                b = std::min(b, dist_sum[static_cast<size_t>(cl)] /
                                    static_cast<double>(class_count[static_cast<size_t>(cl)]));
            }
            const double denom = std::max(a, b);
            score = denom > 0.0 ? (b - a) / denom : 0.0;
        }
        class_sum[static_cast<size_t>(own)] += score;
    }

    double macro = 0.0;
    for (int cl = 0; cl < c; ++cl)
        if (class_count[static_cast<size_t>(cl)] > 0)
            macro += class_sum[static_cast<size_t>(cl)] /
                     static_cast<double>(class_count[static_cast<size_t>(cl)]);
    return macro / static_cast<double>(present);
}

// ------------------------------------------------------------------ t-test

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cont_fraction(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return h;
}

inline double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cont_fraction(a, b, x) / a;
    return 1.0 - front * beta_cont_fraction(b, a, 1.0 - x) / b;
}

} // namespace detail

// Two-sided p for Student's t with `dof` degrees of freedom.
inline double student_t_two_sided_p(double t, double dof) {
    if (std::isinf(t)) return 0.0;
    const double x = dof / (dof + t * t);
    return detail::reg_incomplete_beta(dof / 2.0, 0.5, x);
}

struct TTestResult {
    double mean_diff = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
};

// Paired two-sided t-test. Identical vectors give p = 1; identical nonzero
// shifts (zero variance) give the limit p = 0 with an infinite statistic.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("paired_t_test: need two equal-length vectors of size >= 2");
    const size_t n = a.size();
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    r.mean_diff = mean;
    if (sd == 0.0) {
        if (mean == 0.0) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = mean > 0.0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
    r.p_value = student_t_two_sided_p(r.t_stat, static_cast<double>(n - 1));
    return r;
}

} // namespace gloss
