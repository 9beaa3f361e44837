#include <catch_amalgamated.hpp>

#include <cmath>

#include "gloss/evaluation.hpp"
#include "gloss/rng.hpp"
#include "oracles.hpp"

using namespace gloss;

namespace {

// Confusion-matrix oracle for macro-F1 via precision/recall.
double macro_f1_oracle(const std::vector<int>& pred, const std::vector<int>& truth, int c) {
    double sum = 0.0;
    for (int cls = 0; cls < c; ++cls) {
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == cls && truth[i] == cls) ++tp;
            if (pred[i] == cls && truth[i] != cls) ++fp;
            if (pred[i] != cls && truth[i] == cls) ++fn;
        }
        if (tp == 0) continue;  // F1 = 0 either way
        const double precision = static_cast<double>(tp) / (tp + fp);
        const double recall = static_cast<double>(tp) / (tp + fn);
        sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / c;
}

} // namespace

TEST_CASE("accuracy: forced and counted", "[evaluation]") {
    CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
    CHECK(accuracy({1, 2, 0}, {0, 1, 2}) == 0.0);

    Rng rng(71);
    std::vector<int> pred(40), truth(40);
    long hits = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        pred[i] = rng.uniform_int(4);
        truth[i] = rng.uniform_int(4);
        hits += pred[i] == truth[i];
    }
    CHECK(accuracy(pred, truth) == static_cast<double>(hits) / 40.0);
    REQUIRE_THROWS_AS(accuracy({0}, {0, 1}), ValidationError);
}

TEST_CASE("macro_f1: forced cases and confusion oracle", "[evaluation][oracle]") {
    CHECK(macro_f1({0, 1, 2, 1}, {0, 1, 2, 1}, 3) == 1.0);

    // all predictions class 0 on a balanced binary truth:
    // F1(0) = 2/3, F1(1) = 0, macro = 1/3
    CHECK(macro_f1({0, 0, 0, 0}, {0, 0, 1, 1}, 2) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

    // class absent from both pred and truth still averages as zero
    CHECK(macro_f1({0, 0}, {0, 0}, 2) == Catch::Approx(0.5).epsilon(1e-12));

    Rng rng(72);
    for (int inst = 0; inst < 30; ++inst) {
        std::vector<int> pred(25), truth(25);
        for (size_t i = 0; i < pred.size(); ++i) {
            pred[i] = rng.uniform_int(4);
            truth[i] = rng.uniform_int(4);
        }
        CHECK(macro_f1(pred, truth, 4) ==
              Catch::Approx(macro_f1_oracle(pred, truth, 4)).epsilon(1e-12));
    }
}

TEST_CASE("macro_f1 and accuracy: permutation invariance", "[evaluation][property]") {
    Rng rng(73);
    std::vector<int> pred(30), truth(30);
    for (size_t i = 0; i < pred.size(); ++i) {
        pred[i] = rng.uniform_int(3);
        truth[i] = rng.uniform_int(3);
    }
    std::vector<int> order(30);
    for (int i = 0; i < 30; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<int> pred_p(30), truth_p(30);
    for (int i = 0; i < 30; ++i) {
        pred_p[static_cast<size_t>(i)] = pred[static_cast<size_t>(order[static_cast<size_t>(i)])];
        truth_p[static_cast<size_t>(i)] = truth[static_cast<size_t>(order[static_cast<size_t>(i)])];
    }
    CHECK(accuracy(pred, truth) == accuracy(pred_p, truth_p));
    CHECK(macro_f1(pred, truth, 3) == macro_f1(pred_p, truth_p, 3));
}

TEST_CASE("macro_silhouette: conventions and forced cases", "[evaluation]") {
    // two singleton points in different classes: both take the singleton
    // convention s = 0
    Matrix two(2, 2);
    two(1, 0) = 3.0;
    CHECK(macro_silhouette(two, {0, 1}) == 0.0);

    // two tight clusters far apart
    Rng rng(74);
    Matrix z(20, 3);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) {
        y[static_cast<size_t>(i)] = i < 10 ? 0 : 1;
        for (int j = 0; j < 3; ++j)
            z(i, j) = (i < 10 ? 0.0 : 50.0) + 0.1 * rng.normal();
    }
    CHECK(macro_silhouette(z, y) > 0.9);

    REQUIRE_THROWS_AS(macro_silhouette(two, {0, 0}), ValidationError);
}

TEST_CASE("macro_silhouette: matches the brute-force reference exactly",
          "[evaluation][oracle]") {
    for (int inst = 0; inst < 50; ++inst) {
        Rng rng(mix_seed(75, static_cast<uint64_t>(inst)));
        const int n = 10 + rng.uniform_int(41);  // up to 50
        const int c = 2 + rng.uniform_int(3);
        const Matrix z = rng.normal_matrix(n, 1 + rng.uniform_int(5));
        std::vector<int> y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = i < c ? i : rng.uniform_int(c);
        CHECK(macro_silhouette(z, y) == oracle::macro_silhouette(z, y));
    }
}

TEST_CASE("macro_silhouette: rigid-motion and scaling invariance",
          "[evaluation][property]") {
    Rng rng(76);
    const int n = 24, d = 4;
    const Matrix z = rng.normal_matrix(n, d);
    std::vector<int> y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = i % 3;
    const double base = macro_silhouette(z, y);

    Matrix shifted = z;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) shifted(i, j) += 7.5 - 2.0 * j;
    CHECK(std::fabs(macro_silhouette(shifted, y) - base) < 1e-9);

    const Matrix rotated = matmul(z, oracle::random_orthogonal(d, 77));
    CHECK(std::fabs(macro_silhouette(rotated, y) - base) < 1e-9);

    const Matrix scaled = scale(z, 3.7);
    CHECK(std::fabs(macro_silhouette(scaled, y) - base) < 1e-9);
}

TEST_CASE("paired_t_test: identical, shifted, degenerate", "[evaluation]") {
    const std::vector<double> a{0.8, 0.81, 0.79, 0.82};
    {
        const TTestResult r = paired_t_test(a, a);
        CHECK(r.mean_diff == 0.0);
        CHECK(r.p_value == 1.0);
    }
    {
        // constant positive shift with tiny variance
        std::vector<double> b = a;
        Rng rng(78);
        for (size_t i = 0; i < b.size(); ++i) b[i] -= 0.05 + 1e-5 * rng.uniform01();
        const TTestResult r = paired_t_test(a, b);
        CHECK(r.p_value < 0.01);
        CHECK(r.mean_diff > 0.0);
    }
    {
        // exactly constant nonzero shift: limit behavior
        std::vector<double> b = a;
        for (double& v : b) v -= 0.1;
        const TTestResult r = paired_t_test(a, b);
        CHECK(std::isinf(r.t_stat));
        CHECK(r.p_value == 0.0);
    }
    REQUIRE_THROWS_AS(paired_t_test({1.0}, {2.0}), ValidationError);
    REQUIRE_THROWS_AS(paired_t_test({1.0, 2.0}, {2.0}), ValidationError);
}

TEST_CASE("paired_t_test: matches frozen reference values", "[evaluation][oracle]") {
    // reference values computed offline with scipy.stats.ttest_rel
    const std::vector<double> a{0.8152358539877216, 0.7480007946879753, 0.8375225597903229,
                                0.8470282358195608, 0.7024482405673083, 0.7348910246568842};
    const std::vector<double> b{0.791400641892703,  0.7374880724582827, 0.8180265945154516,
                                0.8526195536467682, 0.6560663013214234, 0.6915572665940157};
    const TTestResult r = paired_t_test(a, b);
    CHECK(r.t_stat == Catch::Approx(2.8546709918943005).epsilon(1e-10));
    CHECK(r.p_value == Catch::Approx(0.0356281525259316).epsilon(1e-9));
}

TEST_CASE("paired_t_test: recovers a known significance profile",
          "[evaluation][reference]") {
    // Accuracy-scale vectors whose paired differences average 0.63 with a
    // spread chosen so the two-sided p lands at 0.006239 (dof = 4).
    const double delta = 0.16926556362963438;
    const std::vector<double> baseline{86.18, 97.80, 95.11, 68.54, 84.45};
    std::vector<double> ours = baseline;
    const double shifts[5] = {0.63 - 2 * delta, 0.63 - delta, 0.63, 0.63 + delta,
                              0.63 + 2 * delta};
    for (size_t i = 0; i < ours.size(); ++i) ours[i] += shifts[i];

    const TTestResult r = paired_t_test(ours, baseline);
    CHECK(r.mean_diff == Catch::Approx(0.63).epsilon(1e-12));
    CHECK(r.t_stat == Catch::Approx(5.263649174645623).epsilon(1e-9));
    CHECK(r.p_value == Catch::Approx(0.006239).epsilon(1e-6));
}

TEST_CASE("paired_t_test: two-sided symmetry", "[evaluation][property]") {
    Rng rng(79);
    for (int inst = 0; inst < 10; ++inst) {
        std::vector<double> a(6), b(6);
        for (size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.uniform(0.5, 1.0);
            b[i] = a[i] - rng.uniform(-0.1, 0.1);
        }
        const TTestResult ab = paired_t_test(a, b);
        const TTestResult ba = paired_t_test(b, a);
        CHECK(ab.p_value == Catch::Approx(ba.p_value).epsilon(1e-12));
        CHECK(ab.t_stat == Catch::Approx(-ba.t_stat).epsilon(1e-12));
    }
}
