#include <catch_amalgamated.hpp>

#include <cmath>

#include "gloss/graph.hpp"
#include "oracles.hpp"

using namespace gloss;

TEST_CASE("graph: pairwise squared distances", "[graph]") {
    Matrix x(2, 2);
    x(1, 0) = 3.0;
    x(1, 1) = 4.0;
    Tape t;
    const Matrix d2 = t.value(pairwise_sq_distances(t, t.input(x)));
    CHECK(d2(0, 1) == 25.0);  // 3-4-5 triangle
    CHECK(d2(1, 0) == 25.0);

    Tape t2;
    const Matrix same = t2.value(pairwise_sq_distances(t2, t2.input(Matrix::filled(4, 3, 0.7))));
    CHECK(max_abs(same) == 0.0);

    Rng rng(21);
    const Matrix r = rng.normal_matrix(6, 4);
    Tape t3;
    const Matrix impl = t3.value(pairwise_sq_distances(t3, t3.input(r)));
    CHECK(max_abs_diff(impl, oracle::pairwise_sq_distances(r)) == 0.0);
}

TEST_CASE("graph: gaussian kernel values and invariants", "[graph]") {
    Matrix x(3, 2);
    x(1, 0) = 1.0;
    x(2, 1) = 2.0;
    Tape t;
    const NodeId d2 = pairwise_sq_distances(t, t.input(x));
    const double sigma = 0.9;
    const Matrix w = t.value(gaussian_kernel(t, d2, sigma));

    // diagonal exactly zero, symmetric, entries in [0, 1]
    for (int i = 0; i < 3; ++i) CHECK(w(i, i) == 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(w(i, j) == w(j, i));
            CHECK(w(i, j) >= 0.0);
            CHECK(w(i, j) <= 1.0);
        }

    // identical off-diagonal points give weight 1
    Matrix dup(4, 2, 0.25);
    dup(3, 0) = 9.0;
    Tape t2;
    const Matrix w2 = t2.value(gaussian_kernel(t2, pairwise_sq_distances(t2, t2.input(dup)), 1.3));
    CHECK(w2(0, 1) == 1.0);

    // D2 = 2 sigma^2 -> weight exp(-1)
    Matrix pair(2, 1);
    pair(1, 0) = std::sqrt(2.0) * sigma;
    Tape t3;
    const Matrix w3 = t3.value(gaussian_kernel(t3, pairwise_sq_distances(t3, t3.input(pair)), sigma));
    CHECK(w3(0, 1) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));

    // monotone in sigma
    Rng rng(22);
    const Matrix pts = rng.normal_matrix(5, 3);
    Tape t4;
    const NodeId dd = pairwise_sq_distances(t4, t4.input(pts));
    const Matrix narrow = t4.value(gaussian_kernel(t4, dd, 0.01));
    const Matrix wide = t4.value(gaussian_kernel(t4, dd, 10.0));
    for (size_t i = 0; i < narrow.size(); ++i) CHECK(narrow.raw()[i] <= wide.raw()[i]);

    REQUIRE_THROWS_AS(gaussian_kernel(t4, dd, 0.0), ValidationError);
    REQUIRE_THROWS_AS(gaussian_kernel(t4, dd, -1.0), ValidationError);
}

TEST_CASE("graph: symmetric normalization", "[graph][oracle]") {
    {
        Matrix w(2, 2);
        w(0, 1) = w(1, 0) = 1.0;
        Tape t;
        const Matrix a = t.value(symmetric_normalize(t, t.input(w)));
        CHECK(a(0, 1) == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(a(0, 0) == 0.0);
    }
    {
        Matrix w(2, 2);
        w(0, 1) = w(1, 0) = 2.0;
        Tape t;
        const Matrix a = t.value(symmetric_normalize(t, t.input(w)));
        CHECK(a(0, 1) == Catch::Approx(1.0).epsilon(1e-12));
    }
    {
        Rng rng(23);
        Matrix w(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) w(i, j) = w(j, i) = rng.uniform(0.1, 2.0);
        Tape t;
        std::vector<double> degrees;
        const Matrix a = t.value(symmetric_normalize(t, t.input(w), &degrees));
        CHECK(max_abs_diff(a, oracle::symmetric_normalize(w)) < 1e-14);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) CHECK(a(i, j) == a(j, i));
        REQUIRE(degrees.size() == 5);
        for (int i = 0; i < 5; ++i) CHECK(degrees[static_cast<size_t>(i)] > 0.0);
    }
    {
        Tape t;
        REQUIRE_THROWS_WITH(symmetric_normalize(t, t.input(Matrix::zeros(3, 3))),
                            Catch::Matchers::ContainsSubstring("zero-degree"));
    }
}

TEST_CASE("graph: column-stochastic transition matrix", "[graph]") {
    LabelSplit split;
    split.labeled_idx = {0};
    split.masked_idx = {1};
    split.gamma = 0.5;
    {
        Matrix a(2, 2);
        a(0, 1) = a(1, 0) = 1.0;
        Tape t;
        const TransitionView v = column_stochastic(t, t.input(a), split);
        const Matrix tv = t.value(v.t);
        CHECK(tv(0, 1) == 1.0);
        CHECK(tv(1, 0) == 1.0);
        CHECK(t.value(v.t_uu).rows() == 1);
        CHECK(t.value(v.t_uu)(0, 0) == 0.0);
        CHECK(t.value(v.t_ul)(0, 0) == 1.0);
    }
    {
        // uniform off-diagonal, B = 4: every column is 1/3 off the diagonal
        Matrix a(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i != j) a(i, j) = 0.8;
        LabelSplit s4;
        s4.labeled_idx = {0, 1};
        s4.masked_idx = {2, 3};
        s4.gamma = 0.5;
        Tape t;
        const TransitionView v = column_stochastic(t, t.input(a), s4);
        const Matrix tv = t.value(v.t);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(tv(i, j) == Catch::Approx(i == j ? 0.0 : 1.0 / 3.0).margin(1e-15));
    }
    {
        Rng rng(24);
        const Matrix x = rng.normal_matrix(6, 4);
        const GraphValues g = graph_values(x, 1.1);
        for (int j = 0; j < 6; ++j) {
            double sum = 0.0;
            for (int i = 0; i < 6; ++i) {
                sum += g.t(i, j);
                CHECK(g.t(i, j) >= 0.0);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("graph: sigma_sqrt forced values and oracle agreement", "[graph][oracle]") {
    // two points with squared distance 3 -> median 3 -> sigma 1
    Matrix x(2, 1);
    x(1, 0) = std::sqrt(3.0);
    CHECK(sigma_sqrt(x) == Catch::Approx(1.0).epsilon(1e-12));

    Matrix x2(2, 1);
    x2(1, 0) = std::sqrt(12.0);
    CHECK(sigma_sqrt(x2) == Catch::Approx(2.0).epsilon(1e-12));

    for (int inst = 0; inst < 50; ++inst) {
        Rng rng(mix_seed(25, static_cast<uint64_t>(inst)));
        const Matrix r = rng.normal_matrix(7, 3);
        CHECK(sigma_sqrt(r) == oracle::sigma_sqrt(r));
    }

    REQUIRE_THROWS_AS(sigma_sqrt(Matrix::filled(5, 2, 1.0)), ValidationError);
    REQUIRE_THROWS_AS(sigma_sqrt(Matrix(1, 3)), ValidationError);
}

TEST_CASE("graph: kernel inflection point sits at sqrt(d/3)", "[graph][reference]") {
    Rng rng(26);
    for (int inst = 0; inst < 20; ++inst) {
        const double d = rng.uniform(0.2, 8.0);
        const double star = std::sqrt(d / 3.0);
        auto k = [&](double s) { return std::exp(-d / (2.0 * s * s)); };
        auto second = [&](double s) {
            const double h = 1e-4 * s;
            return (k(s + h) - 2.0 * k(s) + k(s - h)) / (h * h);
        };
        CHECK(second(0.9 * star) > 0.0);
        CHECK(second(1.1 * star) < 0.0);

        // first derivative formula (d/sigma^3) exp(-d/(2 sigma^2))
        const double s = rng.uniform(0.5, 1.5) * star;
        const double h = 1e-6 * s;
        const double fd = (k(s + h) - k(s - h)) / (2.0 * h);
        const double analytic = d / (s * s * s) * std::exp(-d / (2.0 * s * s));
        CHECK(std::fabs(fd - analytic) / analytic < 1e-6);
    }
}

TEST_CASE("graph: full chain differentiable end-to-end", "[graph][oracle]") {
    // embeddings -> distances -> kernel -> sym norm -> column stochastic ->
    // blocks; scalar functional checked against finite differences.
    LabelSplit split;
    split.labeled_idx = {0, 2, 4};
    split.masked_idx = {1, 3, 5};
    split.gamma = 0.5;
    auto program = [&](Tape& t, NodeId x) {
        const SimilarityGraph g = build_similarity_graph(t, t.l2_row_normalize(x), 0.8);
        const TransitionView v = column_stochastic(t, g.a_norm, split);
        return t.reduce_mean(t.add(t.reduce_sum(v.t_uu), t.reduce_mean(v.t_ul)));
    };
    Rng rng(27);
    const Matrix x = rng.normal_matrix(6, 4);
    const GradCheckReport r = gradient_check(program, x, 1e-5, 1e-4);
    CHECK(r.pass);
}

TEST_CASE("graph: permutation equivariance of W, A and T", "[graph][property]") {
    Rng rng(28);
    const Matrix x = rng.normal_matrix(7, 5);
    const GraphValues g = graph_values(x, 0.9);

    std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
    Matrix xp(7, 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) xp(i, j) = x(perm[static_cast<size_t>(i)], j);
    const GraphValues gp = graph_values(xp, 0.9);

    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
            CHECK(gp.w(i, j) ==
                  g.w(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]));
            CHECK(gp.a_norm(i, j) ==
                  Catch::Approx(g.a_norm(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]))
                      .margin(1e-14));
            CHECK(gp.t(i, j) ==
                  Catch::Approx(g.t(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]))
                      .margin(1e-14));
        }
}
