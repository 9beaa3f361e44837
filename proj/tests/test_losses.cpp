#include <catch_amalgamated.hpp>

#include <cmath>

#include "gloss/losses.hpp"
#include "gloss/lpa.hpp"
#include "oracles.hpp"

using namespace gloss;

namespace {

// Apply a permutation to batch rows and labels together.
std::pair<Matrix, std::vector<int>> permute_batch(const Matrix& z, const std::vector<int>& y,
                                                  const std::vector<int>& perm) {
    Matrix zp(z.rows(), z.cols());
    std::vector<int> yp(y.size());
    for (size_t i = 0; i < perm.size(); ++i) {
        for (int j = 0; j < z.cols(); ++j)
            zp(static_cast<int>(i), j) = z(perm[i], j);
        yp[i] = y[static_cast<size_t>(perm[i])];
    }
    return {zp, yp};
}

} // namespace

TEST_CASE("g_loss: forced values and oracle agreement", "[losses]") {
    // exact one-hot prediction: only true-class entries are gathered, log 1 = 0
    const Matrix truth = one_hot({0, 2, 1, 0}, 3);
    {
        Tape t;
        const NodeId y_hat = t.input(truth);
        CHECK(t.scalar_value(g_loss(t, y_hat, truth)) == 0.0);
    }
    // through the clamped renormalization the loss is -log(1/(1+(C-1)eps)) ~ 2e-12
    {
        Tape t;
        const NodeId y_norm = normalize_soft_labels(t, t.input(truth));
        const double v = t.scalar_value(g_loss(t, y_norm, truth));
        CHECK(v > 0.0);
        CHECK(v < 1e-11);
    }
    // uniform prediction: log C
    {
        Tape t;
        const NodeId uniform = t.input(Matrix::filled(4, 3, 1.0 / 3.0));
        CHECK(t.scalar_value(g_loss(t, uniform, truth)) ==
              Catch::Approx(std::log(3.0)).epsilon(1e-12));
    }
    // random case against the double-loop oracle
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(mix_seed(41, static_cast<uint64_t>(inst)));
        Matrix raw = rng.uniform_matrix(4, 3, 0.05, 1.0);
        Tape t;
        const NodeId y_norm = t.row_normalize(t.input(raw));
        const Matrix y_hat = t.value(y_norm);
        const Matrix y_true = one_hot({rng.uniform_int(3), rng.uniform_int(3), rng.uniform_int(3),
                                       rng.uniform_int(3)}, 3);
        CHECK(t.scalar_value(g_loss(t, y_norm, y_true)) ==
              Catch::Approx(oracle::g_loss(y_hat, y_true)).epsilon(1e-12));
    }
    // shape mismatch
    Tape t;
    const NodeId y_hat = t.input(Matrix::filled(4, 3, 1.0 / 3.0));
    REQUIRE_THROWS_AS(g_loss(t, y_hat, one_hot({0, 1}, 3)), ShapeError);
    // rows that do not sum to one are rejected
    const NodeId bad = t.input(Matrix::filled(4, 3, 0.9));
    REQUIRE_THROWS_AS(g_loss(t, bad, one_hot({0, 1, 2, 0}, 3)), ValidationError);
}

TEST_CASE("cross_entropy: forced values and oracle agreement", "[losses]") {
    {
        Tape t;
        const NodeId logits = t.input(Matrix::filled(5, 4, 0.37));
        CHECK(t.scalar_value(cross_entropy(t, logits, {0, 1, 2, 3, 0})) ==
              Catch::Approx(std::log(4.0)).epsilon(1e-12));
    }
    {
        Matrix logits(2, 3);
        logits(0, 1) = 1000.0;  // huge margin on the true class
        logits(1, 0) = 1000.0;
        Tape t;
        CHECK(t.scalar_value(cross_entropy(t, t.input(logits), {1, 0})) < 1e-9);
    }
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(mix_seed(42, static_cast<uint64_t>(inst)));
        const Matrix logits = rng.normal_matrix(5, 4, 0.0, 2.0);
        std::vector<int> y(5);
        for (auto& l : y) l = rng.uniform_int(4);
        Tape t;
        CHECK(t.scalar_value(cross_entropy(t, t.input(logits), y)) ==
              Catch::Approx(oracle::cross_entropy(logits, y)).epsilon(1e-12));
    }
}

TEST_CASE("composite: endpoint reductions and arithmetic", "[losses]") {
    Tape t;
    const NodeId lg = t.input(Matrix::filled(1, 1, 2.0));
    const NodeId lce = t.input(Matrix::filled(1, 1, 1.0));

    const LossValue at_zero = composite(t, lg, lce, 0.0);
    CHECK(at_zero.total == lce);  // identical node, not just equal value

    const LossValue at_one = composite(t, lg, lce, 1.0);
    CHECK(at_one.total == lg);

    const LossValue mid = composite(t, lg, lce, 0.8);
    CHECK(t.scalar_value(mid.total) == Catch::Approx(1.8).epsilon(1e-12));
    CHECK(std::fabs(t.scalar_value(mid.total) - (0.8 * mid.lg + 0.2 * mid.lce)) < 1e-12);

    REQUIRE_THROWS_AS(composite(t, lg, lce, -0.1), ValidationError);
    REQUIRE_THROWS_AS(composite(t, lg, lce, 1.1), ValidationError);
}

TEST_CASE("scl: forced values, limits, oracle", "[losses]") {
    {
        // two samples, same class: the only candidate is the positive
        Rng rng(43);
        const Matrix z = rng.normal_matrix(2, 4);
        Tape t;
        CHECK(std::fabs(t.scalar_value(scl(t, t.input(z), {1, 1}, 0.5))) < 1e-12);
    }
    {
        // large temperature: softmax over candidates becomes uniform
        Rng rng(44);
        const Matrix z = rng.normal_matrix(6, 5);
        Tape t;
        CHECK(t.scalar_value(scl(t, t.input(z), {0, 0, 1, 1, 0, 1}, 1e7)) ==
              Catch::Approx(std::log(5.0)).epsilon(1e-4));
    }
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(mix_seed(45, static_cast<uint64_t>(inst)));
        const Matrix z = rng.normal_matrix(6, 4);
        std::vector<int> y(6);
        for (auto& l : y) l = rng.uniform_int(2);
        bool has_pair = false;
        for (size_t i = 0; i < y.size() && !has_pair; ++i)
            for (size_t j = i + 1; j < y.size(); ++j)
                if (y[i] == y[j]) { has_pair = true; break; }
        if (!has_pair) y[1] = y[0];
        Tape t;
        CHECK(t.scalar_value(scl(t, t.input(z), y, 0.1)) ==
              Catch::Approx(oracle::scl(z, y, 0.1)).epsilon(1e-9));
    }
    Tape t;
    Rng rng(46);
    const NodeId z = t.input(rng.normal_matrix(3, 2));
    REQUIRE_THROWS_AS(scl(t, z, {0, 1, 0}, 0.0), ValidationError);
    REQUIRE_THROWS_AS(scl(t, z, {0, 1, 2}, 0.5), DegenerateBatchError);
}

TEST_CASE("triplet: forced values and exhaustive oracle", "[losses]") {
    {
        // positive coincides with the anchor, negative is far: inactive hinge
        Matrix z(3, 3);
        z(0, 0) = 1.0;
        z(1, 0) = 1.0;  // same point, same class
        z(2, 1) = 1.0;  // orthogonal, other class: d2 = 2 > alpha
        Tape t;
        CHECK(t.scalar_value(triplet(t, t.input(z), {0, 0, 1}, 0.5)) == 0.0);
    }
    {
        // positive and negative at the same point: the margin alone survives
        // for the anchor; the coincident positive's own triplet is d2 + alpha
        Matrix z(3, 2);
        z(0, 0) = 1.0;
        z(1, 1) = 1.0;
        z(2, 1) = 1.0;
        const double alpha = 0.25;
        Tape t;
        const double d2 = 2.0;  // orthogonal unit vectors
        const double expected = (alpha + (d2 + alpha)) / 2.0;
        CHECK(t.scalar_value(triplet(t, t.input(z), {0, 0, 1}, alpha)) ==
              Catch::Approx(expected).epsilon(1e-12));
    }
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(mix_seed(47, static_cast<uint64_t>(inst)));
        const Matrix z = rng.normal_matrix(6, 4);
        std::vector<int> y{0, 0, 1, 1, rng.uniform_int(2), rng.uniform_int(2)};
        Tape t;
        CHECK(t.scalar_value(triplet(t, t.input(z), y, 0.5)) ==
              Catch::Approx(oracle::triplet(z, y, 0.5)).epsilon(1e-9));
    }
    Tape t;
    Rng rng(48);
    const NodeId z = t.input(rng.normal_matrix(3, 2));
    REQUIRE_THROWS_AS(triplet(t, z, {0, 0, 0}, 0.5), DegenerateBatchError);
}

TEST_CASE("cosine_pair: forced values and pair oracle", "[losses]") {
    {
        Matrix z(2, 3);
        z(0, 1) = 2.0;
        z(1, 1) = 2.0;  // identical direction, same class
        Tape t;
        CHECK(t.scalar_value(cosine_pair(t, t.input(z), {0, 0})) ==
              Catch::Approx(0.0).margin(1e-15));
    }
    {
        Matrix z(2, 3);
        z(0, 0) = 1.0;
        z(1, 1) = 1.0;  // orthogonal, different class
        Tape t;
        CHECK(t.scalar_value(cosine_pair(t, t.input(z), {0, 1})) ==
              Catch::Approx(0.0).margin(1e-15));
    }
    for (int inst = 0; inst < 20; ++inst) {
        Rng rng(mix_seed(49, static_cast<uint64_t>(inst)));
        const Matrix z = rng.normal_matrix(5, 4);
        std::vector<int> y{0, 1, rng.uniform_int(2), rng.uniform_int(2), 1};
        Tape t;
        CHECK(t.scalar_value(cosine_pair(t, t.input(z), y)) ==
              Catch::Approx(oracle::cosine_pair(z, y)).epsilon(1e-9));
    }
    Tape t;
    Matrix zero_row(3, 2);
    zero_row(0, 0) = 1.0;
    zero_row(2, 1) = 1.0;  // row 1 is all zero
    REQUIRE_THROWS_WITH(cosine_pair(t, t.input(zero_row), {0, 1, 0}),
                        Catch::Matchers::ContainsSubstring("zero-norm"));
}

TEST_CASE("losses: permutation invariance", "[losses][property]") {
    Rng rng(50);
    const Matrix z = rng.normal_matrix(6, 4);
    const std::vector<int> y{0, 1, 0, 1, 1, 0};
    const std::vector<int> perm{4, 2, 0, 5, 1, 3};
    const auto [zp, yp] = permute_batch(z, y, perm);

    auto eval = [](auto&& fn) { return fn(); };
    const double scl_a = eval([&] { Tape t; return t.scalar_value(scl(t, t.input(z), y, 0.2)); });
    const double scl_b = eval([&] { Tape t; return t.scalar_value(scl(t, t.input(zp), yp, 0.2)); });
    CHECK(scl_a == Catch::Approx(scl_b).epsilon(1e-9));

    const double tri_a =
        eval([&] { Tape t; return t.scalar_value(triplet(t, t.input(z), y, 0.5)); });
    const double tri_b =
        eval([&] { Tape t; return t.scalar_value(triplet(t, t.input(zp), yp, 0.5)); });
    CHECK(tri_a == Catch::Approx(tri_b).epsilon(1e-9));

    const double cos_a =
        eval([&] { Tape t; return t.scalar_value(cosine_pair(t, t.input(z), y)); });
    const double cos_b =
        eval([&] { Tape t; return t.scalar_value(cosine_pair(t, t.input(zp), yp)); });
    CHECK(cos_a == Catch::Approx(cos_b).epsilon(1e-9));

    const Matrix logits = rng.normal_matrix(6, 3);
    const auto [lp, ylp] = permute_batch(logits, y, perm);
    const double ce_a =
        eval([&] { Tape t; return t.scalar_value(cross_entropy(t, t.input(logits), y)); });
    const double ce_b =
        eval([&] { Tape t; return t.scalar_value(cross_entropy(t, t.input(lp), ylp)); });
    CHECK(ce_a == Catch::Approx(ce_b).epsilon(1e-9));
}

TEST_CASE("scl: invariant under global rotation", "[losses][property]") {
    Rng rng(51);
    const int d = 5;
    const Matrix z = rng.normal_matrix(6, d);
    const std::vector<int> y{0, 0, 1, 1, 0, 1};
    const Matrix q = oracle::random_orthogonal(d, 52);
    const Matrix zq = matmul(z, q);

    Tape t1, t2;
    const double a = t1.scalar_value(scl(t1, t1.input(z), y, 0.15));
    const double b = t2.scalar_value(scl(t2, t2.input(zq), y, 0.15));
    CHECK(std::fabs(a - b) < 1e-9);
}

TEST_CASE("losses: gradients match finite differences", "[losses][oracle]") {
    Rng rng(53);
    const std::vector<int> y{0, 1, 0, 1, 1, 0};

    const Matrix z = rng.normal_matrix(6, 4);
    CHECK(gradient_check([&](Tape& t, NodeId x) { return scl(t, x, y, 0.3); }, z, 1e-5, 1e-4).pass);
    CHECK(gradient_check([&](Tape& t, NodeId x) { return triplet(t, x, y, 0.5); }, z, 1e-5, 1e-4)
              .pass);
    CHECK(gradient_check([&](Tape& t, NodeId x) { return cosine_pair(t, x, y); }, z, 1e-5, 1e-4)
              .pass);

    const Matrix logits = rng.normal_matrix(6, 3);
    CHECK(gradient_check([&](Tape& t, NodeId x) { return cross_entropy(t, x, y); }, logits, 1e-5,
                         1e-4)
              .pass);

    // g_loss through the clamped renormalization
    const Matrix raw = rng.uniform_matrix(4, 3, 0.05, 1.0);
    const Matrix truth = one_hot({0, 2, 1, 1}, 3);
    CHECK(gradient_check(
              [&](Tape& t, NodeId x) { return g_loss(t, normalize_soft_labels(t, x), truth); },
              raw, 1e-6, 1e-4)
              .pass);
}
