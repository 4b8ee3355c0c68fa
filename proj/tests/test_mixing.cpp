#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "adpsgd/errors.hpp"
#include "adpsgd/mixing.hpp"
#include "adpsgd/rng.hpp"

using namespace adpsgd;
using mixing::DistanceMode;
using mixing::MixKind;

TEST_CASE("fixed ring structure") {
    const auto m3 = mixing::build_fixed_ring(3);
    CHECK(m3.kind == MixKind::FixedRing);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(m3.entries(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        }
    }

    const auto m5 = mixing::build_fixed_ring(5);
    const double third = 1.0 / 3.0;
    CHECK(m5.entries(0, 0) == third);
    CHECK(m5.entries(0, 1) == third);
    CHECK(m5.entries(0, 2) == 0.0);
    CHECK(m5.entries(0, 3) == 0.0);
    CHECK(m5.entries(0, 4) == third);

    const auto m8 = mixing::build_fixed_ring(8);
    for (int j = 0; j < 8; ++j) {
        CHECK(m8.entries.col(j).sum() == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(mixing::is_doubly_stochastic(m8.entries));

    CHECK_THROWS_AS(mixing::build_fixed_ring(2), InvalidOrderError);
}

TEST_CASE("uniform matrix") {
    const auto m2 = mixing::build_uniform(2);
    CHECK(m2.entries(0, 0) == 0.5);
    CHECK(m2.entries(1, 0) == 0.5);
    const auto m4 = mixing::build_uniform(4);
    CHECK((m4.entries.array() == 0.25).all());
    CHECK_THROWS_AS(mixing::build_uniform(1), InvalidOrderError);

    // Product with any doubly stochastic matrix is uniform again.
    const auto fixed = mixing::build_fixed_ring(4);
    const Eigen::MatrixXd prod = fixed.entries * m4.entries;
    CHECK((prod - m4.entries).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("random permutation determinism and identity") {
    Rng a(42), b(42);
    const auto p1 = mixing::random_permutation(8, a);
    const auto p2 = mixing::random_permutation(8, b);
    CHECK(p1.mapping == p2.mapping);

    Rng c(7);
    const auto p = mixing::random_permutation(1, c);
    CHECK(p.mapping == std::vector<int>{0});

    CHECK_THROWS_AS(mixing::random_permutation(0, c), InvalidOrderError);
}

TEST_CASE("random permutation uniformity (chi-square, L=4)") {
    Rng rng(2024);
    const int draws = 60000;
    std::map<std::vector<int>, int> counts;
    for (int i = 0; i < draws; ++i) {
        counts[mixing::random_permutation(4, rng).mapping]++;
    }
    CHECK(counts.size() == 24);
    const double expected = draws / 24.0;
    double chi2 = 0.0;
    for (const auto& [perm, n] : counts) {
        chi2 += (n - expected) * (n - expected) / expected;
    }
    // 23 degrees of freedom; 49.7 is the 0.999 quantile.
    CHECK(chi2 < 49.7);
}

TEST_CASE("random ring construction") {
    Rng rng(5);
    mixing::Permutation identity;
    identity.order = 6;
    identity.mapping = {0, 1, 2, 3, 4, 5};
    const auto ring = mixing::build_random_ring(6, identity);
    const auto fixed = mixing::build_fixed_ring(6);
    CHECK((ring.entries - fixed.entries).cwiseAbs().maxCoeff() == 0.0);

    // Reversal: a symmetric reindexing with an identical eigenvalue multiset.
    mixing::Permutation reversal;
    reversal.order = 6;
    reversal.mapping = {5, 4, 3, 2, 1, 0};
    const auto rev = mixing::build_random_ring(6, reversal);
    CHECK(mixing::is_doubly_stochastic(rev.entries));
    Eigen::VectorXcd e1 = Eigen::EigenSolver<Eigen::MatrixXd>(rev.entries).eigenvalues();
    Eigen::VectorXcd e2 = Eigen::EigenSolver<Eigen::MatrixXd>(fixed.entries).eigenvalues();
    std::vector<double> m1(6), m2(6);
    for (int i = 0; i < 6; ++i) {
        m1[i] = std::abs(e1[i]);
        m2[i] = std::abs(e2[i]);
    }
    std::sort(m1.begin(), m1.end());
    std::sort(m2.begin(), m2.end());
    for (int i = 0; i < 6; ++i) CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-9));

    mixing::Permutation wrong;
    wrong.order = 5;
    wrong.mapping = {0, 1, 2, 3, 4};
    CHECK_THROWS_AS(mixing::build_random_ring(6, wrong), DimensionError);
    CHECK_THROWS_AS(mixing::build_random_ring(2, identity), InvalidOrderError);
}

TEST_CASE("random ring entries over all permutations at L=5") {
    // Exhaustive: P^T T^f P is a reindexing, so entries stay in {0, 1/3}.
    std::vector<int> base = {0, 1, 2, 3, 4};
    do {
        mixing::Permutation p;
        p.order = 5;
        p.mapping = base;
        const auto m = mixing::build_random_ring(5, p);
        CHECK(mixing::is_doubly_stochastic(m.entries));
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                const double v = m.entries(i, j);
                CHECK((v == 0.0 || v == 1.0 / 3.0));
            }
        }
    } while (std::next_permutation(base.begin(), base.end()));
}

TEST_CASE("second eigenvalue magnitude") {
    const auto uniform = mixing::second_eigenvalue_magnitude(mixing::build_uniform(7));
    CHECK(uniform.lambda_hat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(uniform.spectral_gap == doctest::Approx(1.0).epsilon(1e-12));

    const auto r4 = mixing::second_eigenvalue_magnitude(mixing::build_fixed_ring(4));
    CHECK(r4.lambda_hat == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const auto r16 = mixing::second_eigenvalue_magnitude(mixing::build_fixed_ring(16));
    CHECK(r16.lambda_hat == doctest::Approx(0.949246).epsilon(1e-5));
    CHECK(r16.lambda_hat ==
          doctest::Approx(mixing::fm_lambda_closed_form(16)).epsilon(1e-9));

    const auto r64 = mixing::second_eigenvalue_magnitude(mixing::build_fixed_ring(64));
    CHECK(std::abs(r64.lambda_hat - mixing::fm_lambda_closed_form(64)) <= 1e-9);
}

TEST_CASE("fixed-ring eigenvalue closed form") {
    CHECK(std::abs(mixing::fm_lambda_closed_form(3)) <= 1e-15);
    CHECK(mixing::fm_lambda_closed_form(4) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mixing::fm_lambda_closed_form(2), InvalidOrderError);
}

TEST_CASE("consensus bounds") {
    CHECK(mixing::fm_consensus_bound(16, 0) == 1.0);
    CHECK(std::abs(mixing::fm_consensus_bound(3, 1)) <= 1e-15);
    CHECK(mixing::fm_consensus_bound(16, 50) == doctest::Approx(0.0738).epsilon(2e-3));

    CHECK(mixing::rm_consensus_bound(2, 0) == 1.0);
    CHECK(mixing::rm_consensus_bound(16, 10) ==
          doctest::Approx(std::sqrt(15.0) / 243.0).epsilon(1e-12));

    // Past a logarithmic crossover the random-mixing bound is tighter.
    for (int order = 6; order <= 128; ++order) {
        const int crossover =
            2 * static_cast<int>(std::ceil(std::log(order) / std::log(3.0))) + 4;
        for (int k = crossover; k <= crossover + 20; ++k) {
            CHECK(mixing::rm_consensus_bound(order, k) <
                  mixing::fm_consensus_bound(order, k));
        }
    }

    // Log-space versions agree where the linear ones do not underflow.
    CHECK(mixing::fm_consensus_bound_log10(16, 50) ==
          doctest::Approx(std::log10(mixing::fm_consensus_bound(16, 50))).epsilon(1e-12));
    CHECK(mixing::rm_consensus_bound_log10(16, 10) ==
          doctest::Approx(std::log10(mixing::rm_consensus_bound(16, 10))).epsilon(1e-12));
    // ...and stay finite far past the double-precision underflow point.
    CHECK(std::isfinite(mixing::rm_consensus_bound_log10(16, 5000)));
    CHECK(mixing::rm_consensus_bound(16, 5000) == 0.0);
}

TEST_CASE("consensus distance") {
    const auto uniform = mixing::build_uniform(6);
    CHECK(mixing::consensus_distance(uniform.entries, DistanceMode::MatrixProduct) <=
          1e-12);

    Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(2, 2);
    CHECK(mixing::consensus_distance(eye2, DistanceMode::MatrixProduct) ==
          doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXd same(3, 4);
    same.colwise() = Eigen::Vector3d(1.0, -2.0, 0.5);
    CHECK(mixing::consensus_distance(same, DistanceMode::ParameterColumns) <= 1e-12);

    Eigen::MatrixXd bad = eye2;
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(mixing::consensus_distance(bad, DistanceMode::MatrixProduct),
                    NumericalError);

    Eigen::MatrixXd rect = Eigen::MatrixXd::Ones(2, 3);
    CHECK_THROWS_AS(mixing::consensus_distance(rect, DistanceMode::MatrixProduct),
                    DimensionError);
}

TEST_CASE("expected Gram closed form") {
    const auto g = mixing::rm_expected_gram(16);
    for (int i = 0; i < 16; ++i) {
        CHECK(g(i, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(g.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int j = 0; j < 16; ++j) {
            if (i != j) CHECK(g(i, j) == doctest::Approx(2.0 / 45.0).epsilon(1e-15));
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
    Eigen::VectorXd eigs = solver.eigenvalues();
    CHECK(eigs.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 15; ++i) {
        CHECK(eigs[i] == doctest::Approx(1.0 / 3.0 - 2.0 / 45.0).epsilon(1e-12));
    }

    CHECK_THROWS_AS(mixing::rm_expected_gram(5), OutOfRegimeError);
}

TEST_CASE("consensus decay sweeps") {
    Rng rng(11);
    const auto fixed = mixing::verify_consensus_decay(MixKind::FixedRing, 16, 5, 1, rng);
    REQUIRE(fixed.size() == 6);
    CHECK(fixed[0].k == 0);
    CHECK(fixed[0].bound == 1.0);
    // k=1: the product is T^f itself and its distance to uniform is lambda_hat.
    CHECK(fixed[1].measured ==
          doctest::Approx(mixing::fm_lambda_closed_form(16)).epsilon(1e-9));
    for (const auto& p : fixed) CHECK(p.measured <= p.bound + 1e-12);

    const auto random =
        mixing::verify_consensus_decay(MixKind::RandomRing, 32, 20, 200, rng);
    const double identity_distance = mixing::consensus_distance(
        Eigen::MatrixXd::Identity(32, 32), DistanceMode::MatrixProduct);
    CHECK(random[0].measured == doctest::Approx(identity_distance).epsilon(1e-12));
    CHECK(random[20].measured <=
          mixing::rm_consensus_bound(32, 20) + 3.0 * random[20].std_error);

    CHECK_THROWS_AS(mixing::verify_consensus_decay(MixKind::FixedRing, 16, 0, 1, rng),
                    InvalidOrderError);
    CHECK_THROWS_AS(mixing::verify_consensus_decay(MixKind::RandomRing, 5, 5, 1, rng),
                    InvalidOrderError);
}

TEST_CASE("rate bound calculator") {
    const double base = mixing::adpsgd_rate_bound(100, 1, 1.0, 1.0, 1.0);
    CHECK(base == doctest::Approx(0.6).epsilon(1e-12));

    // Quadrupling K or M halves the stochastic term.
    const double second = [](double k, double m) {
        return mixing::adpsgd_rate_bound(k, m, 1.0, 1.0, 1.0) - 20.0 / k;
    }(100, 1);
    const double second_k4 = mixing::adpsgd_rate_bound(400, 1, 1.0, 1.0, 1.0) - 20.0 / 400;
    const double second_m4 = mixing::adpsgd_rate_bound(100, 4, 1.0, 1.0, 1.0) - 20.0 / 100;
    CHECK(second_k4 == doctest::Approx(second / 2.0).epsilon(1e-12));
    CHECK(second_m4 == doctest::Approx(second / 2.0).epsilon(1e-12));

    CHECK_THROWS_AS(mixing::adpsgd_rate_bound(0, 1, 1, 1, 1), InvalidOrderError);
}
