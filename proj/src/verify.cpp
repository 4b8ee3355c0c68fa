#include "adpsgd/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "adpsgd/csvio.hpp"
#include "adpsgd/engine.hpp"
#include "adpsgd/mixing.hpp"
#include "adpsgd/objectives.hpp"

namespace adpsgd::verify {

namespace {

using mixing::MixKind;
using objectives::Vec;

CheckResult check(const std::string& name, bool pass, const std::string& detail) {
    return {name, pass, detail};
}

// Central-difference gradient of the batch loss.
Vec finite_difference_gradient(const objectives::Objective& obj, const Vec& w,
                               const objectives::SampleBatch& batch, double h) {
    Vec g(w.size());
    Vec probe = w;
    for (int i = 0; i < w.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + h;
        const double up = obj.loss(probe, batch);
        probe[i] = original - h;
        const double down = obj.loss(probe, batch);
        probe[i] = original;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

CheckResult gradient_check(const std::string& name, const objectives::Problem& problem,
                           double tol, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 100));
    const auto& obj = *problem.objective;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Vec w(obj.dimension());
        for (int i = 0; i < w.size(); ++i) w[i] = rng.next_gaussian();
        const auto batch = objectives::sample_batch(*problem.dataset, 8, rng);
        const Vec analytic = obj.gradient(w, batch);
        const Vec numeric = finite_difference_gradient(obj, w, batch, 1e-5);
        const double rel =
            (analytic - numeric).norm() / std::max(1.0, analytic.norm());
        worst = std::max(worst, rel);
    }
    std::ostringstream detail;
    detail << "max relative error " << fmt_double(worst) << " (tol " << tol << ")";
    return check(name, worst <= tol, detail.str());
}

CheckResult ring_eigenvalue_closed_form_check() {
    double worst = 0.0;
    for (int order = 3; order <= 128; ++order) {
        const auto report =
            mixing::second_eigenvalue_magnitude(mixing::build_fixed_ring(order));
        worst = std::max(
            worst, std::abs(report.lambda_hat - mixing::fm_lambda_closed_form(order)));
    }
    return check("fixed-ring eigenvalue closed form (L=3..128)", worst <= 1e-9,
                 "max |closed form - numeric| = " + fmt_double(worst));
}

CheckResult expected_gram_monte_carlo(int order, int trials, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 200 + order));
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(order, order);
    for (int t = 0; t < trials; ++t) {
        const auto perm = mixing::random_permutation(order, rng);
        const auto tr = mixing::build_random_ring(order, perm);
        mean += tr.entries.transpose() * tr.entries;
    }
    mean /= trials;
    const Eigen::MatrixXd expected = mixing::rm_expected_gram(order);
    const double entry_err = (mean - expected).cwiseAbs().maxCoeff();

    // Eigenvalue multiset of the closed form: {1, (1/3 - 2/(3(L-1))) x (L-1)}.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mean, Eigen::EigenvaluesOnly);
    Eigen::VectorXd eigs = solver.eigenvalues();
    std::sort(eigs.data(), eigs.data() + eigs.size(), std::greater<double>());
    const double bulk = 1.0 / 3.0 - 2.0 / (3.0 * (order - 1));
    double eig_err = std::abs(eigs[0] - 1.0);
    for (int i = 1; i < order; ++i) eig_err = std::max(eig_err, std::abs(eigs[i] - bulk));

    std::ostringstream detail;
    detail << "entrywise err " << fmt_double(entry_err) << ", eigenvalue err "
           << fmt_double(eig_err) << " over " << trials << " permutations";
    return check("expected Gram Monte-Carlo (L=" + std::to_string(order) + ")",
                 entry_err <= 0.01 && eig_err <= 0.01, detail.str());
}

CheckResult fixed_ring_product_bound(int order, int k_max) {
    Rng unused(0);
    const auto points =
        mixing::verify_consensus_decay(MixKind::FixedRing, order, k_max, 1, unused);
    double worst_excess = -1.0;
    for (const auto& p : points) {
        worst_excess = std::max(worst_excess, p.measured - p.bound);
    }
    return check("fixed-ring exact product bound (L=" + std::to_string(order) +
                     ", k<=" + std::to_string(k_max) + ")",
                 worst_excess <= 1e-12, "max (measured - bound) = " + fmt_double(worst_excess));
}

CheckResult random_ring_expectation_bound(int order, int k_max, int trials,
                                          std::uint64_t seed) {
    Rng rng(derive_seed(seed, 300 + order));
    const auto points =
        mixing::verify_consensus_decay(MixKind::RandomRing, order, k_max, trials, rng);
    double worst_excess = -1e9;
    for (const auto& p : points) {
        if (p.k == 0) continue;  // identity; bound sqrt(L-1) is trivially loose
        worst_excess = std::max(worst_excess,
                                p.measured - (p.bound + 3.0 * p.std_error));
    }
    return check("random-ring expectation bound (L=" + std::to_string(order) + ")",
                 worst_excess <= 0.0,
                 "max (mean - bound - 3se) = " + fmt_double(worst_excess));
}

CheckResult sdpsgd_pooled_equivalence(std::uint64_t seed) {
    auto problem = objectives::make_quadratic(6, 8.0, 0.3, derive_seed(seed, 400));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int learners = 4, batch = 5;
        const double lr = 0.05;
        auto states = engine::init_learners(learners, derive_seed(seed, 410 + trial),
                                            problem, 2);
        // Pooled oracle: one plain SGD step on the concatenated L*M batch,
        // replaying the same per-learner sampling streams.
        std::vector<Rng> clones;
        for (auto& s : states) clones.push_back(s.rng);
        objectives::SampleBatch pooled;
        for (auto& rng : clones) {
            const auto b = objectives::sample_batch(*problem.dataset, batch, rng);
            pooled.indices.insert(pooled.indices.end(), b.indices.begin(),
                                  b.indices.end());
        }
        const Vec w0 = states[0].model;
        const Vec oracle = w0 - lr * problem.objective->gradient(w0, pooled);

        engine::step_sdpsgd(states, problem, batch, lr);
        for (const auto& s : states) {
            worst = std::max(worst, (s.model - oracle).cwiseAbs().maxCoeff());
        }
    }
    return check("SDPSGD step equals pooled-batch SGD (20 trials)", worst <= 1e-10,
                 "max deviation " + fmt_double(worst));
}

CheckResult fm_lambda_monotonic() {
    for (int order = 4; order <= 128; ++order) {
        if (mixing::fm_lambda_closed_form(order) <=
            mixing::fm_lambda_closed_form(order - 1)) {
            return check("fixed-ring eigenvalue strictly increasing in L", false,
                         "violated at L=" + std::to_string(order));
        }
    }
    return check("fixed-ring eigenvalue strictly increasing in L", true, "L=3..128");
}

CheckResult random_ring_spectrum_invariance(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 500));
    const int order = 12;
    const auto fixed = mixing::build_fixed_ring(order);
    Eigen::VectorXcd ref = Eigen::EigenSolver<Eigen::MatrixXd>(fixed.entries).eigenvalues();
    std::vector<double> ref_mags(order);
    for (int i = 0; i < order; ++i) ref_mags[i] = std::abs(ref[i]);
    std::sort(ref_mags.begin(), ref_mags.end());
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto perm = mixing::random_permutation(order, rng);
        const auto random_ring = mixing::build_random_ring(order, perm);
        Eigen::VectorXcd eigs =
            Eigen::EigenSolver<Eigen::MatrixXd>(random_ring.entries).eigenvalues();
        std::vector<double> mags(order);
        for (int i = 0; i < order; ++i) mags[i] = std::abs(eigs[i]);
        std::sort(mags.begin(), mags.end());
        for (int i = 0; i < order; ++i) {
            worst = std::max(worst, std::abs(mags[i] - ref_mags[i]));
        }
    }
    return check("random ring spectrum equals fixed ring spectrum", worst <= 1e-9,
                 "max eigenvalue magnitude deviation " + fmt_double(worst));
}

CheckResult uniform_absorbs_doubly_stochastic(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 600));
    const int order = 9;
    const auto uniform = mixing::build_uniform(order);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        // Random doubly stochastic matrix: convex combination of permutations.
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(order, order);
        double remaining = 1.0;
        for (int j = 0; j < 4; ++j) {
            const double weight = (j == 3) ? remaining : remaining * rng.next_double();
            remaining -= (j == 3) ? 0.0 : weight;
            const auto perm = mixing::random_permutation(order, rng);
            for (int i = 0; i < order; ++i) x(i, perm.mapping[i]) += weight;
        }
        worst = std::max(worst,
                         (x * uniform.entries - uniform.entries).cwiseAbs().maxCoeff());
    }
    return check("X * Uniform = Uniform for doubly stochastic X", worst <= 1e-12,
                 "max deviation " + fmt_double(worst));
}

}  // namespace

std::vector<CheckResult> run_all(std::uint64_t seed) {
    std::vector<CheckResult> results;
    results.push_back(ring_eigenvalue_closed_form_check());
    results.push_back(expected_gram_monte_carlo(8, 20000, seed));
    results.push_back(expected_gram_monte_carlo(16, 20000, seed));
    for (int order : {8, 16, 64}) {
        results.push_back(fixed_ring_product_bound(order, 200));
    }
    for (int order : {16, 32}) {
        results.push_back(random_ring_expectation_bound(order, 30, 1000, seed));
    }
    results.push_back(sdpsgd_pooled_equivalence(seed));
    results.push_back(fm_lambda_monotonic());
    results.push_back(random_ring_spectrum_invariance(seed));
    results.push_back(uniform_absorbs_doubly_stochastic(seed));

    results.push_back(gradient_check(
        "quadratic gradient vs finite differences",
        objectives::make_quadratic(8, 25.0, 0.4, derive_seed(seed, 701)), 1e-5, seed));
    results.push_back(gradient_check(
        "logistic gradient vs finite differences",
        objectives::make_logistic(6, 300, derive_seed(seed, 702)), 1e-5, seed));
    results.push_back(gradient_check(
        "mlp gradient vs finite differences",
        objectives::make_mlp(4, 8, 3, 200, derive_seed(seed, 703)), 1e-4, seed));
    return results;
}

}  // namespace adpsgd::verify
