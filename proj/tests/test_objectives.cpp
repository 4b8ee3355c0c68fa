#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adpsgd/engine.hpp"
#include "adpsgd/errors.hpp"
#include "adpsgd/objectives.hpp"

using namespace adpsgd;
using objectives::SampleBatch;
using objectives::Vec;

namespace {

Vec central_difference(const objectives::Objective& obj, const Vec& w,
                       const SampleBatch& batch, double h) {
    Vec g(w.size());
    Vec probe = w;
    for (int i = 0; i < w.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = obj.loss(probe, batch);
        probe[i] = orig - h;
        const double down = obj.loss(probe, batch);
        probe[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double max_fd_error(const objectives::Problem& problem, std::uint64_t seed, int points) {
    Rng rng(seed);
    double worst = 0.0;
    for (int t = 0; t < points; ++t) {
        Vec w(problem.objective->dimension());
        for (int i = 0; i < w.size(); ++i) w[i] = rng.next_gaussian();
        const auto batch = objectives::sample_batch(*problem.dataset, 6, rng);
        const Vec analytic = problem.objective->gradient(w, batch);
        const Vec numeric = central_difference(*problem.objective, w, batch, 1e-5);
        worst = std::max(worst,
                         (analytic - numeric).norm() / std::max(1.0, analytic.norm()));
    }
    return worst;
}

}  // namespace

TEST_CASE("quadratic objective") {
    auto problem = objectives::make_quadratic(6, 20.0, 0.0, 123);
    const Vec w_star = *problem.objective->optimum();

    SampleBatch empty;  // no-noise evaluation
    CHECK(problem.objective->gradient(w_star, empty).norm() <= 1e-12);
    CHECK(problem.objective->heldout_loss(w_star) <= 1e-15);

    // Full-batch gradient descent with lr < 2/mu contracts to w*.
    Vec w = Vec::Constant(6, 2.0);
    const double lr = 1.8 / problem.objective->mu();
    for (int it = 0; it < 400; ++it) {
        w -= lr * problem.objective->gradient(w, empty);
    }
    CHECK((w - w_star).norm() <= 1e-8);

    // Reported mu is the top curvature: power-iterate on gradient differences.
    Rng rng(9);
    Vec v(6);
    for (int i = 0; i < 6; ++i) v[i] = rng.next_gaussian();
    double estimate = 0.0;
    for (int it = 0; it < 400; ++it) {
        const Vec av = problem.objective->gradient(w_star + v, empty);
        estimate = av.norm() / v.norm();
        v = av / av.norm();
    }
    CHECK(estimate == doctest::Approx(problem.objective->mu()).epsilon(1e-9));

    auto noisy = objectives::make_quadratic(6, 20.0, 0.3, 123);
    CHECK(max_fd_error(noisy, 77, 20) <= 1e-5);
    CHECK(noisy.objective->sigma() == doctest::Approx(0.3 * std::sqrt(6.0)).epsilon(1e-12));

    CHECK_THROWS_AS(objectives::make_quadratic(0, 10.0, 0.1, 1), InvalidStateError);
}

TEST_CASE("logistic objective") {
    auto problem = objectives::make_logistic(5, 400, 321);
    SampleBatch batch;
    batch.indices = {0, 5, 17, 42};
    const Vec zero = Vec::Zero(5);
    CHECK(problem.objective->loss(zero, batch) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK(max_fd_error(problem, 78, 20) <= 1e-5);

    // Full-batch GD monotone descent at a safe step size.
    SampleBatch full;
    for (int i = 0; i < problem.dataset->train_count; ++i) full.indices.push_back(i);
    Vec w = Vec::Zero(5);
    double prev = problem.objective->loss(w, full);
    for (int it = 0; it < 100; ++it) {
        w -= 0.1 * problem.objective->gradient(w, full);
        const double next = problem.objective->loss(w, full);
        CHECK(next <= prev + 1e-12);
        prev = next;
    }
    CHECK(problem.objective->mu() > 0.0);
    CHECK(problem.objective->sigma() > 0.0);

    CHECK_THROWS_AS(objectives::make_logistic(5, 5, 1), InvalidStateError);
}

TEST_CASE("mlp objective") {
    auto problem = objectives::make_mlp(3, 8, 4, 300, 55);
    SampleBatch batch;
    batch.indices = {0, 1, 2};
    const Vec zero = Vec::Zero(problem.objective->dimension());
    CHECK(problem.objective->loss(zero, batch) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    CHECK(max_fd_error(problem, 79, 20) <= 1e-4);
}

TEST_CASE("mlp single-learner training reaches 95% train accuracy") {
    auto problem = objectives::make_mlp(2, 16, 3, 600, 2024);
    engine::StrategyConfig cfg;
    cfg.strategy = engine::Strategy::Sdpsgd;
    cfg.learners = 1;
    cfg.batch = 16;
    cfg.epochs = 50;
    cfg.lr.base_lr = 0.05;
    cfg.lr.peak_lr = 0.05;
    cfg.seed = 2024;
    const auto record = engine::run_training(cfg, problem);
    CHECK_FALSE(record.diverged);
    CHECK(objectives::mlp_train_accuracy(problem, record.final_model) >= 0.95);
}

TEST_CASE("sample batch") {
    auto tiny = objectives::make_quadratic(2, 5.0, 0.1, 9, 2);  // 1 train, 1 heldout
    Rng rng(3);
    const auto b = objectives::sample_batch(*tiny.dataset, 1, rng);
    CHECK(b.indices == std::vector<int>{0});

    auto problem = objectives::make_quadratic(3, 5.0, 0.5, 10, 256);
    Rng r1(77), r2(77);
    const auto b1 = objectives::sample_batch(*problem.dataset, 32, r1);
    const auto b2 = objectives::sample_batch(*problem.dataset, 32, r2);
    CHECK(b1.indices == b2.indices);

    // Empirical mean of the first feature over many draws matches the split mean.
    double dataset_mean = 0.0, dataset_var = 0.0;
    for (int i = 0; i < problem.dataset->train_count; ++i) {
        dataset_mean += problem.dataset->samples[i].x[0];
    }
    dataset_mean /= problem.dataset->train_count;
    for (int i = 0; i < problem.dataset->train_count; ++i) {
        const double d = problem.dataset->samples[i].x[0] - dataset_mean;
        dataset_var += d * d;
    }
    dataset_var /= problem.dataset->train_count;
    Rng r3(5);
    const int draws = 100000;
    double mean = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto batch = objectives::sample_batch(*problem.dataset, 1, r3);
        mean += problem.dataset->samples[batch.indices[0]].x[0];
    }
    mean /= draws;
    CHECK(std::abs(mean - dataset_mean) <= 3.0 * std::sqrt(dataset_var / draws));

    objectives::Dataset empty;
    CHECK_THROWS_AS(objectives::sample_batch(empty, 1, rng), InvalidStateError);
    CHECK_THROWS_AS(objectives::sample_batch(*problem.dataset, 0, rng),
                    InvalidStateError);
}

TEST_CASE("dataset regeneration is bit-identical") {
    for (int variant = 0; variant < 3; ++variant) {
        objectives::Problem a, b;
        if (variant == 0) {
            a = objectives::make_quadratic(4, 10.0, 0.2, 99);
            b = objectives::make_quadratic(4, 10.0, 0.2, 99);
        } else if (variant == 1) {
            a = objectives::make_logistic(4, 100, 99);
            b = objectives::make_logistic(4, 100, 99);
        } else {
            a = objectives::make_mlp(3, 4, 3, 100, 99);
            b = objectives::make_mlp(3, 4, 3, 100, 99);
        }
        REQUIRE(a.dataset->samples.size() == b.dataset->samples.size());
        CHECK(a.dataset->train_count == b.dataset->train_count);
        for (std::size_t i = 0; i < a.dataset->samples.size(); ++i) {
            CHECK((a.dataset->samples[i].x.array() ==
                   b.dataset->samples[i].x.array()).all());
            CHECK(a.dataset->samples[i].y == b.dataset->samples[i].y);
            CHECK(a.dataset->samples[i].label == b.dataset->samples[i].label);
        }
    }
}

TEST_CASE("heldout split is disjoint and noise-free") {
    auto problem = objectives::make_quadratic(3, 5.0, 0.5, 10, 100);
    CHECK(problem.dataset->train_count == 90);
    CHECK(problem.dataset->heldout_count() == 10);
    // Heldout loss carries no stochastic noise: it is the pure quadratic.
    const Vec w = Vec::Constant(3, 1.0);
    const double h1 = problem.objective->heldout_loss(w);
    const double h2 = problem.objective->heldout_loss(w);
    CHECK(h1 == h2);
    const Vec w_star = *problem.objective->optimum();
    CHECK(problem.objective->heldout_loss(w_star) == 0.0);
}
