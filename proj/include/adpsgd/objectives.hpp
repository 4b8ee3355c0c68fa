#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adpsgd/rng.hpp"

namespace adpsgd::objectives {

using Vec = Eigen::VectorXd;

struct Sample {
    Vec x;
    double y = 0.0;  // regression target / binary label in {-1,+1}
    int label = 0;   // class index for classification
};

// Synthetic dataset with a train/heldout split. Regeneration from the same
// generator parameters and seed is bit-identical.
struct Dataset {
    std::vector<Sample> samples;
    int train_count = 0;  // samples[0..train_count) train, rest heldout
    std::string generator;
    std::uint64_t seed = 0;
    double heldout_fraction = 0.0;

    int heldout_count() const { return static_cast<int>(samples.size()) - train_count; }
};

// Mini-batch as indices into Dataset::samples.
struct SampleBatch {
    std::vector<int> indices;
    int size() const { return static_cast<int>(indices.size()); }
};

// M samples drawn uniformly with replacement from the training split.
SampleBatch sample_batch(const Dataset& ds, int batch_size, Rng& rng);

// Loss + stochastic gradient over a flat parameter vector. Immutable after
// construction; evaluation is reentrant.
class Objective {
  public:
    virtual ~Objective() = default;

    int dimension() const { return dimension_; }

    virtual double loss(const Vec& w, const SampleBatch& batch) const = 0;
    virtual Vec gradient(const Vec& w, const SampleBatch& batch) const = 0;

    // Mean loss over the full heldout split, with no stochastic noise.
    virtual double heldout_loss(const Vec& w) const = 0;

    const std::optional<Vec>& optimum() const { return optimum_; }

    // Largest gradient-Lipschitz surrogate (exact for the quadratic) and the
    // gradient-noise scale, for the rate-bound calculator.
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }

  protected:
    int dimension_ = 0;
    std::optional<Vec> optimum_;
    double mu_ = 0.0;
    double sigma_ = 0.0;
};

struct Problem {
    std::shared_ptr<const Objective> objective;
    std::shared_ptr<const Dataset> dataset;
};

// f(w) = 1/2 (w - w*)^T A (w - w*) with the eigenvalues of A spanning [1, condition_number];
// stochastic gradients add mean-zero Gaussian noise of scale noise_sigma drawn
// from the dataset's stored noise samples.
Problem make_quadratic(int dimension, double condition_number, double noise_sigma,
                       std::uint64_t seed, int sample_count = 1024);

// Binary logistic regression on margin-noise separable data, L2-regularized
// (1e-4) so the optimum is unique.
Problem make_logistic(int dimension, int sample_count, std::uint64_t seed);

// One-hidden-layer tanh network with softmax cross-entropy on Gaussian
// cluster data; parameters flattened into one vector.
Problem make_mlp(int input_dim, int hidden, int classes, int sample_count,
                 std::uint64_t seed);

// MLP helper exposed for evaluation: fraction of correctly classified
// training samples under parameters w.
double mlp_train_accuracy(const Problem& problem, const Vec& w);

}  // namespace adpsgd::objectives
