#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "adpsgd/rng.hpp"

namespace adpsgd::mixing {

enum class MixKind { FixedRing, RandomRing, Uniform };

// Uniform random permutation of {0,...,L-1}.
struct Permutation {
    int order = 0;
    std::vector<int> mapping;  // bijection on {0,...,order-1}
};

// Dense doubly stochastic mixing matrix with provenance.
struct MixingMatrix {
    int order = 0;
    Eigen::MatrixXd entries;
    MixKind kind = MixKind::Uniform;
    Permutation permutation;  // populated for RandomRing only
};

struct SpectralReport {
    double lambda_hat = 0.0;    // second-largest eigenvalue magnitude
    double spectral_gap = 0.0;  // 1 - lambda_hat
};

enum class DistanceMode { MatrixProduct, ParameterColumns };

// One sampled point of a consensus-decay sweep.
struct DecayPoint {
    int k = 0;
    double measured = 0.0;  // exact (fixed) or sample mean (random)
    double bound = 0.0;
    double std_error = 0.0;  // standard error of the mean; 0 for fixed mixing
};

// Checks row/column sums within tol and nonnegative entries.
bool is_doubly_stochastic(const Eigen::MatrixXd& m, double tol = 1e-12);

// Ring matrix averaging each learner with its left and right neighbors;
// circulant with first row (1/3, 1/3, 0, ..., 0, 1/3). Requires L >= 3.
MixingMatrix build_fixed_ring(int order);

// All entries 1/L. Requires L >= 2.
MixingMatrix build_uniform(int order);

// Fisher-Yates shuffle, uniform over all L! permutations, deterministic per rng state.
Permutation random_permutation(int order, Rng& rng);

// P^T T^f P for the given permutation; a reindexed fixed ring.
MixingMatrix build_random_ring(int order, const Permutation& p);

// lambda_hat = max_{i>=2} |lambda_i| via dense eigendecomposition.
// Verifies the leading eigenvalue magnitude is 1 within 1e-9.
SpectralReport second_eigenvalue_magnitude(const MixingMatrix& m);

// 1/3 + (2/3) cos(2 pi / L), the fixed-ring second eigenvalue. Requires L >= 3.
double fm_lambda_closed_form(int order);

// Fixed-mixing consensus bound lambda^k, and its log10 (safe for large k).
double fm_consensus_bound(int order, int k);
double fm_consensus_bound_log10(int order, int k);

// Random-mixing expectation bound sqrt(L-1)/sqrt(3)^k, and its log10.
double rm_consensus_bound(int order, int k);
double rm_consensus_bound_log10(int order, int k);

// Spectral-norm distance from the rank-1 averaging matrix.
// MatrixProduct:    ||M - 11^T/L||_2 for square M.
// ParameterColumns: ||W (I - 11^T/L)||_2, deviation of columns from their mean.
double consensus_distance(const Eigen::MatrixXd& m, DistanceMode mode);

// Closed-form E[T^r^T T^r]: diagonal 1/3, off-diagonal 2/(3(L-1)). Requires L >= 6.
Eigen::MatrixXd rm_expected_gram(int order);

// Measures ||T_1...T_k - 11^T/L||_2 against the matching bound for k = 0..k_max.
// FixedRing: exact deterministic product (trials ignored).
// RandomRing: sample mean over `trials` independent permutation sequences.
std::vector<DecayPoint> verify_consensus_decay(MixKind kind, int order, int k_max,
                                               int trials, Rng& rng);

// Ergodic rate-bound calculator: 20*f0_gap*mu/K + 2*(f0_gap+mu)*sigma/sqrt(M*K).
double adpsgd_rate_bound(double iterations, double batch, double mu, double sigma,
                         double f0_gap);

}  // namespace adpsgd::mixing
