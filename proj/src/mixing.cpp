#include "adpsgd/mixing.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "adpsgd/errors.hpp"

namespace adpsgd::mixing {

namespace {

Eigen::MatrixXd uniform_entries(int order) {
    return Eigen::MatrixXd::Constant(order, order, 1.0 / order);
}

std::string echo_matrix(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    os << m;
    return os.str();
}

}  // namespace

bool is_doubly_stochastic(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) return false;
    if ((m.array() < 0.0).any()) return false;
    const auto ones = Eigen::VectorXd::Ones(m.rows());
    if (((m * ones).array() - 1.0).abs().maxCoeff() > tol) return false;
    if (((m.transpose() * ones).array() - 1.0).abs().maxCoeff() > tol) return false;
    return true;
}

MixingMatrix build_fixed_ring(int order) {
    if (order < 3) {
        throw InvalidOrderError("fixed ring requires order >= 3, got " +
                                std::to_string(order));
    }
    MixingMatrix m;
    m.order = order;
    m.kind = MixKind::FixedRing;
    m.entries = Eigen::MatrixXd::Zero(order, order);
    for (int i = 0; i < order; ++i) {
        m.entries(i, i) += 1.0 / 3.0;
        m.entries(i, (i + 1) % order) += 1.0 / 3.0;
        m.entries(i, (i + order - 1) % order) += 1.0 / 3.0;
    }
    return m;
}

MixingMatrix build_uniform(int order) {
    if (order < 2) {
        throw InvalidOrderError("uniform mixing requires order >= 2, got " +
                                std::to_string(order));
    }
    MixingMatrix m;
    m.order = order;
    m.kind = MixKind::Uniform;
    m.entries = uniform_entries(order);
    return m;
}

Permutation random_permutation(int order, Rng& rng) {
    if (order < 1) {
        throw InvalidOrderError("permutation requires order >= 1, got " +
                                std::to_string(order));
    }
    Permutation p;
    p.order = order;
    p.mapping.resize(order);
    for (int i = 0; i < order; ++i) p.mapping[i] = i;
    for (int i = order - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(p.mapping[i], p.mapping[j]);
    }
    return p;
}

MixingMatrix build_random_ring(int order, const Permutation& p) {
    if (order < 3) {
        throw InvalidOrderError("random ring requires order >= 3, got " +
                                std::to_string(order));
    }
    if (p.order != order || static_cast<int>(p.mapping.size()) != order) {
        throw DimensionError("permutation order " + std::to_string(p.order) +
                             " does not match ring order " + std::to_string(order));
    }
    // P has P(i, mapping[i]) = 1; entries of P^T T^f P are
    // (P^T T^f P)(mapping[a], mapping[b]) = T^f(a, b).
    MixingMatrix fixed = build_fixed_ring(order);
    MixingMatrix m;
    m.order = order;
    m.kind = MixKind::RandomRing;
    m.permutation = p;
    m.entries = Eigen::MatrixXd::Zero(order, order);
    for (int a = 0; a < order; ++a) {
        for (int b = 0; b < order; ++b) {
            m.entries(p.mapping[a], p.mapping[b]) += fixed.entries(a, b);
        }
    }
    return m;
}

SpectralReport second_eigenvalue_magnitude(const MixingMatrix& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m.entries, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigensolver failed to converge on matrix:\n" +
                             echo_matrix(m.entries));
    }
    std::vector<double> mags(m.order);
    for (int i = 0; i < m.order; ++i) mags[i] = std::abs(solver.eigenvalues()[i]);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    if (std::abs(mags[0] - 1.0) > 1e-9) {
        throw NumericalError("leading eigenvalue magnitude " + std::to_string(mags[0]) +
                             " is not 1; matrix:\n" + echo_matrix(m.entries));
    }
    SpectralReport r;
    r.lambda_hat = std::min(mags[1], 1.0);
    r.spectral_gap = 1.0 - r.lambda_hat;
    return r;
}

double fm_lambda_closed_form(int order) {
    if (order < 3) {
        throw InvalidOrderError("fixed-ring eigenvalue requires order >= 3, got " +
                                std::to_string(order));
    }
    return 1.0 / 3.0 + 2.0 / 3.0 * std::cos(2.0 * M_PI / order);
}

double fm_consensus_bound(int order, int k) {
    return std::pow(fm_lambda_closed_form(order), k);
}

double fm_consensus_bound_log10(int order, int k) {
    const double lambda = fm_lambda_closed_form(order);
    if (lambda == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return k * std::log10(lambda);
}

double rm_consensus_bound(int order, int k) {
    if (order < 2) {
        throw InvalidOrderError("random-mixing bound requires order >= 2, got " +
                                std::to_string(order));
    }
    return std::sqrt(static_cast<double>(order - 1)) *
           std::pow(std::sqrt(3.0), -static_cast<double>(k));
}

double rm_consensus_bound_log10(int order, int k) {
    if (order < 2) {
        throw InvalidOrderError("random-mixing bound requires order >= 2, got " +
                                std::to_string(order));
    }
    return 0.5 * std::log10(static_cast<double>(order - 1)) - 0.5 * k * std::log10(3.0);
}

double consensus_distance(const Eigen::MatrixXd& m, DistanceMode mode) {
    if (!m.allFinite()) {
        throw NumericalError("consensus_distance: matrix has non-finite entries");
    }
    Eigen::MatrixXd dev;
    if (mode == DistanceMode::MatrixProduct) {
        if (m.rows() != m.cols()) {
            throw DimensionError("MatrixProduct mode requires a square matrix");
        }
        dev = m - uniform_entries(static_cast<int>(m.rows()));
    } else {
        const auto cols = m.cols();
        dev = m - m.rowwise().mean().replicate(1, cols);
    }
    // Largest singular value via the symmetric eigenproblem of dev^T dev.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dev.transpose() * dev,
                                                          Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("symmetric eigensolver failed in consensus_distance");
    }
    return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

Eigen::MatrixXd rm_expected_gram(int order) {
    if (order <= 5) {
        throw OutOfRegimeError("expected-Gram closed form requires order > 5, got " +
                               std::to_string(order));
    }
    const double off = 2.0 / (3.0 * (order - 1));
    Eigen::MatrixXd g = Eigen::MatrixXd::Constant(order, order, off);
    g.diagonal().setConstant(1.0 / 3.0);
    return g;
}

std::vector<DecayPoint> verify_consensus_decay(MixKind kind, int order, int k_max,
                                               int trials, Rng& rng) {
    if (k_max < 1 || trials < 1) {
        throw InvalidOrderError("verify_consensus_decay requires k_max >= 1, trials >= 1");
    }
    if (kind == MixKind::FixedRing) {
        if (order < 3) throw InvalidOrderError("fixed-ring decay requires order >= 3");
        std::vector<DecayPoint> out;
        Eigen::MatrixXd product = Eigen::MatrixXd::Identity(order, order);
        const MixingMatrix t = build_fixed_ring(order);
        for (int k = 0; k <= k_max; ++k) {
            if (k > 0) product = product * t.entries;
            DecayPoint p;
            p.k = k;
            p.measured = consensus_distance(product, DistanceMode::MatrixProduct);
            p.bound = fm_consensus_bound(order, k);
            out.push_back(p);
        }
        return out;
    }
    if (kind != MixKind::RandomRing) {
        throw InvalidOrderError("verify_consensus_decay supports FixedRing and RandomRing");
    }
    if (order < 6) throw InvalidOrderError("random-ring decay requires order >= 6");

    std::vector<double> sum(k_max + 1, 0.0), sum_sq(k_max + 1, 0.0);
    for (int trial = 0; trial < trials; ++trial) {
        Eigen::MatrixXd product = Eigen::MatrixXd::Identity(order, order);
        for (int k = 0; k <= k_max; ++k) {
            if (k > 0) {
                const Permutation p = random_permutation(order, rng);
                product = product * build_random_ring(order, p).entries;
            }
            const double d = consensus_distance(product, DistanceMode::MatrixProduct);
            sum[k] += d;
            sum_sq[k] += d * d;
        }
    }
    std::vector<DecayPoint> out;
    for (int k = 0; k <= k_max; ++k) {
        DecayPoint p;
        p.k = k;
        p.measured = sum[k] / trials;
        p.bound = rm_consensus_bound(order, k);
        if (trials > 1) {
            const double var =
                std::max(0.0, (sum_sq[k] - sum[k] * sum[k] / trials) / (trials - 1));
            p.std_error = std::sqrt(var / trials);
        }
        out.push_back(p);
    }
    return out;
}

double adpsgd_rate_bound(double iterations, double batch, double mu, double sigma,
                         double f0_gap) {
    if (iterations <= 0 || batch <= 0 || mu <= 0 || sigma <= 0 || f0_gap <= 0) {
        throw InvalidOrderError("adpsgd_rate_bound requires positive inputs");
    }
    return 20.0 * f0_gap * mu / iterations +
           2.0 * (f0_gap + mu) * sigma / std::sqrt(batch * iterations);
}

}  // namespace adpsgd::mixing
