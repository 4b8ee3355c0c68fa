#include "adpsgd/engine.hpp"

#include <cmath>

#include "adpsgd/errors.hpp"

namespace adpsgd::engine {

namespace {

constexpr std::uint64_t kInitStream = 0xA001;
constexpr std::uint64_t kLearnerStream = 0xB000;
constexpr std::uint64_t kPermStream = 0xC001;
constexpr double kSyncTolerance = 1e-12;
constexpr double kDivergenceFactor = 10.0;

objectives::Vec stochastic_gradient(const Problem& problem, const Vec& w, int batch,
                                    Rng& rng) {
    const auto b = objectives::sample_batch(*problem.dataset, batch, rng);
    return problem.objective->gradient(w, b);
}

}  // namespace

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Sdpsgd: return "SDPSGD";
        case Strategy::AdpsgdFm: return "ADPSGD_FM";
        case Strategy::AdpsgdRm: return "ADPSGD_RM";
        case Strategy::AdpsgdD1d: return "ADPSGD_D1D";
        case Strategy::GenericStaleness: return "GENERIC";
    }
    return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "SDPSGD") return Strategy::Sdpsgd;
    if (name == "ADPSGD_FM") return Strategy::AdpsgdFm;
    if (name == "ADPSGD_RM") return Strategy::AdpsgdRm;
    if (name == "ADPSGD_D1D") return Strategy::AdpsgdD1d;
    if (name == "GENERIC") return Strategy::GenericStaleness;
    throw ConfigError("unknown strategy: " + name);
}

double lr_at(const LrSchedule& s, int epoch) {
    if (epoch < 0) throw InvalidStateError("lr_at: epoch must be >= 0");
    double lr;
    if (s.warmup_epochs > 0 && epoch < s.warmup_epochs) {
        lr = s.base_lr +
             (s.peak_lr - s.base_lr) * static_cast<double>(epoch) / s.warmup_epochs;
    } else {
        lr = s.peak_lr;
    }
    if (epoch >= s.anneal_start_epoch) {
        lr = s.peak_lr * std::pow(s.anneal_factor, epoch - s.anneal_start_epoch);
    }
    return lr;
}

void StrategyConfig::validate() const {
    if (learners < 1) throw ConfigError("learners must be >= 1");
    if ((strategy == Strategy::AdpsgdFm || strategy == Strategy::AdpsgdRm) &&
        learners != 1 && learners < 3) {
        throw ConfigError("FM/RM mixing requires at least 3 learners");
    }
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (staleness_cap < 0) throw ConfigError("staleness_cap must be >= 0");
    if (!staleness.empty() && static_cast<int>(staleness.size()) != learners) {
        throw ConfigError("staleness list must have one entry per learner");
    }
    for (int tau : staleness) {
        if (tau < 0 || tau > staleness_cap) {
            throw ConfigError("staleness entries must lie in [0, staleness_cap]");
        }
    }
}

ModelHistory::ModelHistory(int depth, const Vec& initial) {
    if (depth < 1) throw InvalidStateError("history depth must be >= 1");
    buffer_.assign(depth, initial);
    head_ = 0;
}

void ModelHistory::push(const Vec& model) {
    head_ = (head_ + static_cast<int>(buffer_.size()) - 1) % buffer_.size();
    buffer_[head_] = model;
}

const Vec& ModelHistory::lagged(int tau) const {
    if (tau < 0 || tau >= static_cast<int>(buffer_.size())) {
        throw StalenessOverflowError("staleness " + std::to_string(tau) +
                                     " exceeds history depth " +
                                     std::to_string(buffer_.size()));
    }
    return buffer_[(head_ + tau) % buffer_.size()];
}

std::vector<LearnerState> init_learners(int learners, std::uint64_t seed,
                                        const Problem& problem, int history_depth) {
    Rng init_rng(derive_seed(seed, kInitStream));
    Vec w0(problem.objective->dimension());
    for (int i = 0; i < w0.size(); ++i) w0[i] = 0.1 * init_rng.next_gaussian();

    std::vector<LearnerState> states;
    states.reserve(learners);
    for (int l = 0; l < learners; ++l) {
        LearnerState s;
        s.id = l;
        s.model = w0;
        s.history = ModelHistory(history_depth, w0);
        s.rng = Rng(derive_seed(seed, kLearnerStream + l));
        states.push_back(std::move(s));
    }
    return states;
}

Eigen::MatrixXd param_matrix(const std::vector<LearnerState>& states) {
    Eigen::MatrixXd w(states[0].model.size(), states.size());
    for (std::size_t l = 0; l < states.size(); ++l) w.col(l) = states[l].model;
    return w;
}

Vec averaged_model(const std::vector<LearnerState>& states) {
    Vec avg = Vec::Zero(states[0].model.size());
    for (const auto& s : states) avg += s.model;
    return avg / static_cast<double>(states.size());
}

mixing::Permutation permutation_for_iteration(std::uint64_t seed, int learners,
                                              long iteration) {
    Rng rng(derive_seed(seed, kPermStream, static_cast<std::uint64_t>(iteration)));
    return mixing::random_permutation(learners, rng);
}

void step_sdpsgd(std::vector<LearnerState>& states, const Problem& problem, int batch,
                 double lr) {
    const Vec& shared = states[0].model;
    for (const auto& s : states) {
        if ((s.model - shared).cwiseAbs().maxCoeff() > kSyncTolerance) {
            throw SyncViolationError("learner " + std::to_string(s.id) +
                                     " desynchronized before SDPSGD step");
        }
    }
    Vec grad_sum = Vec::Zero(shared.size());
    for (auto& s : states) {
        grad_sum += stochastic_gradient(problem, shared, batch, s.rng);
    }
    const Vec next = shared - lr * (grad_sum / static_cast<double>(states.size()));
    for (auto& s : states) {
        s.model = next;
        s.history.push(next);
    }
}

void step_adpsgd_mixing(std::vector<LearnerState>& states, const Problem& problem,
                        int batch, double lr, const mixing::MixingMatrix& t) {
    if (t.order != static_cast<int>(states.size())) {
        throw DimensionError("mixing matrix order does not match learner count");
    }
    const Eigen::MatrixXd w = param_matrix(states);
    Eigen::MatrixXd grads(w.rows(), w.cols());
    for (std::size_t l = 0; l < states.size(); ++l) {
        grads.col(l) = stochastic_gradient(problem, states[l].model, batch, states[l].rng);
    }
    const Eigen::MatrixXd next = w * t.entries - lr * grads;
    for (std::size_t l = 0; l < states.size(); ++l) {
        states[l].model = next.col(l);
        states[l].history.push(states[l].model);
    }
}

void step_d1d(std::vector<LearnerState>& states, const Problem& problem, int batch,
              double lr) {
    const Vec mean = averaged_model(states);
    std::vector<Vec> grads(states.size());
    for (std::size_t l = 0; l < states.size(); ++l) {
        grads[l] = stochastic_gradient(problem, states[l].model, batch, states[l].rng);
    }
    for (std::size_t l = 0; l < states.size(); ++l) {
        states[l].model = mean - lr * grads[l];
        states[l].history.push(states[l].model);
    }
}

void step_generic_staleness(std::vector<LearnerState>& states, const Problem& problem,
                            int batch, double lr, const mixing::MixingMatrix& t,
                            const std::vector<int>& taus) {
    if (t.order != static_cast<int>(states.size()) ||
        taus.size() != states.size()) {
        throw DimensionError("generic step: mismatched matrix order or tau count");
    }
    const Eigen::MatrixXd w = param_matrix(states);
    Eigen::MatrixXd grads(w.rows(), w.cols());
    for (std::size_t l = 0; l < states.size(); ++l) {
        const Vec& lagged = states[l].history.lagged(taus[l]);
        grads.col(l) = stochastic_gradient(problem, lagged, batch, states[l].rng);
    }
    const Eigen::MatrixXd next = w * t.entries - lr * grads;
    for (std::size_t l = 0; l < states.size(); ++l) {
        states[l].model = next.col(l);
        states[l].history.push(states[l].model);
    }
}

int iterations_per_epoch(const StrategyConfig& cfg, const Problem& problem) {
    const long n = problem.dataset->train_count;
    const long per = n / (static_cast<long>(cfg.learners) * cfg.batch);
    return static_cast<int>(per > 0 ? per : 1);
}

RunRecord run_training(const StrategyConfig& cfg, const Problem& problem) {
    cfg.validate();
    // The lag buffer is only read by the generic-staleness strategy; the
    // other strategies keep a minimal history.
    const int history_depth =
        cfg.strategy == Strategy::GenericStaleness ? cfg.staleness_cap + 1 : 2;
    auto states = init_learners(cfg.learners, cfg.seed, problem, history_depth);

    mixing::MixingMatrix fixed_t;
    if (cfg.learners >= 3 &&
        (cfg.strategy == Strategy::AdpsgdFm ||
         (cfg.strategy == Strategy::GenericStaleness &&
          cfg.generic_mix == mixing::MixKind::FixedRing))) {
        fixed_t = mixing::build_fixed_ring(cfg.learners);
    }
    mixing::MixingMatrix uniform_t;
    if (cfg.learners >= 2) uniform_t = mixing::build_uniform(cfg.learners);

    std::vector<int> taus = cfg.staleness;
    if (taus.empty()) taus.assign(cfg.learners, 0);

    const int ipe = iterations_per_epoch(cfg, problem);
    RunRecord record;
    const double initial_heldout = problem.objective->heldout_loss(averaged_model(states));

    objectives::SampleBatch full_train;
    full_train.indices.resize(problem.dataset->train_count);
    for (int i = 0; i < problem.dataset->train_count; ++i) full_train.indices[i] = i;

    long k = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg.lr, epoch);
        for (int it = 0; it < ipe; ++it, ++k) {
            if (cfg.learners == 1) {
                // Every strategy degenerates to plain SGD with one learner.
                step_sdpsgd(states, problem, cfg.batch, lr);
            } else {
                switch (cfg.strategy) {
                    case Strategy::Sdpsgd:
                        step_sdpsgd(states, problem, cfg.batch, lr);
                        break;
                    case Strategy::AdpsgdFm:
                        step_adpsgd_mixing(states, problem, cfg.batch, lr, fixed_t);
                        break;
                    case Strategy::AdpsgdRm: {
                        const auto perm =
                            permutation_for_iteration(cfg.seed, cfg.learners, k);
                        step_adpsgd_mixing(states, problem, cfg.batch, lr,
                                           mixing::build_random_ring(cfg.learners, perm));
                        break;
                    }
                    case Strategy::AdpsgdD1d:
                        step_d1d(states, problem, cfg.batch, lr);
                        break;
                    case Strategy::GenericStaleness: {
                        if (cfg.generic_mix == mixing::MixKind::RandomRing) {
                            const auto perm =
                                permutation_for_iteration(cfg.seed, cfg.learners, k);
                            step_generic_staleness(
                                states, problem, cfg.batch, lr,
                                mixing::build_random_ring(cfg.learners, perm), taus);
                        } else if (cfg.generic_mix == mixing::MixKind::FixedRing) {
                            step_generic_staleness(states, problem, cfg.batch, lr,
                                                   fixed_t, taus);
                        } else {
                            step_generic_staleness(states, problem, cfg.batch, lr,
                                                   uniform_t, taus);
                        }
                        break;
                    }
                }
            }
            const double consensus =
                cfg.learners == 1
                    ? 0.0
                    : mixing::consensus_distance(param_matrix(states),
                                                 mixing::DistanceMode::ParameterColumns);
            record.iterations.push_back({k, consensus, lr});
        }
        const Vec avg = averaged_model(states);
        const double heldout = problem.objective->heldout_loss(avg);
        const double train = problem.objective->loss(avg, full_train);
        record.epochs.push_back({epoch, heldout, train, lr});
        if (!std::isfinite(heldout) || heldout > kDivergenceFactor * initial_heldout) {
            record.diverged = true;
            record.divergence_epoch = epoch;
            break;
        }
    }
    record.iteration_count = static_cast<long>(record.iterations.size());
    record.final_model = averaged_model(states);
    return record;
}

}  // namespace adpsgd::engine
