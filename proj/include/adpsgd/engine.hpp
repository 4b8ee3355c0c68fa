#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "adpsgd/mixing.hpp"
#include "adpsgd/objectives.hpp"
#include "adpsgd/rng.hpp"

namespace adpsgd::engine {

using objectives::Problem;
using objectives::Vec;

enum class Strategy { Sdpsgd, AdpsgdFm, AdpsgdRm, AdpsgdD1d, GenericStaleness };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Linear warmup base_lr -> peak_lr over warmup_epochs, constant at peak_lr
// until anneal_start_epoch, then multiplied by anneal_factor each epoch.
// The default anneal_start_epoch is "never".
struct LrSchedule {
    double base_lr = 0.1;
    double peak_lr = 0.1;
    int warmup_epochs = 0;
    double anneal_factor = 0.7071067811865476;
    int anneal_start_epoch = 1 << 30;
};

double lr_at(const LrSchedule& schedule, int epoch);

struct StrategyConfig {
    Strategy strategy = Strategy::Sdpsgd;
    int learners = 2;
    int batch = 1;
    int epochs = 1;
    LrSchedule lr;
    std::uint64_t seed = 0;
    // GenericStaleness parameters; staleness_cap also bounds the derived
    // staleness in timing-coupled runs.
    int staleness_cap = 1;
    std::vector<int> staleness;  // per-learner tau; empty means all zero
    mixing::MixKind generic_mix = mixing::MixKind::Uniform;

    void validate() const;
};

// Bounded buffer of recent models, newest first. lagged(0) is the current
// model; lagged(tau) is tau iterations back.
class ModelHistory {
  public:
    ModelHistory() = default;
    explicit ModelHistory(int depth, const Vec& initial);

    void push(const Vec& model);
    const Vec& lagged(int tau) const;  // throws StalenessOverflowError
    int depth() const { return static_cast<int>(buffer_.size()); }

  private:
    std::vector<Vec> buffer_;
    int head_ = 0;
};

struct LearnerState {
    int id = 0;
    Vec model;
    ModelHistory history;
    Rng rng{0};
};

// All learners start from the same model w0 (a small random init shared by
// every learner) with independent sampling streams derived from (seed, id).
std::vector<LearnerState> init_learners(int learners, std::uint64_t seed,
                                        const Problem& problem, int history_depth);

// D x L matrix with learner models as columns.
Eigen::MatrixXd param_matrix(const std::vector<LearnerState>& states);
Vec averaged_model(const std::vector<LearnerState>& states);

// The per-iteration random-mixing permutation; shared with the timing-coupled
// mode so both derive identical sequences from (seed, iteration).
mixing::Permutation permutation_for_iteration(std::uint64_t seed, int learners,
                                              long iteration);

// Allreduce step: gradients at the shared synchronized model, local update,
// exact averaging. Throws SyncViolationError if models differ on entry.
void step_sdpsgd(std::vector<LearnerState>& states, const Problem& problem, int batch,
                 double lr);

// W <- W T - lr G with gradients at the pre-averaging local models.
void step_adpsgd_mixing(std::vector<LearnerState>& states, const Problem& problem,
                        int batch, double lr, const mixing::MixingMatrix& t);

// Delay-by-one: exact average formed while gradients are evaluated at the
// heterogeneous pre-average models; w_l <- mean(W) - lr g_l.
void step_d1d(std::vector<LearnerState>& states, const Problem& problem, int batch,
              double lr);

// W <- W T - lr G with column l of G evaluated at the tau_l-lagged model.
void step_generic_staleness(std::vector<LearnerState>& states, const Problem& problem,
                            int batch, double lr, const mixing::MixingMatrix& t,
                            const std::vector<int>& taus);

struct RunRecord {
    struct IterPoint {
        long k = 0;
        double consensus = 0.0;
        double lr = 0.0;
    };
    struct EpochPoint {
        int epoch = 0;
        double heldout_loss = 0.0;
        double train_loss = 0.0;
        double lr = 0.0;
    };
    std::vector<IterPoint> iterations;
    std::vector<EpochPoint> epochs;
    Vec final_model;
    bool diverged = false;
    int divergence_epoch = -1;
    long iteration_count = 0;
};

// Epoch = max(1, train_count / (learners * batch)) iterations. Deterministic
// per seed. Divergence (non-finite heldout loss, or exceeding 10x its initial
// value) halts the run and is recorded instead of thrown.
RunRecord run_training(const StrategyConfig& cfg, const Problem& problem);

int iterations_per_epoch(const StrategyConfig& cfg, const Problem& problem);

}  // namespace adpsgd::engine
