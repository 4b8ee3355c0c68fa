#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adpsgd/engine.hpp"

namespace adpsgd::chronos {

// Scalar cost model for the cluster: per-batch compute, per-exchange and
// per-allreduce communication, and single-learner slowdown injections.
struct ClusterProfile {
    int learners = 2;
    double compute_time = 1.0;                // seconds per batch
    std::vector<double> compute_multiplier;   // optional per-learner, default 1.0
    double comm_pairwise = 0.0;               // seconds per neighbor exchange
    double comm_allreduce = 0.0;              // seconds per global allreduce
    double sync_overhead = 0.0;               // added to each synchronous round
    std::vector<std::pair<int, double>> stragglers;  // (learner_id, factor >= 1)

    void validate() const;
    double effective_compute(int learner) const;
};

enum class EventKind { GradStart, GradDone, AvgStart, AvgDone, Update };

std::string event_kind_name(EventKind k);

struct Event {
    double t = 0.0;
    int learner = 0;
    EventKind kind = EventKind::GradStart;
    long iteration = 0;
};

struct EventLog {
    std::vector<Event> events;  // sorted by (t, learner, kind, iteration)
    double total_time = 0.0;    // simulated wall-clock of the whole run
};

// Simulates one epoch of L * iterations_per_learner batches.
// SDPSGD: round = max_l compute_l + allreduce + overhead (barrier first).
// D1D: round = max(max_l compute_l, allreduce) + overhead (overlapped).
// FM/RM: each learner cycles at max(compute_l, comm_pairwise); averaging reads
// the partner's published model and never blocks the partner; the epoch ends
// when the total number of processed batches reaches L * iterations_per_learner.
EventLog simulate_wallclock(engine::Strategy strategy, const ClusterProfile& profile,
                            int iterations_per_learner);

struct SlowdownReport {
    double factor = 1.0;
    double baseline_epoch_time = 0.0;
    double straggler_epoch_time = 0.0;
    double ratio = 0.0;
};

// Runs simulate_wallclock with and without a single straggler (learner 0) at
// each factor and reports epoch-time ratios.
std::vector<SlowdownReport> slowdown_experiment(engine::Strategy strategy,
                                                const ClusterProfile& base,
                                                const std::vector<double>& factors,
                                                int iterations_per_learner = 20);

struct CoupledResult {
    engine::RunRecord record;
    EventLog log;
};

// Training run whose averaging inputs and staleness are derived from the
// timing simulation's event order. Synchronous strategies keep the
// deterministic engine's math (event order only sets timestamps); FM/RM
// learners iterate at their own rate and average against partners' most
// recently published models (published strictly before the read).
CoupledResult coupled_run(const ClusterProfile& profile,
                          const engine::StrategyConfig& cfg,
                          const objectives::Problem& problem);

}  // namespace adpsgd::chronos
