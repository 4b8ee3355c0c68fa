#include "adpsgd/chronos.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "adpsgd/errors.hpp"

namespace adpsgd::chronos {

namespace {

using engine::Strategy;
using objectives::Vec;

bool event_less(const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.learner != b.learner) return a.learner < b.learner;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.iteration < b.iteration;
}

void finalize_log(EventLog& log) {
    std::stable_sort(log.events.begin(), log.events.end(), event_less);
}

}  // namespace

void ClusterProfile::validate() const {
    if (learners < 1) throw ConfigError("cluster profile: learners must be >= 1");
    if (compute_time <= 0.0) throw ConfigError("cluster profile: compute_time must be > 0");
    if (comm_pairwise < 0.0 || comm_allreduce < 0.0 || sync_overhead < 0.0) {
        throw ConfigError("cluster profile: communication times must be >= 0");
    }
    if (!compute_multiplier.empty() &&
        static_cast<int>(compute_multiplier.size()) != learners) {
        throw ConfigError("cluster profile: one compute multiplier per learner");
    }
    for (double m : compute_multiplier) {
        if (m <= 0.0) throw ConfigError("cluster profile: multipliers must be > 0");
    }
    for (const auto& [id, factor] : stragglers) {
        if (id < 0 || id >= learners) {
            throw ConfigError("cluster profile: straggler learner_id out of range");
        }
        if (factor < 1.0) throw ConfigError("cluster profile: slowdown factor must be >= 1");
    }
}

double ClusterProfile::effective_compute(int learner) const {
    double c = compute_time;
    if (!compute_multiplier.empty()) c *= compute_multiplier[learner];
    for (const auto& [id, factor] : stragglers) {
        if (id == learner) c *= factor;
    }
    return c;
}

std::string event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::GradStart: return "grad_start";
        case EventKind::GradDone: return "grad_done";
        case EventKind::AvgStart: return "avg_start";
        case EventKind::AvgDone: return "avg_done";
        case EventKind::Update: return "update";
    }
    return "unknown";
}

EventLog simulate_wallclock(Strategy strategy, const ClusterProfile& profile,
                            int iterations_per_learner) {
    profile.validate();
    if (iterations_per_learner < 1) {
        throw ConfigError("iterations_per_learner must be >= 1");
    }
    const int L = profile.learners;
    EventLog log;

    if (strategy == Strategy::Sdpsgd || strategy == Strategy::AdpsgdD1d ||
        strategy == Strategy::GenericStaleness) {
        double max_compute = 0.0;
        for (int l = 0; l < L; ++l) max_compute = std::max(max_compute, profile.effective_compute(l));
        const bool overlapped = strategy != Strategy::Sdpsgd;
        const double round = overlapped
                                 ? std::max(max_compute, profile.comm_allreduce) +
                                       profile.sync_overhead
                                 : max_compute + profile.comm_allreduce +
                                       profile.sync_overhead;
        double t = 0.0;
        for (long k = 0; k < iterations_per_learner; ++k) {
            const double avg_start = overlapped ? t : t + max_compute;
            for (int l = 0; l < L; ++l) {
                const double c = profile.effective_compute(l);
                log.events.push_back({t, l, EventKind::GradStart, k});
                log.events.push_back({t + c, l, EventKind::GradDone, k});
                log.events.push_back({avg_start, l, EventKind::AvgStart, k});
                log.events.push_back(
                    {avg_start + profile.comm_allreduce, l, EventKind::AvgDone, k});
                log.events.push_back({t + round, l, EventKind::Update, k});
            }
            t += round;
        }
        log.total_time = t;
        finalize_log(log);
        return log;
    }

    // Asynchronous FM/RM: each learner cycles independently; the epoch ends
    // when the total number of processed batches reaches L * iterations.
    const long target = static_cast<long>(L) * iterations_per_learner;
    using Entry = std::pair<double, int>;  // (completion time, learner)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
    std::vector<double> start(L, 0.0);
    std::vector<long> round_index(L, 0);
    std::vector<double> duration(L);
    for (int l = 0; l < L; ++l) {
        duration[l] = std::max(profile.effective_compute(l), profile.comm_pairwise);
        queue.push({duration[l], l});
    }
    long processed = 0;
    while (processed < target) {
        const auto [t_done, l] = queue.top();
        queue.pop();
        const double t0 = start[l];
        const long k = round_index[l];
        log.events.push_back({t0, l, EventKind::GradStart, k});
        log.events.push_back({t0 + profile.effective_compute(l), l, EventKind::GradDone, k});
        log.events.push_back({t0, l, EventKind::AvgStart, k});
        log.events.push_back({t0 + profile.comm_pairwise, l, EventKind::AvgDone, k});
        log.events.push_back({t_done, l, EventKind::Update, k});
        ++processed;
        log.total_time = t_done;
        start[l] = t_done;
        ++round_index[l];
        queue.push({t_done + duration[l], l});
    }
    finalize_log(log);
    return log;
}

std::vector<SlowdownReport> slowdown_experiment(Strategy strategy,
                                                const ClusterProfile& base,
                                                const std::vector<double>& factors,
                                                int iterations_per_learner) {
    ClusterProfile baseline = base;
    baseline.stragglers.clear();
    const double t0 =
        simulate_wallclock(strategy, baseline, iterations_per_learner).total_time;
    std::vector<SlowdownReport> out;
    for (double f : factors) {
        if (f < 1.0) throw ConfigError("slowdown factors must be >= 1");
        ClusterProfile slowed = baseline;
        slowed.stragglers = {{0, f}};
        const double t1 =
            simulate_wallclock(strategy, slowed, iterations_per_learner).total_time;
        out.push_back({f, t0, t1, t1 / t0});
    }
    return out;
}

namespace {

struct Publication {
    double t = 0.0;
    long round = 0;  // the model is the learner's state at the start of `round`
    Vec model;
};

// Latest publication strictly before `t`; ties read the previous round.
const Publication& published_before(const std::deque<Publication>& pubs, double t) {
    for (auto it = pubs.rbegin(); it != pubs.rend(); ++it) {
        if (it->t < t) return *it;
    }
    return pubs.front();
}

CoupledResult coupled_async(const ClusterProfile& profile,
                            const engine::StrategyConfig& cfg,
                            const objectives::Problem& problem) {
    const int L = cfg.learners;
    // staleness_cap bounds the event-derived staleness; partner models come
    // from the publication lists, so a deep history buffer is not needed.
    auto states = engine::init_learners(L, cfg.seed, problem, 2);
    const int ipe = engine::iterations_per_epoch(cfg, problem);
    const long target = static_cast<long>(cfg.epochs) * ipe * L;

    objectives::SampleBatch full_train;
    full_train.indices.resize(problem.dataset->train_count);
    for (int i = 0; i < problem.dataset->train_count; ++i) full_train.indices[i] = i;

    CoupledResult result;
    engine::RunRecord& record = result.record;
    EventLog& log = result.log;
    const double initial_heldout =
        problem.objective->heldout_loss(engine::averaged_model(states));

    std::vector<std::deque<Publication>> pubs(L);
    for (int l = 0; l < L; ++l) pubs[l].push_back({0.0, 0, states[l].model});

    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue;
    std::vector<double> start(L, 0.0), duration(L);
    std::vector<long> round_index(L, 0);
    std::vector<std::deque<double>> update_times(L);
    for (int l = 0; l < L; ++l) {
        duration[l] = std::max(profile.effective_compute(l), profile.comm_pairwise);
        queue.push({duration[l], l});
    }

    long processed = 0;
    while (processed < target && !record.diverged) {
        const auto [t_done, l] = queue.top();
        queue.pop();
        const long r = round_index[l];
        const double lr = engine::lr_at(cfg.lr, static_cast<int>(r / ipe));

        // Gradient at the pre-averaging local model, learner's own stream.
        const auto batch = objectives::sample_batch(*problem.dataset, cfg.batch,
                                                    states[l].rng);
        const Vec grad = problem.objective->gradient(states[l].model, batch);

        int left, right;
        if (cfg.strategy == Strategy::AdpsgdFm) {
            left = (l + L - 1) % L;
            right = (l + 1) % L;
        } else {
            const auto perm = engine::permutation_for_iteration(cfg.seed, L, r);
            int pos = 0;
            for (int i = 0; i < L; ++i) {
                if (perm.mapping[i] == l) { pos = i; break; }
            }
            left = perm.mapping[(pos + L - 1) % L];
            right = perm.mapping[(pos + 1) % L];
        }

        const Publication& pl = published_before(pubs[left], t_done);
        const Publication& pr = published_before(pubs[right], t_done);

        // Staleness of the gradient's model: how many of this learner's own
        // updates landed between the model snapshot at grad_start and the
        // application at t_done. Updates only happen at round boundaries, so
        // this counts update times strictly inside (start, t_done).
        long tau = 0;
        for (double ut : update_times[l]) {
            if (ut > start[l] && ut < t_done) ++tau;
        }
        if (tau > cfg.staleness_cap) {
            throw StalenessOverflowError(
                "derived staleness " + std::to_string(tau) + " exceeds cap " +
                std::to_string(cfg.staleness_cap) + " at event t=" +
                std::to_string(t_done) + " learner=" + std::to_string(l) +
                " kind=update iteration=" + std::to_string(r));
        }

        states[l].model = (states[l].model + pl.model + pr.model) / 3.0 - lr * grad;
        states[l].history.push(states[l].model);
        pubs[l].push_back({t_done, r + 1, states[l].model});
        if (pubs[l].size() > 4) pubs[l].pop_front();
        update_times[l].push_back(t_done);
        if (update_times[l].size() > 8) update_times[l].pop_front();

        log.events.push_back({start[l], l, EventKind::GradStart, r});
        log.events.push_back(
            {start[l] + profile.effective_compute(l), l, EventKind::GradDone, r});
        log.events.push_back({start[l], l, EventKind::AvgStart, r});
        log.events.push_back({start[l] + profile.comm_pairwise, l, EventKind::AvgDone, r});
        log.events.push_back({t_done, l, EventKind::Update, r});
        log.total_time = t_done;

        start[l] = t_done;
        ++round_index[l];
        ++processed;
        queue.push({t_done + duration[l], l});

        if (processed % L == 0) {
            const long k = processed / L - 1;
            const double consensus = mixing::consensus_distance(
                engine::param_matrix(states), mixing::DistanceMode::ParameterColumns);
            record.iterations.push_back(
                {k, consensus, engine::lr_at(cfg.lr, static_cast<int>(k / ipe))});
        }
        if (processed % (static_cast<long>(L) * ipe) == 0) {
            const int epoch = static_cast<int>(processed / (static_cast<long>(L) * ipe)) - 1;
            const Vec avg = engine::averaged_model(states);
            const double heldout = problem.objective->heldout_loss(avg);
            const double train = problem.objective->loss(avg, full_train);
            record.epochs.push_back({epoch, heldout, train, engine::lr_at(cfg.lr, epoch)});
            if (!std::isfinite(heldout) || heldout > 10.0 * initial_heldout) {
                record.diverged = true;
                record.divergence_epoch = epoch;
            }
        }
    }
    record.final_model = engine::averaged_model(states);
    record.iteration_count = static_cast<long>(record.iterations.size());
    finalize_log(log);
    return result;
}

}  // namespace

CoupledResult coupled_run(const ClusterProfile& profile,
                          const engine::StrategyConfig& cfg,
                          const objectives::Problem& problem) {
    profile.validate();
    cfg.validate();
    if (profile.learners != cfg.learners) {
        throw ConfigError("cluster profile learner count does not match strategy config");
    }
    if (cfg.strategy == Strategy::AdpsgdFm || cfg.strategy == Strategy::AdpsgdRm) {
        return coupled_async(profile, cfg, problem);
    }
    // Synchronous strategies: the event order cannot change the math, so the
    // deterministic engine provides the record and the cost model the clock.
    CoupledResult result;
    result.record = engine::run_training(cfg, problem);
    const int iterations = engine::iterations_per_epoch(cfg, problem) * cfg.epochs;
    result.log = simulate_wallclock(cfg.strategy, profile, iterations);
    return result;
}

}  // namespace adpsgd::chronos
