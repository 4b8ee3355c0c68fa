#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adpsgd/chronos.hpp"
#include "adpsgd/engine.hpp"
#include "adpsgd/objectives.hpp"

namespace adpsgd::cfg {

struct ObjectiveSpec {
    std::string kind = "quadratic";  // quadratic | logistic | mlp
    int dimension = 10;              // quadratic/logistic parameter dimension
    double condition_number = 10.0;  // quadratic
    double noise_sigma = 0.05;       // quadratic
    int samples = 2048;
    int input_dim = 5;  // mlp
    int hidden = 16;    // mlp
    int classes = 3;    // mlp

    objectives::Problem build(std::uint64_t seed) const;
};

// Fully resolved run configuration. Parsed from an INI-style file with
// sections [run], [engine], [lr], [objective], [cluster], [stragglers];
// unknown sections or keys are errors.
struct RunConfig {
    std::string kind = "train";  // train | stragglers
    std::uint64_t seed = 0;

    engine::StrategyConfig strategy;
    ObjectiveSpec objective;

    chronos::ClusterProfile cluster;
    int straggler_learner = -1;  // -1 means no straggler in train runs
    double straggler_factor = 1.0;
    bool coupled = false;
    int iterations_per_learner = 20;
    std::vector<double> straggler_factors = {5.0, 10.0, 100.0};
    std::vector<engine::Strategy> straggler_strategies = {
        engine::Strategy::AdpsgdFm, engine::Strategy::AdpsgdRm,
        engine::Strategy::AdpsgdD1d};

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);

    // The full configuration with every default materialized, suitable for
    // re-running the experiment from its output directory.
    std::string resolved_text() const;
};

}  // namespace adpsgd::cfg
