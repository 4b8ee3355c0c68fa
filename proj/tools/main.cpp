#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "adpsgd/chronos.hpp"
#include "adpsgd/config.hpp"
#include "adpsgd/csvio.hpp"
#include "adpsgd/engine.hpp"
#include "adpsgd/errors.hpp"
#include "adpsgd/mixing.hpp"
#include "adpsgd/objectives.hpp"
#include "adpsgd/verify.hpp"

namespace fs = std::filesystem;
using namespace adpsgd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ConfigError("cannot create output directory: " + out);
}

double safe_log10(double v) {
    return v > 0.0 ? std::log10(v) : -std::numeric_limits<double>::infinity();
}

std::vector<int> parse_learner_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream stream(csv);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        int value = 0;
        try {
            value = std::stoi(item, &pos);
        } catch (const std::exception&) {
            throw ConfigError("bad learner count: " + item);
        }
        if (pos != item.size()) throw ConfigError("bad learner count: " + item);
        out.push_back(value);
    }
    if (out.empty()) throw ConfigError("empty learner list");
    return out;
}

int cmd_analyze_mixing(const std::string& learners_csv, int k_max, int trials,
                       std::uint64_t seed, const std::string& out) {
    const auto orders = parse_learner_list(learners_csv);
    if (k_max < 0) throw ConfigError("k-max must be nonnegative");
    if (trials < 1) throw ConfigError("trials must be positive");
    for (int order : orders) {
        if (order < 3) throw ConfigError("learner counts must be >= 3");
    }
    ensure_out_dir(out);

    CsvWriter csv(out + "/mixing.csv",
                  "kind,L,k,measured,bound,log10_measured,log10_bound");
    std::ofstream summary(out + "/summary.txt");
    if (!summary) throw ConfigError("cannot open " + out + "/summary.txt");

    for (int order : orders) {
        Rng fixed_rng(derive_seed(seed, 1, order));
        const auto fixed = mixing::verify_consensus_decay(mixing::MixKind::FixedRing,
                                                          order, k_max, 1, fixed_rng);
        for (const auto& p : fixed) {
            csv.row("fixed_ring", order, p.k, p.measured, p.bound,
                    safe_log10(p.measured), mixing::fm_consensus_bound_log10(order, p.k));
        }
        Rng random_rng(derive_seed(seed, 2, order));
        const auto random = mixing::verify_consensus_decay(
            mixing::MixKind::RandomRing, order, k_max, trials, random_rng);
        for (const auto& p : random) {
            csv.row("random_ring", order, p.k, p.measured, p.bound,
                    safe_log10(p.measured), mixing::rm_consensus_bound_log10(order, p.k));
        }

        const auto report =
            mixing::second_eigenvalue_magnitude(mixing::build_fixed_ring(order));
        summary << "L = " << order
                << ": lambda_hat = " << fmt_double(report.lambda_hat)
                << ", spectral_gap = " << fmt_double(report.spectral_gap)
                << ", closed_form = "
                << fmt_double(mixing::fm_lambda_closed_form(order)) << "\n";
    }
    return kExitOk;
}

void write_run_outputs(const std::string& out, const std::string& stem,
                       const engine::RunRecord& record) {
    CsvWriter run(out + "/" + stem + "run.csv", "epoch,heldout_loss,lr");
    for (const auto& e : record.epochs) run.row(e.epoch, e.heldout_loss, e.lr);
    CsvWriter consensus(out + "/" + stem + "consensus.csv", "k,distance");
    for (const auto& p : record.iterations) consensus.row(p.k, p.consensus);
}

int cmd_train(const std::string& config_path, const std::string& out,
              bool seed_given, std::uint64_t seed_override) {
    auto config = cfg::RunConfig::parse_file(config_path);
    if (seed_given) {
        config.seed = seed_override;
        config.strategy.seed = seed_override;
    }
    config.strategy.validate();
    config.cluster.validate();
    ensure_out_dir(out);
    {
        std::ofstream resolved(out + "/config.ini");
        resolved << config.resolved_text();
    }

    const auto problem = config.objective.build(config.seed);
    engine::RunRecord record;
    if (config.coupled) {
        const auto coupled = chronos::coupled_run(config.cluster, config.strategy, problem);
        record = coupled.record;
        std::ofstream timing(out + "/timing.txt");
        timing << "total_time = " << fmt_double(coupled.log.total_time) << "\n";
    } else {
        record = engine::run_training(config.strategy, problem);
    }

    write_run_outputs(out, "", record);
    {
        std::ofstream summary(out + "/summary.txt");
        summary << "strategy = " << engine::strategy_name(config.strategy.strategy) << "\n";
        summary << "iterations = " << record.iteration_count << "\n";
        const double final_loss =
            record.epochs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : record.epochs.back().heldout_loss;
        summary << "final_heldout_loss = " << fmt_double(final_loss) << "\n";
        summary << "diverged = " << (record.diverged ? "true" : "false") << "\n";
        if (record.diverged) {
            summary << "divergence_epoch = " << record.divergence_epoch << "\n";
        }
        summary << "status = " << (record.diverged ? "DIVERGED" : "CONVERGED") << "\n";
    }
    return record.diverged ? kExitDivergence : kExitOk;
}

int cmd_stragglers(const std::string& config_path, const std::string& out,
                   bool seed_given, std::uint64_t seed_override) {
    auto config = cfg::RunConfig::parse_file(config_path);
    if (seed_given) {
        config.seed = seed_override;
        config.strategy.seed = seed_override;
    }
    config.cluster.validate();
    ensure_out_dir(out);
    {
        std::ofstream resolved(out + "/config.ini");
        resolved << config.resolved_text();
    }

    chronos::ClusterProfile base = config.cluster;
    base.stragglers.clear();

    CsvWriter csv(out + "/slowdown.csv", "strategy,factor,baseline_s,straggler_s,ratio");
    for (const auto strategy : config.straggler_strategies) {
        const auto reports = chronos::slowdown_experiment(
            strategy, base, config.straggler_factors, config.iterations_per_learner);
        for (const auto& r : reports) {
            csv.row(engine::strategy_name(strategy), r.factor, r.baseline_epoch_time,
                    r.straggler_epoch_time, r.ratio);
        }
    }

    bool any_diverged = false;
    if (config.coupled) {
        const auto problem = config.objective.build(config.seed);
        for (const auto strategy : config.straggler_strategies) {
            auto strat_cfg = config.strategy;
            strat_cfg.strategy = strategy;
            strat_cfg.validate();
            const std::string name = engine::strategy_name(strategy);

            const auto baseline = chronos::coupled_run(base, strat_cfg, problem);
            write_run_outputs(out, name + "_baseline_", baseline.record);
            any_diverged = any_diverged || baseline.record.diverged;

            for (double factor : config.straggler_factors) {
                auto profile = base;
                profile.stragglers = {{0, factor}};
                const auto result = chronos::coupled_run(profile, strat_cfg, problem);
                std::ostringstream stem;
                stem << name << "_f" << factor << "_";
                write_run_outputs(out, stem.str(), result.record);
                any_diverged = any_diverged || result.record.diverged;
            }
        }
    }
    return any_diverged ? kExitDivergence : kExitOk;
}

int cmd_verify(std::uint64_t seed, const std::string& out) {
    ensure_out_dir(out);
    const auto results = verify::run_all(seed);
    std::ofstream report(out + "/verify.txt");
    if (!report) throw ConfigError("cannot open " + out + "/verify.txt");
    bool all_pass = true;
    for (const auto& r : results) {
        const std::string line =
            std::string(r.pass ? "PASS" : "FAIL") + "  " + r.name + " -- " + r.detail;
        report << line << "\n";
        std::cout << line << "\n";
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Decentralized data-parallel SGD testbed: mixing-matrix analysis, training "
        "runs, straggler timing simulation and self-verification.\n"
        "CSV columns (floats at 17 significant digits):\n"
        "  mixing.csv:    kind,L,k,measured,bound,log10_measured,log10_bound\n"
        "  run.csv:       epoch,heldout_loss,lr\n"
        "  consensus.csv: k,distance\n"
        "  slowdown.csv:  strategy,factor,baseline_s,straggler_s,ratio\n"
        "Exit codes: 0 ok, 1 verification failure, 2 usage/config error, 3 divergence."};
    app.require_subcommand(1);

    std::string config_path, out = ".", learners_csv = "16,32,64";
    std::uint64_t seed = 0;
    int k_max = 60, trials = 200;
    bool seed_given = false;

    auto* mix = app.add_subcommand("analyze-mixing",
                                   "Consensus decay of ring mixing matrices vs bounds");
    mix->add_option("--learners", learners_csv, "Comma-separated learner counts (L >= 3)");
    mix->add_option("--k-max", k_max, "Largest product length to measure");
    mix->add_option("--trials", trials, "Monte-Carlo trials for random mixing");
    mix->add_option("--seed", seed, "Random seed");
    mix->add_option("--out", out, "Output directory");

    auto* train = app.add_subcommand("train", "One training run from a config file");
    train->add_option("--config", config_path, "Run configuration file")->required();
    train->add_option("--seed", seed, "Override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    train->add_option("--out", out, "Output directory");

    auto* strag = app.add_subcommand("stragglers",
                                     "Straggler slowdown sweep from a config file");
    strag->add_option("--config", config_path, "Run configuration file")->required();
    strag->add_option("--seed", seed, "Override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    strag->add_option("--out", out, "Output directory");

    auto* ver = app.add_subcommand("verify", "Run the built-in verification battery");
    ver->add_option("--seed", seed, "Random seed for Monte-Carlo checks");
    ver->add_option("--out", out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (mix->parsed()) return cmd_analyze_mixing(learners_csv, k_max, trials, seed, out);
        if (train->parsed()) return cmd_train(config_path, out, seed_given, seed);
        if (strag->parsed()) return cmd_stragglers(config_path, out, seed_given, seed);
        if (ver->parsed()) return cmd_verify(seed, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
