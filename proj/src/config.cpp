#include "adpsgd/config.hpp"

#include <fstream>
#include <sstream>

#include "adpsgd/csvio.hpp"
#include "adpsgd/errors.hpp"

namespace adpsgd::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream stream(s);
    std::string item;
    while (std::getline(stream, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
}

long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

mixing::MixKind mix_kind_from_name(const std::string& name) {
    if (name == "uniform") return mixing::MixKind::Uniform;
    if (name == "fixed_ring") return mixing::MixKind::FixedRing;
    if (name == "random_ring") return mixing::MixKind::RandomRing;
    throw ConfigError("unknown mix kind: " + name);
}

std::string mix_kind_name(mixing::MixKind k) {
    switch (k) {
        case mixing::MixKind::Uniform: return "uniform";
        case mixing::MixKind::FixedRing: return "fixed_ring";
        case mixing::MixKind::RandomRing: return "random_ring";
    }
    return "uniform";
}

}  // namespace

objectives::Problem ObjectiveSpec::build(std::uint64_t seed) const {
    if (kind == "quadratic") {
        return objectives::make_quadratic(dimension, condition_number, noise_sigma, seed,
                                          samples);
    }
    if (kind == "logistic") {
        return objectives::make_logistic(dimension, samples, seed);
    }
    if (kind == "mlp") {
        return objectives::make_mlp(input_dim, hidden, classes, samples, seed);
    }
    throw ConfigError("unknown objective kind: " + kind);
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str());
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "engine" && section != "lr" &&
                section != "objective" && section != "cluster" && section != "stragglers") {
                throw ConfigError("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;

        if (qualified == "run.kind") {
            if (value != "train" && value != "stragglers") {
                throw ConfigError("run.kind must be train or stragglers, got " + value);
            }
            config.kind = value;
        } else if (qualified == "run.seed") {
            config.seed = static_cast<std::uint64_t>(parse_int(qualified, value));
        } else if (qualified == "engine.strategy") {
            config.strategy.strategy = engine::strategy_from_name(value);
        } else if (qualified == "engine.learners") {
            config.strategy.learners = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "engine.batch") {
            config.strategy.batch = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "engine.epochs") {
            config.strategy.epochs = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "engine.staleness_cap") {
            config.strategy.staleness_cap = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "engine.staleness") {
            config.strategy.staleness.clear();
            for (const auto& item : split_csv(value)) {
                config.strategy.staleness.push_back(
                    static_cast<int>(parse_int(qualified, item)));
            }
        } else if (qualified == "engine.generic_mix") {
            config.strategy.generic_mix = mix_kind_from_name(value);
        } else if (qualified == "lr.base_lr") {
            config.strategy.lr.base_lr = parse_double(qualified, value);
        } else if (qualified == "lr.peak_lr") {
            config.strategy.lr.peak_lr = parse_double(qualified, value);
        } else if (qualified == "lr.warmup_epochs") {
            config.strategy.lr.warmup_epochs = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "lr.anneal_factor") {
            config.strategy.lr.anneal_factor = parse_double(qualified, value);
        } else if (qualified == "lr.anneal_start_epoch") {
            config.strategy.lr.anneal_start_epoch =
                static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "objective.kind") {
            if (value != "quadratic" && value != "logistic" && value != "mlp") {
                throw ConfigError("objective.kind must be quadratic, logistic or mlp");
            }
            config.objective.kind = value;
        } else if (qualified == "objective.dimension") {
            config.objective.dimension = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "objective.condition_number") {
            config.objective.condition_number = parse_double(qualified, value);
        } else if (qualified == "objective.noise_sigma") {
            config.objective.noise_sigma = parse_double(qualified, value);
        } else if (qualified == "objective.samples") {
            config.objective.samples = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "objective.input_dim") {
            config.objective.input_dim = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "objective.hidden") {
            config.objective.hidden = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "objective.classes") {
            config.objective.classes = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "cluster.compute_time") {
            config.cluster.compute_time = parse_double(qualified, value);
        } else if (qualified == "cluster.comm_pairwise") {
            config.cluster.comm_pairwise = parse_double(qualified, value);
        } else if (qualified == "cluster.comm_allreduce") {
            config.cluster.comm_allreduce = parse_double(qualified, value);
        } else if (qualified == "cluster.sync_overhead") {
            config.cluster.sync_overhead = parse_double(qualified, value);
        } else if (qualified == "cluster.coupled") {
            config.coupled = parse_bool(qualified, value);
        } else if (qualified == "cluster.iterations_per_learner") {
            config.iterations_per_learner = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "stragglers.factors") {
            config.straggler_factors.clear();
            for (const auto& item : split_csv(value)) {
                config.straggler_factors.push_back(parse_double(qualified, item));
            }
        } else if (qualified == "stragglers.strategies") {
            config.straggler_strategies.clear();
            for (const auto& item : split_csv(value)) {
                config.straggler_strategies.push_back(engine::strategy_from_name(item));
            }
        } else if (qualified == "cluster.straggler_learner") {
            config.straggler_learner = static_cast<int>(parse_int(qualified, value));
        } else if (qualified == "cluster.straggler_factor") {
            config.straggler_factor = parse_double(qualified, value);
        } else {
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
        }
    }
    config.strategy.seed = config.seed;
    config.cluster.learners = config.strategy.learners;
    if (config.straggler_learner >= 0) {
        config.cluster.stragglers = {{config.straggler_learner, config.straggler_factor}};
    }
    return config;
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out << "[run]\n";
    out << "kind = " << kind << "\n";
    out << "seed = " << seed << "\n";
    out << "\n[engine]\n";
    out << "strategy = " << engine::strategy_name(strategy.strategy) << "\n";
    out << "learners = " << strategy.learners << "\n";
    out << "batch = " << strategy.batch << "\n";
    out << "epochs = " << strategy.epochs << "\n";
    out << "staleness_cap = " << strategy.staleness_cap << "\n";
    if (!strategy.staleness.empty()) {
        out << "staleness = ";
        for (std::size_t i = 0; i < strategy.staleness.size(); ++i) {
            out << (i ? "," : "") << strategy.staleness[i];
        }
        out << "\n";
    }
    out << "generic_mix = " << mix_kind_name(strategy.generic_mix) << "\n";
    out << "\n[lr]\n";
    out << "base_lr = " << fmt_double(strategy.lr.base_lr) << "\n";
    out << "peak_lr = " << fmt_double(strategy.lr.peak_lr) << "\n";
    out << "warmup_epochs = " << strategy.lr.warmup_epochs << "\n";
    out << "anneal_factor = " << fmt_double(strategy.lr.anneal_factor) << "\n";
    out << "anneal_start_epoch = " << strategy.lr.anneal_start_epoch << "\n";
    out << "\n[objective]\n";
    out << "kind = " << objective.kind << "\n";
    out << "dimension = " << objective.dimension << "\n";
    out << "condition_number = " << fmt_double(objective.condition_number) << "\n";
    out << "noise_sigma = " << fmt_double(objective.noise_sigma) << "\n";
    out << "samples = " << objective.samples << "\n";
    out << "input_dim = " << objective.input_dim << "\n";
    out << "hidden = " << objective.hidden << "\n";
    out << "classes = " << objective.classes << "\n";
    out << "\n[cluster]\n";
    out << "compute_time = " << fmt_double(cluster.compute_time) << "\n";
    out << "comm_pairwise = " << fmt_double(cluster.comm_pairwise) << "\n";
    out << "comm_allreduce = " << fmt_double(cluster.comm_allreduce) << "\n";
    out << "sync_overhead = " << fmt_double(cluster.sync_overhead) << "\n";
    out << "straggler_learner = " << straggler_learner << "\n";
    out << "straggler_factor = " << fmt_double(straggler_factor) << "\n";
    out << "coupled = " << (coupled ? "true" : "false") << "\n";
    out << "iterations_per_learner = " << iterations_per_learner << "\n";
    out << "\n[stragglers]\n";
    out << "factors = ";
    for (std::size_t i = 0; i < straggler_factors.size(); ++i) {
        out << (i ? "," : "") << fmt_double(straggler_factors[i]);
    }
    out << "\n";
    out << "strategies = ";
    for (std::size_t i = 0; i < straggler_strategies.size(); ++i) {
        out << (i ? "," : "") << engine::strategy_name(straggler_strategies[i]);
    }
    out << "\n";
    return out.str();
}

}  // namespace adpsgd::cfg
