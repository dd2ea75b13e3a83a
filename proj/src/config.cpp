#include "cspez/config.hpp"

#include <fstream>
#include <numbers>

namespace cspez {

namespace {

template <typename Fn>
void for_keys(const nlohmann::json& j, const std::string& where, Fn&& fn) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (!fn(key, value)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

std::pair<double, double> pair_of(const nlohmann::json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(where + ": expected [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

std::size_t positive_count(const nlohmann::json& v, const std::string& where) {
    const auto n = v.get<std::int64_t>();
    if (n < 1) throw ConfigError(where + ": must be at least 1");
    return static_cast<std::size_t>(n);
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults() {
    ScenarioConfig c;
    c.belief.mean = {0.0, 0.0, std::numbers::pi / 4.0, 0.2, 1.0, 2.0};
    c.belief.cov_position << 0.025, 0.04, 0.04, 0.1;
    c.belief.var_heading = 0.2;
    c.belief.var_turn_radius = 0.005;
    c.belief.var_range = 0.1;
    c.belief.var_speed = 0.3;
    c.plan.belief = c.belief;
    return c;
}

ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ScenarioConfig c = ScenarioConfig::defaults();
    std::optional<nlohmann::json> plan_json;
    try {
        for_keys(j, "config", [&](const std::string& key, const nlohmann::json& v) {
            if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "workers") {
                const auto w = v.get<std::int64_t>();
                if (w < 1) throw ConfigError("config.workers: must be at least 1");
                c.workers = static_cast<unsigned>(w);
            } else if (key == "belief") {
                c.belief = belief_from_json(v);
            } else if (key == "evader") {
                for_keys(v, "config.evader", [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "heading") {
                        c.evader_heading = x.get<double>();
                    } else if (k == "speed") {
                        c.evader_speed = x.get<double>();
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "grid") {
                for_keys(v, "config.grid", [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "x") {
                        std::tie(c.grid.x_min, c.grid.x_max) = pair_of(x, "config.grid.x");
                    } else if (k == "y") {
                        std::tie(c.grid.y_min, c.grid.y_max) = pair_of(x, "config.grid.y");
                    } else if (k == "nx") {
                        c.grid.nx = x.get<int>();
                    } else if (k == "ny") {
                        c.grid.ny = x.get<int>();
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "thresholds") {
                c.thresholds = v.get<std::vector<double>>();
            } else if (key == "mc_samples") {
                for_keys(v, "config.mc_samples", [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "label") {
                        c.mc_label = positive_count(x, "config.mc_samples.label");
                    } else if (k == "eval") {
                        c.mc_eval = positive_count(x, "config.mc_samples.eval");
                    } else if (k == "validate") {
                        c.mc_validate = positive_count(x, "config.mc_samples.validate");
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "compare") {
                for_keys(v, "config.compare", [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "n_configs") {
                        c.compare_configs = positive_count(x, "config.compare.n_configs");
                    } else if (k == "bins") {
                        c.trace_bins = x.get<int>();
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "training") {
                for_keys(v, "config.training", [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "n_samples") {
                        c.training_samples = positive_count(x, "config.training.n_samples");
                    } else if (k == "ranges") {
                        c.ranges = ranges_from_json(x);
                    } else if (k == "hyper") {
                        if (x.contains("seed")) throw ConfigError("config.training.hyper: the seed derives from the root seed");
                        c.hyper = hyper_from_json(x, c.hyper);
                    } else {
                        return false;
                    }
                    return true;
                });
            } else if (key == "model") {
                c.model_path = base_dir / v.get<std::string>();
            } else if (key == "dataset") {
                c.dataset_path = base_dir / v.get<std::string>();
            } else if (key == "plan") {
                plan_json = v;
            } else {
                return false;
            }
            return true;
        });
        // The planner always uses the scenario belief.
        PlanProblem base = c.plan;
        base.belief = c.belief;
        if (plan_json) {
            if (plan_json->contains("belief")) throw ConfigError("config.plan: the belief is set at the top level");
            base = problem_from_json(*plan_json, base);
        }
        base.validate();
        c.plan = base;
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.grid.nx < 0 || c.grid.ny < 0) throw ConfigError("config.grid: nx and ny must be non-negative");
    if (c.trace_bins < 2) throw ConfigError("config.compare.bins: need at least 2");
    if (!(c.evader_speed >= 0.0)) throw ConfigError("config.evader.speed: must be non-negative");
    for (double t : c.thresholds) {
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("config.thresholds: values must be in (0, 1)");
    }
    return c;
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
    nlohmann::json plan = problem_to_json(c.plan);
    plan.erase("belief");
    nlohmann::json hyper = hyper_to_json(c.hyper);
    hyper.erase("seed");
    nlohmann::json j = {
        {"seed", c.seed},
        {"workers", c.workers},
        {"belief", belief_to_json(c.belief)},
        {"evader", {{"heading", c.evader_heading}, {"speed", c.evader_speed}}},
        {"grid",
         {{"x", {c.grid.x_min, c.grid.x_max}}, {"y", {c.grid.y_min, c.grid.y_max}}, {"nx", c.grid.nx}, {"ny", c.grid.ny}}},
        {"thresholds", c.thresholds},
        {"mc_samples", {{"label", c.mc_label}, {"eval", c.mc_eval}, {"validate", c.mc_validate}}},
        {"compare", {{"n_configs", c.compare_configs}, {"bins", c.trace_bins}}},
        {"training", {{"n_samples", c.training_samples}, {"ranges", ranges_to_json(c.ranges)}, {"hyper", hyper}}},
        {"plan", plan}};
    if (c.model_path) j["model"] = c.model_path->string();
    if (c.dataset_path) j["dataset"] = c.dataset_path->string();
    return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::uint64_t stream_seed(std::uint64_t root, Stream s) {
    return RngStream::split(root, static_cast<std::uint64_t>(s)).next_u64();
}

TrainingSet label_dataset(const ScenarioConfig& c) {
    RngStream design(stream_seed(c.seed, Stream::LabelDesign));
    const auto configs = latin_hypercube(c.training_samples, c.ranges, design);
    TrainingSet ts = generate_labels(configs, c.mc_label, stream_seed(c.seed, Stream::LabelMonteCarlo), c.workers);
    ts.metadata["seed"] = c.seed;
    ts.metadata["ranges"] = ranges_to_json(c.ranges);
    return ts;
}

std::vector<Configuration> compare_design(const ScenarioConfig& c) {
    RngStream design(stream_seed(c.seed, Stream::CompareDesign));
    return latin_hypercube(c.compare_configs, c.ranges, design);
}

ErrorReport run_compare(const ScenarioConfig& c, const MlpModel* model) {
    return compare_methods(compare_design(c), c.mc_eval, stream_seed(c.seed, Stream::CompareMonteCarlo), model, c.workers);
}

TrainHyper training_hyper(const ScenarioConfig& c) {
    TrainHyper h = c.hyper;
    h.seed = stream_seed(c.seed, Stream::Training);
    return h;
}

}  // namespace cspez
