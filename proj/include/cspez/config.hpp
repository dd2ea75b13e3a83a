#pragma once

// Scenario configuration shared by every CLI subcommand. One JSON object with
// optional sections; unknown keys anywhere are rejected.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cspez/belief.hpp"
#include "cspez/eval.hpp"
#include "cspez/mlp.hpp"
#include "cspez/planner.hpp"
#include "cspez/surrogate.hpp"

namespace cspez {

class ConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    unsigned workers = 1;
    PursuerBelief belief;
    double evader_heading = 0.0;
    double evader_speed = 1.0;
    GridSpec grid;
    std::vector<double> thresholds = {0.01, 0.05, 0.25, 0.5};

    std::size_t mc_label = 10000;
    std::size_t mc_eval = 10000;
    std::size_t mc_validate = 10000;

    std::size_t compare_configs = 20000;
    int trace_bins = 20;

    std::size_t training_samples = 50000;
    FeatureRanges ranges = FeatureRanges::defaults();
    TrainHyper hyper;

    /// Paths are resolved relative to the config file.
    std::optional<std::filesystem::path> model_path;
    std::optional<std::filesystem::path> dataset_path;

    PlanProblem plan;

    /// The reference scenario: pursuer at the origin heading pi/4.
    static ScenarioConfig defaults();
};

/// Strict parse; every section is optional and falls back to defaults().
ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Every random quantity in a run is drawn from a substream of the root seed.
enum class Stream : std::uint64_t {
    LabelDesign = 1,
    LabelMonteCarlo = 2,
    CompareDesign = 3,
    CompareMonteCarlo = 4,
    GridMonteCarlo = 5,
    PlanValidation = 6,
    Training = 7,
};

std::uint64_t stream_seed(std::uint64_t root, Stream s);

/// LHS design and Monte Carlo labels for surrogate training.
TrainingSet label_dataset(const ScenarioConfig& c);
/// Held-out LHS design used by `compare` and `trace-bins`.
std::vector<Configuration> compare_design(const ScenarioConfig& c);
ErrorReport run_compare(const ScenarioConfig& c, const MlpModel* model);
/// Training hyperparameters with the seed taken from the scenario stream.
TrainHyper training_hyper(const ScenarioConfig& c);

}  // namespace cspez
