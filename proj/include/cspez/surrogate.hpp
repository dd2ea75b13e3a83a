#pragma once

// Surrogate regressor inputs and training data: the 14-feature encoding of a
// (belief, evader) configuration, Latin hypercube design over the admissible
// ranges, and Monte Carlo labelling.

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "cspez/belief.hpp"
#include "cspez/geometry.hpp"

namespace cspez {

inline constexpr int kFeatureCount = 14;

/// [mu_a, mu_R, mu_v, var_x, var_y, cov_xy, var_psi, var_a, var_R, var_v,
///  x_E - mu_x, y_E - mu_y, psi_E - mu_psi, v_E]
using FeatureVector = std::array<double, kFeatureCount>;

enum Feature : int {
    kMeanTurnRadius = 0,
    kMeanRange,
    kMeanSpeed,
    kVarX,
    kVarY,
    kCovXY,
    kVarHeading,
    kVarTurnRadius,
    kVarRange,
    kVarSpeed,
    kRelX,
    kRelY,
    kRelHeading,
    kEvaderSpeed,
};

const std::array<std::string, kFeatureCount>& feature_names();

/// Angle mapped into [-pi, pi).
double wrap_angle(double angle);

/// The relative heading is wrapped into [-pi, pi); z is 2 pi periodic in it.
FeatureVector build_features(const PursuerBelief& b, const EvaderState& e);

struct Configuration {
    PursuerBelief belief;
    EvaderState evader;
};

/// Rebuilds a configuration from features with the pursuer mean at the
/// origin and mean heading `reference_heading`.
Configuration configuration_from_features(const FeatureVector& f, double reference_heading);

/// Admissible box for each feature plus the pursuer mean heading used when
/// turning a feature sample into a concrete configuration.
struct FeatureRanges {
    std::array<std::pair<double, double>, kFeatureCount> bounds{};
    double reference_heading = 0.0;

    static FeatureRanges defaults();
    bool contains(const FeatureVector& f, double slack = 0.0) const;
    void validate() const;
};

nlohmann::json ranges_to_json(const FeatureRanges& r);
/// Strict: object keyed by feature name with [lo, hi] pairs plus
/// "reference_heading"; every feature is required.
FeatureRanges ranges_from_json(const nlohmann::json& j);

class RangeConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// n points in [0,1)^dims, one per stratum of width 1/n in every dimension.
std::vector<std::vector<double>> lhs_unit(std::size_t n, std::size_t dims, RngStream& rng);

/// Latin hypercube design over `ranges`. The covariance column is re-paired
/// across samples (keeping its strata) until every position block is PSD;
/// more than 100 n re-pairing draws raises RangeConfigError.
std::vector<Configuration> latin_hypercube(std::size_t n, const FeatureRanges& ranges, RngStream& rng);

struct TrainingSet {
    std::vector<FeatureVector> features;
    std::vector<double> labels;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t size() const { return labels.size(); }
};

/// Monte Carlo labels; configuration i uses substream split(seed, i) so the
/// result does not depend on the worker count.
TrainingSet generate_labels(const std::vector<Configuration>& configs, std::size_t mc_n, std::uint64_t seed,
                            unsigned workers = 1);

/// Columnar little-endian float64 file plus a JSON sidecar at path + ".json".
void save_training_set(const TrainingSet& ts, const std::filesystem::path& path);
TrainingSet load_training_set(const std::filesystem::path& path);

}  // namespace cspez
