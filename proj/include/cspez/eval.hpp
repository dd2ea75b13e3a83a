#pragma once

// Accuracy of the approximate estimators against Monte Carlo: error metrics,
// probability fields over a grid of evader positions and errors grouped by
// the trace of the pursuer covariance.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "cspez/estimators.hpp"
#include "cspez/surrogate.hpp"

namespace cspez {

class MlpModel;

struct MethodErrors {
    Method method = Method::Linear;
    std::size_t n = 0;
    double mse = 0.0;
    double rmse = 0.0;
    double aae = 0.0;
    double max_ae = 0.0;
};

/// MSE, RMSE, mean and max absolute error of `estimate` against `truth`.
MethodErrors error_metrics(Method method, const std::vector<double>& estimate, const std::vector<double>& truth);

struct ErrorReport {
    std::size_t n_configs = 0;
    std::vector<double> truth;
    std::vector<double> traces;
    std::map<Method, std::vector<double>> estimates;
    std::vector<MethodErrors> metrics;

    std::vector<double> abs_errors(Method m) const;
};

/// Monte Carlo truth for configuration i uses substream split(seed, i).
/// The neural estimator is included when `model` is given.
ErrorReport compare_methods(const std::vector<Configuration>& configs, std::size_t mc_n, std::uint64_t seed,
                            const MlpModel* model, unsigned workers = 1);

struct GridSpec {
    double x_min = -4.0;
    double x_max = 4.0;
    int nx = 101;
    double y_min = -4.0;
    double y_max = 4.0;
    int ny = 101;

    double x(int i) const { return nx == 1 ? x_min : x_min + (x_max - x_min) * i / (nx - 1); }
    double y(int j) const { return ny == 1 ? y_min : y_min + (y_max - y_min) * j / (ny - 1); }
};

struct LevelSetGrid {
    GridSpec grid;
    std::vector<Method> methods;
    /// Row-major over (j, i): index j * nx + i.
    std::vector<double> mc;
    std::map<Method, std::vector<double>> probability;
    std::vector<double> thresholds;

    std::vector<double> abs_error(Method m) const;
};

/// Cell (i, j) uses Monte Carlo substream split(seed, j * nx + i).
LevelSetGrid level_set_grid(const PursuerBelief& belief, double evader_heading, double evader_speed, const GridSpec& grid,
                            const std::vector<Method>& methods, std::size_t mc_n, std::uint64_t seed,
                            const MlpModel* model, unsigned workers = 1);

struct TraceBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::map<Method, double> median_error;
};

struct TraceBinReport {
    std::vector<TraceBin> bins;
    std::size_t skipped_bins = 0;
    /// Spearman correlation of (trace, |error|) over all samples.
    std::map<Method, double> spearman_samples;
    /// Spearman correlation of (bin centre, median |error|) over non-empty bins.
    std::map<Method, double> spearman_bins;
};

TraceBinReport trace_binned_errors(const std::vector<double>& traces, const std::map<Method, std::vector<double>>& abs_errors,
                                   int bins);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

double median(std::vector<double> v);

/// CSV writers: '.' decimal point, LF line endings, fixed column order.
void write_metrics_csv(std::ostream& os, const std::vector<MethodErrors>& metrics);
void write_grid_csv(std::ostream& os, const LevelSetGrid& g);
void write_trace_bins_csv(std::ostream& os, const TraceBinReport& r);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace cspez
