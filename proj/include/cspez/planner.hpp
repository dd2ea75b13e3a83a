#pragma once

// Minimum-time evader trajectories that keep the estimated probability of
// being inside the pursuer's engagement zone below a threshold at a set of
// sample times. Decision variables are the spline control points and tf.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <vector>

#include "cspez/belief.hpp"
#include "cspez/estimators.hpp"
#include "cspez/nlp.hpp"
#include "cspez/spline.hpp"

namespace cspez {

class MlpModel;

struct Region {
    double x_min = -6.0;
    double x_max = 6.0;
    double y_min = -6.0;
    double y_max = 6.0;

    bool contains(const Vec2& p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

struct PlanProblem {
    Vec2 start{-4.0, -4.0};
    Vec2 goal{4.0, 4.0};
    double evader_speed = 1.0;
    double turn_rate_min = -1.0;
    double turn_rate_max = 1.0;
    double curvature_max = 0.2;
    Region region;
    PursuerBelief belief;
    Method method = Method::Linear;
    /// Probability threshold; 1 removes the engagement-zone constraint.
    double epsilon = 0.05;
    int n_control = 8;
    int degree = 3;
    int n_samples = 100;
    /// Speed is held in [(1 - speed_band) v_E, v_E].
    double speed_band = 0.02;
    /// Initial guess: straight line traversed in initial_time_factor * |goal - start| / v_E.
    double initial_time_factor = 1.3;
    SolverOptions solver;

    void validate() const;
};

nlohmann::json problem_to_json(const PlanProblem& p);
/// Strict; keys not present keep the defaults of `base`.
PlanProblem problem_from_json(const nlohmann::json& j, PlanProblem base = {});

struct PlanResult {
    SplineTrajectory trajectory;
    double tf = 0.0;
    SolverStatus status = SolverStatus::MaxIterations;
    int iterations = 0;
    int evaluations = 0;
    double max_violation = 0.0;
    double kkt_residual = 0.0;
    std::vector<double> sample_times;
    /// Selected estimator's probability at each sample time.
    std::vector<double> cspez;
    double max_cspez = 0.0;
    double wall_time_s = 0.0;
};

nlohmann::json result_to_json(const PlanResult& r, bool include_timing = true);

/// Straight-line control points from start to goal traversed in time tf.
std::vector<Vec2> straight_line_controls(const Vec2& start, const Vec2& goal, int n_control, int degree);

PlanResult plan(const PlanProblem& problem, const MlpModel* model = nullptr);

/// Constraint residuals and Monte Carlo probabilities recomputed on a finer grid.
struct ValidationReport {
    int n_points = 0;
    double max_mc_cspez = 0.0;
    double max_mc_time = 0.0;
    double max_estimate = 0.0;
    double start_error = 0.0;
    double goal_error = 0.0;
    /// Largest excursion outside [(1 - band) v_E, v_E], relative to v_E.
    double speed_excess = 0.0;
    double max_speed_deviation = 0.0;
    double turn_rate_excess = 0.0;
    double curvature_excess = 0.0;
    double region_excess = 0.0;
    std::vector<double> times;
    std::vector<double> mc_cspez;
};

nlohmann::json validation_to_json(const ValidationReport& v);

ValidationReport validate(const SplineTrajectory& trajectory, const PlanProblem& problem, std::size_t mc_n,
                          std::uint64_t seed, int refine = 4, const MlpModel* model = nullptr);

/// The underlying program, exposed for tests of derivatives and sparsity.
class PlannerNlp : public NlpProblem {
   public:
    static constexpr int kPerSample = 11;

    PlannerNlp(const PlanProblem& problem, const MlpModel* model);

    int n_vars() const override { return 2 * problem_.n_control + 1; }
    int n_eq() const override { return 4; }
    int n_ineq() const override { return kPerSample * problem_.n_samples; }
    Eigen::VectorXd lower() const override;
    Eigen::VectorXd upper() const override;

    bool evaluate(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& c_eq, Eigen::VectorXd& c_in) override;
    Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) override;
    Eigen::VectorXd constraint_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& w_eq,
                                        const Eigen::VectorXd& w_in) override;

    SplineTrajectory trajectory(const Eigen::VectorXd& x) const;
    Eigen::VectorXd pack(const std::vector<Vec2>& controls, double tf) const;
    /// Normalised sample positions s_i in [0, 1]; sample time is s_i * tf.
    const std::vector<double>& sample_fractions() const { return fractions_; }
    /// Probability from the selected estimator at each sample of x.
    std::vector<double> sample_probabilities(const Eigen::VectorXd& x);
    bool has_cspez_constraint() const { return constrained_; }

   private:
    using J = Dual<double, 17>;
    struct Sample {
        BasicFlatOutputs<J> flat;
        double g_cspez = 0.0;
        double probability = 0.0;
        bool grad_ready = false;
        std::array<double, 3> dg{};  // d g_cspez / d (x, y, heading)
    };

    bool refresh(const Eigen::VectorXd& x);
    double cspez_value(const EvaderState& e, double* probability) const;
    std::array<double, 3> cspez_gradient(const EvaderState& e) const;
    EvaderState evader_at(const Sample& s) const;

    PlanProblem problem_;
    const MlpModel* model_;
    bool constrained_ = true;
    double quantile_ = 0.0;
    double logit_eps_ = 0.0;
    std::vector<double> fractions_;

    bool cached_ = false;
    bool cached_ok_ = false;
    Eigen::VectorXd cached_x_;
    std::vector<Sample> samples_;
};

}  // namespace cspez
