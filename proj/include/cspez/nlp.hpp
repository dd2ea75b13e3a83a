#pragma once

// Small dense nonlinear programs
//   min f(x)  s.t.  c_eq(x) = 0,  c_in(x) <= 0,  lower <= x <= upper
// solved with a Powell-Hestenes-Rockafellar augmented Lagrangian whose
// bound-constrained subproblems use projected BFGS with a Wolfe line search.

#include <Eigen/Core>
#include <limits>
#include <string>

namespace cspez {

class NlpProblem {
   public:
    virtual ~NlpProblem() = default;

    virtual int n_vars() const = 0;
    virtual int n_eq() const = 0;
    virtual int n_ineq() const = 0;
    virtual Eigen::VectorXd lower() const {
        return Eigen::VectorXd::Constant(n_vars(), -std::numeric_limits<double>::infinity());
    }
    virtual Eigen::VectorXd upper() const {
        return Eigen::VectorXd::Constant(n_vars(), std::numeric_limits<double>::infinity());
    }

    /// Objective and constraint values. Returns false when x cannot be
    /// evaluated; the solver then treats the point as infinitely bad.
    virtual bool evaluate(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& c_eq, Eigen::VectorXd& c_in) = 0;
    virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) = 0;
    /// J_eq^T w_eq + J_in^T w_in. Rows whose weight is zero may be skipped.
    virtual Eigen::VectorXd constraint_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& w_eq,
                                                const Eigen::VectorXd& w_in) = 0;
};

enum class SolverStatus { Success, MaxIterations, Infeasible, EvaluationFailure, TimeLimit };

std::string to_string(SolverStatus s);

struct SolverOptions {
    /// Projected-gradient norm of the Lagrangian (infinity norm).
    double kkt_tol = 1e-6;
    /// Equality residual, inequality violation and complementarity.
    double feas_tol = 1e-7;
    int max_outer = 60;
    int max_inner = 2000;
    double rho_initial = 10.0;
    double rho_max = 1e10;
    double time_limit_s = std::numeric_limits<double>::infinity();
    bool verbose = false;
};

struct SolverResult {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd lambda_eq;
    Eigen::VectorXd mu_in;
    SolverStatus status = SolverStatus::MaxIterations;
    int outer_iterations = 0;
    int inner_iterations = 0;
    int evaluations = 0;
    double kkt_residual = std::numeric_limits<double>::infinity();
    double max_violation = std::numeric_limits<double>::infinity();
    double complementarity = std::numeric_limits<double>::infinity();
    double rho = 0.0;
};

SolverResult solve_augmented_lagrangian(NlpProblem& problem, const Eigen::VectorXd& x0, const SolverOptions& opts = {});

struct KktReport {
    double stationarity = 0.0;
    double max_violation = 0.0;
    double complementarity = 0.0;
};

/// First-order optimality measures recomputed from scratch at (x, lambda, mu).
KktReport kkt_report(NlpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda_eq,
                     const Eigen::VectorXd& mu_in);

}  // namespace cspez
