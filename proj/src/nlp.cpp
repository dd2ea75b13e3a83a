#include "cspez/nlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>

namespace cspez {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

/// x - P(x - g): zero exactly at a bound-constrained stationary point.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi) {
    return x - project(x - g, lo, hi);
}

// Augmented Lagrangian merit for fixed multipliers and penalty.
class Merit {
   public:
    Merit(NlpProblem& p, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu, double rho, int& evaluations)
        : p_(p), lambda_(lambda), mu_(mu), rho_(rho), evaluations_(evaluations) {}

    double value(const Eigen::VectorXd& x) {
        if (has_value_ && x == x_) return value_;
        has_value_ = false;
        has_grad_ = false;
        x_ = x;
        ++evaluations_;
        ok_ = p_.evaluate(x, f_, ceq_, cin_);
        if (!ok_ || !std::isfinite(f_) || !ceq_.allFinite() || !cin_.allFinite()) {
            ok_ = false;
            value_ = kInf;
        } else {
            const Eigen::VectorXd shifted = (mu_ + rho_ * cin_).cwiseMax(0.0);
            value_ = f_ + lambda_.dot(ceq_) + 0.5 * rho_ * ceq_.squaredNorm() +
                     (shifted.squaredNorm() - mu_.squaredNorm()) / (2.0 * rho_);
        }
        has_value_ = true;
        return value_;
    }

    const Eigen::VectorXd& gradient(const Eigen::VectorXd& x) {
        value(x);
        if (has_grad_) return grad_;
        if (!ok_) {
            grad_ = Eigen::VectorXd::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
        } else {
            const Eigen::VectorXd w_eq = lambda_ + rho_ * ceq_;
            const Eigen::VectorXd w_in = (mu_ + rho_ * cin_).cwiseMax(0.0);
            grad_ = p_.objective_gradient(x) + p_.constraint_gradient(x, w_eq, w_in);
        }
        has_grad_ = true;
        return grad_;
    }

    bool ok() const { return ok_; }
    double f() const { return f_; }
    const Eigen::VectorXd& ceq() const { return ceq_; }
    const Eigen::VectorXd& cin() const { return cin_; }

   private:
    NlpProblem& p_;
    const Eigen::VectorXd& lambda_;
    const Eigen::VectorXd& mu_;
    double rho_;
    int& evaluations_;

    bool has_value_ = false;
    bool has_grad_ = false;
    bool ok_ = false;
    Eigen::VectorXd x_;
    double value_ = kInf;
    double f_ = 0.0;
    Eigen::VectorXd ceq_, cin_, grad_;
};

struct LineSearchResult {
    double step = 0.0;
    bool ok = false;
};

// Weak Wolfe bisection on phi(a) = merit(x + a d) for a in (0, a_max]. Near
// convergence the sufficient-decrease test drowns in rounding noise, so a
// step is also accepted under the approximate Wolfe conditions
//   c2 phi'(0) <= phi'(a) <= (1 - 2 c1) |phi'(0)|,  phi(a) <= phi(0) + noise.
LineSearchResult wolfe_search(Merit& m, const Eigen::VectorXd& x, const Eigen::VectorXd& d, double phi0, double dphi0,
                              double a_max) {
    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    const double noise = 1e-12 * (1.0 + std::abs(phi0));
    double lo = 0.0;
    double hi = kInf;
    double a = std::min(1.0, a_max);
    for (int it = 0; it < 80; ++it) {
        const double pa = m.value(x + a * d);
        const bool armijo = pa <= phi0 + c1 * a * dphi0;
        if (!std::isfinite(pa) || (!armijo && pa > phi0 + noise)) {
            hi = a;
        } else {
            const double da = m.gradient(x + a * d).dot(d);
            if (da < c2 * dphi0) {
                lo = a;
                if (a >= a_max) return {a, armijo || pa <= phi0};
            } else if (armijo || da <= -(1.0 - 2.0 * c1) * dphi0) {
                return {a, true};
            } else {
                hi = a;
            }
        }
        a = std::isfinite(hi) ? 0.5 * (lo + hi) : std::min(2.0 * a, a_max);
        if (std::isfinite(hi) && hi - lo <= 1e-16 * std::max(1.0, hi)) break;
    }
    return {lo, lo > 0.0};
}

struct InnerResult {
    Eigen::VectorXd x;
    double pg_norm = kInf;
    int iterations = 0;
    bool failed = false;
};

// Projected BFGS on the box [lo, hi].
InnerResult minimize_box(Merit& m, Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double tol,
                         int max_iter) {
    const Eigen::Index n = x.size();
    InnerResult out;
    x = project(x, lo, hi);
    double fx = m.value(x);
    if (!std::isfinite(fx)) {
        out.x = x;
        out.failed = true;
        return out;
    }
    Eigen::VectorXd g = m.gradient(x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    int resets = 0;
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it;
        const Eigen::VectorXd pg = projected_gradient(x, g, lo, hi);
        out.pg_norm = pg.lpNorm<Eigen::Infinity>();
        if (out.pg_norm <= tol) break;

        // Variables held at a bound by the gradient are fixed for this step.
        std::vector<bool> fixed(static_cast<std::size_t>(n), false);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double gap_lo = x[i] - lo[i];
            const double gap_hi = hi[i] - x[i];
            fixed[static_cast<std::size_t>(i)] = (gap_lo <= 1e-12 && g[i] > 0.0) || (gap_hi <= 1e-12 && g[i] < 0.0);
        }
        Eigen::VectorXd d = -(h * g);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fixed[static_cast<std::size_t>(i)]) {
                d[i] = 0.0;
            }
        }
        if (!(g.dot(d) < 0.0)) {
            h.setIdentity();
            d = -g;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (fixed[static_cast<std::size_t>(i)]) d[i] = 0.0;
            }
        }
        double a_max = kInf;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (d[i] < 0.0 && std::isfinite(lo[i])) a_max = std::min(a_max, (lo[i] - x[i]) / d[i]);
            if (d[i] > 0.0 && std::isfinite(hi[i])) a_max = std::min(a_max, (hi[i] - x[i]) / d[i]);
        }
        a_max = std::max(a_max, 0.0);
        const LineSearchResult ls = a_max > 0.0 ? wolfe_search(m, x, d, fx, g.dot(d), a_max) : LineSearchResult{};
        if (!ls.ok) {
            if (resets++ < 3 && !h.isIdentity()) {
                h.setIdentity();
                scaled = false;
                continue;
            }
            break;
        }
        resets = 0;
        const Eigen::VectorXd x_new = project(x + ls.step * d, lo, hi);
        const double f_new = m.value(x_new);
        const Eigen::VectorXd g_new = m.gradient(x_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                h = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
                scaled = true;
            }
            const double r = 1.0 / sy;
            const Eigen::VectorXd hy = h * y;
            h += (r * r * y.dot(hy) + r) * (s * s.transpose()) - r * (hy * s.transpose() + s * hy.transpose());
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if (s.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
    }
    out.x = x;
    out.pg_norm = projected_gradient(x, g, lo, hi).lpNorm<Eigen::Infinity>();
    return out;
}

double violation(const Eigen::VectorXd& ceq, const Eigen::VectorXd& cin) {
    double v = ceq.size() > 0 ? ceq.lpNorm<Eigen::Infinity>() : 0.0;
    if (cin.size() > 0) v = std::max(v, cin.maxCoeff());
    return std::max(v, 0.0);
}

double complementarity(const Eigen::VectorXd& cin, const Eigen::VectorXd& mu) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < cin.size(); ++i) c = std::max(c, std::min(mu[i], std::max(-cin[i], 0.0)));
    return c;
}

}  // namespace

std::string to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Success:
            return "success";
        case SolverStatus::MaxIterations:
            return "max_iterations";
        case SolverStatus::Infeasible:
            return "infeasible";
        case SolverStatus::EvaluationFailure:
            return "evaluation_failure";
        case SolverStatus::TimeLimit:
            return "time_limit";
    }
    return "unknown";
}

KktReport kkt_report(NlpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda_eq,
                     const Eigen::VectorXd& mu_in) {
    double f = 0.0;
    Eigen::VectorXd ceq, cin;
    KktReport r;
    if (!problem.evaluate(x, f, ceq, cin)) {
        r.stationarity = r.max_violation = r.complementarity = kInf;
        return r;
    }
    const Eigen::VectorXd g = problem.objective_gradient(x) + problem.constraint_gradient(x, lambda_eq, mu_in);
    r.stationarity = projected_gradient(x, g, problem.lower(), problem.upper()).lpNorm<Eigen::Infinity>();
    r.max_violation = violation(ceq, cin);
    r.complementarity = complementarity(cin, mu_in);
    return r;
}

SolverResult solve_augmented_lagrangian(NlpProblem& problem, const Eigen::VectorXd& x0, const SolverOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd lo = problem.lower();
    const Eigen::VectorXd hi = problem.upper();

    SolverResult res;
    res.lambda_eq = Eigen::VectorXd::Zero(problem.n_eq());
    res.mu_in = Eigen::VectorXd::Zero(problem.n_ineq());
    Eigen::VectorXd x = project(x0, lo, hi);
    double rho = opts.rho_initial;
    double omega = 1.0 / rho;
    double eta = 1.0 / std::pow(rho, 0.1);

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        res.outer_iterations = outer + 1;
        Merit merit(problem, res.lambda_eq, res.mu_in, rho, res.evaluations);
        const InnerResult inner = minimize_box(merit, x, lo, hi, std::max(omega, opts.kkt_tol), opts.max_inner);
        res.inner_iterations += inner.iterations;
        if (inner.failed) {
            res.status = SolverStatus::EvaluationFailure;
            break;
        }
        x = inner.x;
        merit.value(x);
        const Eigen::VectorXd ceq = merit.ceq();
        const Eigen::VectorXd cin = merit.cin();

        double shifted_violation = ceq.size() > 0 ? ceq.lpNorm<Eigen::Infinity>() : 0.0;
        for (Eigen::Index i = 0; i < cin.size(); ++i) {
            shifted_violation = std::max(shifted_violation, std::abs(std::max(cin[i], -res.mu_in[i] / rho)));
        }

        if (opts.verbose) {
            std::cerr << "outer " << outer << " rho " << rho << " f " << merit.f() << " pg " << inner.pg_norm << " viol "
                      << violation(ceq, cin) << " shifted " << shifted_violation << " inner_it " << inner.iterations
                      << '\n';
        }

        if (shifted_violation <= eta) {
            res.lambda_eq += rho * ceq;
            res.mu_in = (res.mu_in + rho * cin).cwiseMax(0.0);
            if (shifted_violation <= opts.feas_tol && inner.pg_norm <= opts.kkt_tol) {
                res.status = SolverStatus::Success;
                break;
            }
            eta = std::max(eta / std::pow(rho, 0.9), opts.feas_tol);
            omega = std::max(omega / rho, opts.kkt_tol);
        } else {
            rho = std::min(10.0 * rho, opts.rho_max);
            eta = std::max(1.0 / std::pow(rho, 0.1), opts.feas_tol);
            omega = std::max(1.0 / rho, opts.kkt_tol);
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > opts.time_limit_s) {
            res.status = SolverStatus::TimeLimit;
            break;
        }
    }

    res.x = x;
    res.rho = rho;
    double f = 0.0;
    Eigen::VectorXd ceq, cin;
    if (problem.evaluate(x, f, ceq, cin)) {
        res.objective = f;
        const KktReport k = kkt_report(problem, x, res.lambda_eq, res.mu_in);
        res.kkt_residual = k.stationarity;
        res.max_violation = k.max_violation;
        res.complementarity = k.complementarity;
        if (res.status == SolverStatus::MaxIterations && res.max_violation > 1e3 * opts.feas_tol) {
            res.status = SolverStatus::Infeasible;
        }
    } else {
        res.status = SolverStatus::EvaluationFailure;
    }
    return res;
}

}  // namespace cspez
