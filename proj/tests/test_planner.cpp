#include <doctest.h>

#include <random>

#include "cspez/config.hpp"
#include "cspez/planner.hpp"
#include "oracles.hpp"

using namespace cspez;

namespace {

PlanProblem scenario(Method m, double eps) {
    PlanProblem p = ScenarioConfig::defaults().plan;
    p.method = m;
    p.epsilon = eps;
    return p;
}

Eigen::VectorXd perturbed_start(PlannerNlp& nlp, const PlanProblem& p, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, 0.3);
    auto ctrl = straight_line_controls(p.start, p.goal, p.n_control, p.degree);
    for (auto& c : ctrl) {
        c.x += n(gen);
        c.y += n(gen);
    }
    return nlp.pack(ctrl, 1.3 * norm(p.goal - p.start) / p.evader_speed);
}

}  // namespace

TEST_SUITE("planner") {
    TEST_CASE("straight line without a pursuer") {
        const PlanResult r = plan(scenario(Method::Linear, 1.0));
        REQUIRE(r.status == SolverStatus::Success);
        const double d = std::sqrt(128.0);
        CHECK(std::abs(r.tf - d) / d < 0.01);
        CHECK(r.tf >= d - 1e-9);
    }

    TEST_CASE("analytic gradients match finite differences") {
        for (Method m : {Method::Linear, Method::Quadratic}) {
            const PlanProblem p = scenario(m, 0.05);
            PlannerNlp nlp(p, nullptr);
            const Eigen::VectorXd x = perturbed_start(nlp, p, 3);
            double f;
            Eigen::VectorXd ce, ci;
            REQUIRE(nlp.evaluate(x, f, ce, ci));
            std::mt19937_64 gen(4);
            std::normal_distribution<double> n(0.0, 1.0);
            Eigen::VectorXd we(nlp.n_eq()), wi(nlp.n_ineq());
            for (auto& v : we) v = n(gen);
            for (auto& v : wi) v = n(gen);
            const Eigen::VectorXd g = nlp.constraint_gradient(x, we, wi);
            const Eigen::VectorXd go = nlp.objective_gradient(x);
            auto phi = [&](const Eigen::VectorXd& y) {
                double fy;
                Eigen::VectorXd a, b;
                nlp.evaluate(y, fy, a, b);
                return std::make_pair(fy, we.dot(a) + wi.dot(b));
            };
            for (int k = 0; k < nlp.n_vars(); ++k) {
                const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
                Eigen::VectorXd xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                const auto [fp, cp] = phi(xp);
                const auto [fm, cm] = phi(xm);
                CHECK(oracle::rel_err(go[k], (fp - fm) / (2 * h)) < 1e-6);
                CHECK(std::abs(g[k] - (cp - cm) / (2 * h)) <= 1e-5 * std::max(1.0, std::abs(g[k])));
            }
        }
    }

    TEST_CASE("constraint sparsity follows local support") {
        const PlanProblem p = scenario(Method::Linear, 0.05);
        PlannerNlp nlp(p, nullptr);
        const Eigen::VectorXd x = perturbed_start(nlp, p, 5);
        double f;
        Eigen::VectorXd ce, ci;
        REQUIRE(nlp.evaluate(x, f, ce, ci));
        const Eigen::VectorXd we = Eigen::VectorXd::Zero(nlp.n_eq());
        for (int row = 0; row < nlp.n_ineq(); row += 7) {
            Eigen::VectorXd wi = Eigen::VectorXd::Zero(nlp.n_ineq());
            wi[row] = 1.0;
            const Eigen::VectorXd g = nlp.constraint_gradient(x, we, wi);
            int touched = 0;
            for (int c = 0; c < p.n_control; ++c) touched += (g[2 * c] != 0.0 || g[2 * c + 1] != 0.0) ? 1 : 0;
            CHECK(touched <= p.degree + 1);
        }
    }

    TEST_CASE("relaxing the threshold cannot lengthen the path") {
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : {0.01, 0.05, 0.5}) {
            const PlanResult r = plan(scenario(Method::Linear, eps));
            REQUIRE(r.status == SolverStatus::Success);
            CHECK(r.tf <= prev + 1e-6);
            CHECK(r.max_cspez <= eps + 1e-6);
            prev = r.tf;
        }
    }

    TEST_CASE("post-hoc report") {
        const PlanProblem p = scenario(Method::Linear, 0.05);
        const PlanResult r = plan(p);
        REQUIRE(r.status == SolverStatus::Success);
        const ValidationReport v = validate(r.trajectory, p, 4000, 7);
        CHECK(v.n_points == 4 * p.n_samples);
        CHECK(v.start_error < 1e-6);
        CHECK(v.goal_error < 1e-6);
        CHECK(v.max_estimate <= p.epsilon + 0.01);
        CHECK(v.region_excess <= 0.0);
        const ValidationReport again = validate(r.trajectory, p, 4000, 7);
        CHECK(again.mc_cspez == v.mc_cspez);
    }

    TEST_CASE("validation of simple trajectories") {
        PlanProblem p = scenario(Method::Linear, 0.05);
        // Straight line that keeps far from the pursuer.
        p.start = {-5.5, 5.0};
        p.goal = {-1.5, 5.5};
        const SplineTrajectory far(3, 0.0, norm(p.goal - p.start),
                                   straight_line_controls(p.start, p.goal, p.n_control, p.degree));
        CHECK(validate(far, p, 2000, 1).max_mc_cspez == 0.0);
        // Head-on line with a nearly certain pursuer: at (1.4, 1.4) the
        // projected point sits on the pursuer.
        p.start = {4.0, 4.0};
        p.goal = {-4.0, -4.0};
        p.belief.cov_position *= 1e-6;
        p.belief.var_heading *= 1e-6;
        p.belief.var_turn_radius *= 1e-6;
        p.belief.var_range *= 1e-6;
        p.belief.var_speed *= 1e-6;
        const SplineTrajectory through(3, 0.0, norm(p.goal - p.start),
                                       straight_line_controls(p.start, p.goal, p.n_control, p.degree));
        CHECK(validate(through, p, 2000, 1).max_mc_cspez > 0.95);
    }

    TEST_CASE("problem json") {
        const PlanProblem p = scenario(Method::Quadratic, 0.25);
        const PlanProblem back = problem_from_json(problem_to_json(p));
        CHECK(back.method == Method::Quadratic);
        CHECK(back.epsilon == 0.25);
        CHECK(back.start.x == p.start.x);
        CHECK_THROWS(problem_from_json({{"unknown", 1}}));
        CHECK_THROWS(problem_from_json({{"epsilon", 0.0}}));
        CHECK_THROWS(problem_from_json({{"n_control", 20}}));
    }
}
