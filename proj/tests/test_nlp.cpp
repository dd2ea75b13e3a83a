#include <doctest.h>

#include <functional>

#include "cspez/nlp.hpp"

using namespace cspez;

namespace {

// Small problems given by closures; constraint Jacobians are dense rows.
struct Toy : NlpProblem {
    int n = 2, me = 0, mi = 0;
    Eigen::VectorXd lo, hi;
    std::function<double(const Eigen::VectorXd&)> f;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> ceq, cin;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jeq, jin;

    int n_vars() const override { return n; }
    int n_eq() const override { return me; }
    int n_ineq() const override { return mi; }
    Eigen::VectorXd lower() const override { return lo.size() ? lo : NlpProblem::lower(); }
    Eigen::VectorXd upper() const override { return hi.size() ? hi : NlpProblem::upper(); }
    bool evaluate(const Eigen::VectorXd& x, double& fx, Eigen::VectorXd& c_eq, Eigen::VectorXd& c_in) override {
        fx = f(x);
        c_eq = me ? ceq(x) : Eigen::VectorXd();
        c_in = mi ? cin(x) : Eigen::VectorXd();
        return true;
    }
    Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) override { return grad(x); }
    Eigen::VectorXd constraint_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& w_eq, const Eigen::VectorXd& w_in) override {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        if (me) g += jeq(x).transpose() * w_eq;
        if (mi) g += jin(x).transpose() * w_in;
        return g;
    }
};

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

}  // namespace

TEST_SUITE("nlp") {
    TEST_CASE("equality constrained quadratic") {
        Toy p;
        p.me = 1;
        p.f = [](const Eigen::VectorXd& x) { return std::pow(x[0] - 1, 2) + std::pow(x[1] - 2, 2); };
        p.grad = [](const Eigen::VectorXd& x) { return v2(2 * (x[0] - 1), 2 * (x[1] - 2)); };
        p.ceq = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] + x[1] - 1); };
        p.jeq = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 2); };
        const SolverResult r = solve_augmented_lagrangian(p, v2(3, -1));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(std::abs(r.x[0]) < 1e-6);
        CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.lambda_eq[0] == doctest::Approx(2.0).epsilon(1e-5));
        const KktReport k = kkt_report(p, r.x, r.lambda_eq, r.mu_in);
        CHECK(k.stationarity <= 1e-6);
        CHECK(k.max_violation <= 1e-7);
    }

    TEST_CASE("active inequality") {
        Toy p;
        p.mi = 1;
        p.f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
        p.grad = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(2 * x); };
        p.cin = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 1 - x[0] - x[1]); };
        p.jin = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 2, -1.0); };
        const SolverResult r = solve_augmented_lagrangian(p, v2(-2, 5));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(r.mu_in[0] == doctest::Approx(1.0).epsilon(1e-5));
    }

    TEST_CASE("inactive inequality has a zero multiplier") {
        Toy p;
        p.mi = 1;
        p.f = [](const Eigen::VectorXd& x) { return std::pow(x[0] - 1, 2) + std::pow(x[1] + 1, 2); };
        p.grad = [](const Eigen::VectorXd& x) { return v2(2 * (x[0] - 1), 2 * (x[1] + 1)); };
        p.cin = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x[0] + x[1] - 5); };
        p.jin = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 2); };
        const SolverResult r = solve_augmented_lagrangian(p, v2(0, 0));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.mu_in[0] == doctest::Approx(0.0));
    }

    TEST_CASE("bounds") {
        Toy p;
        p.n = 1;
        p.lo = Eigen::VectorXd::Constant(1, -1.0);
        p.hi = Eigen::VectorXd::Constant(1, 2.0);
        p.f = [](const Eigen::VectorXd& x) { return std::pow(x[0] - 3, 2); };
        p.grad = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 2 * (x[0] - 3)); };
        const SolverResult r = solve_augmented_lagrangian(p, Eigen::VectorXd::Zero(1));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == 2.0);
    }

    TEST_CASE("Rosenbrock") {
        Toy p;
        p.f = [](const Eigen::VectorXd& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
        p.grad = [](const Eigen::VectorXd& x) {
            return v2(-400 * x[0] * (x[1] - x[0] * x[0]) - 2 * (1 - x[0]), 200 * (x[1] - x[0] * x[0]));
        };
        const SolverResult r = solve_augmented_lagrangian(p, v2(-1.2, 1.0));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
    }

    TEST_CASE("nonlinear equality on a circle") {
        Toy p;
        p.me = 1;
        p.f = [](const Eigen::VectorXd& x) { return x[0] + x[1]; };
        p.grad = [](const Eigen::VectorXd&) { return v2(1, 1); };
        p.ceq = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x.squaredNorm() - 2); };
        p.jeq = [](const Eigen::VectorXd& x) { return Eigen::MatrixXd(2 * x.transpose()); };
        const SolverResult r = solve_augmented_lagrangian(p, v2(0.5, -0.3));
        REQUIRE(r.status == SolverStatus::Success);
        CHECK(r.x[0] == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(r.x[1] == doctest::Approx(-1.0).epsilon(1e-6));
    }

    TEST_CASE("contradictory constraints are reported infeasible") {
        Toy p;
        p.n = 1;
        p.mi = 2;
        p.f = [](const Eigen::VectorXd& x) { return x[0]; };
        p.grad = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Ones(1); };
        p.cin = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(1 - x[0], x[0]).eval(); };
        p.jin = [](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::Vector2d(-1, 1)); };
        SolverOptions o;
        o.max_outer = 30;
        const SolverResult r = solve_augmented_lagrangian(p, Eigen::VectorXd::Zero(1), o);
        CHECK(r.status != SolverStatus::Success);
        CHECK(r.max_violation > 0.1);
    }

    TEST_CASE("status names") {
        CHECK(to_string(SolverStatus::Success) == "success");
        CHECK(to_string(SolverStatus::Infeasible) == "infeasible");
    }
}
