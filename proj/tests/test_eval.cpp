#include <doctest.h>

#include <random>
#include <sstream>

#include "cspez/config.hpp"
#include "cspez/eval.hpp"

using namespace cspez;

TEST_SUITE("eval") {
    TEST_CASE("metric identities") {
        const std::vector<double> truth{0.1, 0.5, 0.9, 0.0};
        const MethodErrors self = error_metrics(Method::Linear, truth, truth);
        CHECK(self.mse == 0.0);
        CHECK(self.aae == 0.0);
        CHECK(self.max_ae == 0.0);
        const std::vector<double> p(5, 0.3), q(5, 0.3 + 0.125);
        const MethodErrors c = error_metrics(Method::Linear, q, p);
        CHECK(c.aae == doctest::Approx(0.125).epsilon(1e-14));
        CHECK(c.max_ae == doctest::Approx(0.125).epsilon(1e-14));
        CHECK(c.mse == doctest::Approx(0.125 * 0.125).epsilon(1e-14));
        std::mt19937_64 gen(1);
        std::uniform_real_distribution<double> u(0, 1);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> a(40), b(40);
            for (int i = 0; i < 40; ++i) {
                a[i] = u(gen);
                b[i] = u(gen);
            }
            const MethodErrors e = error_metrics(Method::Quadratic, a, b);
            CHECK(e.aae <= e.rmse + 1e-15);
            CHECK(e.rmse <= e.max_ae + 1e-15);
        }
        CHECK_THROWS(error_metrics(Method::Linear, {0.1}, {0.1, 0.2}));
    }

    TEST_CASE("rank statistics") {
        CHECK(spearman({1, 2, 3, 4}, {10, 20, 35, 100}) == doctest::Approx(1.0));
        CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
        CHECK(spearman({1, 2, 3}, {5, 5, 5}) == 0.0);
        // Average ranks for ties: ranks (1.5, 1.5, 3) vs (1, 2, 3).
        CHECK(spearman({1, 1, 2}, {1, 2, 3}) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
        CHECK(median({3, 1, 2}) == 2.0);
        CHECK(median({4, 1, 3, 2}) == 2.5);
    }

    TEST_CASE("trace bins") {
        std::vector<double> trace, err;
        for (int i = 0; i < 100; ++i) {
            trace.push_back(i < 50 ? 0.01 * i : 10.0 + 0.01 * i);
            err.push_back(0.2);
        }
        const TraceBinReport r = trace_binned_errors(trace, {{Method::Linear, err}}, 10);
        CHECK(r.skipped_bins > 0);
        CHECK(r.bins.size() + r.skipped_bins == 10);
        std::size_t total = 0;
        for (const auto& b : r.bins) {
            CHECK(b.median_error.at(Method::Linear) == 0.2);
            total += b.count;
        }
        CHECK(total == 100);
        CHECK(r.spearman_bins.at(Method::Linear) == 0.0);
        CHECK_THROWS(trace_binned_errors(trace, {{Method::Linear, err}}, 1));
    }

    TEST_CASE("level-set grid") {
        const ScenarioConfig c = ScenarioConfig::defaults();
        GridSpec g;
        g.x_min = -12;
        g.x_max = 12;
        g.y_min = -12;
        g.y_max = 12;
        g.nx = 5;
        g.ny = 5;
        const LevelSetGrid grid = level_set_grid(c.belief, 0.0, 1.0, g, {Method::Linear, Method::Quadratic}, 2000, 3, nullptr);
        for (Method m : grid.methods) {
            for (double e : grid.abs_error(m)) CHECK(e >= 0.0);
        }
        // Corner cells are far out of range.
        for (std::size_t cell : {std::size_t{0}, std::size_t{4}, std::size_t{20}, std::size_t{24}}) {
            CHECK(grid.mc[cell] < 0.01);
            CHECK(grid.probability.at(Method::Linear)[cell] < 0.01);
            CHECK(grid.probability.at(Method::Quadratic)[cell] < 0.01);
        }
        std::ostringstream os;
        write_grid_csv(os, grid);
        const std::string s = os.str();
        CHECK(s.rfind("x,y,method,p,abs_err\n", 0) == 0);
        CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 25 * 3);
        CHECK(s.find('\r') == std::string::npos);

        GridSpec empty = g;
        empty.nx = 0;
        std::ostringstream e;
        write_grid_csv(e, level_set_grid(c.belief, 0.0, 1.0, empty, {Method::Linear}, 100, 3, nullptr));
        CHECK(e.str() == "x,y,method,p,abs_err\n");
    }

    TEST_CASE("comparison is reproducible across worker counts") {
        ScenarioConfig c = ScenarioConfig::defaults();
        c.compare_configs = 60;
        c.mc_eval = 500;
        const ErrorReport a = run_compare(c, nullptr);
        c.workers = 3;
        const ErrorReport b = run_compare(c, nullptr);
        CHECK(a.truth == b.truth);
        CHECK(a.estimates == b.estimates);
        std::ostringstream os;
        write_metrics_csv(os, a.metrics);
        CHECK(os.str().rfind("method,n,mse,rmse,aae,max_ae\nlinear,60,", 0) == 0);
    }
}
