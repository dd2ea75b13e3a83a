#include "cspez/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cspez/mlp.hpp"
#include "cspez/parallel.hpp"

namespace cspez {

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double estimate_value(Method m, const Configuration& c, const MlpModel* model) {
    return estimate(m, c.belief, c.evader, model).probability;
}

}  // namespace

MethodErrors error_metrics(Method method, const std::vector<double>& estimate, const std::vector<double>& truth) {
    if (estimate.size() != truth.size()) throw std::invalid_argument("error_metrics: size mismatch");
    MethodErrors e;
    e.method = method;
    e.n = truth.size();
    if (e.n == 0) return e;
    double sq = 0.0;
    double ab = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = std::abs(estimate[i] - truth[i]);
        sq += d * d;
        ab += d;
        e.max_ae = std::max(e.max_ae, d);
    }
    e.mse = sq / static_cast<double>(e.n);
    e.rmse = std::sqrt(e.mse);
    e.aae = ab / static_cast<double>(e.n);
    return e;
}

std::vector<double> ErrorReport::abs_errors(Method m) const {
    const auto& est = estimates.at(m);
    std::vector<double> out(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) out[i] = std::abs(est[i] - truth[i]);
    return out;
}

ErrorReport compare_methods(const std::vector<Configuration>& configs, std::size_t mc_n, std::uint64_t seed,
                            const MlpModel* model, unsigned workers) {
    if (configs.empty()) throw std::invalid_argument("compare_methods: no configurations");
    std::vector<Method> methods = {Method::Linear, Method::Quadratic};
    if (model != nullptr) methods.push_back(Method::Neural);

    ErrorReport r;
    r.n_configs = configs.size();
    r.truth.assign(configs.size(), 0.0);
    r.traces.assign(configs.size(), 0.0);
    for (Method m : methods) r.estimates[m].assign(configs.size(), 0.0);
    parallel_for(configs.size(), workers, [&](std::size_t i) {
        RngStream rng = RngStream::split(seed, i);
        r.truth[i] = mc_cspez(configs[i].belief, configs[i].evader, mc_n, rng).probability;
        r.traces[i] = configs[i].belief.trace();
        for (Method m : methods) r.estimates[m][i] = estimate_value(m, configs[i], model);
    });
    for (Method m : methods) r.metrics.push_back(error_metrics(m, r.estimates.at(m), r.truth));
    return r;
}

std::vector<double> LevelSetGrid::abs_error(Method m) const {
    const auto& p = probability.at(m);
    std::vector<double> out(mc.size());
    for (std::size_t i = 0; i < mc.size(); ++i) out[i] = std::abs(p[i] - mc[i]);
    return out;
}

LevelSetGrid level_set_grid(const PursuerBelief& belief, double evader_heading, double evader_speed, const GridSpec& grid,
                            const std::vector<Method>& methods, std::size_t mc_n, std::uint64_t seed,
                            const MlpModel* model, unsigned workers) {
    if (grid.nx < 0 || grid.ny < 0) throw std::invalid_argument("level_set_grid: negative grid size");
    belief.validate();
    LevelSetGrid g;
    g.grid = grid;
    g.thresholds = {0.01, 0.05, 0.25, 0.5};
    for (Method m : methods) {
        if (m == Method::MonteCarlo) continue;
        g.methods.push_back(m);
    }
    const std::size_t cells = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny);
    g.mc.assign(cells, 0.0);
    for (Method m : g.methods) g.probability[m].assign(cells, 0.0);
    parallel_for(cells, workers, [&](std::size_t c) {
        const int i = static_cast<int>(c % static_cast<std::size_t>(grid.nx));
        const int j = static_cast<int>(c / static_cast<std::size_t>(grid.nx));
        const EvaderState e{{grid.x(i), grid.y(j)}, evader_heading, evader_speed};
        RngStream rng = RngStream::split(seed, c);
        g.mc[c] = mc_cspez(belief, e, mc_n, rng).probability;
        for (Method m : g.methods) g.probability[m][c] = estimate(m, belief, e, model).probability;
    });
    return g;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: size mismatch");
    if (a.size() < 2) return 0.0;
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

TraceBinReport trace_binned_errors(const std::vector<double>& traces, const std::map<Method, std::vector<double>>& abs_errors,
                                   int bins) {
    if (bins < 2) throw std::invalid_argument("trace_binned_errors: need at least two bins");
    if (traces.empty()) throw std::invalid_argument("trace_binned_errors: no samples");
    for (const auto& [m, e] : abs_errors) {
        if (e.size() != traces.size()) throw std::invalid_argument("trace_binned_errors: size mismatch for " + to_string(m));
    }
    const auto [lo_it, hi_it] = std::minmax_element(traces.begin(), traces.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double width = hi > lo ? (hi - lo) / bins : 1.0;

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < traces.size(); ++i) {
        int b = static_cast<int>(std::floor((traces[i] - lo) / width));
        b = std::clamp(b, 0, bins - 1);
        members[static_cast<std::size_t>(b)].push_back(i);
    }

    TraceBinReport r;
    std::map<Method, std::vector<double>> centres, medians;
    for (int b = 0; b < bins; ++b) {
        const auto& idx = members[static_cast<std::size_t>(b)];
        if (idx.empty()) {
            ++r.skipped_bins;
            continue;
        }
        TraceBin bin;
        bin.lo = lo + b * width;
        bin.hi = b == bins - 1 ? hi : lo + (b + 1) * width;
        bin.count = idx.size();
        for (const auto& [m, e] : abs_errors) {
            std::vector<double> vals;
            vals.reserve(idx.size());
            for (std::size_t i : idx) vals.push_back(e[i]);
            bin.median_error[m] = median(std::move(vals));
            centres[m].push_back(0.5 * (bin.lo + bin.hi));
            medians[m].push_back(bin.median_error[m]);
        }
        r.bins.push_back(std::move(bin));
    }
    for (const auto& [m, e] : abs_errors) {
        r.spearman_samples[m] = spearman(traces, e);
        r.spearman_bins[m] = spearman(centres[m], medians[m]);
    }
    return r;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const std::vector<MethodErrors>& metrics) {
    os << "method,n,mse,rmse,aae,max_ae\n";
    for (const auto& m : metrics) {
        os << to_string(m.method) << ',' << m.n << ',' << format_double(m.mse) << ',' << format_double(m.rmse) << ','
           << format_double(m.aae) << ',' << format_double(m.max_ae) << '\n';
    }
}

void write_grid_csv(std::ostream& os, const LevelSetGrid& g) {
    os << "x,y,method,p,abs_err\n";
    for (int j = 0; j < g.grid.ny; ++j) {
        for (int i = 0; i < g.grid.nx; ++i) {
            const std::size_t c = static_cast<std::size_t>(j) * static_cast<std::size_t>(g.grid.nx) + static_cast<std::size_t>(i);
            const std::string xy = format_double(g.grid.x(i)) + ',' + format_double(g.grid.y(j)) + ',';
            os << xy << "mc," << format_double(g.mc[c]) << ",0\n";
            for (Method m : g.methods) {
                const double p = g.probability.at(m)[c];
                os << xy << to_string(m) << ',' << format_double(p) << ',' << format_double(std::abs(p - g.mc[c])) << '\n';
            }
        }
    }
}

void write_trace_bins_csv(std::ostream& os, const TraceBinReport& r) {
    os << "bin_lo,bin_hi,count,method,median_err\n";
    for (const auto& b : r.bins) {
        for (const auto& [m, med] : b.median_error) {
            os << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ',' << to_string(m) << ','
               << format_double(med) << '\n';
        }
    }
}

}  // namespace cspez
