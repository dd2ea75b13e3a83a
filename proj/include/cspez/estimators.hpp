#pragma once

// Probability that an evader lies in the true engagement zone when the
// pursuer parameters are Gaussian: Monte Carlo, first-order (linear),
// second-order (quadratic) and neural-surrogate estimators.

#include <cstddef>
#include <optional>
#include <string>

#include "cspez/belief.hpp"
#include "cspez/diff.hpp"
#include "cspez/geometry.hpp"

namespace cspez {

class MlpModel;

enum class Method { MonteCarlo, Linear, Quadratic, Neural };

std::string to_string(Method m);
/// Accepts "mc", "linear", "quadratic", "nn".
Method method_from_string(const std::string& name);

struct CspezEstimate {
    double probability = 0.0;
    Method method = Method::MonteCarlo;
    std::optional<double> mean_z;
    std::optional<double> var_z;
    std::size_t n_samples = 0;
    /// Derivatives were non-finite; probability fell back to 1(mu_z <= 0).
    bool degraded = false;
    /// Surrogate query outside the model's training box.
    bool extrapolated = false;
};

/// Mean and variance of z under a local polynomial model of z about the mean.
template <typename S>
struct ZMoments {
    S mean{};
    S variance{};
    bool finite = true;
};

/// Sigma-weighted quadratic form g^T cov g for the block-structured covariance.
template <typename S>
S covariance_quadratic_form(const std::array<S, 6>& g, const Cov6& cov) {
    S acc = S(0.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            const double c = cov(i, j);
            if (c != 0.0) acc = acc + g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] * c;
        }
    }
    return acc;
}

/// First-order moments: mu = f(mean), var = J cov J^T. `f` takes
/// std::array<Dual<S, 6>, 6>.
template <typename S, typename F>
ZMoments<S> linear_moments(F&& f, const std::array<S, 6>& mean, const Cov6& cov) {
    std::array<Dual<S, 6>, 6> theta;
    for (int i = 0; i < 6; ++i) theta[static_cast<std::size_t>(i)] = Dual<S, 6>::variable(mean[static_cast<std::size_t>(i)], i);
    const Dual<S, 6> z = f(theta);
    ZMoments<S> out;
    out.mean = z.v;
    out.variance = covariance_quadratic_form(z.d, cov);
    out.finite = all_finite(z);
    return out;
}

/// Second-order moments of the quadratic model z0 + J d + 1/2 d^T H d with
/// d ~ N(0, cov):  mu = z0 + 1/2 tr(H cov),  var = J cov J^T + 1/2 tr(H cov H cov).
/// `f` takes std::array<Dual<Dual<S, 6>, 6>, 6>.
template <typename S, typename F>
ZMoments<S> quadratic_moments(F&& f, const std::array<S, 6>& mean, const Cov6& cov) {
    using Inner = Dual<S, 6>;
    using Outer = Dual<Inner, 6>;
    std::array<Outer, 6> theta;
    for (int i = 0; i < 6; ++i) {
        const auto k = static_cast<std::size_t>(i);
        theta[k] = Outer::variable(Inner::variable(mean[k], i), i);
    }
    const Outer z = f(theta);

    std::array<S, 6> grad;
    S hess[6][6];
    for (int i = 0; i < 6; ++i) {
        grad[static_cast<std::size_t>(i)] = z.v.d[static_cast<std::size_t>(i)];
        for (int j = 0; j < 6; ++j) {
            hess[i][j] = S(0.5) * (z.d[static_cast<std::size_t>(i)].d[static_cast<std::size_t>(j)] +
                                   z.d[static_cast<std::size_t>(j)].d[static_cast<std::size_t>(i)]);
        }
    }
    // M = H cov
    S m[6][6];
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            S acc = S(0.0);
            for (int k = 0; k < 6; ++k) {
                const double c = cov(k, j);
                if (c != 0.0) acc = acc + hess[i][k] * c;
            }
            m[i][j] = acc;
        }
    }
    S tr_m = S(0.0);
    S tr_mm = S(0.0);
    for (int i = 0; i < 6; ++i) {
        tr_m = tr_m + m[i][i];
        for (int j = 0; j < 6; ++j) tr_mm = tr_mm + m[i][j] * m[j][i];
    }

    ZMoments<S> out;
    out.mean = z.v.v + S(0.5) * tr_m;
    out.variance = covariance_quadratic_form(grad, cov) + S(0.5) * tr_mm;
    out.finite = all_finite(z);
    return out;
}

/// z as a function of the pursuer parameter vector for a fixed evader.
template <typename S>
auto ez_of_params(const BasicEvader<S>& e) {
    return [e](const auto& theta) {
        using J = std::decay_t<decltype(theta[0])>;
        const BasicEvader<J> ej{{lift_to<J>(e.position.x), lift_to<J>(e.position.y)}, lift_to<J>(e.heading),
                                lift_to<J>(e.speed)};
        return ez_value(ej, theta);
    };
}

template <typename S>
ZMoments<S> linear_moments(const PursuerBelief& b, const BasicEvader<S>& e) {
    std::array<S, 6> mean;
    for (std::size_t i = 0; i < 6; ++i) mean[i] = S(b.mean[i]);
    return linear_moments<S>(ez_of_params(e), mean, b.covariance());
}

template <typename S>
ZMoments<S> quadratic_moments(const PursuerBelief& b, const BasicEvader<S>& e) {
    std::array<S, 6> mean;
    for (std::size_t i = 0; i < 6; ++i) mean[i] = S(b.mean[i]);
    return quadratic_moments<S>(ez_of_params(e), mean, b.covariance());
}

/// Fraction of n belief samples for which z <= 0.
CspezEstimate mc_cspez(const PursuerBelief& b, const EvaderState& e, std::size_t n, RngStream& rng);
CspezEstimate linear_cspez(const PursuerBelief& b, const EvaderState& e);
CspezEstimate quadratic_cspez(const PursuerBelief& b, const EvaderState& e);
CspezEstimate nn_cspez(const MlpModel& model, const PursuerBelief& b, const EvaderState& e);

/// Dispatches to one of the analytic or surrogate estimators; MC needs its
/// own sample count and stream and is rejected here.
CspezEstimate estimate(Method m, const PursuerBelief& b, const EvaderState& e, const MlpModel* model);

/// Default Monte Carlo sample counts.
inline constexpr std::size_t kMcLabelSamples = 100000;
inline constexpr std::size_t kMcQuickSamples = 10000;

}  // namespace cspez
