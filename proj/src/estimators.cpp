#include "cspez/estimators.hpp"

#include <algorithm>
#include <stdexcept>

#include "cspez/mlp.hpp"
#include "cspez/surrogate.hpp"

namespace cspez {

namespace {

CspezEstimate from_moments(const ZMoments<double>& m, Method method) {
    CspezEstimate out;
    out.method = method;
    out.mean_z = m.mean;
    out.var_z = m.variance;
    if (!m.finite || !std::isfinite(m.variance)) {
        out.degraded = true;
        out.probability = m.mean <= 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.probability = std::clamp(gaussian_cdf(0.0, m.mean, std::max(m.variance, 0.0)), 0.0, 1.0);
    return out;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::MonteCarlo:
            return "mc";
        case Method::Linear:
            return "linear";
        case Method::Quadratic:
            return "quadratic";
        case Method::Neural:
            return "nn";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "mc") return Method::MonteCarlo;
    if (name == "linear") return Method::Linear;
    if (name == "quadratic") return Method::Quadratic;
    if (name == "nn") return Method::Neural;
    throw std::invalid_argument("unknown method '" + name + "' (expected mc|linear|quadratic|nn)");
}

CspezEstimate mc_cspez(const PursuerBelief& b, const EvaderState& e, std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("mc_cspez requires at least one sample");
    validate(e);
    const Cov6 factor = sqrt_factor(b);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const ParamVector theta = sample_one(b.mean, factor, rng);
        if (ez_value_extended(e, theta) <= 0.0) ++hits;
    }
    CspezEstimate out;
    out.method = Method::MonteCarlo;
    out.n_samples = n;
    out.probability = static_cast<double>(hits) / static_cast<double>(n);
    return out;
}

CspezEstimate linear_cspez(const PursuerBelief& b, const EvaderState& e) {
    validate(e);
    return from_moments(linear_moments<double>(b, e), Method::Linear);
}

CspezEstimate quadratic_cspez(const PursuerBelief& b, const EvaderState& e) {
    validate(e);
    return from_moments(quadratic_moments<double>(b, e), Method::Quadratic);
}

CspezEstimate nn_cspez(const MlpModel& model, const PursuerBelief& b, const EvaderState& e) {
    if (model.empty()) throw ModelError("surrogate model is empty");
    const FeatureVector f = build_features(b, e);
    CspezEstimate out;
    out.method = Method::Neural;
    out.probability = std::clamp(model.forward(f), 0.0, 1.0);
    out.extrapolated = !model.in_training_box(f) || std::abs(b.mean[2] - model.ranges().reference_heading) > 1e-9;
    return out;
}

CspezEstimate estimate(Method m, const PursuerBelief& b, const EvaderState& e, const MlpModel* model) {
    switch (m) {
        case Method::Linear:
            return linear_cspez(b, e);
        case Method::Quadratic:
            return quadratic_cspez(b, e);
        case Method::Neural:
            if (model == nullptr) throw ModelError("the nn method needs a trained model");
            return nn_cspez(*model, b, e);
        case Method::MonteCarlo:
            break;
    }
    throw std::invalid_argument("estimate(): Monte Carlo needs a sample count and random stream; use mc_cspez");
}

}  // namespace cspez
