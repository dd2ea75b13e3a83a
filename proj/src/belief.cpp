#include "cspez/belief.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <numbers>
#include <set>
#include <string>

namespace cspez {

namespace {

constexpr double kPsdFloor = 1e-10;

double finite_or_throw(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("belief: missing key '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string("belief: '") + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("belief: '") + key + "' must be finite");
    return x;
}

}  // namespace

Cov6 PursuerBelief::covariance() const {
    Cov6 s = Cov6::Zero();
    s.block<2, 2>(0, 0) = cov_position;
    s(2, 2) = var_heading;
    s(3, 3) = var_turn_radius;
    s(4, 4) = var_range;
    s(5, 5) = var_speed;
    return s;
}

double PursuerBelief::trace() const {
    return cov_position(0, 0) + cov_position(1, 1) + var_heading + var_turn_radius + var_range + var_speed;
}

void PursuerBelief::validate() const {
    for (double m : mean) {
        if (!std::isfinite(m)) throw std::invalid_argument("belief mean must be finite");
    }
    if (!covariance().allFinite()) throw std::invalid_argument("belief covariance must be finite");
    if (std::abs(cov_position(0, 1) - cov_position(1, 0)) > 1e-12 * (1.0 + cov_position.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("position covariance must be symmetric");
    }
    const double tol = kPsdFloor * std::max(trace(), 0.0);
    Eigen::SelfAdjointEigenSolver<Cov6> eig(covariance(), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tol) throw std::invalid_argument("belief covariance must be positive semidefinite");
}

PursuerBelief PursuerBelief::with_isotropic_covariance(double variance) const {
    PursuerBelief out = *this;
    out.cov_position = Eigen::Matrix2d::Identity() * variance;
    out.var_heading = out.var_turn_radius = out.var_range = out.var_speed = variance;
    return out;
}

PursuerBelief belief_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("belief: expected a JSON object");
    static const std::set<std::string> allowed{"mean", "cov_pos", "var_psi", "var_a", "var_R", "var_v"};
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw std::invalid_argument("belief: unknown key '" + key + "'");
    }
    PursuerBelief b;
    if (!j.contains("mean") || !j.at("mean").is_array() || j.at("mean").size() != 6) {
        throw std::invalid_argument("belief: 'mean' must be an array of 6 numbers");
    }
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& v = j.at("mean").at(i);
        if (!v.is_number()) throw std::invalid_argument("belief: 'mean' entries must be numbers");
        b.mean[i] = v.get<double>();
    }
    if (!j.contains("cov_pos") || !j.at("cov_pos").is_array() || j.at("cov_pos").size() != 2) {
        throw std::invalid_argument("belief: 'cov_pos' must be a 2x2 array");
    }
    for (std::size_t r = 0; r < 2; ++r) {
        const auto& row = j.at("cov_pos").at(r);
        if (!row.is_array() || row.size() != 2) throw std::invalid_argument("belief: 'cov_pos' must be a 2x2 array");
        for (std::size_t c = 0; c < 2; ++c) {
            if (!row.at(c).is_number()) throw std::invalid_argument("belief: 'cov_pos' entries must be numbers");
            b.cov_position(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row.at(c).get<double>();
        }
    }
    b.var_heading = finite_or_throw(j, "var_psi");
    b.var_turn_radius = finite_or_throw(j, "var_a");
    b.var_range = finite_or_throw(j, "var_R");
    b.var_speed = finite_or_throw(j, "var_v");
    b.validate();
    return b;
}

nlohmann::json belief_to_json(const PursuerBelief& b) {
    nlohmann::json j;
    j["mean"] = std::vector<double>(b.mean.begin(), b.mean.end());
    j["cov_pos"] = {{b.cov_position(0, 0), b.cov_position(0, 1)}, {b.cov_position(1, 0), b.cov_position(1, 1)}};
    j["var_psi"] = b.var_heading;
    j["var_a"] = b.var_turn_radius;
    j["var_R"] = b.var_range;
    j["var_v"] = b.var_speed;
    return j;
}

double density(const PursuerBelief& b, const ParamVector& tau) {
    const Cov6 s = b.covariance();
    Eigen::LLT<Cov6> llt(s);
    if (llt.info() != Eigen::Success) throw SingularCovariance("density requires a positive definite covariance");
    const Eigen::Matrix<double, 6, 6> l = llt.matrixL();
    const double min_diag = l.diagonal().minCoeff();
    if (!(min_diag > 0.0)) throw SingularCovariance("density requires a positive definite covariance");
    Eigen::Matrix<double, 6, 1> r;
    for (int i = 0; i < 6; ++i) r[i] = tau[static_cast<std::size_t>(i)] - b.mean[static_cast<std::size_t>(i)];
    const Eigen::Matrix<double, 6, 1> w = llt.matrixL().solve(r);
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double log_norm = -0.5 * (6.0 * std::log(2.0 * std::numbers::pi) + log_det);
    return std::exp(log_norm - 0.5 * w.squaredNorm());
}

Cov6 sqrt_factor(const PursuerBelief& b) {
    Cov6 s = b.covariance();
    Eigen::LLT<Cov6> llt(s);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double tr = b.trace();
    if (tr > 0.0) {
        Cov6 jittered = s;
        jittered.diagonal().array() += 1e-12 * tr / 6.0;
        Eigen::LLT<Cov6> retry(jittered);
        if (retry.info() == Eigen::Success) return retry.matrixL();
    }
    // Semidefinite: symmetric square root with clamped eigenvalues.
    Eigen::SelfAdjointEigenSolver<Cov6> eig(s);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -kPsdFloor * std::max(tr, 0.0)) {
        throw SingularCovariance("covariance is not positive semidefinite");
    }
    const Eigen::Matrix<double, 6, 1> root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

ParamVector sample_one(const ParamVector& mean, const Cov6& factor, RngStream& rng) {
    std::array<double, 6> w;
    for (double& x : w) x = rng.normal();
    ParamVector out = mean;
    for (int i = 0; i < 6; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 6; ++k) acc += factor(i, k) * w[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] += acc;
    }
    return out;
}

std::vector<ParamVector> sample(const PursuerBelief& b, RngStream& rng, std::size_t n) {
    const Cov6 factor = sqrt_factor(b);
    std::vector<ParamVector> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(b.mean, factor, rng));
    return out;
}

double gaussian_cdf(double x, double mu, double var) { return gaussian_cdf<double>(x, mu, var); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
    // Acklam's rational approximation, then Newton steps on the exact CDF.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 3; ++it) {
        const double err = gaussian_cdf(x, 0.0, 1.0) - p;
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        if (pdf <= 0.0) break;
        x -= err / pdf;
    }
    return x;
}

}  // namespace cspez
