#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <stdexcept>
#include <vector>

#include "cspez/diff.hpp"

namespace cspez {

class SingularCovariance : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

using Cov6 = Eigen::Matrix<double, 6, 6>;

/// Gaussian belief over [x, y, heading, a, R, v]. Position is a full 2x2
/// block; the remaining parameters are independent.
struct PursuerBelief {
    ParamVector mean{};
    Eigen::Matrix2d cov_position = Eigen::Matrix2d::Zero();
    double var_heading = 0.0;
    double var_turn_radius = 0.0;
    double var_range = 0.0;
    double var_speed = 0.0;

    Cov6 covariance() const;
    double trace() const;

    /// Checks finiteness and positive semidefiniteness. Eigenvalues down to
    /// -1e-10 * trace are accepted as rounding noise.
    void validate() const;

    /// Same belief with every covariance entry replaced by `variance` * I.
    PursuerBelief with_isotropic_covariance(double variance) const;
};

/// Strict JSON schema:
/// {mean: [6], cov_pos: [[2],[2]], var_psi, var_a, var_R, var_v}.
PursuerBelief belief_from_json(const nlohmann::json& j);
nlohmann::json belief_to_json(const PursuerBelief& b);

/// Reproducible random stream. Not shareable between threads; use split()
/// to derive independent substreams.
class RngStream {
   public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Substream `index` of `root`: seeded with splitmix64(root ^ splitmix64(index + 1)).
    static RngStream split(std::uint64_t root, std::uint64_t index) { return RngStream(root ^ mix(index + 1)); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27u)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31u);
    }

   private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Multivariate normal density. Throws SingularCovariance when the
/// covariance is not positive definite.
double density(const PursuerBelief& b, const ParamVector& tau);

/// Lower-triangular square-root factor S with S S^T = covariance.
Cov6 sqrt_factor(const PursuerBelief& b);

/// n parameter vectors drawn from the belief.
std::vector<ParamVector> sample(const PursuerBelief& b, RngStream& rng, std::size_t n);

/// Draws one sample using a precomputed factor.
ParamVector sample_one(const ParamVector& mean, const Cov6& factor, RngStream& rng);

/// Gaussian CDF F(x; mu, var). With var == 0 this is the step 1(x >= mu).
template <typename T>
T gaussian_cdf(const T& x, const T& mu, const T& var) {
    using std::erfc;
    using std::sqrt;
    if (value_of(var) <= 0.0) return T(value_of(x) >= value_of(mu) ? 1.0 : 0.0);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    return T(0.5) * erfc(-(x - mu) / sqrt(var) * T(inv_sqrt2));
}

double gaussian_cdf(double x, double mu, double var);

/// Standard normal quantile, p in (0, 1).
double normal_quantile(double p);

}  // namespace cspez
