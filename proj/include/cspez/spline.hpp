#pragma once

// Planar B-spline trajectories on an unclamped uniform knot vector
//   t0 - k D, ..., t0, t0 + D, ..., tf, ..., tf + k D,   D = (tf - t0) / N_k,
// with N_k = N_c - k so that [t0, tf] is exactly the fully supported span.
// Scalars are templated so the planner can push dual numbers through the
// control points and the final time.

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "cspez/dual.hpp"
#include "cspez/geometry.hpp"

namespace cspez {

class SplineDomainError : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

/// Speed at or below the floor leaves turn rate and curvature undefined.
class DegenerateVelocity : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

template <typename T>
struct BasicFlatOutputs {
    BasicVec2<T> position;
    T speed{};
    T turn_rate{};
    T curvature{};
    T heading{};
};

using FlatOutputs = BasicFlatOutputs<double>;

/// Relative slack accepted on the ends of [t0, tf].
inline constexpr double kSplineTimeSlack = 1e-12;

/// Non-zero degree-`p` basis functions N_{span-p..span, p}(t) (Cox-de Boor,
/// triangular form). `knots` must satisfy knots[span] <= t < knots[span+1]
/// up to the end of the domain.
template <typename T>
std::vector<T> basis_functions(const std::vector<T>& knots, int span, const T& t, int p) {
    std::vector<T> n(static_cast<std::size_t>(p + 1), T(0.0));
    std::vector<T> left(static_cast<std::size_t>(p + 1), T(0.0));
    std::vector<T> right(static_cast<std::size_t>(p + 1), T(0.0));
    n[0] = T(1.0);
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = t - knots[static_cast<std::size_t>(span + 1 - j)];
        right[static_cast<std::size_t>(j)] = knots[static_cast<std::size_t>(span + j)] - t;
        T saved = T(0.0);
        for (int r = 0; r < j; ++r) {
            const T denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const T temp = n[static_cast<std::size_t>(r)] / denom;
            n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        n[static_cast<std::size_t>(j)] = saved;
    }
    return n;
}

template <typename T>
class BasicSpline {
   public:
    BasicSpline() = default;

    BasicSpline(int degree, T t0, T tf, std::vector<BasicVec2<T>> control_points)
        : degree_(degree), t0_(std::move(t0)), tf_(std::move(tf)), ctrl_(std::move(control_points)) {
        if (degree_ < 1) throw std::invalid_argument("spline degree must be at least 1");
        if (static_cast<int>(ctrl_.size()) <= degree_) {
            throw std::invalid_argument("spline needs more control points than its degree");
        }
        if (!(value_of(tf_) > value_of(t0_))) throw std::invalid_argument("spline requires tf > t0");
        rebuild_knots();
    }

    int degree() const { return degree_; }
    const T& t0() const { return t0_; }
    const T& tf() const { return tf_; }
    int n_control() const { return static_cast<int>(ctrl_.size()); }
    int n_internal_knots() const { return n_control() - degree_; }
    T spacing() const { return (tf_ - t0_) / T(static_cast<double>(n_internal_knots())); }
    const std::vector<T>& knots() const { return knots_; }
    const std::vector<BasicVec2<T>>& control_points() const { return ctrl_; }

    /// Knot span index s with knots[s] <= t < knots[s+1], clamped to the domain.
    int span(const T& t) const {
        const double tv = value_of(t);
        const double t0 = value_of(t0_);
        const double tf = value_of(tf_);
        const double slack = kSplineTimeSlack * std::max({1.0, std::abs(t0), std::abs(tf)});
        if (!std::isfinite(tv) || tv < t0 - slack || tv > tf + slack) {
            throw SplineDomainError("t = " + std::to_string(tv) + " is outside [" + std::to_string(t0) + ", " +
                                    std::to_string(tf) + "]");
        }
        const double u = (tv - t0) / (tf - t0) * n_internal_knots();
        int s = degree_ + static_cast<int>(std::floor(u));
        if (s < degree_) s = degree_;
        if (s > n_control() - 1) s = n_control() - 1;
        return s;
    }

    /// Position and derivatives up to order `max_order` (<= degree) at t.
    std::vector<BasicVec2<T>> derivatives(const T& t, int max_order) const {
        if (max_order < 0 || max_order > degree_) throw std::invalid_argument("derivative order out of range");
        const int s = span(t);
        const int k = degree_;
        // Local control points c_{s-k..s}, differenced in place.
        std::vector<BasicVec2<T>> pts(ctrl_.begin() + (s - k), ctrl_.begin() + (s + 1));
        std::vector<BasicVec2<T>> out;
        out.reserve(static_cast<std::size_t>(max_order + 1));
        for (int d = 0; d <= max_order; ++d) {
            if (d > 0) {
                // P^(d)_i = (k-d+1) (P^(d-1)_{i+1} - P^(d-1)_i) / (U_{i+k+1} - U_{i+d}), global index i.
                for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
                    const int gi = s - k + static_cast<int>(j);
                    const T denom = knots_[static_cast<std::size_t>(gi + k + 1)] - knots_[static_cast<std::size_t>(gi + d)];
                    const T scale = T(static_cast<double>(k - d + 1)) / denom;
                    pts[j] = scale * (pts[j + 1] - pts[j]);
                }
                pts.pop_back();
            }
            // Degree k-d basis at span s; active functions s-(k-d)..s map to pts[0..].
            const std::vector<T> n = basis_functions(knots_, s, t, k - d);
            BasicVec2<T> acc{T(0.0), T(0.0)};
            for (std::size_t j = 0; j < n.size(); ++j) acc = acc + n[j] * pts[j];
            out.push_back(acc);
        }
        return out;
    }

    BasicVec2<T> eval(const T& t) const { return derivatives(t, 0)[0]; }
    BasicVec2<T> eval_d1(const T& t) const { return derivatives(t, 1)[1]; }
    BasicVec2<T> eval_d2(const T& t) const {
        if (degree_ < 2) return {T(0.0), T(0.0)};
        return derivatives(t, 2)[2];
    }

    /// Unicycle flat outputs: v = |p'|, u = (p' x p'') / |p'|^2, kappa = u / v.
    BasicFlatOutputs<T> flat_outputs(const T& t, double v_floor) const {
        using std::atan2;
        const auto d = derivatives(t, std::min(2, degree_));
        const BasicVec2<T> vel = d[1];
        const BasicVec2<T> acc = degree_ >= 2 ? d[2] : BasicVec2<T>{T(0.0), T(0.0)};
        const T v_sq = dot(vel, vel);
        const T v = norm(vel);
        if (!(value_of(v) > v_floor)) {
            throw DegenerateVelocity("speed " + std::to_string(value_of(v)) + " at t = " + std::to_string(value_of(t)) +
                                     " is below the floor " + std::to_string(v_floor));
        }
        BasicFlatOutputs<T> out;
        out.position = d[0];
        out.speed = v;
        out.turn_rate = cross(vel, acc) / v_sq;
        out.curvature = out.turn_rate / v;
        out.heading = atan2(vel.y, vel.x);
        return out;
    }

    /// All basis function values B_{i,k}(t), i = 0..N_c-1 (zero off the span).
    std::vector<T> basis_row(const T& t) const {
        const int s = span(t);
        const std::vector<T> n = basis_functions(knots_, s, t, degree_);
        std::vector<T> row(ctrl_.size(), T(0.0));
        for (int j = 0; j <= degree_; ++j) row[static_cast<std::size_t>(s - degree_ + j)] = n[static_cast<std::size_t>(j)];
        return row;
    }

   private:
    void rebuild_knots() {
        const int nk = n_internal_knots();
        const T delta = spacing();
        knots_.clear();
        for (int j = 0; j <= n_control() + degree_; ++j) {
            knots_.push_back(t0_ + T(static_cast<double>(j - degree_)) * delta);
        }
        // Pin the domain ends exactly.
        knots_[static_cast<std::size_t>(degree_)] = t0_;
        knots_[static_cast<std::size_t>(degree_ + nk)] = tf_;
    }

    int degree_ = 3;
    T t0_{};
    T tf_{};
    std::vector<BasicVec2<T>> ctrl_;
    std::vector<T> knots_;
};

using SplineTrajectory = BasicSpline<double>;

/// {degree, t0, tf, n_internal_knots, control_points: [[x, y], ...]}; strict.
nlohmann::json spline_to_json(const SplineTrajectory& s);
SplineTrajectory spline_from_json(const nlohmann::json& j);

}  // namespace cspez
