#pragma once

// Curve-straight intercept geometry: a pursuer turns on a circle of radius a
// (left or right) and then flies a straight tangent segment to the point F
// where a constant-heading evader will be once the pursuer has used its range.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "cspez/dual.hpp"

namespace cspez {

/// Thrown when neither turn side admits a curve-straight path.
class DegenerateGeometry : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

template <typename T>
struct BasicVec2 {
    T x{};
    T y{};

    friend BasicVec2 operator+(const BasicVec2& a, const BasicVec2& b) { return {a.x + b.x, a.y + b.y}; }
    friend BasicVec2 operator-(const BasicVec2& a, const BasicVec2& b) { return {a.x - b.x, a.y - b.y}; }
    friend BasicVec2 operator*(const T& s, const BasicVec2& a) { return {s * a.x, s * a.y}; }
    friend BasicVec2 operator*(const BasicVec2& a, const T& s) { return {s * a.x, s * a.y}; }
};

using Vec2 = BasicVec2<double>;

template <typename T>
T dot(const BasicVec2<T>& a, const BasicVec2<T>& b) {
    return a.x * b.x + a.y * b.y;
}

/// Scalar 2D cross product a x b.
template <typename T>
T cross(const BasicVec2<T>& a, const BasicVec2<T>& b) {
    return a.x * b.y - a.y * b.x;
}

template <typename T>
T norm(const BasicVec2<T>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

enum class TurnSide { Left, Right };

/// Pursuer parameters, ordered as the parameter vector [x, y, heading, a, R, v].
template <typename T>
struct BasicPursuer {
    BasicVec2<T> position;
    T heading{};
    T turn_radius{};
    T range{};
    T speed{};

    static BasicPursuer from_vector(const std::array<T, 6>& theta) {
        return {{theta[0], theta[1]}, theta[2], theta[3], theta[4], theta[5]};
    }
    std::array<T, 6> to_vector() const { return {position.x, position.y, heading, turn_radius, range, speed}; }
};

using PursuerParams = BasicPursuer<double>;

template <typename T>
struct BasicEvader {
    BasicVec2<T> position;
    T heading{};
    T speed{};
};

using EvaderState = BasicEvader<double>;

template <typename T>
struct BasicCsPath {
    TurnSide side = TurnSide::Left;
    T arc_angle{};
    BasicVec2<T> tangent_point;
    T length{};
};

using CsPath = BasicCsPath<double>;

/// Throws std::invalid_argument unless a > 0, R > 0, v_P > 0 and all fields are finite.
void validate(const PursuerParams& p);
/// Throws std::invalid_argument unless v_E >= 0 and all fields are finite.
void validate(const EvaderState& e);

/// Arc angles this close below zero are treated as zero rather than wrapped to
/// a full turn; it keeps the straight-ahead case exact under rounding.
inline constexpr double kArcAngleSnap = 1e-12;
/// ||F - C|| within this relative band of a counts as on the turn circle.
inline constexpr double kCircleBand = 1e-12;

/// Interception point F = E + (v_E / v_P) R [cos psi_E, sin psi_E].
template <typename T>
BasicVec2<T> project_evader(const BasicEvader<T>& e, const T& range, const T& pursuer_speed) {
    using std::cos;
    using std::sin;
    const T reach = e.speed / pursuer_speed * range;
    return {e.position.x + reach * cos(e.heading), e.position.y + reach * sin(e.heading)};
}

/// Checked overload of project_evader for plain doubles.
Vec2 project_evader(const EvaderState& e, double range, double pursuer_speed);

template <typename T>
BasicVec2<T> turn_center(const BasicPursuer<T>& p, TurnSide side) {
    using std::cos;
    using std::sin;
    const T s = sin(p.heading);
    const T c = cos(p.heading);
    if (side == TurnSide::Left) return {p.position.x - p.turn_radius * s, p.position.y + p.turn_radius * c};
    return {p.position.x + p.turn_radius * s, p.position.y - p.turn_radius * c};
}

/// Shortest path that turns on the `side` circle and then flies straight to
/// `target`. Empty when the target is strictly inside that circle.
template <typename T>
std::optional<BasicCsPath<T>> cs_path(const BasicVec2<T>& target, const BasicPursuer<T>& p, TurnSide side) {
    using std::atan2;
    using std::sqrt;
    const T& a = p.turn_radius;
    const BasicVec2<T> center = turn_center(p, side);
    const BasicVec2<T> v1 = target - center;
    const BasicVec2<T> v4 = p.position - center;
    const T v1_sq = dot(v1, v1);
    const T a_sq = a * a;
    const double gap = value_of(v1_sq) - value_of(a_sq);
    const double band = 2.0 * kCircleBand * value_of(a_sq);
    if (gap < -band) return std::nullopt;

    // v3 = alpha v1 + beta v1_perp with v1 . v3 = a^2 and |v3| = a.
    const T alpha = a_sq / v1_sq;
    T beta{};
    if (gap > band) beta = sqrt(a_sq - a_sq * alpha);
    const T v1_len = sqrt(v1_sq);
    // Clockwise perpendicular for the left circle, counter-clockwise for the right.
    const BasicVec2<T> perp =
        side == TurnSide::Left ? BasicVec2<T>{v1.y / v1_len, -v1.x / v1_len} : BasicVec2<T>{-v1.y / v1_len, v1.x / v1_len};
    const BasicVec2<T> v3 = alpha * v1 + beta * perp;

    T theta = side == TurnSide::Left ? atan2(cross(v4, v3), dot(v4, v3)) : atan2(-cross(v4, v3), dot(v4, v3));
    if (theta < 0.0) {
        if (theta > -kArcAngleSnap) {
            theta = T(0.0);
        } else {
            theta = theta + T(2.0 * std::numbers::pi);
        }
    }

    BasicCsPath<T> out;
    out.side = side;
    out.arc_angle = theta;
    out.tangent_point = center + v3;
    out.length = a * theta + norm(target - out.tangent_point);
    return out;
}

/// min(L_left, L_right); ties resolve to the left path. Throws
/// DegenerateGeometry when neither side has a tangent.
template <typename T>
BasicCsPath<T> shortest_cs_path(const BasicVec2<T>& target, const BasicPursuer<T>& p) {
    const auto left = cs_path(target, p, TurnSide::Left);
    const auto right = cs_path(target, p, TurnSide::Right);
    if (left && right) return right->length < left->length ? *right : *left;
    if (left) return *left;
    if (right) return *right;
    throw DegenerateGeometry("target lies strictly inside both turn circles");
}

template <typename T>
T shortest_cs_length(const BasicVec2<T>& target, const BasicPursuer<T>& p) {
    return shortest_cs_path(target, p).length;
}

/// Engagement-zone function z = L(F) - R; the evader is capturable iff z <= 0.
template <typename T>
T ez_value(const BasicEvader<T>& e, const BasicPursuer<T>& p) {
    const BasicVec2<T> f = project_evader(e, p.range, p.speed);
    if (value_of(f.x) == value_of(p.position.x) && value_of(f.y) == value_of(p.position.y)) return -p.range;
    return shortest_cs_length(f, p) - p.range;
}

/// ez_value with the parameters packed as [x, y, heading, a, R, v].
template <typename T>
T ez_value(const BasicEvader<T>& e, const std::array<T, 6>& theta) {
    return ez_value(e, BasicPursuer<T>::from_vector(theta));
}

/// z for parameter vectors that may fall outside the physical domain, as drawn
/// from a Gaussian belief. Non-positive pursuer speed never captures (+inf);
/// a negative turn radius is clamped to zero (pure pursuit in a straight line).
double ez_value_extended(const EvaderState& e, std::array<double, 6> theta);

/// Mixes e into a T-typed evader (e.g. to differentiate only w.r.t. pursuer terms).
template <typename T>
BasicEvader<T> lift(const EvaderState& e) {
    return {{T(e.position.x), T(e.position.y)}, T(e.heading), T(e.speed)};
}

std::string to_string(TurnSide side);

}  // namespace cspez
