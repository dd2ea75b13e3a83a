#pragma once

// Reference implementations used only by tests. They are written from first
// principles and share no code with the library routines they check.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace oracle {

struct Point {
    double x, y;
};

/// Shortest arc-then-straight length by scanning the arc angle. Along the arc
/// the pursuer sits at Q(th) with heading h(th); F is reached by a straight
/// tangent leg when cross(h, F - Q) = 0 with dot(h, F - Q) >= 0. Sign changes
/// of the residual on a uniform grid are refined by bisection.
inline std::optional<double> cs_length_side(Point f, Point p, double heading, double a, bool left, int grid = 1 << 14) {
    const double sgn = left ? 1.0 : -1.0;
    const double cx = p.x - sgn * a * std::sin(heading);
    const double cy = p.y + sgn * a * std::cos(heading);
    auto pose = [&](double th, double& qx, double& qy, double& hx, double& hy) {
        const double h = heading + sgn * th;
        qx = cx + sgn * a * std::sin(h);
        qy = cy - sgn * a * std::cos(h);
        hx = std::cos(h);
        hy = std::sin(h);
    };
    auto residual = [&](double th, double& along) {
        double qx, qy, hx, hy;
        pose(th, qx, qy, hx, hy);
        along = hx * (f.x - qx) + hy * (f.y - qy);
        return hx * (f.y - qy) - hy * (f.x - qx);
    };
    auto length = [&](double th) {
        double qx, qy, hx, hy;
        pose(th, qx, qy, hx, hy);
        return a * th + std::hypot(f.x - qx, f.y - qy);
    };
    const double two_pi = 2.0 * std::numbers::pi;
    std::optional<double> best;
    auto consider = [&](double th) {
        const double l = length(th);
        if (!best || l < *best) best = l;
    };
    double along0 = 0.0;
    double r_prev = residual(0.0, along0);
    if (r_prev == 0.0 && along0 >= 0.0) consider(0.0);
    for (int i = 1; i <= grid; ++i) {
        double lo = two_pi * (i - 1) / grid;
        double hi = two_pi * i / grid;
        double along = 0.0;
        const double r = residual(hi, along);
        if ((r_prev < 0.0) != (r < 0.0) || r == 0.0) {
            double r_lo = r_prev;
            for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                double am = 0.0;
                const double rm = residual(mid, am);
                if ((rm < 0.0) == (r_lo < 0.0) && rm != 0.0) {
                    lo = mid;
                    r_lo = rm;
                } else {
                    hi = mid;
                }
            }
            const double th = 0.5 * (lo + hi);
            double a_root = 0.0;
            residual(th, a_root);
            if (a_root >= 0.0 && th < two_pi) consider(th);
        }
        r_prev = r;
    }
    return best;
}

inline double cs_length(Point f, Point p, double heading, double a) {
    const auto l = cs_length_side(f, p, heading, a, true);
    const auto r = cs_length_side(f, p, heading, a, false);
    if (l && r) return std::min(*l, *r);
    if (l) return *l;
    if (r) return *r;
    return std::numeric_limits<double>::quiet_NaN();
}

/// Mean and variance of q(x) = c + b.x + 1/2 x^T A x for x ~ N(m, S):
/// E q = q(m) + 1/2 tr(A S), Var q = g^T S g + 1/2 tr(A S A S), g = b + A m.
struct Moments {
    double mean, variance;
};

inline Moments gaussian_quadratic(double c, const Eigen::VectorXd& b, const Eigen::MatrixXd& A, const Eigen::VectorXd& m,
                                  const Eigen::MatrixXd& S) {
    const Eigen::VectorXd g = b + A * m;
    const Eigen::MatrixXd AS = A * S;
    Moments out;
    out.mean = c + b.dot(m) + 0.5 * m.dot(A * m) + 0.5 * AS.trace();
    out.variance = g.dot(S * g) + 0.5 * (AS * AS).trace();
    return out;
}

/// Standard normal CDF by composite Simpson quadrature of the density on
/// [0, |x|], independent of erf/erfc.
inline double normal_cdf_quadrature(double x, int panels = 20000) {
    const double h = std::abs(x) / panels;
    auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
    double s = phi(0.0) + phi(std::abs(x));
    for (int i = 1; i < panels; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * phi(i * h);
    const double half = s * h / 3.0;
    return x >= 0.0 ? 0.5 + half : 0.5 - half;
}

/// Central difference with step h.
template <typename F>
double central(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error with an absolute floor of 1 on the scale.
inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace oracle
