#pragma once

// First and second derivatives of scalar functions of the six pursuer
// parameters. Callables must be generic over the scalar type, e.g.
//   [](const auto& theta) { return theta[3] * theta[3]; }
// where theta is a std::array<Scalar, 6>.

#include <Eigen/Core>
#include <array>

#include "cspez/dual.hpp"

namespace cspez {

using ParamVector = std::array<double, 6>;
using Grad6 = Eigen::Matrix<double, 6, 1>;
using Hess6 = Eigen::Matrix<double, 6, 6>;

template <typename S>
using Jet1 = Dual<S, 6>;
template <typename S>
using Jet2 = Dual<Dual<S, 6>, 6>;

/// Seeds each coordinate of theta as an independent first-order variable.
template <typename S>
std::array<Jet1<S>, 6> seed_first(const std::array<S, 6>& theta) {
    std::array<Jet1<S>, 6> out;
    for (int i = 0; i < 6; ++i) out[i] = Jet1<S>::variable(theta[i], i);
    return out;
}

/// Seeds theta for nested second-order evaluation.
template <typename S>
std::array<Jet2<S>, 6> seed_second(const std::array<S, 6>& theta) {
    std::array<Jet2<S>, 6> out;
    for (int i = 0; i < 6; ++i) {
        Dual<S, 6> inner = Dual<S, 6>::variable(theta[i], i);
        out[i] = Jet2<S>::variable(inner, i);
    }
    return out;
}

template <typename F>
Grad6 gradient(F&& f, const ParamVector& theta) {
    const auto r = f(seed_first(theta));
    Grad6 g;
    for (int i = 0; i < 6; ++i) g[i] = r.d[i];
    return g;
}

/// Function value, gradient and (symmetrised) Hessian in one nested pass.
struct SecondOrder {
    double value = 0.0;
    Grad6 gradient = Grad6::Zero();
    Hess6 hessian = Hess6::Zero();
};

template <typename F>
SecondOrder second_order(F&& f, const ParamVector& theta) {
    const auto r = f(seed_second(theta));
    SecondOrder out;
    out.value = r.v.v;
    for (int i = 0; i < 6; ++i) {
        out.gradient[i] = r.v.d[i];
        for (int j = 0; j < 6; ++j) out.hessian(i, j) = r.d[i].d[j];
    }
    out.hessian = (0.5 * (out.hessian + out.hessian.transpose())).eval();
    return out;
}

template <typename F>
Hess6 hessian(F&& f, const ParamVector& theta) {
    return second_order(f, theta).hessian;
}

}  // namespace cspez
