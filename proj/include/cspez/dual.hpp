#pragma once

// Forward-mode dual numbers. Dual<T, N> carries a value and N partials of
// type T, so nesting Dual<Dual<double, N>, N> yields second derivatives.

#include <array>
#include <cmath>
#include <type_traits>

namespace cspez {

template <typename T, int N>
struct Dual {
    T v{};
    std::array<T, N> d{};

    Dual() = default;
    Dual(const T& value) : v(value) {}  // NOLINT: implicit lift of constants
    Dual(const T& value, const std::array<T, N>& partials) : v(value), d(partials) {}
    // Constants for nested duals, e.g. Dual<Dual<double, 3>, 6>(0.0).
    template <typename U>
        requires(std::is_arithmetic_v<U> && !std::is_same_v<T, U>)
    explicit Dual(U value) : v(T(value)) {}

    // Independent variable number `index`.
    static Dual variable(const T& value, int index) {
        Dual out(value);
        out.d[static_cast<std::size_t>(index)] = T(1.0);
        return out;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const T inv = T(1.0) / o.v;
        v *= inv;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - v * o.d[i]) * inv;
        return *this;
    }

    friend Dual operator-(const Dual& a) {
        Dual out;
        out.v = -a.v;
        for (int i = 0; i < N; ++i) out.d[i] = -a.d[i];
        return out;
    }
    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

    friend Dual operator+(Dual a, const T& b) {
        a.v += b;
        return a;
    }
    friend Dual operator+(const T& a, Dual b) {
        b.v += a;
        return b;
    }
    friend Dual operator-(Dual a, const T& b) {
        a.v -= b;
        return a;
    }
    friend Dual operator-(const T& a, const Dual& b) { return Dual(a) - b; }
    friend Dual operator*(Dual a, const T& b) {
        a.v *= b;
        for (int i = 0; i < N; ++i) a.d[i] *= b;
        return a;
    }
    friend Dual operator*(const T& a, Dual b) { return b * a; }
    friend Dual operator/(Dual a, const T& b) {
        const T inv = T(1.0) / b;
        return a * inv;
    }
    friend Dual operator/(const T& a, const Dual& b) { return Dual(a) / b; }

    // Applies f(v) with derivative df = f'(v) to every partial.
    static Dual chain(const T& fv, const T& df, const Dual& a) {
        Dual out(fv);
        for (int i = 0; i < N; ++i) out.d[i] = df * a.d[i];
        return out;
    }

    friend Dual sin(const Dual& a) {
        using std::cos;
        using std::sin;
        return chain(sin(a.v), cos(a.v), a);
    }
    friend Dual cos(const Dual& a) {
        using std::cos;
        using std::sin;
        return chain(cos(a.v), -sin(a.v), a);
    }
    friend Dual exp(const Dual& a) {
        using std::exp;
        const T e = exp(a.v);
        return chain(e, e, a);
    }
    friend Dual log(const Dual& a) {
        using std::log;
        return chain(log(a.v), T(1.0) / a.v, a);
    }
    friend Dual sqrt(const Dual& a) {
        using std::sqrt;
        const T s = sqrt(a.v);
        return chain(s, T(0.5) / s, a);
    }
    friend Dual abs(const Dual& a) { return value_sign(a.v) < 0 ? -a : a; }
    friend Dual atan2(const Dual& y, const Dual& x) {
        using std::atan2;
        const T r2 = x.v * x.v + y.v * y.v;
        Dual out(atan2(y.v, x.v));
        for (int i = 0; i < N; ++i) out.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / r2;
        return out;
    }
    // erfc'(x) = -2/sqrt(pi) exp(-x^2)
    friend Dual erfc(const Dual& a) {
        using std::erfc;
        using std::exp;
        constexpr double two_over_sqrt_pi = 1.1283791670955126;
        return chain(erfc(a.v), T(-two_over_sqrt_pi) * exp(-(a.v * a.v)), a);
    }

   private:
    static int value_sign(const T& x);
};

template <typename T>
struct is_dual : std::false_type {};
template <typename T, int N>
struct is_dual<Dual<T, N>> : std::true_type {};
template <typename T>
inline constexpr bool is_dual_v = is_dual<T>::value;

/// Innermost double value of a (possibly nested) dual number.
inline double value_of(double x) { return x; }
template <typename T, int N>
double value_of(const Dual<T, N>& x) {
    return value_of(x.v);
}

template <typename T, int N>
int Dual<T, N>::value_sign(const T& x) {
    const double s = value_of(x);
    return (s > 0) - (s < 0);
}

/// Embeds a constant of scalar type S into the (possibly nested) dual type J.
template <typename J, typename S>
J lift_to(const S& s) {
    if constexpr (std::is_same_v<J, S>) {
        return s;
    } else {
        return J(lift_to<decltype(J::v)>(s));
    }
}

/// True when the value and every partial, at every nesting level, is finite.
inline bool all_finite(double x) { return std::isfinite(x); }
template <typename T, int N>
bool all_finite(const Dual<T, N>& x) {
    if (!all_finite(x.v)) return false;
    for (const auto& p : x.d) {
        if (!all_finite(p)) return false;
    }
    return true;
}

// Comparisons act on the innermost value so that branching code behaves the
// same for doubles and duals.
template <typename A, typename B>
    requires(is_dual_v<A> || is_dual_v<B>)
bool operator<(const A& a, const B& b) {
    return value_of(a) < value_of(b);
}
template <typename A, typename B>
    requires(is_dual_v<A> || is_dual_v<B>)
bool operator>(const A& a, const B& b) {
    return value_of(a) > value_of(b);
}
template <typename A, typename B>
    requires(is_dual_v<A> || is_dual_v<B>)
bool operator<=(const A& a, const B& b) {
    return value_of(a) <= value_of(b);
}
template <typename A, typename B>
    requires(is_dual_v<A> || is_dual_v<B>)
bool operator>=(const A& a, const B& b) {
    return value_of(a) >= value_of(b);
}

}  // namespace cspez
