#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlarch/errors.hpp"

namespace nlarch::quad {

inline constexpr double kRelTol = 1e-12;
inline constexpr unsigned kMaxDepth = 15;

/// Adaptive Gauss–Kronrod (61-point) on a finite interval.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = kRelTol) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, kMaxDepth, rel_tol);
}

/// Fixed 20-point Gauss–Legendre; used where many short pieces are summed.
template <class F>
double integrate_fixed(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

/// Local power-law decay exponent tau of h between |x| = x0 and |x| = 1e4 x0,
/// i.e. h(x) ~ |x|^-tau. Returns +inf when h underflows to zero.
template <class F>
double tail_exponent(F&& h, double x0, int direction) {
    const double far = 1e4;
    const double h0 = std::abs(h(direction * x0));
    const double h1 = std::abs(h(direction * x0 * far));
    if (h1 == 0.0 || h0 == 0.0) return std::numeric_limits<double>::infinity();
    return -(std::log(h1) - std::log(h0)) / std::log(far);
}

/// Integral of h over [x0, +inf) (direction = +1) or (-inf, -x0] (direction = -1), x0 > 0.
///
/// Maps the half-line onto (0, 1] with x = x0 * t^-m, the exponent m picked from the
/// measured tail decay so the transformed integrand vanishes linearly at t = 0.
/// Throws DivergentMoment when the decay is not faster than 1/|x|.
template <class F>
double integrate_tail(F&& h, double x0, int direction, double rel_tol = kRelTol) {
    const double tau = tail_exponent(h, x0, direction);
    if (!(tau > 1.0 + 1e-9)) {
        throw DivergentMoment("integrand tail decays like |x|^-" + std::to_string(tau) +
                              ", integral diverges");
    }
    const double m = std::isinf(tau) ? 0.25 : std::clamp(2.0 / (tau - 1.0), 0.25, 16.0);
    auto g = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double x = x0 * std::pow(t, -m);
        if (!std::isfinite(x)) return 0.0;
        const double v = h(direction * x) * m * x / t;
        return std::isfinite(v) ? v : 0.0;
    };
    return integrate(g, 0.0, 1.0, rel_tol);
}

/// Integral of h over the whole real line, split at `center` with the core
/// [center - radius, center + radius] handled directly and the two tails mapped.
template <class F>
double integrate_real_line(F&& h, double center, double radius, double rel_tol = kRelTol) {
    auto shifted = [&](double x) { return h(center + x); };
    const double core = integrate(shifted, -radius, 0.0, rel_tol) + integrate(shifted, 0.0, radius, rel_tol);
    const double left = integrate_tail(shifted, radius, -1, rel_tol);
    const double right = integrate_tail(shifted, radius, +1, rel_tol);
    return left + core + right;
}

}  // namespace nlarch::quad
