#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nlarch/distributions.hpp"
#include "nlarch/errors.hpp"

namespace nlarch {

/// AR part pi_1..pi_{p-1}; p = pi.size() + 1.
struct ARCoefficients {
    std::vector<double> pi;

    [[nodiscard]] std::size_t p() const noexcept { return pi.size() + 1; }
};

/// L(u; gamma, a) = 1 / (1 + exp(-gamma (u - a))), evaluated without overflow.
inline double logistic(double u, double gamma, double a) {
    const double z = gamma * (u - a);
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

// ---- mean functions -------------------------------------------------------

/// g(u) = u + nu1 L(u; gamma, a1) + nu2 (1 - L(u; gamma, a2)).
struct LogisticIntercept {
    double nu1 = -0.5;
    double nu2 = 0.5;
    double gamma = 1.0;
    double a1 = 0.0;
    double a2 = 0.0;
};

enum class SlopeKind { S1, S2 };
enum class SlopeShape { AbsPower, Smooth };

/// g(u) = S(u) u with S1 = 1 - r0/h(u) or S2 = exp(-r0/h(u)), where
/// h(u) = 1 + |u-a|^rho (AbsPower) or (1 + (u-a)^2)^{rho/2} (Smooth).
struct TimeVaryingSlope {
    SlopeKind kind = SlopeKind::S1;
    double r0 = 1.0;
    double a = 0.0;
    double rho = 1.0;
    SlopeShape shape = SlopeShape::AbsPower;
};

/// g(u) = (1 - r |u|^-rho) u for |u| > threshold, 0 otherwise.
struct BoundedShrink {
    double r = 1.0;
    double rho = 1.0;
    double threshold = 1.0;
};

/// g(u) = slope * u. Not ergodic-by-construction; used for identity and
/// explosive control experiments.
struct LinearMean {
    double slope = 1.0;
};

using MeanFunction = std::variant<LogisticIntercept, TimeVaryingSlope, BoundedShrink, LinearMean>;

inline void validate(const MeanFunction& mean) {
    auto finite = [](std::initializer_list<double> xs) {
        for (double x : xs)
            if (!std::isfinite(x)) return false;
        return true;
    };
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticIntercept>) {
                if (!finite({m.nu1, m.nu2, m.gamma, m.a1, m.a2})) throw InvalidArgument("LogisticIntercept: non-finite parameter");
                if (!(m.gamma > 0.0)) throw InvalidArgument("LogisticIntercept: gamma must be positive");
                if (!(m.a1 <= m.a2)) throw InvalidArgument("LogisticIntercept: need a1 <= a2");
                if (!(m.nu1 < 0.0 && 0.0 < m.nu2)) throw InvalidArgument("LogisticIntercept: need nu1 < 0 < nu2");
            } else if constexpr (std::is_same_v<T, TimeVaryingSlope>) {
                if (!finite({m.r0, m.a, m.rho})) throw InvalidArgument("TimeVaryingSlope: non-finite parameter");
                if (!(m.r0 > 0.0)) throw InvalidArgument("TimeVaryingSlope: r0 must be positive");
                if (!(m.rho > 0.0 && m.rho < 2.0)) throw InvalidArgument("TimeVaryingSlope: rho must lie in (0, 2)");
            } else if constexpr (std::is_same_v<T, BoundedShrink>) {
                if (!finite({m.r, m.rho, m.threshold})) throw InvalidArgument("BoundedShrink: non-finite parameter");
                if (!(m.r > 0.0)) throw InvalidArgument("BoundedShrink: r must be positive");
                if (!(m.rho > 0.0 && m.rho < 2.0)) throw InvalidArgument("BoundedShrink: rho must lie in (0, 2)");
                // Equality is admitted: at |u| = r^{1/rho} the shrink factor is exactly zero.
                if (!(m.threshold >= std::pow(m.r, 1.0 / m.rho) * (1.0 - 1e-12)))
                    throw InvalidArgument("BoundedShrink: threshold must be at least r^(1/rho)");
            } else {
                if (!std::isfinite(m.slope)) throw InvalidArgument("LinearMean: non-finite slope");
            }
        },
        mean);
}

inline double slope_h(const TimeVaryingSlope& m, double u) {
    const double du = u - m.a;
    if (m.shape == SlopeShape::AbsPower) return 1.0 + std::pow(std::abs(du), m.rho);
    return std::pow(1.0 + du * du, 0.5 * m.rho);
}

/// g(u) for the configured variant.
inline double mean_g(double u, const MeanFunction& mean) {
    if (!std::isfinite(u)) throw InvalidArgument("mean_g: non-finite input");
    return std::visit(
        [u](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticIntercept>) {
                return u + m.nu1 * logistic(u, m.gamma, m.a1) + m.nu2 * (1.0 - logistic(u, m.gamma, m.a2));
            } else if constexpr (std::is_same_v<T, TimeVaryingSlope>) {
                const double ratio = m.r0 / slope_h(m, u);
                const double s = m.kind == SlopeKind::S1 ? 1.0 - ratio : std::exp(-ratio);
                return s * u;
            } else if constexpr (std::is_same_v<T, BoundedShrink>) {
                const double au = std::abs(u);
                if (au <= m.threshold) return 0.0;
                return (1.0 - m.r * std::pow(au, -m.rho)) * u;
            } else {
                return m.slope * u;
            }
        },
        mean);
}

inline std::string to_string(const MeanFunction& mean) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticIntercept>) return "logistic_intercept";
            else if constexpr (std::is_same_v<T, TimeVaryingSlope>) return "time_varying_slope";
            else if constexpr (std::is_same_v<T, BoundedShrink>) return "bounded_shrink";
            else return "linear";
        },
        mean);
}

// ---- ARCH part --------------------------------------------------------------

struct ConstantOne {};

/// zeta(y_{t-1}) = L(y_{t-1}; gamma, a).
struct LogisticGate {
    double gamma = 1.0;
    double a = 0.0;
};

using Gate = std::variant<ConstantOne, LogisticGate>;

inline double gate_value(const Gate& g, double y_prev) {
    if (const auto* l = std::get_if<LogisticGate>(&g)) return logistic(y_prev, l->gamma, l->a);
    return 1.0;
}

/// sigma_t^2 = zeta_0 omega + sum_i alpha_i zeta_i e_{t-i}^2, every zeta acting on y_{t-1}.
/// An empty `zeta` means all gates are ConstantOne; otherwise it holds q + 1 gates.
struct ARCHSpec {
    double omega = 1.0;
    std::vector<double> alpha{0.0};
    std::vector<Gate> zeta;

    [[nodiscard]] std::size_t q() const noexcept { return alpha.size(); }
    [[nodiscard]] Gate gate(std::size_t i) const { return zeta.empty() ? Gate{ConstantOne{}} : zeta.at(i); }
    [[nodiscard]] double alpha_sum() const {
        double s = 0.0;
        for (double a : alpha) s += a;
        return s;
    }
};

inline void validate(const ARCHSpec& arch) {
    if (!(arch.omega > 0.0) || !std::isfinite(arch.omega)) throw InvalidArgument("ARCH: omega must be positive");
    if (arch.alpha.empty()) throw InvalidArgument("ARCH: q must be at least 1");
    for (double a : arch.alpha)
        if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("ARCH: alpha entries must be non-negative");
    if (!(arch.alpha_sum() < 1.0)) throw InvalidArgument("ARCH: sum of alpha must be below 1");
    if (!arch.zeta.empty() && arch.zeta.size() != arch.q() + 1)
        throw InvalidArgument("ARCH: zeta must hold q + 1 gates");
    for (const auto& g : arch.zeta) {
        if (const auto* l = std::get_if<LogisticGate>(&g)) {
            if (!(l->gamma > 0.0) || !std::isfinite(l->gamma) || !std::isfinite(l->a))
                throw InvalidArgument("ARCH: logistic gate needs gamma > 0 and finite a");
        }
    }
}

// ---- full model ---------------------------------------------------------------

struct ModelSpec {
    ARCoefficients ar;
    MeanFunction mean = LogisticIntercept{};
    ARCHSpec arch;
    InnovationSpec innovation = UnitNormal{};

    [[nodiscard]] std::size_t p() const noexcept { return ar.p(); }
    [[nodiscard]] std::size_t q() const noexcept { return arch.q(); }
    [[nodiscard]] std::size_t dim() const noexcept { return p() + q(); }
};

inline void validate(const ModelSpec& m) {
    for (double v : m.ar.pi)
        if (!std::isfinite(v)) throw InvalidArgument("AR coefficients must be finite");
    validate(m.mean);
    validate(m.arch);
    validate(m.innovation);
}

/// (y_{t-1}, ..., y_{t-p-q}), newest first. When `e2_tail` is set it supplies
/// (e_{t-1}^2, ..., e_{t-q}^2) directly instead of reconstructing them from y.
struct StateVector {
    std::vector<double> x;
    std::optional<std::vector<double>> e2_tail;
};

/// u_t = y_t - sum pi_i y_{t-i}; `window` = (y_t, ..., y_{t-p+1}).
inline double compute_u(std::span<const double> window, const ARCoefficients& ar) {
    if (window.size() != ar.p()) throw InvalidArgument("compute_u: window length must equal p");
    double u = window[0];
    for (std::size_t i = 0; i < ar.pi.size(); ++i) u -= ar.pi[i] * window[i + 1];
    return u;
}

inline double compute_e(double u_t, double u_prev, const MeanFunction& mean) {
    return u_t - mean_g(u_prev, mean);
}

namespace detail {

inline void check_state(const StateVector& s, const ModelSpec& m) {
    if (s.x.size() != m.dim()) throw InvalidArgument("state length must equal p + q");
    for (double v : s.x)
        if (!std::isfinite(v)) throw InvalidArgument("state entries must be finite");
    if (s.e2_tail && s.e2_tail->size() != m.q()) throw InvalidArgument("e2 tail length must equal q");
}

}  // namespace detail

/// (e_{t-1}^2, ..., e_{t-q}^2) for a state. Without an explicit tail each e is
/// rebuilt from y: u_{t-i} needs y_{t-i}..y_{t-i-p+1}, so u lags 1..q+1 all
/// fit inside the p + q stored values.
inline std::vector<double> lagged_e2(const StateVector& s, const ModelSpec& m) {
    detail::check_state(s, m);
    if (s.e2_tail) return *s.e2_tail;
    const std::size_t p = m.p();
    const std::size_t q = m.q();
    std::vector<double> u(q + 1);
    for (std::size_t i = 0; i <= q; ++i) u[i] = compute_u(std::span<const double>(s.x).subspan(i, p), m.ar);
    std::vector<double> e2(q);
    for (std::size_t i = 0; i < q; ++i) {
        const double e = compute_e(u[i], u[i + 1], m.mean);
        e2[i] = e * e;
    }
    return e2;
}

inline double conditional_variance_from(double y_prev, std::span<const double> e2, const ARCHSpec& arch) {
    double s = gate_value(arch.gate(0), y_prev) * arch.omega;
    for (std::size_t i = 0; i < arch.q(); ++i) s += arch.alpha[i] * gate_value(arch.gate(i + 1), y_prev) * e2[i];
    return s;
}

inline double conditional_variance(const StateVector& s, const ModelSpec& m) {
    const auto e2 = lagged_e2(s, m);
    const double v = conditional_variance_from(s.x[0], e2, m.arch);
    if (!(v > 0.0) || !std::isfinite(v)) throw NumericError("conditional variance is not positive and finite");
    return v;
}

// ---- companion form -------------------------------------------------------------

struct CompanionSystem {
    Eigen::MatrixXd Phi;         // p x p
    Eigen::MatrixXd A;           // p x p, unit upper-triangular
    Eigen::MatrixXd Pi;          // A Phi A^-1
    Eigen::MatrixXd Pi1;         // (p-1) x (p-1) companion of pi
    Eigen::MatrixXd Lambda_bar;  // q x q, first row alpha_i * mu_bar
    Eigen::VectorXd iota_p;
    Eigen::VectorXd iota_pq;
    std::vector<double> pi;
};

/// Companion matrices of the AR part and the mean-scaled ARCH matrix.
/// Phi has first row (pi_1, ..., pi_{p-1}, 0) and a unit subdiagonal.
inline CompanionSystem build_companion(const ModelSpec& model, double mu_bar) {
    if (!(mu_bar > 0.0) || !std::isfinite(mu_bar)) throw InvalidArgument("mu_bar must be finite and positive");
    const auto& pi = model.ar.pi;
    const auto p = static_cast<Eigen::Index>(model.p());
    const auto q = static_cast<Eigen::Index>(model.q());

    CompanionSystem sys;
    sys.pi = pi;
    sys.Phi = Eigen::MatrixXd::Zero(p, p);
    sys.A = Eigen::MatrixXd::Identity(p, p);
    if (p > 1) {
        for (Eigen::Index j = 0; j < p - 1; ++j) sys.Phi(0, j) = pi[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 1; i < p; ++i) sys.Phi(i, i - 1) = 1.0;
        for (Eigen::Index j = 1; j < p; ++j) sys.A(0, j) = -pi[static_cast<std::size_t>(j - 1)];
    }
    // A^-1 = [[1, pi'], [0, I]] in closed form.
    Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index j = 1; j < p; ++j) Ainv(0, j) = pi[static_cast<std::size_t>(j - 1)];
    sys.Pi = sys.A * sys.Phi * Ainv;

    sys.Pi1 = Eigen::MatrixXd::Zero(p - 1, p - 1);
    if (p > 1) {
        for (Eigen::Index j = 0; j < p - 1; ++j) sys.Pi1(0, j) = pi[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 1; i < p - 1; ++i) sys.Pi1(i, i - 1) = 1.0;
    }

    sys.Lambda_bar = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index j = 0; j < q; ++j) sys.Lambda_bar(0, j) = model.arch.alpha[static_cast<std::size_t>(j)] * mu_bar;
    for (Eigen::Index i = 1; i < q; ++i) sys.Lambda_bar(i, i - 1) = 1.0;

    sys.iota_p = Eigen::VectorXd::Unit(p, 0);
    sys.iota_pq = Eigen::VectorXd::Unit(p + q, 0);
    return sys;
}

struct StateTransforms {
    double z1 = 0.0;
    std::vector<double> z2;  // (y_{t-2}, ..., y_{t-p})
    std::vector<double> xi;  // (e_{t-1}^2, ..., e_{t-q}^2)
};

inline StateTransforms state_transforms(const StateVector& s, const ModelSpec& model) {
    detail::check_state(s, model);
    const std::size_t p = model.p();
    StateTransforms out;
    out.z1 = compute_u(std::span<const double>(s.x).first(p), model.ar);
    out.z2.assign(s.x.begin() + 1, s.x.begin() + static_cast<std::ptrdiff_t>(p));
    out.xi = lagged_e2(s, model);
    return out;
}

}  // namespace nlarch
