#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "nlarch/distributions.hpp"
#include "nlarch/errors.hpp"
#include "nlarch/model.hpp"
#include "nlarch/parallel.hpp"
#include "nlarch/random.hpp"
#include "nlarch/simulation.hpp"

namespace nlarch {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---- Assumption 2(i) ------------------------------------------------------------

struct RootCheck {
    bool pass = true;
    double min_root_modulus = kInf;
};

/// Roots of 1 - pi_1 z - ... - pi_{p-1} z^{p-1} are the reciprocals of the
/// eigenvalues of the companion matrix Pi1, so the smallest root modulus is
/// 1 / rho(Pi1) (zero eigenvalues correspond to roots at infinity).
inline RootCheck check_root_condition(const ARCoefficients& ar) {
    RootCheck out;
    const auto n = static_cast<Eigen::Index>(ar.pi.size());
    if (n == 0) return out;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) c(0, j) = ar.pi[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 1; i < n; ++i) c(i, i - 1) = 1.0;
    const double rho = spectral_radius(c);
    out.min_root_modulus = rho > 0.0 ? 1.0 / rho : kInf;
    out.pass = out.min_root_modulus > 1.0 + 1e-10;
    return out;
}

// ---- Assumption 2(ii) ------------------------------------------------------------

struct EnvelopePoint {
    double u = 0.0;
    double abs_g = 0.0;
    double bound = 0.0;  // (1 - r|u|^-rho)|u| outside [-M0, M0], K0 inside
    double slack = 0.0;  // bound - |g(u)|
};

struct EnvelopeReport {
    std::vector<EnvelopePoint> points;
    bool envelope_pass = true;  // tails
    bool bounded_pass = true;   // |g| <= K0 on [-M0, M0]
    bool pass = true;
    bool unbounded_tails = false;  // |g(u)| keeps growing in both tails
    double min_tail_slack = kInf;
};

/// Log-spaced magnitudes from `lo` to `hi`, `per_decade` points per decade.
inline std::vector<double> log_grid(double lo, double hi, std::size_t per_decade = 20) {
    if (!(lo > 0.0) || !(hi > lo)) throw InvalidArgument("log_grid: need 0 < lo < hi");
    const double decades = std::log10(hi / lo);
    const auto n = static_cast<std::size_t>(std::ceil(decades * static_cast<double>(per_decade))) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

/// Checks |g(u)| <= (1 - r|u|^-rho)|u| at +-u for every grid magnitude u >= M0
/// (default grid: M0 to 1e8) and |g(u)| <= K0 on a uniform sample of [-M0, M0].
inline EnvelopeReport check_mean_envelope(const MeanFunction& mean, double r, double rho, double M0, double K0,
                                          std::vector<double> grid = {}) {
    if (!(r > 0.0) || !(rho > 0.0 && rho < 2.0) || !(M0 > 0.0) || !(K0 >= 0.0))
        throw InvalidArgument("check_mean_envelope: need r > 0, rho in (0, 2), M0 > 0, K0 >= 0");
    const double shrink = r * std::pow(M0, -rho);
    if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidArgument("check_mean_envelope: r * M0^-rho must lie in (0, 1)");
    if (grid.empty()) grid = log_grid(M0, std::max(1e8, 10.0 * M0));

    EnvelopeReport rep;
    constexpr std::size_t inner = 2001;
    for (std::size_t i = 0; i < inner; ++i) {
        const double u = -M0 + 2.0 * M0 * static_cast<double>(i) / static_cast<double>(inner - 1);
        EnvelopePoint pt{u, std::abs(mean_g(u, mean)), K0, 0.0};
        pt.slack = pt.bound - pt.abs_g;
        if (pt.slack < -1e-12 * std::max(1.0, K0)) rep.bounded_pass = false;
        rep.points.push_back(pt);
    }
    double first_pos = 0.0, last_pos = 0.0, first_neg = 0.0, last_neg = 0.0;
    bool first = true;
    for (double a : grid) {
        if (a < M0) continue;
        for (double u : {a, -a}) {
            EnvelopePoint pt{u, std::abs(mean_g(u, mean)), (1.0 - r * std::pow(a, -rho)) * a, 0.0};
            pt.slack = pt.bound - pt.abs_g;
            rep.min_tail_slack = std::min(rep.min_tail_slack, pt.slack);
            if (pt.slack < -1e-12 * a) rep.envelope_pass = false;
            rep.points.push_back(pt);
        }
        const double gp = std::abs(mean_g(a, mean));
        const double gn = std::abs(mean_g(-a, mean));
        if (first) {
            first_pos = gp;
            first_neg = gn;
            first = false;
        }
        last_pos = gp;
        last_neg = gn;
    }
    rep.unbounded_tails = last_pos > 100.0 * std::max(first_pos, 1.0) && last_neg > 100.0 * std::max(first_neg, 1.0);
    rep.pass = rep.envelope_pass && rep.bounded_pass;
    return rep;
}

struct EnvelopeParams {
    double r = 1.0;
    double rho = 1.0;
    double M0 = 1.0;
    double K0 = 0.0;
};

/// Envelope constants used by default for each mean variant. (r, rho) follow
/// the variant; M0 is the smallest grid magnitude from which the envelope holds
/// all the way out to 1e8, and K0 = max |g| on [-M0, M0].
inline EnvelopeParams default_envelope(const MeanFunction& mean) {
    EnvelopeParams e;
    if (const auto* m = std::get_if<LogisticIntercept>(&mean)) {
        e.rho = 1.0;
        e.r = 0.5 * std::min(-m->nu1, m->nu2);
    } else if (const auto* m = std::get_if<TimeVaryingSlope>(&mean)) {
        e.rho = m->rho;
        e.r = 0.5 * m->r0;
    } else if (const auto* m = std::get_if<BoundedShrink>(&mean)) {
        e.rho = m->rho;
        e.r = m->r;
    } else {
        e.rho = 1.0;
        e.r = 1.0;
    }
    const double floor = std::pow(e.r, 1.0 / e.rho) * (1.0 + 1e-9);
    auto grid = log_grid(std::max(floor, 1e-6), 1e8, 40);
    double M0 = grid.back();
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        const double a = *it;
        const double bound = (1.0 - e.r * std::pow(a, -e.rho)) * a;
        const bool ok = std::abs(mean_g(a, mean)) <= bound + 1e-12 * a && std::abs(mean_g(-a, mean)) <= bound + 1e-12 * a;
        if (!ok) break;
        M0 = a;
    }
    e.M0 = M0;
    double k0 = 0.0;
    constexpr std::size_t n = 4001;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = -M0 + 2.0 * M0 * static_cast<double>(i) / static_cast<double>(n - 1);
        k0 = std::max(k0, std::abs(mean_g(u, mean)));
    }
    e.K0 = k0;
    return e;
}

// ---- Lemma 2 / Assumption 4 -------------------------------------------------------

/// mu_bar = (E|eps|^{2bs0})^{1/bs0} for `order` = 2bs0.
inline double moment_mu_bar(const InnovationSpec& innovation, double order) {
    if (!(order >= 2.0)) throw InvalidArgument("moment_mu_bar: order must be at least 2");
    const Innovation inn(innovation);
    return std::pow(inn.abs_moment(order), 2.0 / order);
}

struct Lemma2Check {
    bool pass = false;
    double slack = 0.0;  // 1 - sum(alpha) * mu_bar
};

inline Lemma2Check check_lemma2(const std::vector<double>& alpha, double mu_bar) {
    double s = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw InvalidArgument("check_lemma2: alpha entries must be non-negative");
        s += a;
    }
    Lemma2Check out;
    out.slack = 1.0 - s * mu_bar;
    out.pass = out.slack > 0.0;
    return out;
}

/// Lambda_bar for a coefficient vector: first row alpha_i * mu_bar, unit subdiagonal.
inline Eigen::MatrixXd lambda_bar(const std::vector<double>& alpha, double mu_bar) {
    const auto q = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index j = 0; j < q; ++j) m(0, j) = alpha[static_cast<std::size_t>(j)] * mu_bar;
    for (Eigen::Index i = 1; i < q; ++i) m(i, i - 1) = 1.0;
    return m;
}

/// ||x||_bullet = w'|x| with w = (I - Lambda_bar)^{-T} 1.
class BulletNorm {
public:
    BulletNorm() = default;

    /// Direct construction from weights (any positive weights give a monotone norm).
    static BulletNorm from_weights(Eigen::VectorXd w, double spectral_radius_bar = 0.0) {
        if (w.size() == 0 || (w.array() <= 0.0).any()) throw InvalidArgument("BulletNorm: weights must be positive");
        BulletNorm b;
        b.w_ = std::move(w);
        b.rho_bar_ = spectral_radius_bar;
        return b;
    }

    [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return w_; }
    [[nodiscard]] double spectral_radius_bar() const noexcept { return rho_bar_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }

    [[nodiscard]] double operator()(const std::vector<double>& x) const {
        if (x.size() != size()) throw InvalidArgument("BulletNorm: dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w_[static_cast<Eigen::Index>(i)] * std::abs(x[i]);
        return s;
    }

private:
    Eigen::VectorXd w_;
    double rho_bar_ = 0.0;
};

inline BulletNorm build_bullet_norm(const Eigen::MatrixXd& Lambda_bar) {
    if (Lambda_bar.rows() == 0 || Lambda_bar.rows() != Lambda_bar.cols())
        throw InvalidArgument("build_bullet_norm: Lambda_bar must be square and non-empty");
    const double rho = spectral_radius(Lambda_bar);
    if (!(rho < 1.0)) {
        throw NumericError("build_bullet_norm: spectral radius of Lambda_bar is " + std::to_string(rho) +
                           ", the norm needs it below 1");
    }
    const auto q = Lambda_bar.rows();
    const Eigen::MatrixXd m = (Eigen::MatrixXd::Identity(q, q) - Lambda_bar).transpose();
    Eigen::VectorXd w = m.partialPivLu().solve(Eigen::VectorXd::Ones(q));
    return BulletNorm::from_weights(std::move(w), rho);
}

struct InducedNormEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t argmax = 0;  // maximising vertex e_i / w_i
    bool assumption4 = false;  // estimate + 2 SE < 1
};

/// Monte Carlo estimate of max_{||x||_bullet = 1} (E ||Lambda_t x||_bullet^{bs0})^{1/bs0}.
///
/// Since |Lambda_t x| <= Lambda_t |x| elementwise and the norm is monotone, the
/// maximum is over x >= 0 with w'x = 1. There the objective is convex
/// (Minkowski), so it peaks at a vertex x = e_i / w_i, where
/// ||Lambda_t e_i||_bullet = w_1 alpha_i eps^2 + w_{i+1}. All vertices share one
/// set of draws; the SE is the delta-method error of the winning vertex.
inline InducedNormEstimate induced_norm_mc(const BulletNorm& norm, const std::vector<double>& alpha,
                                           const InnovationSpec& innovation, double bs0, std::size_t draws,
                                           std::uint64_t seed) {
    const std::size_t q = alpha.size();
    if (q == 0 || norm.size() != q) throw InvalidArgument("induced_norm_mc: alpha and norm dimensions differ");
    if (!(bs0 >= 1.0)) throw InvalidArgument("induced_norm_mc: bs0 must be at least 1");
    const Innovation inn(innovation);
    if (!inn.has_finite_moment(2.0 * bs0)) throw DivergentMoment("induced_norm_mc: E|eps|^{2 bs0} is infinite");
    const auto& w = norm.weights();
    auto w_at = [&](std::size_t i) { return i < q ? w[static_cast<Eigen::Index>(i)] : 0.0; };

    InducedNormEstimate out;
    bool deterministic = true;
    for (double a : alpha) deterministic = deterministic && a == 0.0;
    if (deterministic) {
        for (std::size_t i = 0; i < q; ++i) {
            const double v = w_at(i + 1) / w_at(i);
            if (v > out.estimate || i == 0) {
                out.estimate = v;
                out.argmax = i;
            }
        }
        out.assumption4 = out.estimate < 1.0;
        return out;
    }
    if (draws < 10000) throw InvalidArgument("induced_norm_mc: at least 1e4 draws are required");

    const Sampler sampler(innovation);
    auto rng = make_stream(seed);
    std::vector<double> sum(q, 0.0), sum2(q, 0.0);
    for (std::size_t k = 0; k < draws; ++k) {
        const double e = sampler(rng);
        const double e2 = e * e;
        for (std::size_t i = 0; i < q; ++i) {
            const double v = std::pow(w_at(0) * alpha[i] * e2 + w_at(i + 1), bs0);
            sum[i] += v;
            sum2[i] += v * v;
        }
    }
    const double n = static_cast<double>(draws);
    for (std::size_t i = 0; i < q; ++i) {
        const double m = sum[i] / n;
        const double var = std::max(0.0, (sum2[i] - n * m * m) / (n - 1.0));
        const double se_m = std::sqrt(var / n);
        const double est = std::pow(m, 1.0 / bs0) / w_at(i);
        const double se = std::pow(m, 1.0 / bs0 - 1.0) / bs0 * se_m / w_at(i);
        if (i == 0 || est > out.estimate) {
            out.estimate = est;
            out.std_error = se;
            out.argmax = i;
        }
    }
    out.assumption4 = out.estimate + 2.0 * out.std_error < 1.0;
    return out;
}

// ---- Lemma 1 norm ------------------------------------------------------------------

/// ||x||_* = max_i d_i |(U^* x)_i| with Pi1 = U T U^* (complex Schur) and
/// d_i = t^{i-n+1}; t grows until the induced norm max_i sum_j |T_ij| t^{i-j}
/// is at most rho(Pi1) + eps, eps = (1 - rho(Pi1)) / 2.
class StarNorm {
public:
    StarNorm() = default;

    explicit StarNorm(const Eigen::MatrixXd& Pi1) {
        n_ = Pi1.rows();
        if (n_ == 0) return;
        const Eigen::ComplexSchur<Eigen::MatrixXd> schur(Pi1);
        Ustar_ = schur.matrixU().adjoint();
        const Eigen::MatrixXcd& T = schur.matrixT();
        rho_ = T.diagonal().cwiseAbs().maxCoeff();
        const double target = rho_ + 0.5 * std::max(0.0, 1.0 - rho_);
        double t = 1.0;
        for (int it = 0; it < 200; ++it) {
            induced_ = induced_for(T, t);
            if (induced_ <= target) break;
            t *= 2.0;
        }
        t_ = t;
        d_.resize(n_);
        for (Eigen::Index i = 0; i < n_; ++i) d_[i] = std::pow(t_, static_cast<double>(i - n_ + 1));
    }

    [[nodiscard]] double operator()(const std::vector<double>& x) const {
        if (static_cast<Eigen::Index>(x.size()) != n_) throw InvalidArgument("StarNorm: dimension mismatch");
        if (n_ == 0) return 0.0;
        const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), n_);
        const Eigen::VectorXcd y = Ustar_ * v;
        double m = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) m = std::max(m, d_[i] * std::abs(y[i]));
        return m;
    }

    /// Induced norm of Pi1 under this vector norm.
    [[nodiscard]] double induced_norm() const noexcept { return induced_; }
    [[nodiscard]] double spectral_radius() const noexcept { return rho_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(n_); }

private:
    static double induced_for(const Eigen::MatrixXcd& T, double t) {
        double best = 0.0;
        for (Eigen::Index i = 0; i < T.rows(); ++i) {
            double row = 0.0;
            for (Eigen::Index j = i; j < T.cols(); ++j) row += std::abs(T(i, j)) * std::pow(t, static_cast<double>(i - j));
            best = std::max(best, row);
        }
        return best;
    }

    Eigen::Index n_ = 0;
    Eigen::MatrixXcd Ustar_;
    Eigen::VectorXd d_;
    double t_ = 1.0;
    double rho_ = 0.0;
    double induced_ = 0.0;
};

// ---- drift function ------------------------------------------------------------------

struct DriftParams {
    double s0 = 1.0;
    double b = 1.0;
    double rho = 1.0;
    double s1 = 1e-3;
    double s2 = 1.0;
    std::optional<double> delta;  // defaults by mean variant, see theorem_delta

    [[nodiscard]] double alpha_exp() const { return 1.0 - rho / (2.0 * s0); }
};

inline void validate(const DriftParams& d, std::size_t p) {
    if (!(d.s0 >= 1.0) || !std::isfinite(d.s0)) throw InvalidArgument("DriftParams: s0 must be >= 1");
    if (!(d.rho > 0.0 && d.rho < 2.0)) throw InvalidArgument("DriftParams: rho must lie in (0, 2)");
    if (!(d.b >= 1.0)) throw InvalidArgument("DriftParams: b must be >= 1");
    if (d.s0 == 1.0 && d.b != 1.0) throw InvalidArgument("DriftParams: b must equal 1 when s0 = 1");
    if (d.s0 > 1.0 && !(d.b > (2.0 * d.s0 - d.rho) / (d.s0 * (2.0 - d.rho))))
        throw InvalidArgument("DriftParams: b must exceed (2 s0 - rho) / (s0 (2 - rho)) when s0 > 1");
    if (!(d.s1 >= 0.0)) throw InvalidArgument("DriftParams: s1 must be non-negative");
    if (d.s1 == 0.0 && p > 1) throw InvalidArgument("DriftParams: s1 = 0 is only allowed when p = 1");
    if (!(d.s2 > 0.0)) throw InvalidArgument("DriftParams: s2 must be positive");
    if (d.delta && !(*d.delta >= 1.0 && *d.delta <= 2.0 * d.s0 / d.rho + 1e-12))
        throw InvalidArgument("DriftParams: delta must lie in [1, 2 s0 / rho]");
}

/// delta used for the rate statement: 2 s0 for the logistic-intercept model,
/// 2 s0 / rho otherwise (the largest value the general result allows).
inline double theorem_delta(const MeanFunction& mean, const DriftParams& d) {
    if (d.delta) return *d.delta;
    if (std::holds_alternative<LogisticIntercept>(mean)) return 2.0 * d.s0;
    return 2.0 * d.s0 / d.rho;
}

/// Everything needed to evaluate V for one model.
struct DriftContext {
    ModelSpec model;
    DriftParams params;
    double mu_bar = 1.0;
    CompanionSystem system;
    BulletNorm bullet;
    StarNorm star;

    DriftContext(ModelSpec m, DriftParams d) : model(std::move(m)), params(d) {
        validate(model);
        validate(params, model.p());
        mu_bar = moment_mu_bar(model.innovation, 2.0 * params.b * params.s0);
        system = build_companion(model, mu_bar);
        bullet = build_bullet_norm(system.Lambda_bar);
        star = StarNorm(system.Pi1);
    }
};

struct VParts {
    double z1_term = 0.0;  // |z1|^{2 s0}
    double z2_norm = 0.0;  // ||z2||_*
    double xi_norm = 0.0;  // ||xi||_bullet
};

inline VParts drift_parts(const StateVector& x, const DriftContext& ctx) {
    const auto tr = state_transforms(x, ctx.model);
    return {std::pow(std::abs(tr.z1), 2.0 * ctx.params.s0), ctx.star(tr.z2), ctx.bullet(tr.xi)};
}

inline double drift_V(const VParts& v, const DriftParams& d) {
    const double a = d.alpha_exp();
    return 1.0 + v.z1_term + d.s1 * std::pow(v.z2_norm, 2.0 * d.s0 * a) + d.s2 * std::pow(v.xi_norm, d.b * d.s0);
}

/// V(x) = 1 + |z1|^{2s0} + s1 ||z2||_*^{2 s0 alpha} + s2 ||xi||_bullet^{b s0}.
inline double drift_V(const StateVector& x, const DriftContext& ctx) {
    return drift_V(drift_parts(x, ctx), ctx.params);
}

// ---- Monte Carlo drift verification ---------------------------------------------------------

struct DriftPoint {
    StateVector state;
    double z1 = 0.0;
    double V = 0.0;
    double expected_V = 0.0;  // E[V(y_1) | y_0 = x]
    double drift = 0.0;       // expected_V - V
    double margin = 0.0;      // drift + e_tilde V^alpha
    double std_error = 0.0;
    double size = 0.0;        // max(|z1|^{2s0}, ||z2||_*^{2s0 alpha}, ||xi||^{b s0 alpha})
    bool inside = false;      // in A_N
    bool overflow = false;
    // Moments of the random parts, kept so that s2 can be varied afterwards.
    double mean_z1 = 0.0, mean_xi = 0.0, var_z1 = 0.0, var_xi = 0.0, cov = 0.0, fixed_z2 = 0.0;
};

struct SensitivityRow {
    double s2 = 0.0;
    std::string verdict;
    double e_tilde = 0.0;
    double N = 0.0;
};

struct DriftReport {
    std::vector<DriftPoint> grid;
    bool certified = false;
    std::string verdict;  // "certified", "failed:drift", "inconclusive:<reason>"
    double e_tilde = 0.0;
    double b_tilde = 0.0;
    double N = 0.0;
    double alpha_exp = 0.0;
    double rate_exponent = 0.0;
    double moment_order = 0.0;
    std::size_t mc_draws = 0;
    DriftParams params;
    std::vector<SensitivityRow> sensitivity;
};

namespace detail {

inline void finish_point(DriftPoint& pt, const DriftParams& d) {
    pt.expected_V = 1.0 + pt.mean_z1 + d.s1 * pt.fixed_z2 + d.s2 * pt.mean_xi;
    pt.drift = pt.expected_V - pt.V;
}

struct Certification {
    bool certified = false;
    std::string verdict;
    double e_tilde = 0.0;
    double b_tilde = 0.0;
    double N = 0.0;
};

// Given per-point drift and SE, pick N, e_tilde and b_tilde, and mark inside/margin.
inline Certification certify(std::vector<DriftPoint>& pts, const DriftParams& d, std::optional<double> petite_bound) {
    const double a = d.alpha_exp();
    auto passes = [](const DriftPoint& p) { return !p.overflow && p.drift + 2.0 * p.std_error < 0.0; };
    Certification c;
    double kmax = 0.0;
    for (const auto& p : pts) kmax = std::max(kmax, p.size);
    if (petite_bound) {
        c.N = *petite_bound;
    } else {
        std::vector<double> cand{0.0};
        for (const auto& p : pts) cand.push_back(p.size);
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        const double cap = kmax / 10.0;
        c.N = 0.0;
        bool found = false;
        for (double n : cand) {
            if (n > cap) break;
            c.N = n;
            bool ok = true;
            bool any = false;
            for (const auto& p : pts) {
                if (p.size > n) {
                    any = true;
                    ok = ok && passes(p);
                }
            }
            if (ok && any) {
                found = true;
                break;
            }
        }
        if (!found) {
            c.N = 0.0;
            for (double n : cand)
                if (n <= cap) c.N = n;
        }
    }
    bool any_outside = false, all_pass = true, any_fail = false, any_overflow = false;
    double e = kInf;
    for (auto& p : pts) {
        p.inside = p.size <= c.N;
        if (p.inside) continue;
        any_outside = true;
        if (p.overflow) {
            any_overflow = true;
            all_pass = false;
            continue;
        }
        e = std::min(e, (-p.drift - 2.0 * p.std_error) / std::pow(p.V, a));
        if (!passes(p)) all_pass = false;
        if (p.drift - 2.0 * p.std_error > 0.0) any_fail = true;
    }
    c.e_tilde = (any_outside && std::isfinite(e)) ? e : 0.0;
    const double e_use = std::max(c.e_tilde, 0.0);
    c.b_tilde = 0.0;
    for (auto& p : pts) {
        p.margin = p.overflow ? kInf : p.drift + e_use * std::pow(p.V, a);
        if (p.inside) c.b_tilde = std::max(c.b_tilde, p.margin);
    }
    if (!any_outside) {
        c.verdict = "inconclusive:no grid point outside the petite set";
    } else if (all_pass && c.e_tilde > 0.0) {
        c.certified = true;
        c.verdict = "certified";
    } else if (any_fail) {
        c.verdict = "failed:drift";
    } else if (any_overflow) {
        c.verdict = "inconclusive:overflow at grid points";
    } else {
        c.verdict = "inconclusive:MC margin within noise";
    }
    return c;
}

}  // namespace detail

struct DriftOptions {
    std::size_t draws = 100000;
    std::optional<double> petite_bound;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::vector<double> sensitivity_s2{0.1, 1.0, 10.0, 100.0, 1000.0};
};

/// For each grid state, simulates one transition `draws` times and compares
/// E[V(y_1)] with V(x). Only u_1 = g(z1) + sigma eps and the new e^2 are random;
/// z2(y_1) is the leading p-1 entries of x.
inline DriftReport verify_drift(const ModelSpec& model, const DriftParams& params, const std::vector<StateVector>& grid,
                                const DriftOptions& opt = {}) {
    if (grid.empty()) throw InvalidArgument("verify_drift: grid is empty");
    if (opt.draws < 10000) throw InvalidArgument("verify_drift: at least 1e4 draws per point are required");
    const DriftContext ctx(model, params);
    const auto& d = ctx.params;
    const double a = d.alpha_exp();
    const std::size_t p = model.p();
    const std::size_t q = model.q();
    const Sampler sampler(model.innovation);

    std::vector<DriftPoint> pts(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t idx) {
            DriftPoint& pt = pts[idx];
            pt.state = grid[idx];
            const auto tr = state_transforms(pt.state, model);
            const VParts parts{std::pow(std::abs(tr.z1), 2.0 * d.s0), ctx.star(tr.z2), ctx.bullet(tr.xi)};
            pt.z1 = tr.z1;
            pt.V = drift_V(parts, d);
            pt.size = std::max({parts.z1_term, std::pow(parts.z2_norm, 2.0 * d.s0 * a),
                                std::pow(parts.xi_norm, d.b * d.s0 * a)});

            const double g = mean_g(tr.z1, model.mean);
            const double sigma2 = conditional_variance_from(pt.state.x[0], tr.xi, model.arch);
            const double sigma = std::sqrt(sigma2);
            std::vector<double> z2_next(pt.state.x.begin(), pt.state.x.begin() + static_cast<std::ptrdiff_t>(p - 1));
            pt.fixed_z2 = std::pow(ctx.star(z2_next), 2.0 * d.s0 * a);
            // ||xi_1||_bullet = w_1 e_1^2 + sum_{i>=2} w_i xi_{i-1}
            const auto& w = ctx.bullet.weights();
            double xi_fixed = 0.0;
            for (std::size_t i = 1; i < q; ++i) xi_fixed += w[static_cast<Eigen::Index>(i)] * std::abs(tr.xi[i - 1]);
            const double w1 = w[0];

            auto rng = make_stream(opt.seed, idx);
            double s_z = 0.0, s_x = 0.0, s_zz = 0.0, s_xx = 0.0, s_zx = 0.0;
            const double n = static_cast<double>(opt.draws);
            // Centre the accumulators at the first-order values to keep the variance sums well conditioned.
            const double cz = std::pow(std::abs(g), 2.0 * d.s0);
            const double cx = std::pow(w1 * sigma2 + xi_fixed, d.b * d.s0);
            for (std::size_t k = 0; k < opt.draws; ++k) {
                const double eps = sampler(rng);
                const double e = sigma * eps;
                const double zt = std::pow(std::abs(g + e), 2.0 * d.s0) - cz;
                const double xt = std::pow(w1 * e * e + xi_fixed, d.b * d.s0) - cx;
                s_z += zt;
                s_x += xt;
                s_zz += zt * zt;
                s_xx += xt * xt;
                s_zx += zt * xt;
            }
            const double mz = s_z / n;
            const double mx = s_x / n;
            pt.mean_z1 = cz + mz;
            pt.mean_xi = cx + mx;
            pt.var_z1 = std::max(0.0, (s_zz - n * mz * mz) / (n - 1.0));
            pt.var_xi = std::max(0.0, (s_xx - n * mx * mx) / (n - 1.0));
            pt.cov = (s_zx - n * mz * mx) / (n - 1.0);
            pt.overflow = !std::isfinite(pt.mean_z1) || !std::isfinite(pt.mean_xi) || !std::isfinite(pt.V) ||
                          !std::isfinite(pt.var_z1) || !std::isfinite(pt.var_xi);
        },
        opt.threads);

    auto evaluate = [&](std::vector<DriftPoint>& v, const DriftParams& dp) {
        for (auto& pt : v) {
            const auto tr = state_transforms(pt.state, model);
            const VParts parts{std::pow(std::abs(tr.z1), 2.0 * dp.s0), ctx.star(tr.z2), ctx.bullet(tr.xi)};
            pt.V = drift_V(parts, dp);
            detail::finish_point(pt, dp);
            const double var = pt.var_z1 + dp.s2 * dp.s2 * pt.var_xi + 2.0 * dp.s2 * pt.cov;
            pt.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(opt.draws));
            if (!std::isfinite(pt.drift)) pt.overflow = true;
        }
        return detail::certify(v, dp, opt.petite_bound);
    };

    DriftReport rep;
    rep.params = d;
    rep.alpha_exp = a;
    rep.mc_draws = opt.draws;
    rep.rate_exponent = theorem_delta(model.mean, d) - 1.0;
    rep.moment_order = 2.0 * d.s0 - d.rho;
    for (double s2 : opt.sensitivity_s2) {
        auto copy = pts;
        DriftParams dp = d;
        dp.s2 = s2;
        const auto c = evaluate(copy, dp);
        rep.sensitivity.push_back({s2, c.verdict, c.e_tilde, c.N});
    }
    const auto c = evaluate(pts, d);
    rep.grid = std::move(pts);
    rep.certified = c.certified;
    rep.verdict = c.verdict;
    rep.e_tilde = c.e_tilde;
    rep.b_tilde = c.b_tilde;
    rep.N = c.N;
    return rep;
}

/// Grid state with prescribed z1, z2 (all entries `z2_level`) and an explicit
/// e^2 tail (all entries `xi_level`).
inline StateVector make_state(const ModelSpec& model, double z1, double z2_level, double xi_level) {
    const std::size_t p = model.p();
    StateVector s{std::vector<double>(model.dim(), 0.0), std::vector<double>(model.q(), xi_level)};
    double y0 = z1;
    for (std::size_t i = 1; i < p; ++i) {
        s.x[i] = z2_level;
        y0 += model.ar.pi[i - 1] * z2_level;
    }
    s.x[0] = y0;
    // y lags beyond p only matter through the e^2 tail, which is explicit here.
    for (std::size_t i = p; i < model.dim(); ++i) s.x[i] = z2_level;
    return s;
}

inline double quantile_of(std::vector<double> v, double prob) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, prob);
}

struct GridOptions {
    double z1_min = 0.0;  // 0 = use M0 from default_envelope
    double z1_max = 0.0;  // 0 = 1e3 * z1_min
    std::size_t per_side = 12;
    bool both_signs = true;
    std::size_t sim_length = 20000;
    std::uint64_t seed = 0;
};

/// Geometric z1 grid on +-[z1_min, z1_max] crossed with z2 and xi tiers
/// {0, median, 95th percentile} taken from a simulated path (y for z2, e^2 for xi).
inline std::vector<StateVector> default_drift_grid(const ModelSpec& model, const GridOptions& opt = {}) {
    double lo = opt.z1_min > 0.0 ? opt.z1_min : default_envelope(model.mean).M0;
    double hi = opt.z1_max > 0.0 ? opt.z1_max : 1e3 * lo;
    if (!(hi > lo)) throw InvalidArgument("default_drift_grid: need z1_max > z1_min");
    std::vector<double> z2_tiers{0.0}, xi_tiers{0.0};
    try {
        const auto path = simulate(model, opt.sim_length, 1000, std::nullopt, opt.seed);
        std::vector<double> e2(path.e.size());
        for (std::size_t i = 0; i < e2.size(); ++i) e2[i] = path.e[i] * path.e[i];
        xi_tiers = {0.0, quantile_of(e2, 0.5), quantile_of(e2, 0.95)};
        if (model.p() > 1) z2_tiers = {0.0, quantile_of(path.y, 0.5), quantile_of(path.y, 0.95)};
    } catch (const ExplosionError&) {
        // Non-ergodic models keep the zero tiers; the drift check will report them.
    }
    std::vector<double> z1s;
    for (std::size_t i = 0; i < opt.per_side; ++i) {
        const double t = opt.per_side == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(opt.per_side - 1);
        const double z = lo * std::pow(hi / lo, t);
        z1s.push_back(z);
        if (opt.both_signs) z1s.push_back(-z);
    }
    std::vector<StateVector> grid;
    for (double z1 : z1s)
        for (double z2 : z2_tiers)
            for (double xi : xi_tiers) grid.push_back(make_state(model, z1, z2, xi));
    return grid;
}

// ---- aggregated report ----------------------------------------------------------------------

struct ErgodicityReport {
    RootCheck roots;
    EnvelopeParams envelope_params;
    EnvelopeReport envelope;
    double mu_bar = 0.0;
    Lemma2Check lemma2;
    InducedNormEstimate induced;
    std::optional<DriftReport> drift;
    double delta = 0.0;
    double rate_exponent = 0.0;
    double moment_order = 0.0;
    std::string verdict;
};

struct ErgodicityOptions {
    DriftOptions drift;
    GridOptions grid;
    std::optional<std::vector<StateVector>> custom_grid;
    std::optional<EnvelopeParams> envelope;
    std::size_t norm_draws = 100000;
    bool run_drift = true;
};

/// Runs the assumption checks in order and stops at the first failure.
inline ErgodicityReport ergodicity_report(const ModelSpec& model, const DriftParams& params,
                                          const ErgodicityOptions& opt = {}) {
    validate(model);
    validate(params, model.p());
    ErgodicityReport rep;
    rep.delta = theorem_delta(model.mean, params);
    rep.rate_exponent = rep.delta - 1.0;
    rep.moment_order = 2.0 * params.s0 - params.rho;

    rep.roots = check_root_condition(model.ar);
    if (!rep.roots.pass) {
        rep.verdict = "failed:Assumption2(i)";
        return rep;
    }
    rep.envelope_params = opt.envelope ? *opt.envelope : default_envelope(model.mean);
    const auto& ep = rep.envelope_params;
    if (!(ep.r * std::pow(ep.M0, -ep.rho) < 1.0)) {
        rep.verdict = "failed:Assumption2(ii)";
        return rep;
    }
    rep.envelope = check_mean_envelope(model.mean, ep.r, ep.rho, ep.M0, ep.K0);
    if (!rep.envelope.pass) {
        rep.verdict = "failed:Assumption2(ii)";
        return rep;
    }
    const double order = 2.0 * params.b * params.s0;
    const Innovation inn(model.innovation);
    if (!inn.has_finite_moment(order)) {
        rep.verdict = "failed:Assumption4";
        return rep;
    }
    rep.mu_bar = moment_mu_bar(model.innovation, order);
    rep.lemma2 = check_lemma2(model.arch.alpha, rep.mu_bar);
    if (!rep.lemma2.pass) {
        rep.verdict = "failed:Lemma2";
        return rep;
    }
    const auto bullet = build_bullet_norm(lambda_bar(model.arch.alpha, rep.mu_bar));
    rep.induced = induced_norm_mc(bullet, model.arch.alpha, model.innovation, params.b * params.s0,
                                  opt.norm_draws, opt.drift.seed ^ 0x5bd1e995ULL);
    if (!rep.induced.assumption4) {
        rep.verdict = rep.induced.estimate - 2.0 * rep.induced.std_error >= 1.0 ? "failed:Assumption4"
                                                                                : "inconclusive:Assumption4 within noise";
        return rep;
    }
    if (!opt.run_drift) {
        rep.verdict = "certified";
        return rep;
    }
    const auto grid = opt.custom_grid ? *opt.custom_grid : default_drift_grid(model, opt.grid);
    rep.drift = verify_drift(model, params, grid, opt.drift);
    rep.verdict = rep.drift->verdict;
    return rep;
}

}  // namespace nlarch
