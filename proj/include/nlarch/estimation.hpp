#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlarch/distributions.hpp"
#include "nlarch/errors.hpp"
#include "nlarch/model.hpp"
#include "nlarch/optimize.hpp"
#include "nlarch/simulation.hpp"

namespace nlarch {

inline constexpr double kLoglikSentinel = -1e300;

enum class InitialE2 {
    Reconstruct,     // e^2 lags rebuilt exactly from the first p + q observations
    SampleVariance,  // every lag set to the variance of the demeaned first p + q observations
};

struct LoglikTerms {
    double loglik = 0.0;
    std::vector<double> residuals;  // standardised eps_t, t = p+q, ..., n-1
    std::vector<double> sigma;
    std::vector<double> mean;
};

namespace detail {

inline LoglikTerms loglik_pass(const ModelSpec& m, const Innovation& inn, const std::vector<double>& y,
                               InitialE2 init, bool keep_series) {
    const std::size_t p = m.p();
    const std::size_t q = m.q();
    const std::size_t t0 = p + q;
    if (y.size() <= t0) throw InsufficientData("log-likelihood needs more than p + q observations");
    for (double v : y)
        if (!std::isfinite(v)) throw DataError("log-likelihood: non-finite observation");

    StateVector s;
    s.x.assign(y.rend() - static_cast<std::ptrdiff_t>(t0), y.rend());
    if (init == InitialE2::SampleVariance) {
        double mean = 0.0;
        for (std::size_t i = 0; i < t0; ++i) mean += y[i];
        mean /= static_cast<double>(t0);
        double var = 0.0;
        for (std::size_t i = 0; i < t0; ++i) var += (y[i] - mean) * (y[i] - mean);
        var /= static_cast<double>(t0 > 1 ? t0 - 1 : 1);
        s.e2_tail = std::vector<double>(q, var);
    }
    std::vector<double> e2 = lagged_e2(s, m);
    std::vector<double> window(p);
    auto u_at = [&](std::size_t t) {
        for (std::size_t i = 0; i < p; ++i) window[i] = y[t - i];
        return compute_u(window, m.ar);
    };
    double u_prev = u_at(t0 - 1);

    LoglikTerms out;
    if (keep_series) {
        out.residuals.reserve(y.size() - t0);
        out.sigma.reserve(y.size() - t0);
        out.mean.reserve(y.size() - t0);
    }
    double ll = 0.0;
    for (std::size_t t = t0; t < y.size(); ++t) {
        const double var = conditional_variance_from(y[t - 1], e2, m.arch);
        if (!(var > 0.0) || !std::isfinite(var)) {
            out.loglik = kLoglikSentinel;
            return out;
        }
        const double sigma = std::sqrt(var);
        double mu = mean_g(u_prev, m.mean);
        for (std::size_t i = 0; i < m.ar.pi.size(); ++i) mu += m.ar.pi[i] * y[t - 1 - i];
        const double e = y[t] - mu;
        const double eps = e / sigma;
        ll += inn.log_density(eps) - std::log(sigma);
        if (keep_series) {
            out.residuals.push_back(eps);
            out.sigma.push_back(sigma);
            out.mean.push_back(mu);
        }
        u_prev = u_at(t);
        std::copy_backward(e2.begin(), e2.end() - 1, e2.end());
        e2.front() = e * e;
    }
    out.loglik = std::isfinite(ll) ? ll : kLoglikSentinel;
    return out;
}

}  // namespace detail

/// sum_{t > p+q} [log f(eps_t) - log sigma_t], conditioning on the first p + q
/// observations. Invalid parameters give kLoglikSentinel.
inline double conditional_loglik(const ModelSpec& m, const std::vector<double>& y,
                                 InitialE2 init = InitialE2::Reconstruct) {
    for (double v : y)
        if (!std::isfinite(v)) throw DataError("log-likelihood: non-finite observation");
    try {
        validate(m);
    } catch (const InvalidArgument&) {
        return kLoglikSentinel;
    }
    const Innovation inn(m.innovation);
    return detail::loglik_pass(m, inn, y, init, false).loglik;
}

// ---- parameter template -------------------------------------------------------------

enum class InnovationKind { Normal, StudentT, SkewT };

/// The logistic-intercept AR-ARCH family: p - 1 free AR coefficients,
/// g(u) = u - nu L(u; gamma, a) + nu (1 - L(u; gamma, a)), and
/// sigma^2 = (omega + sum alpha_i e^2) L(y_{t-1}; gamma_z, a_z) when gated.
struct ParamTemplate {
    std::size_t p = 1;
    std::size_t q = 3;
    bool gate_variance = true;
    bool shared_gate = true;  // gamma_z = gamma, a_z = a
    InnovationKind innovation = InnovationKind::SkewT;

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (std::size_t i = 1; i < p; ++i) n.push_back("pi" + std::to_string(i));
        n.insert(n.end(), {"nu", "gamma", "a"});
        if (gate_variance && !shared_gate) n.insert(n.end(), {"gamma_z", "a_z"});
        n.push_back("omega");
        for (std::size_t i = 1; i <= q; ++i) n.push_back("alpha" + std::to_string(i));
        if (innovation == InnovationKind::SkewT) n.insert(n.end(), {"c", "d"});
        if (innovation == InnovationKind::StudentT) n.push_back("df");
        return n;
    }

    [[nodiscard]] std::size_t size() const { return names().size(); }

    [[nodiscard]] std::size_t index(const std::string& name) const {
        const auto n = names();
        const auto it = std::find(n.begin(), n.end(), name);
        if (it == n.end()) throw InvalidArgument("unknown parameter '" + name + "'");
        return static_cast<std::size_t>(it - n.begin());
    }

    [[nodiscard]] ModelSpec to_model(const std::vector<double>& th) const {
        if (th.size() != size()) throw InvalidArgument("parameter vector has the wrong length");
        std::size_t k = 0;
        ModelSpec m;
        for (std::size_t i = 1; i < p; ++i) m.ar.pi.push_back(th[k++]);
        const double nu = th[k++];
        const double gamma = th[k++];
        const double a = th[k++];
        m.mean = LogisticIntercept{-nu, nu, gamma, a, a};
        double gz = gamma, az = a;
        if (gate_variance && !shared_gate) {
            gz = th[k++];
            az = th[k++];
        }
        m.arch.omega = th[k++];
        m.arch.alpha.assign(th.begin() + static_cast<std::ptrdiff_t>(k), th.begin() + static_cast<std::ptrdiff_t>(k + q));
        k += q;
        if (gate_variance) m.arch.zeta.assign(q + 1, LogisticGate{gz, az});
        if (innovation == InnovationKind::SkewT) {
            m.innovation = SkewT{th[k], th[k + 1]};
        } else if (innovation == InnovationKind::StudentT) {
            m.innovation = StudentT{th[k]};
        } else {
            m.innovation = UnitNormal{};
        }
        return m;
    }

    /// Inverse of to_model for a model of this family.
    [[nodiscard]] std::vector<double> from_model(const ModelSpec& m) const {
        const auto* li = std::get_if<LogisticIntercept>(&m.mean);
        if (!li || m.p() != p || m.q() != q) throw InvalidArgument("model does not belong to the template family");
        std::vector<double> th(m.ar.pi.begin(), m.ar.pi.end());
        th.insert(th.end(), {li->nu2, li->gamma, li->a1});
        if (gate_variance && !shared_gate) {
            const auto* g = std::get_if<LogisticGate>(&m.arch.zeta.at(0));
            if (!g) throw InvalidArgument("template expects a logistic variance gate");
            th.insert(th.end(), {g->gamma, g->a});
        }
        th.push_back(m.arch.omega);
        th.insert(th.end(), m.arch.alpha.begin(), m.arch.alpha.end());
        if (const auto* s = std::get_if<SkewT>(&m.innovation)) th.insert(th.end(), {s->c, s->d});
        if (const auto* t = std::get_if<StudentT>(&m.innovation)) th.push_back(t->df);
        return th;
    }

    /// True when th lies inside the family's parameter space.
    [[nodiscard]] bool feasible(const std::vector<double>& th) const {
        for (double v : th)
            if (!std::isfinite(v)) return false;
        try {
            validate(to_model(th));
        } catch (const InvalidArgument&) {
            return false;
        }
        return true;
    }
};

/// The template of the volatility-index application: p = 1, q = 3, shared
/// logistic gate, skew-t errors.
inline ParamTemplate empirical_template() { return ParamTemplate{}; }

inline double conditional_loglik(const std::vector<double>& th, const std::vector<double>& y, const ParamTemplate& tpl,
                                 InitialE2 init = InitialE2::Reconstruct) {
    if (!tpl.feasible(th)) {
        for (double v : y)
            if (!std::isfinite(v)) throw DataError("log-likelihood: non-finite observation");
        return kLoglikSentinel;
    }
    return conditional_loglik(tpl.to_model(th), y, init);
}

// ---- unconstrained reparameterisation -----------------------------------------------------

/// theta <-> eta. Log for nu, gamma, gamma_z, omega; log(c-1), log(d-1),
/// log(df-2); identity for pi, a, a_z; for alpha a logit-simplex map
/// alpha_i = exp(eta_i) / (1 + sum_j exp(eta_j)) keeping sum(alpha) < 1.
struct Reparam {
    ParamTemplate tpl;

    enum class Kind { Identity, Log, LogShift1, LogShift2, Simplex };

    [[nodiscard]] std::vector<Kind> kinds() const {
        std::vector<Kind> k;
        for (const auto& n : tpl.names()) {
            if (n == "nu" || n == "gamma" || n == "gamma_z" || n == "omega") k.push_back(Kind::Log);
            else if (n == "c" || n == "d") k.push_back(Kind::LogShift1);
            else if (n == "df") k.push_back(Kind::LogShift2);
            else if (n.rfind("alpha", 0) == 0) k.push_back(Kind::Simplex);
            else k.push_back(Kind::Identity);
        }
        return k;
    }

    [[nodiscard]] std::vector<double> to_eta(const std::vector<double>& th) const {
        const auto k = kinds();
        std::vector<double> eta(th.size());
        double rest = 1.0;
        for (std::size_t i = 0; i < th.size(); ++i)
            if (k[i] == Kind::Simplex) rest -= th[i];
        if (!(rest > 0.0)) throw InvalidArgument("alpha must sum to less than 1");
        for (std::size_t i = 0; i < th.size(); ++i) {
            switch (k[i]) {
                case Kind::Identity: eta[i] = th[i]; break;
                case Kind::Log: eta[i] = std::log(th[i]); break;
                case Kind::LogShift1: eta[i] = std::log(th[i] - 1.0); break;
                case Kind::LogShift2: eta[i] = std::log(th[i] - 2.0); break;
                case Kind::Simplex: eta[i] = std::log(th[i] / rest); break;
            }
            if (!std::isfinite(eta[i])) throw InvalidArgument("parameter " + tpl.names()[i] + " is on the boundary");
        }
        return eta;
    }

    [[nodiscard]] std::vector<double> to_theta(const std::vector<double>& eta) const {
        const auto k = kinds();
        std::vector<double> th(eta.size());
        double denom = 1.0;
        for (std::size_t i = 0; i < eta.size(); ++i)
            if (k[i] == Kind::Simplex) denom += std::exp(eta[i]);
        for (std::size_t i = 0; i < eta.size(); ++i) {
            switch (k[i]) {
                case Kind::Identity: th[i] = eta[i]; break;
                case Kind::Log: th[i] = std::exp(eta[i]); break;
                case Kind::LogShift1: th[i] = 1.0 + std::exp(eta[i]); break;
                case Kind::LogShift2: th[i] = 2.0 + std::exp(eta[i]); break;
                case Kind::Simplex: th[i] = std::exp(eta[i]) / denom; break;
            }
        }
        return th;
    }

    /// d theta / d eta, analytic.
    [[nodiscard]] Eigen::MatrixXd jacobian(const std::vector<double>& eta) const {
        const auto k = kinds();
        const auto th = to_theta(eta);
        const auto n = static_cast<Eigen::Index>(eta.size());
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            switch (k[ui]) {
                case Kind::Identity: J(i, i) = 1.0; break;
                case Kind::Log: J(i, i) = th[ui]; break;
                case Kind::LogShift1: J(i, i) = th[ui] - 1.0; break;
                case Kind::LogShift2: J(i, i) = th[ui] - 2.0; break;
                case Kind::Simplex:
                    for (Eigen::Index j = 0; j < n; ++j) {
                        const auto uj = static_cast<std::size_t>(j);
                        if (k[uj] != Kind::Simplex) continue;
                        J(i, j) = (i == j ? th[ui] : 0.0) - th[ui] * th[uj];
                    }
                    break;
            }
        }
        return J;
    }
};

// ---- fitting ------------------------------------------------------------------------------

struct FitSpec {
    ParamTemplate tpl;
    std::optional<std::vector<double>> init;          // heuristic start when absent
    std::map<std::string, double> fixed;              // parameters held at a value
    std::map<std::string, std::pair<double, double>> bounds;  // extra box constraints
    std::size_t simplex_iterations = 3000;
    std::size_t quasi_newton_iterations = 500;
    std::optional<std::size_t> max_iterations;        // caps both stages when set
    double gradient_tolerance = 1e-3;
    InitialE2 initial_e2 = InitialE2::Reconstruct;
};

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> density;         // counts / (n * width)
    std::vector<double> fitted_density;  // fitted innovation density at bin centres
};

struct Diagnostics {
    AcfResult acf_resid;
    AcfResult acf_sq;
    Histogram histogram;
    std::vector<std::pair<double, double>> density_curve;  // (x, fitted f(x)) on a fine grid
    std::vector<std::pair<double, double>> qq;            // (theoretical, empirical)
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> estimates;
    std::vector<double> standard_errors;
    std::vector<bool> free;
    bool hessian_pd = false;
    double loglik = kLoglikSentinel;
    std::vector<double> residuals;
    std::vector<double> sigma;
    bool converged = false;
    std::string status;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    double seconds = 0.0;
    ParamTemplate tpl;

    [[nodiscard]] double estimate(const std::string& n) const { return estimates.at(tpl.index(n)); }
    [[nodiscard]] double se(const std::string& n) const { return standard_errors.at(tpl.index(n)); }
    [[nodiscard]] ModelSpec model() const { return tpl.to_model(estimates); }
};

/// Data-driven start for the logistic-intercept family.
inline std::vector<double> heuristic_init(const std::vector<double>& y, const ParamTemplate& tpl) {
    if (y.size() < 10) throw InsufficientData("heuristic_init: too few observations");
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    const double iqr = std::max(sorted[3 * sorted.size() / 4] - sorted[sorted.size() / 4], 1e-6);
    double dvar = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) dvar += (y[t] - y[t - 1]) * (y[t] - y[t - 1]);
    dvar /= static_cast<double>(y.size() - 1);

    std::vector<double> th;
    for (std::size_t i = 1; i < tpl.p; ++i) th.push_back(0.0);
    const double gamma = 2.0 / iqr;
    th.insert(th.end(), {0.05 * std::sqrt(dvar), gamma, med});
    if (tpl.gate_variance && !tpl.shared_gate) th.insert(th.end(), {gamma, med});
    const double asum = 0.6;
    // The gate is about one half at the median, hence the factor 2.
    th.push_back((tpl.gate_variance ? 2.0 : 1.0) * dvar * (1.0 - asum));
    for (std::size_t i = 0; i < tpl.q; ++i) th.push_back(asum * std::pow(0.5, static_cast<double>(i)) / (2.0 - std::pow(0.5, static_cast<double>(tpl.q - 1))));
    if (tpl.innovation == InnovationKind::SkewT) th.insert(th.end(), {4.0, 4.0});
    if (tpl.innovation == InnovationKind::StudentT) th.push_back(8.0);
    return th;
}

/// Two-stage conditional ML: Nelder-Mead on the unconstrained scale, then BFGS.
/// Standard errors by the delta method from the inverse Hessian in eta.
inline FitResult fit(const std::vector<double>& y, const FitSpec& spec) {
    const auto start_time = std::chrono::steady_clock::now();
    const auto& tpl = spec.tpl;
    if (y.size() <= tpl.p + tpl.q + 1) throw InsufficientData("fit: series too short for the model orders");
    for (double v : y)
        if (!std::isfinite(v)) throw DataError("fit: non-finite observation");
    const Reparam rp{tpl};
    const auto names = tpl.names();
    const std::size_t np = names.size();

    std::vector<double> theta0 = spec.init ? *spec.init : heuristic_init(y, tpl);
    if (theta0.size() != np) throw ConfigError("fit: initial vector has the wrong length");
    std::vector<bool> is_free(np, true);
    for (const auto& [name, value] : spec.fixed) {
        const auto i = tpl.index(name);
        is_free[i] = false;
        theta0[i] = value;
    }
    if (!tpl.feasible(theta0)) throw ConfigError("fit: initial parameters violate the model constraints");
    const std::vector<double> eta0 = rp.to_eta(theta0);

    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < np; ++i)
        if (is_free[i]) free_idx.push_back(i);
    const auto nf = static_cast<Eigen::Index>(free_idx.size());

    auto expand = [&](const Eigen::VectorXd& v) {
        std::vector<double> eta = eta0;
        for (Eigen::Index i = 0; i < nf; ++i) eta[free_idx[static_cast<std::size_t>(i)]] = v[i];
        return eta;
    };
    auto in_bounds = [&](const std::vector<double>& th) {
        for (const auto& [name, b] : spec.bounds) {
            const double v = th[tpl.index(name)];
            if (v < b.first || v > b.second) return false;
        }
        return true;
    };
    const double scale = 1.0 / static_cast<double>(y.size());
    const opt::Objective nll = [&](const Eigen::VectorXd& v) {
        const auto th = rp.to_theta(expand(v));
        if (!in_bounds(th)) return -kLoglikSentinel;
        const double ll = conditional_loglik(th, y, tpl, spec.initial_e2);
        return ll <= kLoglikSentinel ? -kLoglikSentinel : -ll * scale;
    };

    Eigen::VectorXd v0(nf);
    for (Eigen::Index i = 0; i < nf; ++i) v0[i] = eta0[free_idx[static_cast<std::size_t>(i)]];

    FitResult res;
    res.tpl = tpl;
    res.names = names;
    res.free = is_free;

    opt::NelderMeadOptions nmo;
    nmo.max_iterations = spec.max_iterations ? std::min(*spec.max_iterations, spec.simplex_iterations) : spec.simplex_iterations;
    nmo.initial_step = 0.2;
    opt::BfgsOptions bo;
    bo.max_iterations = spec.max_iterations ? std::min(*spec.max_iterations, spec.quasi_newton_iterations)
                                            : spec.quasi_newton_iterations;
    bo.gtol = spec.gradient_tolerance * scale;

    Eigen::VectorXd vbest = v0;
    bool converged = false;
    if (nf > 0) {
        const auto s1 = opt::nelder_mead(nll, v0, nmo);
        const auto s2 = opt::bfgs(nll, s1.x, bo);
        vbest = s2.f <= s1.f ? s2.x : s1.x;
        converged = s2.converged;
        res.iterations = s1.iterations + s2.iterations;
        res.evaluations = s1.evaluations + s2.evaluations;
    } else {
        converged = true;
    }

    const auto eta_hat = expand(vbest);
    res.estimates = rp.to_theta(eta_hat);
    res.standard_errors.assign(np, 0.0);
    res.converged = converged;
    res.status = converged ? "converged" : "failed";

    const auto model = tpl.to_model(res.estimates);
    const Innovation inn(model.innovation);
    auto terms = detail::loglik_pass(model, inn, y, spec.initial_e2, true);
    res.loglik = terms.loglik;
    res.residuals = std::move(terms.residuals);
    res.sigma = std::move(terms.sigma);

    if (nf > 0) {
        const opt::Objective raw = [&](const Eigen::VectorXd& v) { return nll(v) / scale; };
        const Eigen::MatrixXd H = opt::numerical_hessian(raw, vbest);
        const Eigen::LLT<Eigen::MatrixXd> llt(H);
        res.hessian_pd = llt.info() == Eigen::Success && H.allFinite();
        if (res.hessian_pd) {
            const Eigen::MatrixXd cov_eta = llt.solve(Eigen::MatrixXd::Identity(nf, nf));
            const Eigen::MatrixXd Jfull = rp.jacobian(eta_hat);
            Eigen::MatrixXd J(static_cast<Eigen::Index>(np), nf);
            for (Eigen::Index j = 0; j < nf; ++j) J.col(j) = Jfull.col(static_cast<Eigen::Index>(free_idx[static_cast<std::size_t>(j)]));
            const Eigen::MatrixXd cov = J * cov_eta * J.transpose();
            for (std::size_t i = 0; i < np; ++i) {
                const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
                res.standard_errors[i] = is_free[i] && v > 0.0 ? std::sqrt(v) : 0.0;
            }
        }
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return res;
}

// ---- residual diagnostics ----------------------------------------------------------------------

/// Residual ACFs, Freedman-Diaconis histogram with the fitted density, and Q-Q pairs.
inline Diagnostics residual_diagnostics(const std::vector<double>& resid, const InnovationSpec& innovation,
                                        std::size_t max_lag = 100) {
    if (resid.size() < 4) throw InsufficientData("residual_diagnostics: too few residuals");
    Diagnostics d;
    const std::size_t lag = std::min(max_lag, resid.size() - 1);
    d.acf_resid = acf(resid, lag);
    std::vector<double> sq(resid.size());
    for (std::size_t i = 0; i < resid.size(); ++i) sq[i] = resid[i] * resid[i];
    d.acf_sq = acf(sq, lag);

    std::vector<double> sorted = resid;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double lo = sorted.front(), hi = sorted.back();
    double width = 2.0 * iqr / std::cbrt(n);
    if (!(width > 0.0)) width = (hi - lo) / 10.0 + 1e-12;
    const auto bins = static_cast<std::size_t>(std::clamp(std::ceil((hi - lo) / width), 1.0, 1000.0));
    width = (hi - lo) / static_cast<double>(bins) + 1e-15;
    const Innovation inn(innovation);
    auto& h = d.histogram;
    h.counts.assign(bins, 0);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(lo + width * static_cast<double>(i));
    for (double v : sorted) h.counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / width))]++;
    for (std::size_t i = 0; i < bins; ++i) {
        h.density.push_back(static_cast<double>(h.counts[i]) / (n * width));
        h.fitted_density.push_back(inn.density(lo + width * (static_cast<double>(i) + 0.5)));
    }
    constexpr std::size_t curve = 201;
    for (std::size_t i = 0; i < curve; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(curve - 1);
        d.density_curve.emplace_back(x, inn.density(x));
    }
    const Sampler sampler(innovation);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double prob = (static_cast<double>(i) + 0.5) / n;
        d.qq.emplace_back(sampler.quantile(prob), sorted[i]);
    }
    return d;
}

inline Diagnostics residual_diagnostics(const FitResult& f, std::size_t max_lag = 100) {
    return residual_diagnostics(f.residuals, f.model().innovation, max_lag);
}

}  // namespace nlarch
