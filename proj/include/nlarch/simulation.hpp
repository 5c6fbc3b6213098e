#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <atomic>
#include <optional>
#include <string>
#include <vector>

#include "nlarch/distributions.hpp"
#include "nlarch/errors.hpp"
#include "nlarch/model.hpp"
#include "nlarch/parallel.hpp"
#include "nlarch/random.hpp"

namespace nlarch {

struct SimulatedPath {
    std::vector<double> y;
    std::vector<double> sigma;
    std::vector<double> eps;
    std::vector<double> u;
    std::vector<double> e;
    std::size_t burn_in = 0;
    std::uint64_t seed = 0;
    /// State just before y[0]: (y_{-1}, ..., y_{-p-q}) with its e^2 tail.
    StateVector pre_sample;
};

inline constexpr double kExplosionBound = 1e150;

/// Zero y lags with a zero e^2 tail.
inline StateVector zero_state(const ModelSpec& m) {
    return StateVector{std::vector<double>(m.dim(), 0.0), std::vector<double>(m.q(), 0.0)};
}

namespace detail {

// Running (p+q)-lag state with the e^2 lags carried forward exactly.
class Recursion {
public:
    Recursion(const ModelSpec& m, const StateVector& init) : m_(m), y_(init.x), e2_(lagged_e2(init, m)) {
        u_prev_ = compute_u(std::span<const double>(init.x).first(m.p()), m.ar);
    }

    struct Step {
        double y, sigma, eps, u, e;
    };

    Step advance(double eps) {
        const double var = conditional_variance_from(y_[0], e2_, m_.arch);
        const double sigma = std::sqrt(var);
        const double e = sigma * eps;
        const double u = mean_g(u_prev_, m_.mean) + e;
        double y = u;
        for (std::size_t i = 0; i < m_.ar.pi.size(); ++i) y += m_.ar.pi[i] * y_[i];
        shift_in(y_, y);
        shift_in(e2_, e * e);
        u_prev_ = u;
        return {y, sigma, eps, u, e};
    }

    [[nodiscard]] StateVector state() const { return StateVector{y_, e2_}; }

private:
    static void shift_in(std::vector<double>& v, double x) {
        std::copy_backward(v.begin(), v.end() - 1, v.end());
        v.front() = x;
    }

    const ModelSpec& m_;
    std::vector<double> y_;
    std::vector<double> e2_;
    double u_prev_ = 0.0;
};

}  // namespace detail

/// Simulates n observations after `burn_in` discarded steps. Throws
/// ExplosionError with the step index (burn-in steps included) of the first
/// non-finite or |y| > 1e150 value.
inline SimulatedPath simulate(const ModelSpec& model, std::size_t n, std::size_t burn_in = 1000,
                              const std::optional<StateVector>& initial = std::nullopt, std::uint64_t seed = 0) {
    validate(model);
    if (n == 0) throw InvalidArgument("simulate: n must be at least 1");
    const StateVector init = initial ? *initial : zero_state(model);
    detail::check_state(init, model);

    const Sampler sampler(model.innovation);
    auto rng = make_stream(seed);
    detail::Recursion rec(model, init);

    SimulatedPath path;
    path.burn_in = burn_in;
    path.seed = seed;
    path.y.reserve(n);
    path.sigma.reserve(n);
    path.eps.reserve(n);
    path.u.reserve(n);
    path.e.reserve(n);

    const std::size_t total = burn_in + n;
    for (std::size_t t = 0; t < total; ++t) {
        if (t == burn_in) path.pre_sample = rec.state();
        const auto s = rec.advance(sampler(rng));
        if (!std::isfinite(s.y) || std::abs(s.y) > kExplosionBound || !std::isfinite(s.sigma)) {
            throw ExplosionError(t, "simulated path exploded");
        }
        if (t < burn_in) continue;
        path.y.push_back(s.y);
        path.sigma.push_back(s.sigma);
        path.eps.push_back(s.eps);
        path.u.push_back(s.u);
        path.e.push_back(s.e);
    }
    return path;
}

/// u_t, e_t and sigma_t recomputed from y alone, given the pre-sample state.
struct Reconstruction {
    std::vector<double> u;
    std::vector<double> e;
    std::vector<double> sigma;
};

inline Reconstruction reconstruct(const ModelSpec& model, const StateVector& pre_sample, const std::vector<double>& y) {
    detail::check_state(pre_sample, model);
    const std::size_t p = model.p();
    std::vector<double> hist(pre_sample.x.rbegin(), pre_sample.x.rend());  // oldest first
    const std::size_t off = hist.size();
    hist.insert(hist.end(), y.begin(), y.end());
    std::vector<double> e2 = lagged_e2(pre_sample, model);
    Reconstruction r;
    r.u.resize(y.size());
    r.e.resize(y.size());
    r.sigma.resize(y.size());
    std::vector<double> window(p);
    auto u_at = [&](std::size_t idx) {
        for (std::size_t i = 0; i < p; ++i) window[i] = hist[idx - i];
        return compute_u(window, model.ar);
    };
    double u_prev = u_at(off - 1);
    for (std::size_t t = 0; t < y.size(); ++t) {
        r.sigma[t] = std::sqrt(conditional_variance_from(hist[off + t - 1], e2, model.arch));
        r.u[t] = u_at(off + t);
        r.e[t] = compute_e(r.u[t], u_prev, model.mean);
        u_prev = r.u[t];
        std::copy_backward(e2.begin(), e2.end() - 1, e2.end());
        e2.front() = r.e[t] * r.e[t];
    }
    return r;
}

/// Linear-interpolation quantile of an ascending sample.
inline double quantile_sorted(const std::vector<double>& v, double prob) {
    if (v.empty()) throw InvalidArgument("quantile of an empty sample");
    const double pos = std::clamp(prob, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---- autocorrelation ---------------------------------------------------------

struct AcfResult {
    std::vector<double> values;  // values[k] = autocorrelation at lag k, values[0] = 1
    double band = 0.0;           // 1.96 / sqrt(T)

    [[nodiscard]] std::size_t count_outside() const {
        std::size_t n = 0;
        for (std::size_t k = 1; k < values.size(); ++k)
            if (std::abs(values[k]) > band) ++n;
        return n;
    }
};

/// Sample ACF with denominator n at every lag.
inline AcfResult acf(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n <= max_lag) throw InvalidArgument("acf: series must be longer than max_lag");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    if (!(c0 > 0.0) || c0 <= 1e-300 * static_cast<double>(n))
        throw DegenerateInput("acf: series has zero variance");
    AcfResult r;
    r.values.resize(max_lag + 1);
    r.values[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t) ck += (x[t] - mean) * (x[t - k] - mean);
        r.values[k] = ck / c0;
    }
    r.band = 1.96 / std::sqrt(static_cast<double>(n));
    return r;
}

// ---- moment tracking ------------------------------------------------------------

struct MomentCell {
    std::size_t length = 0;
    double mean = 0.0;        // across-replication mean of (1/n) sum |y_t|^k
    double dispersion = 0.0;  // across-replication standard deviation
    double std_error = 0.0;
};

struct MomentRow {
    double order = 0.0;
    std::vector<MomentCell> by_length;
    bool divergence_flag = false;
};

struct MomentScan {
    std::vector<MomentRow> rows;
    std::size_t replications = 0;
    bool exploded = false;
};

/// Moment tracking over replicated paths. `paths[j][r]` is replication r at the
/// j-th length; lengths must be increasing. An order is flagged when the
/// across-replication dispersion fails to shrink, or the mean more than doubles,
/// from the shortest to the longest length.
inline MomentScan moment_scan(const std::vector<std::vector<std::vector<double>>>& paths,
                              const std::vector<double>& orders) {
    if (paths.empty()) throw InvalidArgument("moment_scan: no path groups");
    MomentScan scan;
    scan.replications = paths.front().size();
    for (const auto& group : paths) {
        if (group.size() < 50) throw InvalidArgument("moment_scan: at least 50 replications are required");
    }
    for (double k : orders) {
        MomentRow row;
        row.order = k;
        for (const auto& group : paths) {
            MomentCell cell;
            cell.length = group.front().size();
            std::vector<double> est;
            est.reserve(group.size());
            for (const auto& y : group) {
                double s = 0.0;
                for (double v : y) s += std::pow(std::abs(v), k);
                est.push_back(s / static_cast<double>(y.size()));
            }
            double m = 0.0;
            for (double v : est) m += v;
            m /= static_cast<double>(est.size());
            double ss = 0.0;
            for (double v : est) ss += (v - m) * (v - m);
            cell.mean = m;
            cell.dispersion = std::sqrt(ss / static_cast<double>(est.size() - 1));
            cell.std_error = cell.dispersion / std::sqrt(static_cast<double>(est.size()));
            row.by_length.push_back(cell);
        }
        if (row.by_length.size() >= 2) {
            const auto& a = row.by_length.front();
            const auto& b = row.by_length.back();
            const bool not_finite = !std::isfinite(b.mean) || !std::isfinite(b.dispersion);
            row.divergence_flag = not_finite || b.dispersion >= a.dispersion || b.mean > 2.0 * a.mean;
        }
        scan.rows.push_back(std::move(row));
    }
    return scan;
}

struct MomentScanOptions {
    std::vector<double> orders{1.0};
    std::vector<std::size_t> lengths{10000, 100000};
    std::size_t replications = 50;
    std::size_t burn_in = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// Simulates the replications and runs the scan; any explosion sets every flag.
inline MomentScan moment_scan(const ModelSpec& model, const MomentScanOptions& opt) {
    std::vector<std::vector<std::vector<double>>> groups(opt.lengths.size(),
                                                         std::vector<std::vector<double>>(opt.replications));
    std::atomic<bool> exploded{false};
    const std::size_t jobs = opt.lengths.size() * opt.replications;
    parallel_for(
        jobs,
        [&](std::size_t job) {
            const std::size_t j = job / opt.replications;
            const std::size_t r = job % opt.replications;
            if (exploded.load()) return;
            try {
                const std::uint64_t stream_seed = opt.seed ^ (0x9e3779b97f4a7c15ULL * (job + 1));
                groups[j][r] = simulate(model, opt.lengths[j], opt.burn_in, std::nullopt, stream_seed).y;
            } catch (const ExplosionError&) {
                exploded.store(true);
            }
        },
        opt.threads);
    if (exploded.load()) {
        MomentScan scan;
        scan.replications = opt.replications;
        scan.exploded = true;
        for (double k : opt.orders) {
            MomentRow row;
            row.order = k;
            row.divergence_flag = true;
            scan.rows.push_back(row);
        }
        return scan;
    }
    return moment_scan(groups, opt.orders);
}

}  // namespace nlarch
