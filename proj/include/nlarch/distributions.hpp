#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "nlarch/errors.hpp"
#include "nlarch/quadrature.hpp"
#include "nlarch/random.hpp"

namespace nlarch {

// Innovation laws. Every variant is used in its zero-mean, unit-variance form.

struct UnitNormal {};

/// Student-t with `df` degrees of freedom rescaled to unit variance (df > 2).
struct StudentT {
    double df = 5.0;
};

/// Jones skew-t with tail parameters c (left) and d (right), centred and
/// standardised. c = d gives a symmetric t with 2c degrees of freedom.
struct SkewT {
    double c = 2.0;
    double d = 2.0;
};

using InnovationSpec = std::variant<UnitNormal, StudentT, SkewT>;

inline void validate(const InnovationSpec& spec) {
    if (const auto* t = std::get_if<StudentT>(&spec)) {
        if (!(t->df > 2.0) || !std::isfinite(t->df))
            throw InvalidArgument("StudentT requires df > 2 for unit variance");
    } else if (const auto* s = std::get_if<SkewT>(&spec)) {
        if (!(s->c > 1.0) || !(s->d > 1.0) || !std::isfinite(s->c) || !std::isfinite(s->d))
            throw InvalidArgument("SkewT requires c > 1 and d > 1 for a finite variance");
    }
}

inline std::string to_string(const InnovationSpec& spec) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, UnitNormal>) {
                return "normal";
            } else if constexpr (std::is_same_v<T, StudentT>) {
                return "student_t(df=" + std::to_string(v.df) + ")";
            } else {
                return "skew_t(c=" + std::to_string(v.c) + ", d=" + std::to_string(v.d) + ")";
            }
        },
        spec);
}

/// log C_{c,d} with C_{c,d} = 2^{c+d-1} B(c,d) (c+d)^{1/2}.
inline double skewt_log_norm_const(double c, double d) {
    return (c + d - 1.0) * std::numbers::ln2 + std::lgamma(c) + std::lgamma(d) - std::lgamma(c + d) +
           0.5 * std::log(c + d);
}

namespace detail {

// The factor that tends to zero in a tail is evaluated as
// 1 - |x|/r = (c+d) / (r (r + |x|)), avoiding cancellation.
inline double skewt_log_kernel(double x, double c, double d) {
    const double cd = c + d;
    const double r = std::sqrt(cd + x * x);
    const double ax = std::abs(x);
    const double grow = std::log1p(ax / r);
    const double shrink = std::log(cd / (r * (r + ax)));
    const double log_plus = x >= 0.0 ? grow : shrink;
    const double log_minus = x >= 0.0 ? shrink : grow;
    return (c + 0.5) * log_plus + (d + 0.5) * log_minus;
}

}  // namespace detail

/// log f(x; c, d) of the raw (non-standardised) skew-t density.
inline double skewt_log_density_raw(double x, double c, double d) {
    if (!(c > 0.0) || !(d > 0.0)) throw InvalidArgument("skew-t requires c > 0 and d > 0");
    return detail::skewt_log_kernel(x, c, d) - skewt_log_norm_const(c, d);
}

struct Standardization {
    double mean = 0.0;
    double sd = 1.0;
};

/// Mean and standard deviation of the raw skew-t density by quadrature.
inline Standardization skewt_standardize(double c, double d) {
    if (!(c > 1.0) || !(d > 1.0)) throw InvalidArgument("skew-t moments need c > 1 and d > 1");
    const double log_const = skewt_log_norm_const(c, d);
    const double radius = 10.0 * std::sqrt(c + d);
    auto dens = [&](double x) { return std::exp(detail::skewt_log_kernel(x, c, d) - log_const); };
    const double mean = quad::integrate_real_line([&](double x) { return x * dens(x); }, 0.0, radius);
    const double var = quad::integrate_real_line(
        [&](double x) {
            const double dx = x - mean;
            return dx * dx * dens(x);
        },
        0.0, radius);
    return {mean, std::sqrt(var)};
}

/// Density-side view of an innovation law: standardised density, CDF and
/// absolute moments. Immutable after construction.
class Innovation {
public:
    explicit Innovation(InnovationSpec spec) : spec_(spec) {
        validate(spec_);
        if (const auto* t = std::get_if<StudentT>(&spec_)) {
            const double nu = t->df;
            t_scale_ = std::sqrt(nu / (nu - 2.0));
            log_const_ = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                         0.5 * std::log(nu * std::numbers::pi) + std::log(t_scale_);
        } else if (const auto* s = std::get_if<SkewT>(&spec_)) {
            const auto st = skewt_standardize(s->c, s->d);
            loc_ = st.mean;
            scale_ = st.sd;
            log_const_ = std::log(scale_) - skewt_log_norm_const(s->c, s->d);
        } else {
            log_const_ = -0.5 * std::log(2.0 * std::numbers::pi);
        }
    }

    [[nodiscard]] const InnovationSpec& spec() const noexcept { return spec_; }

    /// Location and scale of the raw law (eps = (raw - loc) / scale); (0, 1) unless skew-t.
    [[nodiscard]] double raw_location() const noexcept { return loc_; }
    [[nodiscard]] double raw_scale() const noexcept { return scale_; }

    [[nodiscard]] double log_density(double x) const {
        if (const auto* s = std::get_if<SkewT>(&spec_)) {
            return detail::skewt_log_kernel(scale_ * x + loc_, s->c, s->d) + log_const_;
        }
        if (const auto* t = std::get_if<StudentT>(&spec_)) {
            const double z = x * t_scale_;
            return log_const_ - 0.5 * (t->df + 1.0) * std::log1p(z * z / t->df);
        }
        return log_const_ - 0.5 * x * x;
    }

    [[nodiscard]] double density(double x) const { return std::exp(log_density(x)); }

    [[nodiscard]] double cdf(double x) const {
        if (std::holds_alternative<UnitNormal>(spec_)) return 0.5 * std::erfc(-x / std::numbers::sqrt2);
        if (const auto* t = std::get_if<StudentT>(&spec_)) {
            return boost::math::cdf(boost::math::students_t_distribution<double>(t->df), x * t_scale_);
        }
        auto f = [this](double v) { return density(v); };
        constexpr double radius = 10.0;
        if (x <= 0.0) return lower_mass(f, x, radius);
        return 1.0 - lower_mass([&](double v) { return f(-v); }, -x, radius);
    }

    /// Largest k for which E|eps|^k is finite (exclusive bound); +inf for the normal.
    [[nodiscard]] double moment_bound() const {
        if (const auto* t = std::get_if<StudentT>(&spec_)) return t->df;
        if (const auto* s = std::get_if<SkewT>(&spec_)) return 2.0 * std::min(s->c, s->d);
        return std::numeric_limits<double>::infinity();
    }

    [[nodiscard]] bool has_finite_moment(double k) const { return k < moment_bound(); }

    /// E|eps|^k by quadrature against the standardised density.
    [[nodiscard]] double abs_moment(double k) const {
        if (!(k >= 0.0)) throw InvalidArgument("moment order must be non-negative");
        if (!has_finite_moment(k)) {
            throw DivergentMoment("moment of order " + std::to_string(k) + " is infinite for " +
                                  to_string(spec_));
        }
        if (k == 0.0) return 1.0;
        return quad::integrate_real_line([&](double x) { return std::pow(std::abs(x), k) * density(x); },
                                         0.0, 10.0);
    }

private:
    // Mass of (-inf, x] for x <= 0.
    template <class F>
    static double lower_mass(F&& f, double x, double radius) {
        if (x < -radius) return quad::integrate_tail(f, -x, -1);
        return quad::integrate_tail(f, radius, -1) + quad::integrate(f, -radius, x);
    }

    InnovationSpec spec_;
    double log_const_ = 0.0;
    double loc_ = 0.0;
    double scale_ = 1.0;
    double t_scale_ = 1.0;
};

/// Draws from an innovation law. For the skew-t this inverts a cached
/// monotone Hermite spline of the CDF on 2048 knots, with power-law tails
/// beyond the outermost knots. Immutable and shareable; callers own the RNG.
class Sampler {
public:
    static constexpr std::size_t kKnots = 2048;

    explicit Sampler(const InnovationSpec& spec) : inn_(spec) {
        if (const auto* s = std::get_if<SkewT>(&inn_.spec())) build_skewt_table(s->c, s->d);
    }

    [[nodiscard]] const Innovation& innovation() const noexcept { return inn_; }

    template <class URBG>
    double operator()(URBG& rng) const {
        const auto& spec = inn_.spec();
        if (std::holds_alternative<UnitNormal>(spec)) return std::normal_distribution<double>{}(rng);
        if (const auto* t = std::get_if<StudentT>(&spec)) {
            return std::student_t_distribution<double>{t->df}(rng) / std::sqrt(t->df / (t->df - 2.0));
        }
        return quantile(open_uniform(rng));
    }

    /// Quantile of the standardised law, u in (0, 1).
    [[nodiscard]] double quantile(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
        const auto& spec = inn_.spec();
        if (std::holds_alternative<UnitNormal>(spec)) {
            return boost::math::quantile(boost::math::normal_distribution<double>(), u);
        }
        if (const auto* t = std::get_if<StudentT>(&spec)) {
            return boost::math::quantile(boost::math::students_t_distribution<double>(t->df), u) /
                   std::sqrt(t->df / (t->df - 2.0));
        }
        return (raw_quantile(u) - inn_.raw_location()) / inn_.raw_scale();
    }

private:
    void build_skewt_table(double c, double d) {
        left_index_ = 2.0 * c;
        right_index_ = 2.0 * d;
        const double log_const = skewt_log_norm_const(c, d);
        auto f = [&](double x) { return std::exp(detail::skewt_log_kernel(x, c, d) - log_const); };

        x_.resize(kKnots);
        cdf_.resize(kKnots);
        slope_.resize(kKnots);
        const double spread = inn_.raw_scale();
        for (std::size_t k = 0; k < kKnots; ++k) {
            const double theta = -0.5 * std::numbers::pi + std::numbers::pi * (static_cast<double>(k) + 0.5) / kKnots;
            x_[k] = inn_.raw_location() + spread * std::tan(theta);
        }
        // The outer knots sit near +-1300 sd, so the tails are integrated from there in
        // absolute coordinates, where the power-law decay is already visible.
        double acc = outer_mass(f, x_.front(), -1);
        for (std::size_t k = 0; k < kKnots; ++k) {
            if (k > 0) acc += quad::integrate_fixed(f, x_[k - 1], x_[k]);
            cdf_[k] = acc;
            slope_[k] = 1.0 / f(x_[k]);
        }
        const double upper = outer_mass(f, x_.back(), +1);
        const double total = acc + upper;
        for (auto& v : cdf_) v /= total;
        for (auto& v : slope_) v *= total;
    }

    // Mass beyond `edge` in `direction`; the edge must lie on that side of zero.
    template <class F>
    static double outer_mass(F&& f, double edge, int direction) {
        if (edge * direction <= 0.0) throw NumericError("skew-t table: outer knot on the wrong side of zero");
        return quad::integrate_tail(f, std::abs(edge), direction);
    }

    [[nodiscard]] double raw_quantile(double u) const {
        if (u <= cdf_.front()) {
            return x_.front() - (std::abs(x_.front() - inn_.raw_location())) *
                                    (std::pow(cdf_.front() / u, 1.0 / left_index_) - 1.0);
        }
        if (u >= cdf_.back()) {
            return x_.back() + (std::abs(x_.back() - inn_.raw_location())) *
                                   (std::pow((1.0 - cdf_.back()) / (1.0 - u), 1.0 / right_index_) - 1.0);
        }
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        const std::size_t hi = static_cast<std::size_t>(it - cdf_.begin());
        const std::size_t lo = hi - 1;
        const double h = cdf_[hi] - cdf_[lo];
        if (h <= 0.0) return x_[lo];
        const double t = (u - cdf_[lo]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * x_[lo] + (t3 - 2 * t2 + t) * h * slope_[lo] + (-2 * t3 + 3 * t2) * x_[hi] +
               (t3 - t2) * h * slope_[hi];
    }

    Innovation inn_;
    std::vector<double> x_;
    std::vector<double> cdf_;
    std::vector<double> slope_;
    double left_index_ = 0.0;
    double right_index_ = 0.0;
};

/// n IID standardised draws, reproducible from `seed`.
inline std::vector<double> sample(const InnovationSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("sample size must be at least 1");
    const Sampler sampler(spec);
    auto rng = make_stream(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = sampler(rng);
    return out;
}

}  // namespace nlarch
