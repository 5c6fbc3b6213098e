#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "nlarch/distributions.hpp"
#include "nlarch/quadrature.hpp"

using namespace nlarch;

namespace {

// Closed forms from the Beta representation T = sqrt(c+d) (2B-1) / (2 sqrt(B(1-B))),
// B ~ Beta(c, d); used here only as test oracles.
double jf_cdf_raw(double t, double c, double d) {
    return boost::math::ibeta(c, d, 0.5 * (1.0 + t / std::sqrt(c + d + t * t)));
}

double jf_mean(double c, double d) {
    return 0.5 * (c - d) * std::sqrt(c + d) * std::exp(std::lgamma(c - 0.5) + std::lgamma(d - 0.5) - std::lgamma(c) - std::lgamma(d));
}

double jf_second_moment(double c, double d) {
    return 0.25 * (c + d) * ((c - d) * (c - d) + c - 1.0 + d - 1.0) / ((c - 1.0) * (d - 1.0));
}

double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

// Independent integrator for normalisation checks: exp-sinh on each half line.
template <class F>
double integrate_line(F f) {
    boost::math::quadrature::exp_sinh<double> es;
    const double right = es.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    const double left = es.integrate([&](double x) { return f(-x); }, 0.0, std::numeric_limits<double>::infinity());
    return left + right;
}

}  // namespace

TEST(SkewTRawDensity, UnitParametersAtZero) {
    EXPECT_NEAR(skewt_log_density_raw(0.0, 1.0, 1.0), std::log(1.0 / (2.0 * std::numbers::sqrt2)), 1e-14);
    EXPECT_NEAR(skewt_log_density_raw(0.0, 1.0, 1.0), -1.0397, 1e-4);
}

TEST(SkewTRawDensity, SymmetricCaseIsExactlyEven) {
    for (double c : {1.5, 2.0, 7.25}) {
        for (int i = 0; i < 1000; ++i) {
            const double x = -40.0 + 0.08 * i;
            EXPECT_EQ(skewt_log_density_raw(x, c, c), skewt_log_density_raw(-x, c, c));
        }
    }
}

TEST(SkewTRawDensity, EqualTailsGiveStudentT) {
    const boost::math::students_t_distribution<double> t6(6.0);
    for (double x : {-30.0, -3.0, -0.2, 0.0, 1.1, 12.0}) {
        EXPECT_NEAR(std::exp(skewt_log_density_raw(x, 3.0, 3.0)), boost::math::pdf(t6, x), 1e-14);
    }
}

TEST(SkewTRawDensity, MatchesClosedFormCdfDerivative) {
    const double c = 3.551, d = 2.138, h = 1e-4;
    for (double x : {-8.0, -1.0, 0.0, 0.7, 5.0, 40.0}) {
        const double deriv = (jf_cdf_raw(x + h, c, d) - jf_cdf_raw(x - h, c, d)) / (2.0 * h);
        EXPECT_NEAR(std::exp(skewt_log_density_raw(x, c, d)), deriv, 1e-8 * std::max(1.0, deriv));
    }
}

TEST(SkewTRawDensity, FiniteFarInTails) {
    const double v = skewt_log_density_raw(1e150, 3.551, 2.138);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, -1000.0);
    EXPECT_TRUE(std::isfinite(skewt_log_density_raw(-1e150, 3.551, 2.138)));
}

TEST(SkewTRawDensity, IntegratesToOne) {
    const double total = integrate_line([](double x) { return std::exp(skewt_log_density_raw(x, 3.551, 2.138)); });
    EXPECT_NEAR(total, 1.0, 1e-8);
}

TEST(SkewTStandardize, SymmetricMeanIsZero) {
    for (double c : {1.3, 2.0, 6.0}) EXPECT_NEAR(skewt_standardize(c, c).mean, 0.0, 1e-12);
}

TEST(SkewTStandardize, MatchesClosedFormMoments) {
    const auto st = skewt_standardize(3.551, 2.138);
    const double m = jf_mean(3.551, 2.138);
    EXPECT_GT(st.mean, 0.0);
    EXPECT_NEAR(st.mean, m, 1e-9);
    EXPECT_NEAR(st.sd, std::sqrt(jf_second_moment(3.551, 2.138) - m * m), 1e-8);
}

TEST(SkewTStandardize, RejectsInfiniteVariance) {
    EXPECT_THROW(skewt_standardize(1.0, 3.0), InvalidArgument);
    EXPECT_THROW(skewt_standardize(3.0, 0.5), InvalidArgument);
}

TEST(Innovation, NormalDensityAtZero) {
    EXPECT_NEAR(Innovation(UnitNormal{}).density(0.0), 0.3989422804014327, 1e-15);
}

TEST(Innovation, StudentTIsRescaledToUnitVariance) {
    const double df = 5.0;
    const double k = std::sqrt(df / (df - 2.0));
    const boost::math::students_t_distribution<double> t(df);
    const Innovation inn(StudentT{df});
    for (double x : {-4.0, -0.5, 0.0, 2.0}) {
        EXPECT_NEAR(inn.density(x), k * boost::math::pdf(t, k * x), 1e-14);
        EXPECT_NEAR(inn.cdf(x), boost::math::cdf(t, k * x), 1e-14);
    }
}

TEST(Innovation, SkewTSymmetricAtTwo) {
    const Innovation inn(SkewT{2.0, 2.0});
    for (double x : {0.1, 0.9, 3.0, 25.0}) EXPECT_EQ(inn.density(x), inn.density(-x));
}

TEST(Innovation, ValidateRejectsBadParameters) {
    EXPECT_THROW(Innovation(StudentT{2.0}), InvalidArgument);
    EXPECT_THROW(Innovation(SkewT{1.0, 3.0}), InvalidArgument);
    EXPECT_THROW(Innovation(SkewT{3.0, 0.9}), InvalidArgument);
}

TEST(Innovation, CdfMatchesIncompleteBeta) {
    const double c = 3.551, d = 2.138;
    const Innovation inn(SkewT{c, d});
    for (double x = -12.0; x <= 30.0; x += 0.37) {
        const double ref = jf_cdf_raw(inn.raw_scale() * x + inn.raw_location(), c, d);
        EXPECT_NEAR(inn.cdf(x), ref, 1e-9) << "x = " << x;
    }
}

TEST(Innovation, AllLawsNormalisedCentredAndScaled) {
    const std::vector<InnovationSpec> specs{UnitNormal{}, StudentT{2.5}, StudentT{9.0}, SkewT{3.551, 2.138},
                                            SkewT{2.0, 2.0}, SkewT{6.0, 1.6}};
    for (const auto& s : specs) {
        const Innovation inn(s);
        auto f = [&](double x) { return inn.density(x); };
        EXPECT_NEAR(quad::integrate_real_line(f, 0.0, 10.0), 1.0, 1e-8) << to_string(s);
        EXPECT_NEAR(quad::integrate_real_line([&](double x) { return x * f(x); }, 0.0, 10.0), 0.0, 1e-7) << to_string(s);
        if (!std::holds_alternative<StudentT>(s) || std::get<StudentT>(s).df > 3.0) {
            EXPECT_NEAR(quad::integrate_real_line([&](double x) { return x * x * f(x); }, 0.0, 10.0), 1.0, 1e-6)
                << to_string(s);
        }
    }
}

TEST(InnovationProperty, RandomSkewTStandardisation) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> par(1.1, 10.0);
    for (int rep = 0; rep < 20; ++rep) {
        const double c = par(rng), d = par(rng);
        const Innovation inn(SkewT{c, d});
        // Standardised moments from the closed forms of the raw law.
        const double m = jf_mean(c, d);
        const double s = std::sqrt(jf_second_moment(c, d) - m * m);
        EXPECT_NEAR((m - inn.raw_location()) / s, 0.0, 1e-7) << c << ", " << d;
        EXPECT_NEAR(s / inn.raw_scale(), 1.0, 1e-6) << c << ", " << d;
        EXPECT_NEAR(quad::integrate_real_line([&](double x) { return inn.density(x); }, 0.0, 10.0), 1.0, 1e-8);
    }
}

TEST(Innovation, MomentGate) {
    const Innovation inn(SkewT{3.551, 2.138});
    EXPECT_DOUBLE_EQ(inn.moment_bound(), 4.276);
    EXPECT_NO_THROW(inn.abs_moment(4.0));
    EXPECT_THROW(inn.abs_moment(4.276), DivergentMoment);
    EXPECT_THROW(inn.abs_moment(6.0), DivergentMoment);
    EXPECT_THROW(Innovation(StudentT{4.0}).abs_moment(4.0), DivergentMoment);
    EXPECT_NEAR(Innovation(UnitNormal{}).abs_moment(4.0), 3.0, 1e-10);
    EXPECT_NEAR(Innovation(UnitNormal{}).abs_moment(2.0), 1.0, 1e-10);
}

TEST(Sampler, NormalMoments) {
    const auto x = sample(UnitNormal{}, 1000000, 42);
    double m = 0.0, v = 0.0;
    for (double e : x) m += e;
    m /= static_cast<double>(x.size());
    for (double e : x) v += (e - m) * (e - m);
    v /= static_cast<double>(x.size() - 1);
    EXPECT_NEAR(m, 0.0, 0.004);
    EXPECT_NEAR(v, 1.0, 0.01);
}

TEST(Sampler, SkewTMomentsAndRightSkew) {
    const auto x = sample(SkewT{3.551, 2.138}, 1000000, 42);
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double e : x) m += e;
    m /= n;
    double v = 0.0, s3 = 0.0;
    for (double e : x) {
        v += (e - m) * (e - m);
        s3 += (e - m) * (e - m) * (e - m);
    }
    v /= n - 1.0;
    EXPECT_NEAR(v, 1.0, 0.01);
    EXPECT_NEAR(m, 0.0, 0.005);
    EXPECT_GT(s3 / n, 0.0);
}

TEST(Sampler, SameSeedSameDraws) {
    for (const InnovationSpec& s : std::vector<InnovationSpec>{UnitNormal{}, StudentT{5.0}, SkewT{3.551, 2.138}}) {
        EXPECT_EQ(sample(s, 1000, 9), sample(s, 1000, 9));
        EXPECT_NE(sample(s, 1000, 9), sample(s, 1000, 10));
    }
}

TEST(Sampler, KolmogorovSmirnovAgainstClosedFormCdf) {
    const double c = 3.551, d = 2.138;
    const Innovation inn(SkewT{c, d});
    const auto x = sample(SkewT{c, d}, 100000, 2024);
    const double ks = ks_distance(x, [&](double v) { return jf_cdf_raw(inn.raw_scale() * v + inn.raw_location(), c, d); });
    EXPECT_LT(ks, 0.006);
}

TEST(Sampler, KolmogorovSmirnovStudentT) {
    const double df = 4.0, k = std::sqrt(df / (df - 2.0));
    const boost::math::students_t_distribution<double> t(df);
    const auto x = sample(StudentT{df}, 100000, 77);
    EXPECT_LT(ks_distance(x, [&](double v) { return boost::math::cdf(t, k * v); }), 0.006);
}

TEST(Sampler, QuantileInvertsCdf) {
    for (const InnovationSpec& s : std::vector<InnovationSpec>{SkewT{3.551, 2.138}, SkewT{1.2, 4.0}, UnitNormal{}}) {
        const Sampler smp(s);
        for (double u : {1e-9, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-6}) {
            EXPECT_NEAR(smp.innovation().cdf(smp.quantile(u)), u, 1e-3 * std::min(u, 1.0 - u))
                << to_string(s) << " u=" << u;
        }
    }
    EXPECT_THROW(Sampler(UnitNormal{}).quantile(0.0), InvalidArgument);
}

TEST(Sampler, SampleSizeMustBePositive) {
    EXPECT_THROW(sample(UnitNormal{}, 0, 1), InvalidArgument);
}

TEST(Sampler, KolmogorovSmirnovHeavyLeftTail) {
    const double c = 1.2, d = 4.0;
    const Innovation inn(SkewT{c, d});
    const auto x = sample(SkewT{c, d}, 100000, 5);
    const double ks = ks_distance(x, [&](double v) { return jf_cdf_raw(inn.raw_scale() * v + inn.raw_location(), c, d); });
    EXPECT_LT(ks, 0.006);
}
