#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "nlarch/stability.hpp"

using namespace nlarch;

namespace {

ModelSpec shrink_model(double alpha1 = 0.0, InnovationSpec inn = UnitNormal{}) {
    ModelSpec m;
    m.mean = BoundedShrink{1.0, 1.0, 1.0};
    m.arch.omega = 1.0;
    m.arch.alpha = {alpha1};
    m.innovation = inn;
    return m;
}

ModelSpec empirical_model() {
    ModelSpec m;
    const double nu = 0.187, gamma = 0.171, a = 25.366;
    m.mean = LogisticIntercept{-nu, nu, gamma, a, a};
    m.arch.omega = 3.259;
    m.arch.alpha = {0.406, 0.310, 0.149};
    m.arch.zeta.assign(4, LogisticGate{gamma, a});
    m.innovation = SkewT{3.551, 2.138};
    return m;
}

std::vector<double> random_alpha(std::mt19937_64& rng, std::size_t q, double budget) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(q);
    double s = 0.0;
    for (auto& v : a) s += (v = u(rng) + 1e-3);
    const double total = budget * u(rng);
    for (auto& v : a) v *= total / s;
    return a;
}

}  // namespace

// ---- Assumption 2 -----------------------------------------------------------------

TEST(RootCondition, OrderOneIsVacuous) {
    const auto r = check_root_condition(ARCoefficients{});
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(std::isinf(r.min_root_modulus));
}

TEST(RootCondition, HalfGivesRootTwo) {
    const auto r = check_root_condition(ARCoefficients{{0.5}});
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.min_root_modulus, 2.0, 1e-14);
}

TEST(RootCondition, UnitRootFails) {
    const auto r = check_root_condition(ARCoefficients{{1.0}});
    EXPECT_FALSE(r.pass);
    EXPECT_NEAR(r.min_root_modulus, 1.0, 1e-14);
}

TEST(RootCondition, QuadraticMatchesClosedFormRoots) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int rep = 0; rep < 200; ++rep) {
        const double p1 = u(rng), p2 = u(rng);
        if (std::abs(p2) < 1e-3) continue;
        // Roots of 1 - p1 z - p2 z^2.
        const std::complex<double> disc = std::sqrt(std::complex<double>(p1 * p1 + 4.0 * p2, 0.0));
        const auto z1 = (-p1 + disc) / (2.0 * p2);
        const auto z2 = (-p1 - disc) / (2.0 * p2);
        const double ref = std::min(std::abs(z1), std::abs(z2));
        const auto r = check_root_condition(ARCoefficients{{p1, p2}});
        EXPECT_NEAR(r.min_root_modulus, ref, 1e-9 * ref);
        EXPECT_EQ(r.pass, ref > 1.0 + 1e-10);
    }
}

TEST(MeanEnvelope, BoundedShrinkPassesWithOwnConstants) {
    for (double r : {0.5, 1.0, 2.0}) {
        for (double rho : {0.5, 1.0, 1.5}) {
            const double t = std::pow(r, 1.0 / rho);
            const auto rep = check_mean_envelope(BoundedShrink{r, rho, t}, r, rho, 2.0 * t, 2.0 * t);
            EXPECT_TRUE(rep.pass) << r << " " << rho;
            EXPECT_TRUE(rep.unbounded_tails);
        }
    }
    const auto unit = check_mean_envelope(BoundedShrink{1.0, 1.0, 1.0}, 1.0, 1.0, 2.0, 1.0);
    EXPECT_TRUE(unit.pass);
}

TEST(MeanEnvelope, IdentityFailsTheStrictEnvelope) {
    const auto rep = check_mean_envelope(LinearMean{1.0}, 0.5, 1.0, 1.0, 1.0);
    EXPECT_FALSE(rep.envelope_pass);
    EXPECT_FALSE(rep.pass);
    EXPECT_LT(rep.min_tail_slack, 0.0);
}

TEST(MeanEnvelope, LogisticInterceptPassesWithRhoOne) {
    const LogisticIntercept g{-0.187, 0.187, 0.171, 25.366, 25.366};
    const double r = 0.187 / 2.0;
    const auto rep = check_mean_envelope(g, r, 1.0, 100.0, 101.0);
    EXPECT_TRUE(rep.pass);
    const auto e = default_envelope(g);
    EXPECT_DOUBLE_EQ(e.r, r);
    EXPECT_TRUE(check_mean_envelope(g, e.r, e.rho, e.M0, e.K0).pass);
    EXPECT_LT(e.M0, 100.0);
}

TEST(MeanEnvelope, RejectsInvalidConstants) {
    EXPECT_THROW(check_mean_envelope(LinearMean{0.5}, 2.0, 1.0, 1.0, 1.0), InvalidArgument);
    EXPECT_THROW(check_mean_envelope(LinearMean{0.5}, 1.0, 2.0, 3.0, 1.0), InvalidArgument);
    EXPECT_THROW(check_mean_envelope(LinearMean{0.5}, 0.0, 1.0, 3.0, 1.0), InvalidArgument);
}

// ---- moments and Lemma 2 -------------------------------------------------------------

TEST(MomentMuBar, NormalOrders) {
    EXPECT_NEAR(moment_mu_bar(UnitNormal{}, 2.0), 1.0, 1e-12);
    EXPECT_NEAR(moment_mu_bar(UnitNormal{}, 4.0), std::sqrt(3.0), 1e-10);
    EXPECT_NEAR(moment_mu_bar(UnitNormal{}, 4.0), 1.7320508, 1e-7);
}

TEST(MomentMuBar, StudentTClosedForm) {
    // E eps^4 = 3 (df-2) / (df-4) for the unit-variance t.
    const double df = 7.0;
    EXPECT_NEAR(moment_mu_bar(StudentT{df}, 4.0), std::sqrt(3.0 * (df - 2.0) / (df - 4.0)), 1e-9);
}

TEST(MomentMuBar, DivergentSkewTMomentThrows) {
    EXPECT_THROW(moment_mu_bar(SkewT{3.551, 2.138}, 2.0 * 2.138), DivergentMoment);
    EXPECT_THROW(moment_mu_bar(SkewT{3.551, 2.138}, 6.0), DivergentMoment);
    EXPECT_NO_THROW(moment_mu_bar(SkewT{3.551, 2.138}, 4.0));
    EXPECT_THROW(moment_mu_bar(UnitNormal{}, 1.0), InvalidArgument);
}

TEST(Lemma2, Examples) {
    auto a = check_lemma2({0.5}, 1.0);
    EXPECT_TRUE(a.pass);
    EXPECT_DOUBLE_EQ(a.slack, 0.5);
    auto b = check_lemma2({0.5, 0.3}, 1.7320508);
    EXPECT_FALSE(b.pass);
    EXPECT_NEAR(b.slack, 1.0 - 0.8 * 1.7320508, 1e-12);
    auto c = check_lemma2({0.406, 0.310, 0.149}, 1.0);
    EXPECT_TRUE(c.pass);
    EXPECT_NEAR(c.slack, 0.135, 1e-12);
    EXPECT_THROW(check_lemma2({-0.1}, 1.0), InvalidArgument);
}

// ---- bullet norm ---------------------------------------------------------------------------

TEST(BulletNorm, ScalarCases) {
    EXPECT_NEAR(build_bullet_norm(lambda_bar({0.5}, 1.0)).weights()[0], 2.0, 1e-15);
    const auto n0 = build_bullet_norm(lambda_bar({0.0}, 1.0));
    EXPECT_EQ(n0.weights()[0], 1.0);
    EXPECT_EQ(n0({-3.0}), 3.0);
}

TEST(BulletNorm, TwoByTwoAgainstRootsAndNeumannSeries) {
    const auto L = lambda_bar({0.5, 0.3}, 1.0);
    const auto n = build_bullet_norm(L);
    // Largest root of t^2 - 0.5 t - 0.3.
    EXPECT_NEAR(n.spectral_radius_bar(), (0.5 + std::sqrt(0.25 + 1.2)) / 2.0, 1e-12);
    EXPECT_NEAR(n.spectral_radius_bar(), 0.85208, 1e-5);
    // Hand solution of (I - L)' w = 1: w2 = 1 + 0.3 w1 and w1 = 2 / (1 - 0.5 - 0.3).
    EXPECT_NEAR(n.weights()[0], 10.0, 1e-12);
    EXPECT_NEAR(n.weights()[1], 4.0, 1e-12);
}

TEST(BulletNorm, NeumannConsistency) {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t q = 1 + rep % 4;
        const auto L = lambda_bar(random_alpha(rng, q, 0.9), 1.0);
        const auto n = build_bullet_norm(L);
        // 1' (I - L)^-1 = sum_k 1' L^k, truncated well past rho^k < 1e-14.
        Eigen::RowVectorXd term = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(q));
        Eigen::RowVectorXd sum = term;
        const int terms = static_cast<int>(std::ceil(-40.0 / std::log(n.spectral_radius_bar()))) + 200;
        for (int k = 1; k < terms; ++k) {
            term = term * L;
            sum += term;
        }
        EXPECT_LT((sum.transpose() - n.weights()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(BulletNorm, ExplosiveLambdaThrows) {
    EXPECT_THROW(build_bullet_norm(lambda_bar({0.6, 0.5}, 1.0)), NumericError);
    EXPECT_THROW(BulletNorm::from_weights(Eigen::VectorXd::Constant(2, -1.0)), InvalidArgument);
}

TEST(BulletNormProperty, MonotoneTriangleHomogeneous) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t q = 1 + rep % 3;
        const double mu = 1.0 + u(rng);
        const auto n = build_bullet_norm(lambda_bar(random_alpha(rng, q, 0.99 / mu), mu));
        std::vector<double> x(q), y(q), w(q), sum(q);
        for (std::size_t i = 0; i < q; ++i) {
            x[i] = z(rng);
            y[i] = (x[i] >= 0 ? 1.0 : -1.0) * (std::abs(x[i]) + u(rng)) * (u(rng) < 0.5 ? 1.0 : -1.0);
            w[i] = z(rng);
            sum[i] = x[i] + w[i];
        }
        EXPECT_LE(n(x), n(y));
        EXPECT_LE(n(sum), n(x) + n(w) + 1e-12);
        const double c = 3.0 * z(rng);
        std::vector<double> cx(q);
        for (std::size_t i = 0; i < q; ++i) cx[i] = c * x[i];
        EXPECT_NEAR(n(cx), std::abs(c) * n(x), 1e-12 * (1.0 + n(cx)));
        double l1 = 0.0;
        for (double v : x) l1 += std::abs(v);
        EXPECT_GT(n(x), l1);
        for (Eigen::Index i = 0; i < n.weights().size(); ++i) EXPECT_GT(n.weights()[i], 1.0);
    }
}

// ---- Assumption 4 -------------------------------------------------------------------------

TEST(InducedNorm, ZeroAlphaIsDeterministicShift) {
    const std::vector<double> alpha{0.0, 0.0, 0.0};
    const auto n = build_bullet_norm(lambda_bar(alpha, 1.0));
    const auto est = induced_norm_mc(n, alpha, UnitNormal{}, 1.0, 10000, 1);
    EXPECT_EQ(est.std_error, 0.0);
    EXPECT_LT(est.estimate, 1.0);
    EXPECT_TRUE(est.assumption4);
    // Weights (3, 2, 1); the shift sends e_i / w_i to e_{i+1} / w_i, largest ratio 2/3.
    EXPECT_NEAR(est.estimate, 2.0 / 3.0, 1e-15);
}

TEST(InducedNorm, ZeroAlphaWithNonUnitWeights) {
    const std::vector<double> alpha{0.0, 0.0};
    const auto n = BulletNorm::from_weights(Eigen::Vector2d(3.0, 1.0));
    const auto est = induced_norm_mc(n, alpha, UnitNormal{}, 1.0, 10000, 1);
    // Shift maps e_1 / 3 to e_2 / 3 with norm 1/3; e_2 maps to zero.
    EXPECT_NEAR(est.estimate, 1.0 / 3.0, 1e-15);
}

TEST(InducedNorm, ScalarHalf) {
    const std::vector<double> alpha{0.5};
    const auto n = build_bullet_norm(lambda_bar(alpha, 1.0));
    const auto est = induced_norm_mc(n, alpha, UnitNormal{}, 1.0, 100000, 3);
    EXPECT_NEAR(est.estimate, 0.5, 4.0 * est.std_error);
    EXPECT_GT(est.std_error, 0.0);
    EXPECT_TRUE(est.assumption4);
}

TEST(InducedNorm, ScalarPointNineOrderTwoFails) {
    const std::vector<double> alpha{0.9};
    const auto n = BulletNorm::from_weights(Eigen::VectorXd::Ones(1));
    const auto est = induced_norm_mc(n, alpha, UnitNormal{}, 2.0, 100000, 4);
    EXPECT_NEAR(est.estimate, 0.9 * std::sqrt(3.0), 4.0 * est.std_error);
    EXPECT_GT(est.estimate, 1.0);
    EXPECT_FALSE(est.assumption4);
}

TEST(InducedNorm, VertexMaximumDominatesRandomDirections) {
    // Brute-force check of the vertex reduction on a shared set of draws.
    const std::vector<double> alpha{0.3, 0.25, 0.2};
    const auto n = build_bullet_norm(lambda_bar(alpha, 1.0));
    const auto est = induced_norm_mc(n, alpha, UnitNormal{}, 1.0, 100000, 8);
    const auto draws = sample(UnitNormal{}, 20000, 8);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& w = n.weights();
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x(3);
        double nx = 0.0;
        for (std::size_t i = 0; i < 3; ++i) nx += w[static_cast<Eigen::Index>(i)] * (x[i] = u(rng));
        for (auto& v : x) v /= nx;
        double m = 0.0;
        for (double e : draws) {
            const std::vector<double> lx{(alpha[0] * x[0] + alpha[1] * x[1] + alpha[2] * x[2]) * e * e, x[0], x[1]};
            m += n(lx);
        }
        EXPECT_LE(m / static_cast<double>(draws.size()), est.estimate + 4.0 * est.std_error + 0.01);
    }
}

TEST(InducedNorm, Preconditions) {
    const std::vector<double> alpha{0.5};
    const auto n = build_bullet_norm(lambda_bar(alpha, 1.0));
    EXPECT_THROW(induced_norm_mc(n, alpha, UnitNormal{}, 1.0, 9999, 1), InvalidArgument);
    EXPECT_THROW(induced_norm_mc(n, alpha, SkewT{1.5, 3.0}, 2.0, 10000, 1), DivergentMoment);
    EXPECT_THROW(induced_norm_mc(n, {0.2, 0.1}, UnitNormal{}, 1.0, 10000, 1), InvalidArgument);
}

TEST(InducedNormProperty, ContractionWheneverLemma2Holds) {
    std::mt19937_64 rng(77);
    for (std::size_t q = 1; q <= 3; ++q) {
        for (double bs0 : {1.0, 2.0}) {
            const double mu = moment_mu_bar(UnitNormal{}, 2.0 * bs0);
            for (int rep = 0; rep < 3; ++rep) {
                const auto alpha = random_alpha(rng, q, 0.95 / mu);
                ASSERT_TRUE(check_lemma2(alpha, mu).pass);
                const auto n = build_bullet_norm(lambda_bar(alpha, mu));
                const auto est = induced_norm_mc(n, alpha, UnitNormal{}, bs0, 100000, rng());
                EXPECT_LT(est.estimate + 2.0 * est.std_error, 1.0);
            }
        }
    }
}

// ---- star norm ------------------------------------------------------------------------------

TEST(StarNormProperty, ContractsForStableCoefficients) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> z;
    int checked = 0;
    while (checked < 100) {
        const std::size_t k = 1 + static_cast<std::size_t>(checked % 4);
        ARCoefficients ar;
        for (std::size_t i = 0; i < k; ++i) ar.pi.push_back(u(rng));
        if (!check_root_condition(ar).pass) continue;
        ++checked;
        ModelSpec m;
        m.ar = ar;
        const auto sys = build_companion(m, 1.0);
        const StarNorm star(sys.Pi1);
        EXPECT_LT(star.induced_norm(), 1.0);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> x(k);
            for (auto& v : x) v = z(rng);
            const Eigen::VectorXd px = sys.Pi1 * Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(k));
            const std::vector<double> pxv(px.data(), px.data() + px.size());
            EXPECT_LE(star(pxv), star.induced_norm() * star(x) * (1.0 + 1e-10) + 1e-14);
        }
    }
}

TEST(StarNorm, IsANorm) {
    ModelSpec m;
    m.ar.pi = {0.5, 0.2, -0.1};
    const StarNorm star(build_companion(m, 1.0).Pi1);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> x(3), y(3), s(3);
        for (std::size_t i = 0; i < 3; ++i) {
            x[i] = z(rng);
            y[i] = z(rng);
            s[i] = x[i] + y[i];
        }
        EXPECT_LE(star(s), star(x) + star(y) + 1e-12);
        EXPECT_GT(star(x), 0.0);
    }
    EXPECT_EQ(star({0.0, 0.0, 0.0}), 0.0);
}

// ---- drift function -----------------------------------------------------------------------

TEST(DriftV, ZeroStateIsOne) {
    const DriftContext ctx(shrink_model(0.3), DriftParams{1.0, 1.0, 1.0, 0.0, 5.0, std::nullopt});
    EXPECT_EQ(drift_V(StateVector{{0.0, 0.0}, std::vector<double>{0.0}}, ctx), 1.0);
}

TEST(DriftV, OrderOneReduction) {
    auto model = shrink_model(0.3);
    const DriftParams dp{1.5, 2.0, 1.0, 0.0, 3.0, std::nullopt};
    const DriftContext ctx(model, dp);
    const StateVector s{{-7.0, 2.0}, std::nullopt};
    const auto tr = state_transforms(s, model);
    const double w = ctx.bullet.weights()[0];
    EXPECT_NEAR(drift_V(s, ctx), 1.0 + std::pow(7.0, 3.0) + 3.0 * std::pow(w * tr.xi[0], 3.0), 1e-9);
}

TEST(DriftV, ByHandWithArchOne) {
    const DriftContext ctx(shrink_model(0.5), DriftParams{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt});
    const double w1 = 1.0 / (1.0 - 0.5);
    EXPECT_DOUBLE_EQ(drift_V(StateVector{{2.0, 0.0}, std::vector<double>{4.0}}, ctx), 1.0 + 4.0 + w1 * 4.0);
}

TEST(DriftVProperty, AtLeastOneAndQuadraticAlongRays) {
    ModelSpec m = empirical_model();
    m.ar.pi = {0.4};
    const DriftContext ctx(m, DriftParams{});
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z(0.0, 30.0);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<double> x(m.dim());
        for (auto& v : x) v = z(rng);
        EXPECT_GE(drift_V(StateVector{x, std::nullopt}, ctx), 1.0);
    }
    // Ray through z1 with zero e^2 tail: V(2x) / V(x) -> 2^{2 s0} = 4.
    double prev = drift_V(make_state(m, 1.0, 0.0, 0.0), ctx);
    double ratio = 0.0;
    for (int k = 1; k <= 30; ++k) {
        const double v = drift_V(make_state(m, std::ldexp(1.0, k), 0.0, 0.0), ctx);
        ratio = v / prev;
        prev = v;
    }
    EXPECT_NEAR(ratio, 4.0, 1e-6);
}

TEST(DriftParamsValidation, Rules) {
    EXPECT_NO_THROW(validate(DriftParams{}, 2));
    EXPECT_THROW(validate(DriftParams{1.0, 2.0, 1.0, 1e-3, 1.0, std::nullopt}, 1), InvalidArgument);
    EXPECT_THROW(validate(DriftParams{2.0, 1.2, 1.0, 1e-3, 1.0, std::nullopt}, 1), InvalidArgument);
    EXPECT_NO_THROW(validate(DriftParams{2.0, 1.6, 1.0, 1e-3, 1.0, std::nullopt}, 1));
    EXPECT_THROW(validate(DriftParams{1.0, 1.0, 2.0, 1e-3, 1.0, std::nullopt}, 1), InvalidArgument);
    EXPECT_THROW(validate(DriftParams{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt}, 2), InvalidArgument);
    EXPECT_NO_THROW(validate(DriftParams{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt}, 1));
    EXPECT_THROW(validate(DriftParams{1.0, 1.0, 1.0, 1e-3, 0.0, std::nullopt}, 1), InvalidArgument);
    EXPECT_THROW(validate(DriftParams{1.0, 1.0, 1.0, 1e-3, 1.0, 3.0}, 1), InvalidArgument);
    const DriftParams d{1.0, 1.0, 0.5, 1e-3, 1.0, std::nullopt};
    EXPECT_DOUBLE_EQ(d.alpha_exp(), 0.75);
}

// ---- drift verification -----------------------------------------------------------------

TEST(VerifyDrift, HomoskedasticShrinkCertifies) {
    const auto model = shrink_model(0.0);
    const DriftParams d{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt};
    std::vector<StateVector> grid;
    for (double x : {1.0, 2.0, 10.0, 100.0, 1000.0})
        for (double s : {-1.0, 1.0}) grid.push_back(make_state(model, s * x, 0.0, 0.0));
    DriftOptions opt;
    opt.draws = 20000;
    opt.seed = 4;
    const auto rep = verify_drift(model, d, grid, opt);
    EXPECT_TRUE(rep.certified) << rep.verdict;
    EXPECT_GT(rep.e_tilde, 0.0);
    EXPECT_TRUE(std::isfinite(rep.b_tilde));
    for (const auto& p : rep.grid) {
        if (std::abs(p.z1) >= 10.0) {
            EXPECT_FALSE(p.inside);
            EXPECT_LE(p.margin, 2.0 * p.std_error + 1e-9);
        }
        if (p.inside) EXPECT_LE(p.margin, rep.b_tilde);
    }
}

TEST(VerifyDrift, HomoskedasticDriftMatchesClosedForm) {
    // alpha = 0, omega = 1, |z1| >= 1: E|g(z1) + eps|^2 = g(z1)^2 + 1, xi part unchanged (zero).
    const auto model = shrink_model(0.0);
    const DriftParams d{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt};
    const std::vector<StateVector> grid{make_state(model, 50.0, 0.0, 0.0)};
    DriftOptions opt;
    opt.draws = 100000;
    const auto rep = verify_drift(model, d, grid, opt);
    const double g = 49.0;
    const double w1 = 1.0;
    const double expected = 1.0 + g * g + 1.0 + w1 * 1.0;
    EXPECT_NEAR(rep.grid[0].expected_V, expected, 4.0 * rep.grid[0].std_error + 1e-9);
    EXPECT_DOUBLE_EQ(rep.grid[0].V, 1.0 + 2500.0);
}

TEST(VerifyDrift, ExplosiveMeanFails) {
    ModelSpec m = shrink_model(0.0);
    m.mean = LinearMean{1.2};
    std::vector<StateVector> grid;
    for (double x : {10.0, 100.0, 1000.0, 1e4}) grid.push_back(make_state(m, x, 0.0, 0.0));
    DriftOptions opt;
    opt.draws = 10000;
    const auto rep = verify_drift(m, DriftParams{1.0, 1.0, 1.0, 0.0, 1.0, std::nullopt}, grid, opt);
    EXPECT_FALSE(rep.certified);
    EXPECT_EQ(rep.verdict, "failed:drift");
}

TEST(VerifyDrift, DeterministicAcrossThreadCounts) {
    const auto model = empirical_model();
    std::vector<StateVector> grid;
    for (double x : {40.0, 200.0, 1000.0}) grid.push_back(make_state(model, x, 0.0, 5.0));
    DriftOptions a, b;
    a.draws = b.draws = 10000;
    a.threads = 1;
    b.threads = 3;
    const auto ra = verify_drift(model, DriftParams{}, grid, a);
    const auto rb = verify_drift(model, DriftParams{}, grid, b);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(ra.grid[i].expected_V, rb.grid[i].expected_V);
        EXPECT_EQ(ra.grid[i].std_error, rb.grid[i].std_error);
    }
}

TEST(VerifyDrift, SensitivityRowsMatchFreshRuns) {
    const auto model = empirical_model();
    std::vector<StateVector> grid;
    for (double x : {11.71, 40.0, 130.61, 600.0, 1306.1})
        for (double xi : {0.0, 10.0}) grid.push_back(make_state(model, x, 0.0, xi));
    DriftOptions opt;
    opt.draws = 10000;
    opt.seed = 12;
    opt.sensitivity_s2 = {0.1, 10.0};
    const auto rep = verify_drift(model, DriftParams{}, grid, opt);
    ASSERT_EQ(rep.sensitivity.size(), 2u);
    for (const auto& row : rep.sensitivity) {
        DriftParams d;
        d.s2 = row.s2;
        const auto fresh = verify_drift(model, d, grid, opt);
        EXPECT_EQ(row.verdict, fresh.verdict);
        EXPECT_NEAR(row.e_tilde, fresh.e_tilde, 1e-9 * std::max(1.0, std::abs(fresh.e_tilde)));
        EXPECT_EQ(row.N, fresh.N);
    }
}

TEST(VerifyDrift, Preconditions) {
    const auto model = shrink_model(0.0);
    EXPECT_THROW(verify_drift(model, DriftParams{}, {}, DriftOptions{}), InvalidArgument);
    DriftOptions few;
    few.draws = 100;
    EXPECT_THROW(verify_drift(model, DriftParams{}, {make_state(model, 5.0, 0.0, 0.0)}, few), InvalidArgument);
}

// ---- aggregate report ---------------------------------------------------------------------

TEST(ErgodicityReport, RootFailureStopsEarly) {
    ModelSpec m = shrink_model(0.1);
    m.ar.pi = {1.0};
    const auto rep = ergodicity_report(m, DriftParams{});
    EXPECT_EQ(rep.verdict, "failed:Assumption2(i)");
    EXPECT_FALSE(rep.drift.has_value());
}

TEST(ErgodicityReport, LogisticInterceptRateAndMomentOrder) {
    ErgodicityOptions opt;
    opt.run_drift = false;
    const auto rep = ergodicity_report(empirical_model(), DriftParams{}, opt);
    EXPECT_EQ(rep.verdict, "certified");
    EXPECT_DOUBLE_EQ(rep.rate_exponent, 1.0);
    EXPECT_DOUBLE_EQ(rep.moment_order, 1.0);
    EXPECT_NEAR(rep.lemma2.slack, 0.135, 1e-12);
    const auto rep2 = ergodicity_report(empirical_model(), DriftParams{2.0, 1.6, 1.0, 1e-3, 1.0, std::nullopt}, opt);
    EXPECT_DOUBLE_EQ(rep2.rate_exponent, 3.0);
    EXPECT_DOUBLE_EQ(rep2.moment_order, 3.0);
}

TEST(ErgodicityReport, TimeVaryingSlopeRate) {
    ModelSpec m = shrink_model(0.2);
    m.mean = TimeVaryingSlope{SlopeKind::S1, 1.0, 0.0, 1.0, SlopeShape::AbsPower};
    ErgodicityOptions opt;
    opt.run_drift = false;
    const auto rep = ergodicity_report(m, DriftParams{}, opt);
    EXPECT_DOUBLE_EQ(rep.rate_exponent, 1.0);
    EXPECT_DOUBLE_EQ(rep.moment_order, 1.0);
    m.mean = TimeVaryingSlope{SlopeKind::S2, 1.0, 0.0, 0.5, SlopeShape::Smooth};
    const auto rep2 = ergodicity_report(m, DriftParams{1.0, 1.0, 0.5, 1e-3, 1.0, std::nullopt}, opt);
    EXPECT_DOUBLE_EQ(rep2.rate_exponent, 3.0);
    EXPECT_DOUBLE_EQ(rep2.moment_order, 1.5);
}

TEST(ErgodicityReport, MomentAndLemmaGates) {
    ErgodicityOptions opt;
    opt.run_drift = false;
    ModelSpec heavy = shrink_model(0.2, SkewT{1.5, 1.5});
    EXPECT_EQ(ergodicity_report(heavy, DriftParams{2.0, 2.0, 1.0, 1e-3, 1.0, std::nullopt}, opt).verdict,
              "failed:Assumption4");
    ModelSpec strong = shrink_model(0.5);
    EXPECT_EQ(ergodicity_report(strong, DriftParams{2.0, 2.0, 1.0, 1e-3, 1.0, std::nullopt}, opt).verdict,
              "failed:Lemma2");
}

TEST(ErgodicityReport, EnvelopeFailure) {
    ModelSpec m = shrink_model(0.1);
    m.mean = LinearMean{1.0};
    ErgodicityOptions opt;
    opt.run_drift = false;
    EXPECT_EQ(ergodicity_report(m, DriftParams{}, opt).verdict, "failed:Assumption2(ii)");
}
