#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace nlarch::opt {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Result {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    std::size_t max_iterations = 2000;
    double ftol = 1e-10;  // relative spread of simplex values
    double xtol = 1e-8;
    double initial_step = 0.1;
};

/// Nelder-Mead simplex minimiser with the standard coefficients (1, 2, 0.5, 0.5).
inline Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& o = {}) {
    const auto n = x0.size();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(n + 1));
    Result r;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++r.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& p = pts[static_cast<std::size_t>(i + 1)];
        p[i] += o.initial_step * std::max(1.0, std::abs(p[i]));
    }
    for (std::size_t i = 0; i < pts.size(); ++i) fv[i] = eval(pts[i]);
    std::vector<std::size_t> idx(pts.size());

    for (r.iterations = 0; r.iterations < o.max_iterations; ++r.iterations) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
        double xspread = 0.0;
        for (std::size_t i = 1; i < idx.size(); ++i)
            xspread = std::max(xspread, (pts[idx[i]] - pts[best]).cwiseAbs().maxCoeff());
        const double fspread = std::abs(fv[worst] - fv[best]);
        if (fspread <= o.ftol * (std::abs(fv[best]) + 1e-20) && xspread <= o.xtol * (1.0 + pts[best].cwiseAbs().maxCoeff())) {
            r.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < idx.size(); ++i) centroid += pts[idx[i]];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                           : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            pts[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 1; i < idx.size(); ++i) {
            auto& p = pts[idx[i]];
            p = pts[best] + 0.5 * (p - pts[best]);
            fv[idx[i]] = eval(p);
        }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    r.x = pts[static_cast<std::size_t>(it - fv.begin())];
    r.f = *it;
    return r;
}

/// Central-difference gradient with per-coordinate step h * max(1, |x_i|).
inline Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + step;
        xm[i] = x[i] - step;
        g[i] = (f(xp) - f(xm)) / (2.0 * step);
        xp[i] = xm[i] = x[i];
    }
    return g;
}

/// Central-difference Hessian (symmetrised).
inline Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double h = 2e-3) {
    const auto n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd step(n);
    for (Eigen::Index i = 0; i < n; ++i) step[i] = h * std::max(1.0, std::abs(x[i]));
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += step[i];
        xm[i] -= step[i];
        H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (step[i] * step[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            Eigen::VectorXd a = x, b = x, c = x, d = x;
            a[i] += step[i];
            a[j] += step[j];
            b[i] += step[i];
            b[j] -= step[j];
            c[i] -= step[i];
            c[j] += step[j];
            d[i] -= step[i];
            d[j] -= step[j];
            H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * step[i] * step[j]);
        }
    }
    return H;
}

struct BfgsOptions {
    std::size_t max_iterations = 500;
    double gtol = 1e-4;   // on max |gradient|
    double ftol = 1e-13;  // relative decrease treated as stalled
    double grad_step = 1e-5;
};

/// BFGS with numerical gradients and Armijo backtracking.
inline Result bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& o = {}) {
    const auto n = x0.size();
    Result r;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++r.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    auto grad = [&](const Eigen::VectorXd& x) {
        r.evaluations += static_cast<std::size_t>(2 * n);
        return numerical_gradient(f, x, o.grad_step);
    };
    Eigen::VectorXd x = x0;
    double fx = eval(x);
    Eigen::VectorXd g = grad(x);
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
    std::size_t stalls = 0;
    for (r.iterations = 0; r.iterations < o.max_iterations; ++r.iterations) {
        if (g.cwiseAbs().maxCoeff() <= o.gtol) {
            r.converged = true;
            break;
        }
        Eigen::VectorXd dir = -Hinv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            Hinv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        double t = 1.0;
        Eigen::VectorXd xn;
        double fn = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + t * dir;
            fn = eval(xn);
            if (fn <= fx + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (Hinv.isIdentity()) break;
            Hinv.setIdentity();
            continue;
        }
        const Eigen::VectorXd gn = grad(xn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        const double decrease = fx - fn;
        x = xn;
        g = gn;
        fx = fn;
        stalls = decrease <= o.ftol * (std::abs(fx) + 1.0) ? stalls + 1 : 0;
        if (stalls >= 3) {
            r.converged = g.cwiseAbs().maxCoeff() <= 100.0 * o.gtol;
            break;
        }
    }
    if (!r.converged && r.iterations < o.max_iterations && g.cwiseAbs().maxCoeff() <= o.gtol) r.converged = true;
    r.x = x;
    r.f = fx;
    return r;
}

}  // namespace nlarch::opt
