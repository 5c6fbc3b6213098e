#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "nlarch/estimation.hpp"
#include "nlarch/io.hpp"
#include "nlarch/simulation.hpp"
#include "nlarch/stability.hpp"

namespace nlarch::app {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigFail = 10, kDataFail = 20, kNumericFail = 30, kNonConvergence = 40 };

inline int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return kConfigFail;
        case ErrorCategory::Data: return kDataFail;
        case ErrorCategory::Numeric: return kNumericFail;
        case ErrorCategory::NonConvergence: return kNonConvergence;
    }
    return kNumericFail;
}

// ---- config -> objects --------------------------------------------------------------

inline InnovationSpec innovation_from_config(const io::Config& c, const std::string& prefix = "model.innovation") {
    const auto type = c.str(prefix + ".type", "skew_t");
    if (type == "normal") return UnitNormal{};
    if (type == "student_t") return StudentT{c.num(prefix + ".df", 5.0)};
    if (type == "skew_t") return SkewT{c.num(prefix + ".c", 3.551), c.num(prefix + ".d", 2.138)};
    throw ConfigError("unknown innovation type '" + type + "'");
}

/// Model from `model.*` keys; every default reproduces the fitted
/// volatility-index model (p = 1, q = 3, shared logistic gate, skew-t).
inline ModelSpec model_from_config(const io::Config& c) {
    ModelSpec m;
    m.ar.pi = c.list("model.ar.pi");
    const auto type = c.str("model.mean.type", "logistic_intercept");
    if (type == "logistic_intercept") {
        const double nu = c.num("model.mean.nu", 0.187);
        const double a = c.num("model.mean.a", 25.366);
        m.mean = LogisticIntercept{c.num("model.mean.nu1", -nu), c.num("model.mean.nu2", nu),
                                   c.num("model.mean.gamma", 0.171), c.num("model.mean.a1", a),
                                   c.num("model.mean.a2", a)};
    } else if (type == "time_varying_slope") {
        TimeVaryingSlope s;
        const auto kind = c.str("model.mean.kind", "S1");
        if (kind != "S1" && kind != "S2") throw ConfigError("model.mean.kind must be S1 or S2");
        s.kind = kind == "S1" ? SlopeKind::S1 : SlopeKind::S2;
        s.r0 = c.num("model.mean.r0", 1.0);
        s.a = c.num("model.mean.a", 0.0);
        s.rho = c.num("model.mean.rho", 1.0);
        const auto shape = c.str("model.mean.shape", "abs_power");
        if (shape != "abs_power" && shape != "smooth") throw ConfigError("model.mean.shape must be abs_power or smooth");
        s.shape = shape == "abs_power" ? SlopeShape::AbsPower : SlopeShape::Smooth;
        m.mean = s;
    } else if (type == "bounded_shrink") {
        const double r = c.num("model.mean.r", 1.0);
        const double rho = c.num("model.mean.rho", 1.0);
        m.mean = BoundedShrink{r, rho, c.num("model.mean.threshold", std::pow(r, 1.0 / rho))};
    } else if (type == "linear") {
        m.mean = LinearMean{c.num("model.mean.slope", 1.0)};
    } else {
        throw ConfigError("unknown mean type '" + type + "'");
    }
    m.arch.omega = c.num("model.arch.omega", 3.259);
    m.arch.alpha = c.list("model.arch.alpha", {0.406, 0.310, 0.149});
    const auto* li = std::get_if<LogisticIntercept>(&m.mean);
    const auto gate = c.str("model.arch.gate", li ? "shared" : "none");
    if (gate == "shared") {
        if (!li) throw ConfigError("model.arch.gate = shared needs a logistic_intercept mean");
        m.arch.zeta.assign(m.arch.alpha.size() + 1, LogisticGate{li->gamma, li->a1});
    } else if (gate == "logistic") {
        m.arch.zeta.assign(m.arch.alpha.size() + 1,
                           LogisticGate{c.num("model.arch.gate_gamma", 1.0), c.num("model.arch.gate_a", 0.0)});
    } else if (gate != "none") {
        throw ConfigError("model.arch.gate must be none, shared or logistic");
    }
    m.innovation = innovation_from_config(c);
    try {
        validate(m);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("invalid model: ") + e.what());
    }
    return m;
}

inline DriftParams drift_params_from_config(const io::Config& c, const ModelSpec& m) {
    DriftParams d;
    d.s0 = c.num("check.s0", 1.0);
    d.b = c.num("check.b", 1.0);
    d.rho = c.num("check.rho", default_envelope(m.mean).rho);
    d.s1 = c.num("check.s1", 1e-3);
    d.s2 = c.num("check.s2", 1.0);
    if (c.has("check.delta")) d.delta = c.num("check.delta", 1.0);
    try {
        validate(d, m.p());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("invalid drift parameters: ") + e.what());
    }
    return d;
}

inline FitSpec fit_spec_from_config(const io::Config& c) {
    FitSpec s;
    s.tpl.p = c.count("fit.p", 1);
    s.tpl.q = c.count("fit.q", 3);
    if (s.tpl.p < 1 || s.tpl.q < 1) throw ConfigError("fit.p and fit.q must be at least 1");
    const auto gate = c.str("fit.gate", "shared");
    if (gate == "shared") {
        s.tpl.gate_variance = true;
        s.tpl.shared_gate = true;
    } else if (gate == "separate") {
        s.tpl.gate_variance = true;
        s.tpl.shared_gate = false;
    } else if (gate == "none") {
        s.tpl.gate_variance = false;
    } else {
        throw ConfigError("fit.gate must be shared, separate or none");
    }
    const auto inn = c.str("fit.innovation", "skew_t");
    if (inn == "skew_t") s.tpl.innovation = InnovationKind::SkewT;
    else if (inn == "student_t") s.tpl.innovation = InnovationKind::StudentT;
    else if (inn == "normal") s.tpl.innovation = InnovationKind::Normal;
    else throw ConfigError("fit.innovation must be skew_t, student_t or normal");
    if (c.has("fit.init")) {
        s.init = c.list("fit.init");
        if (s.init->size() != s.tpl.size()) throw ConfigError("fit.init must list " + std::to_string(s.tpl.size()) + " values");
    }
    for (const auto& name : s.tpl.names())
        if (c.has("fit.fixed." + name)) s.fixed[name] = c.num("fit.fixed." + name, 0.0);
    s.simplex_iterations = c.count("fit.simplex_iter", s.simplex_iterations);
    s.quasi_newton_iterations = c.count("fit.bfgs_iter", s.quasi_newton_iterations);
    if (c.has("fit.max_iter")) s.max_iterations = c.count("fit.max_iter", 0);
    s.gradient_tolerance = c.num("fit.gtol", s.gradient_tolerance);
    const auto e2 = c.str("fit.initial_e2", "reconstruct");
    if (e2 == "reconstruct") s.initial_e2 = InitialE2::Reconstruct;
    else if (e2 == "sample_variance") s.initial_e2 = InitialE2::SampleVariance;
    else throw ConfigError("fit.initial_e2 must be reconstruct or sample_variance");
    return s;
}

// ---- JSON ------------------------------------------------------------------------------

inline json to_json(const InnovationSpec& s) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, UnitNormal>) return {{"type", "normal"}};
            else if constexpr (std::is_same_v<T, StudentT>) return {{"type", "student_t"}, {"df", v.df}};
            else return {{"type", "skew_t"}, {"c", v.c}, {"d", v.d}};
        },
        s);
}

inline json to_json(const MeanFunction& mean) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticIntercept>) {
                return {{"type", "logistic_intercept"}, {"nu1", m.nu1}, {"nu2", m.nu2}, {"gamma", m.gamma}, {"a1", m.a1}, {"a2", m.a2}};
            } else if constexpr (std::is_same_v<T, TimeVaryingSlope>) {
                return {{"type", "time_varying_slope"}, {"kind", m.kind == SlopeKind::S1 ? "S1" : "S2"}, {"r0", m.r0},
                        {"a", m.a}, {"rho", m.rho}, {"shape", m.shape == SlopeShape::AbsPower ? "abs_power" : "smooth"}};
            } else if constexpr (std::is_same_v<T, BoundedShrink>) {
                return {{"type", "bounded_shrink"}, {"r", m.r}, {"rho", m.rho}, {"threshold", m.threshold}};
            } else {
                return {{"type", "linear"}, {"slope", m.slope}};
            }
        },
        mean);
}

inline json to_json(const ModelSpec& m) {
    json gates = json::array();
    for (std::size_t i = 0; i <= m.q(); ++i) {
        const auto g = m.arch.gate(i);
        if (const auto* l = std::get_if<LogisticGate>(&g)) gates.push_back({{"type", "logistic"}, {"gamma", l->gamma}, {"a", l->a}});
        else gates.push_back({{"type", "one"}});
    }
    return {{"p", m.p()},
            {"q", m.q()},
            {"ar_pi", m.ar.pi},
            {"mean", to_json(m.mean)},
            {"arch", {{"omega", m.arch.omega}, {"alpha", m.arch.alpha}, {"zeta", gates}}},
            {"innovation", to_json(m.innovation)}};
}

inline json to_json(const DriftParams& d) {
    json j = {{"s0", d.s0}, {"b", d.b}, {"rho", d.rho}, {"s1", d.s1}, {"s2", d.s2}, {"alpha", d.alpha_exp()}};
    j["delta"] = d.delta ? json(*d.delta) : json(nullptr);
    return j;
}

// Non-finite doubles become null in JSON.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const DriftReport& r) {
    json pts = json::array();
    for (const auto& p : r.grid) {
        pts.push_back({{"state", p.state.x},
                       {"e2_tail", p.state.e2_tail ? json(*p.state.e2_tail) : json(nullptr)},
                       {"z1", p.z1},
                       {"V", num(p.V)},
                       {"expected_V", num(p.expected_V)},
                       {"drift", num(p.drift)},
                       {"margin", num(p.margin)},
                       {"mc_standard_error", num(p.std_error)},
                       {"size", num(p.size)},
                       {"inside_petite_set", p.inside},
                       {"overflow", p.overflow}});
    }
    json sens = json::array();
    for (const auto& s : r.sensitivity) sens.push_back({{"s2", s.s2}, {"verdict", s.verdict}, {"e_tilde", num(s.e_tilde)}, {"N", num(s.N)}});
    return {{"params", to_json(r.params)},   {"certified", r.certified}, {"verdict", r.verdict},
            {"e_tilde", num(r.e_tilde)},     {"b_tilde", num(r.b_tilde)}, {"N", num(r.N)},
            {"rate_exponent", r.rate_exponent}, {"moment_order", r.moment_order}, {"mc_draws", r.mc_draws},
            {"points", pts},                 {"s2_sensitivity", sens}};
}

inline json to_json(const ErgodicityReport& r, const ModelSpec& m, const DriftParams& d) {
    json j = {{"version", 1},
              {"kind", "drift_report"},
              {"model", to_json(m)},
              {"params", to_json(d)},
              {"verdict", r.verdict},
              {"delta", r.delta},
              {"rate_exponent", r.rate_exponent},
              {"moment_order", r.moment_order}};
    j["checks"] = {
        {"root_condition", {{"pass", r.roots.pass}, {"min_root_modulus", num(r.roots.min_root_modulus)}}},
        {"mean_envelope",
         {{"pass", r.envelope.pass},
          {"r", r.envelope_params.r},
          {"rho", r.envelope_params.rho},
          {"M0", r.envelope_params.M0},
          {"K0", r.envelope_params.K0},
          {"min_tail_slack", num(r.envelope.min_tail_slack)},
          {"unbounded_tails", r.envelope.unbounded_tails}}},
        {"mu_bar", r.mu_bar},
        {"lemma2", {{"pass", r.lemma2.pass}, {"slack", r.lemma2.slack}}},
        {"induced_norm", {{"estimate", r.induced.estimate}, {"mc_standard_error", r.induced.std_error}, {"pass", r.induced.assumption4}}}};
    j["drift"] = r.drift ? to_json(*r.drift) : json(nullptr);
    return j;
}

inline json to_json(const FitResult& f, const FitSpec& spec) {
    json est = json::object(), se = json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        est[f.names[i]] = f.estimates[i];
        se[f.names[i]] = f.free[i] ? num(f.standard_errors[i]) : json(nullptr);
    }
    json fixed = json::object();
    for (const auto& [k, v] : spec.fixed) fixed[k] = v;
    return {{"version", 1},
            {"kind", "fit_result"},
            {"estimates", est},
            {"standard_errors", se},
            {"hessian_positive_definite", f.hessian_pd},
            {"loglik", f.loglik},
            {"n_conditioning", f.tpl.p + f.tpl.q},
            {"n_effective", f.residuals.size()},
            {"convergence", {{"status", f.status}, {"iterations", f.iterations}, {"evaluations", f.evaluations}}},
            {"settings",
             {{"p", spec.tpl.p},
              {"q", spec.tpl.q},
              {"gate", !spec.tpl.gate_variance ? "none" : spec.tpl.shared_gate ? "shared" : "separate"},
              {"innovation", spec.tpl.innovation == InnovationKind::SkewT     ? "skew_t"
                             : spec.tpl.innovation == InnovationKind::StudentT ? "student_t"
                                                                               : "normal"},
              {"fixed", fixed},
              {"simplex_iterations", spec.simplex_iterations},
              {"quasi_newton_iterations", spec.quasi_newton_iterations},
              {"max_iterations", spec.max_iterations ? json(*spec.max_iterations) : json(nullptr)},
              {"initial_e2", spec.initial_e2 == InitialE2::Reconstruct ? "reconstruct" : "sample_variance"}}},
            {"model", to_json(f.model())}};
}

// ---- run --------------------------------------------------------------------------------

struct RunConfig {
    std::string command;
    io::Config config;
    std::optional<std::filesystem::path> input;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    int verbosity = 1;
};

struct CliArgs {
    std::optional<std::string> config_path;
    std::optional<std::string> input;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> command;
    int verbosity = 1;
};

inline std::uint64_t parse_seed(const std::string& s, const std::string& source) {
    std::uint64_t v = 0;
    const auto t = io::trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError(source + ": '" + s + "' is not a valid seed");
    return v;
}

/// Precedence: flags, then NLARCH_SEED / NLARCH_OUT, then config keys `seed`, `out`, `command`, `input`.
inline RunConfig resolve(const CliArgs& a, const std::function<std::optional<std::string>(const char*)>& getenv_fn) {
    RunConfig rc;
    rc.verbosity = a.verbosity;
    if (a.config_path) rc.config = io::Config::load(*a.config_path);
    const auto& c = rc.config;
    rc.command = a.command ? *a.command : c.str("command", "");
    if (rc.command != "simulate" && rc.command != "fit" && rc.command != "check" && rc.command != "diagnose")
        throw ConfigError("command must be one of simulate, fit, check, diagnose");
    if (a.seed) rc.seed = *a.seed;
    else if (auto e = getenv_fn("NLARCH_SEED")) rc.seed = parse_seed(*e, "NLARCH_SEED");
    else if (c.has("seed")) rc.seed = parse_seed(c.str("seed"), "config seed");
    if (a.out) rc.out_dir = *a.out;
    else if (auto e = getenv_fn("NLARCH_OUT")) rc.out_dir = *e;
    else if (c.has("out")) rc.out_dir = c.str("out");
    if (a.input) rc.input = *a.input;
    else if (c.has("input")) rc.input = c.str("input");
    return rc;
}

namespace detail {

inline void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

inline void write_acf(const std::filesystem::path& p, const AcfResult& a) {
    io::CsvWriter w(p, {"lag", "acf", "band_lower", "band_upper"});
    for (std::size_t k = 0; k < a.values.size(); ++k) w.row({static_cast<double>(k), a.values[k], -a.band, a.band});
}

inline void write_diagnostics(const std::filesystem::path& dir, const Diagnostics& d, const std::string& acf_name) {
    write_acf(dir / acf_name, d.acf_resid);
    write_acf(dir / "acf_sq.csv", d.acf_sq);
    {
        io::CsvWriter w(dir / "histogram.csv", {"left", "right", "count", "density", "fitted_density"});
        const auto& h = d.histogram;
        for (std::size_t i = 0; i < h.counts.size(); ++i)
            w.row({h.edges[i], h.edges[i + 1], static_cast<double>(h.counts[i]), h.density[i], h.fitted_density[i]});
    }
    {
        io::CsvWriter w(dir / "density.csv", {"x", "fitted_density"});
        for (const auto& [x, f] : d.density_curve) w.row({x, f});
    }
    {
        io::CsvWriter w(dir / "qq.csv", {"theoretical", "empirical"});
        for (const auto& [a, b] : d.qq) w.row({a, b});
    }
}

inline std::size_t min_rows_for(const io::Config& c) {
    return c.count("fit.p", 1) + c.count("fit.q", 3) + 2;
}

}  // namespace detail

inline json metadata(const RunConfig& rc) {
    json cfg = json::object();
    for (const auto& [k, v] : rc.config.entries()) cfg[k] = v;
    return {{"tool", "nlarch"},
            {"version", kVersion},
            {"command", rc.command},
            {"seed", rc.seed},
            {"input", rc.input ? json(rc.input->string()) : json(nullptr)},
            {"out", rc.out_dir.string()},
            {"config", cfg},
            {"build",
             {{"compiler", __VERSION__},
              {"cxx_standard", __cplusplus},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"boost", BOOST_LIB_VERSION}}}};
}

inline int run_simulate(const RunConfig& rc, std::ostream& log) {
    const auto model = model_from_config(rc.config);
    const auto n = rc.config.count("simulate.n", 2715);
    const auto burn = rc.config.count("simulate.burn_in", 1000);
    const auto path = simulate(model, n, burn, std::nullopt, rc.seed);
    io::CsvWriter w(rc.out_dir / "path.csv", {"t", "y", "sigma", "eps", "u", "e"});
    for (std::size_t t = 0; t < path.y.size(); ++t)
        w.row({static_cast<double>(t), path.y[t], path.sigma[t], path.eps[t], path.u[t], path.e[t]});
    if (rc.verbosity > 0) log << "simulate: wrote " << n << " observations to " << (rc.out_dir / "path.csv").string() << '\n';
    return kOk;
}

inline int run_fit(const RunConfig& rc, std::ostream& log) {
    if (!rc.input) throw ConfigError("fit needs an input series (--input)");
    const auto series = io::ingest_csv(*rc.input, detail::min_rows_for(rc.config));
    const auto spec = fit_spec_from_config(rc.config);
    const auto res = fit(series.values, spec);
    detail::write_json(rc.out_dir / "fit.json", to_json(res, spec));
    {
        io::CsvWriter w(rc.out_dir / "residuals.csv", {"t", "y", "sigma", "eps"});
        const std::size_t off = spec.tpl.p + spec.tpl.q;
        for (std::size_t i = 0; i < res.residuals.size(); ++i)
            w.row({static_cast<double>(i + off), series.values[i + off], res.sigma[i], res.residuals[i]});
    }
    const auto diag = residual_diagnostics(res, rc.config.count("diagnose.max_lag", 100));
    detail::write_diagnostics(rc.out_dir, diag, "acf_resid.csv");
    if (rc.verbosity > 0) {
        log << "fit: " << res.status << ", loglik " << res.loglik << ", " << series.values.size() << " observations";
        if (series.dropped) log << " (" << series.dropped << " missing dropped)";
        log << '\n';
        for (std::size_t i = 0; i < res.names.size(); ++i)
            log << "  " << res.names[i] << " = " << res.estimates[i] << " (" << res.standard_errors[i] << ")\n";
    }
    return res.converged ? kOk : kNonConvergence;
}

inline int run_check(const RunConfig& rc, std::ostream& log) {
    const auto& c = rc.config;
    const auto model = model_from_config(c);
    const auto params = drift_params_from_config(c, model);
    ErgodicityOptions opt;
    opt.drift.draws = c.count("check.draws", 100000);
    opt.drift.seed = rc.seed;
    opt.drift.threads = static_cast<unsigned>(c.count("check.threads", 0));
    if (c.has("check.petite_bound")) opt.drift.petite_bound = c.num("check.petite_bound", 0.0);
    opt.grid.z1_min = c.num("check.z1_min", 0.0);
    opt.grid.z1_max = c.num("check.z1_max", 0.0);
    opt.grid.per_side = c.count("check.per_side", 12);
    opt.grid.both_signs = c.flag("check.both_signs", true);
    opt.grid.sim_length = c.count("check.sim_length", 20000);
    opt.grid.seed = rc.seed;
    opt.norm_draws = c.count("check.norm_draws", 100000);
    const auto rep = ergodicity_report(model, params, opt);
    detail::write_json(rc.out_dir / "drift_report.json", to_json(rep, model, params));
    if (rep.drift) {
        io::CsvWriter w(rc.out_dir / "drift_margins.csv",
                        {"point", "z1", "V", "expected_V", "drift", "margin", "mc_se", "inside", "overflow"});
        for (std::size_t i = 0; i < rep.drift->grid.size(); ++i) {
            const auto& p = rep.drift->grid[i];
            w.row({static_cast<double>(i), p.z1, p.V, p.expected_V, p.drift, p.margin, p.std_error,
                   p.inside ? 1.0 : 0.0, p.overflow ? 1.0 : 0.0});
        }
    }
    if (rc.verbosity > 0) {
        log << "check: verdict " << rep.verdict << "; rate exponent " << rep.rate_exponent << ", moment order "
            << rep.moment_order << '\n';
    }
    return rep.verdict.rfind("failed", 0) == 0 ? kNumericFail : kOk;
}

inline int run_diagnose(const RunConfig& rc, std::ostream& log) {
    if (!rc.input) throw ConfigError("diagnose needs an input series (--input)");
    const auto series = io::ingest_csv(*rc.input, 4);
    const auto& x = series.values;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size() - 1);
    if (!(var > 0.0)) throw DegenerateInput("diagnose: series has zero variance");
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean) / std::sqrt(var);
    const auto inn = innovation_from_config(rc.config);
    const auto d = residual_diagnostics(z, inn, rc.config.count("diagnose.max_lag", 100));
    detail::write_diagnostics(rc.out_dir, d, "acf.csv");
    detail::write_json(rc.out_dir / "diagnose.json",
                       {{"version", 1},
                        {"kind", "diagnostics"},
                        {"n", x.size()},
                        {"dropped", series.dropped},
                        {"mean", mean},
                        {"sd", std::sqrt(var)},
                        {"band", d.acf_resid.band},
                        {"acf_outside_band", d.acf_resid.count_outside()},
                        {"acf_sq_outside_band", d.acf_sq.count_outside()},
                        {"innovation", to_json(inn)}});
    if (rc.verbosity > 0) {
        log << "diagnose: " << d.acf_resid.count_outside() << " of " << d.acf_resid.values.size() - 1
            << " autocorrelations outside +-" << d.acf_resid.band << '\n';
    }
    return kOk;
}

/// Runs one command; every error is mapped to its category exit code and
/// metadata.json is written whenever the output directory is usable.
inline int run(const RunConfig& rc, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        std::error_code ec;
        std::filesystem::create_directories(rc.out_dir, ec);
        if (ec) throw ConfigError("cannot create output directory " + rc.out_dir.string());
        detail::write_json(rc.out_dir / "metadata.json", metadata(rc));
        if (rc.command == "simulate") return run_simulate(rc, log);
        if (rc.command == "fit") return run_fit(rc, log);
        if (rc.command == "check") return run_check(rc, log);
        if (rc.command == "diagnose") return run_diagnose(rc, log);
        throw ConfigError("unknown command '" + rc.command + "'");
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataFail;
    }
}

}  // namespace nlarch::app
