#pragma once

// Batch experiments driven by JSON configs. Every run writes its tables as CSV,
// nested results as JSON, and a manifest (config, config hash, seed, version,
// wall time). Tables are byte-identical for identical config and seed.

#include "whomog/elliptic.hpp"
#include "whomog/error.hpp"
#include "whomog/exclusion.hpp"
#include "whomog/homogenize.hpp"
#include "whomog/interp.hpp"
#include "whomog/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#ifndef WHOMOG_VERSION
#define WHOMOG_VERSION "unknown"
#endif

namespace whomog {

inline constexpr const char* version = WHOMOG_VERSION;

inline std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

enum class ExitStatus : int { Ok = 0, ConfigFailure = 1, NumericalFailure = 2 };

struct ExperimentResult {
    ExitStatus status = ExitStatus::Ok;
    std::string error_type; ///< empty on success
    std::string message;
    std::filesystem::path output_dir;
    std::vector<std::string> files;
};

inline const std::vector<std::string>& experiment_commands()
{
    static const std::vector<std::string> c = {"solve", "converge", "homogenize", "random-homogenize", "hydro"};
    return c;
}

namespace detail {

using io::json;

struct RunContext {
    std::filesystem::path dir;
    std::vector<std::string> files;
    int jobs = 1;

    void write(const std::string& name, const std::string& text)
    {
        io::write_text(dir / name, text);
        files.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

inline SolverOptions parse_solver(const json& p)
{
    SolverOptions s;
    if (!p.contains("solver")) return s;
    const auto& j = p["solver"];
    io::check_keys(j, "solver", {"method", "rel_tol", "max_iter_factor"});
    s.rel_tol = io::get_or<double>(j, "rel_tol", s.rel_tol, "solver");
    s.max_iter_factor = io::get_or<int>(j, "max_iter_factor", s.max_iter_factor, "solver");
    const auto m = io::get_or<std::string>(j, "method", "auto", "solver");
    if (m == "auto")
        s.method = SolverOptions::Method::Auto;
    else if (m == "cg")
        s.method = SolverOptions::Method::ConjugateGradient;
    else if (m == "dense")
        s.method = SolverOptions::Method::Dense;
    else
        throw ConfigError("solver: method must be auto, cg or dense");
    if (!(s.rel_tol > 0.0) || s.max_iter_factor < 1) throw ConfigError("solver: bad tolerance or iteration factor");
    return s;
}

inline int parse_dim(const json& p)
{
    const int d = io::get_or<int>(p, "d", 1, "params");
    if (d < 1 || d > 3) throw ConfigError("params: d must be 1, 2 or 3");
    return d;
}

inline std::vector<FourierSeries> parse_flux_parts(const json& p, int d)
{
    std::vector<FourierSeries> fk;
    if (!p.contains("fk")) return fk;
    if (!p["fk"].is_array() || static_cast<int>(p["fk"].size()) > d)
        throw ConfigError("params: \"fk\" must be an array with at most d entries");
    for (const auto& e : p["fk"]) fk.push_back(io::parse_function(e, d, "fk"));
    return fk;
}

inline json homogenized_json(const HomogenizedMatrix& h)
{
    json axes = json::array();
    for (const auto& ax : h.axes) {
        json a;
        if (ax.constant)
            a["constant"] = *ax.constant;
        else
            a["constant"] = nullptr;
        a["slab"] = ax.slab;
        if (!ax.slab.empty()) a["on_slab"] = ax.on_slab;
        axes.push_back(a);
    }
    return {{"axes", axes}, {"theta", h.theta}};
}

inline void run_solve(const json& p, std::uint64_t seed, RunContext& ctx)
{
    io::check_keys(p, "solve", {"d", "N", "w", "A", "lambda", "f", "fk", "solver", "interpolant"});
    const int d = parse_dim(p);
    const int n = io::get<int>(p, "N", "solve");
    if (n < 2) throw ConfigError("solve: N must be >= 2");
    const auto w = io::parse_w(p.value("w", json()), d);
    const auto spec = io::parse_coefficients(io::get<json>(p, "A", "solve"), d, seed);
    const double lambda = io::get<double>(p, "lambda", "solve");
    if (!(lambda >= 0.0)) throw ConfigError("solve: lambda must be >= 0");
    StudyConfig sc;
    sc.w = w;
    sc.f0 = io::parse_function(io::get<json>(p, "f", "solve"), d, "f");
    sc.fk = parse_flux_parts(p, d);
    const auto opt = parse_solver(p);

    const auto grid = make_grid(n, w);
    const auto a = build_field(spec, grid);
    const auto rhs = dual_rhs(detail::discretize_study_rhs(sc, grid));
    SolveStats st;
    // λu − ∇A∇u = f; at λ = 0 this is the pure Poisson problem −∇A∇u = f
    const auto u = lambda > 0.0 ? solve_resolvent(a, lambda, rhs, opt, &st) : solve_poisson(a, -1.0 * rhs, opt, &st);

    io::write_mesh_function(ctx.dir / "solution.csv", u);
    ctx.files.push_back("solution.csv");
    ctx.files.push_back("solution.json");
    const auto e = energy_pair(a, u, lambda);
    ctx.write_json("summary.json", {{"N", n},
                                    {"d", d},
                                    {"lambda", lambda},
                                    {"iterations", st.iterations},
                                    {"relative_residual", st.relative_residual},
                                    {"dense", st.dense},
                                    {"mean", mean(u)},
                                    {"norm_l2", norm_l2(u)},
                                    {"norm_sobolev", norm_sobolev(u)},
                                    {"l2_mass", e.l2_mass},
                                    {"w_energy", e.w_energy}});
    if (p.contains("interpolant")) {
        const auto& ij = p["interpolant"];
        io::check_keys(ij, "interpolant", {"points", "kind"});
        const int m = io::get<int>(ij, "points", "interpolant");
        const auto kind = io::get_or<std::string>(ij, "kind", "w", "interpolant");
        InterpolantKind ik;
        if (kind == "w")
            ik = InterpolantKind::w_full();
        else if (kind == "constant")
            ik = InterpolantKind::piecewise_constant();
        else
            throw ConfigError("interpolant: kind must be \"w\" or \"constant\"");
        ctx.write("interpolant.csv", io::interpolant_csv(u, ik, m));
    }
}

inline StudyConfig parse_study(const json& p, std::uint64_t seed, const std::string& what)
{
    const int d = parse_dim(p);
    StudyConfig c;
    c.w = io::parse_w(p.value("w", json()), d);
    c.spec = io::parse_coefficients(io::get<json>(p, "A", what), d, seed);
    c.lambda = io::get<double>(p, "lambda", what);
    c.f0 = io::parse_function(io::get<json>(p, "f", what), d, "f");
    c.fk = parse_flux_parts(p, d);
    c.n_list = io::get<std::vector<int>>(p, "N_list", what);
    c.solver = parse_solver(p);
    if (p.contains("reference")) {
        const auto& r = p["reference"];
        io::check_keys(r, "reference", {"kind", "fine_factor"});
        const auto k = io::get_or<std::string>(r, "kind", "auto", "reference");
        if (k == "auto")
            c.reference.kind = ReferenceOptions::Kind::Auto;
        else if (k == "analytic")
            c.reference.kind = ReferenceOptions::Kind::Analytic;
        else if (k == "fine")
            c.reference.kind = ReferenceOptions::Kind::FineGrid;
        else
            throw ConfigError("reference: kind must be auto, analytic or fine");
        c.reference.fine_factor = io::get_or<int>(r, "fine_factor", 4, "reference");
    }
    for (int n : c.n_list)
        if (n < 2) throw ConfigError(what + ": every N must be >= 2");
    return c;
}

inline void write_study(const HomogenizationResult& r, RunContext& ctx)
{
    std::ostringstream wide, lng;
    wide << "N,sobolev_norm,l2_error,max_error,l2_mass,w_energy,iterations\n";
    lng << "N,metric,value\n";
    for (const auto& rec : r.records) {
        wide << rec.n << ',' << io::fmt(rec.sobolev_norm) << ',' << io::fmt(rec.l2_error) << ','
             << io::fmt(rec.max_error) << ',' << io::fmt(rec.l2_mass) << ',' << io::fmt(rec.w_energy) << ','
             << rec.iterations << '\n';
        const std::pair<const char*, double> m[] = {{"sobolev_norm", rec.sobolev_norm}, {"l2_error", rec.l2_error},
                                                    {"max_error", rec.max_error},       {"l2_mass", rec.l2_mass},
                                                    {"w_energy", rec.w_energy},         {"iterations", rec.iterations}};
        for (const auto& [name, v] : m) lng << rec.n << ',' << name << ',' << io::fmt(v) << '\n';
    }
    ctx.write("study.csv", wide.str());
    ctx.write("metrics.csv", lng.str());
}

inline HomogenizationResult run_study(const json& p, std::uint64_t seed, RunContext& ctx, const std::string& what)
{
    auto c = parse_study(p, seed, what);
    c.jobs = ctx.jobs;
    try {
        auto r = run_h_convergence_study(c);
        write_study(r, ctx);
        return r;
    } catch (const InvalidArgument& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

inline void run_converge(const json& p, std::uint64_t seed, RunContext& ctx)
{
    io::check_keys(p, "converge", {"d", "w", "A", "lambda", "f", "fk", "N_list", "solver", "reference"});
    const auto r = run_study(p, seed, ctx, "converge");
    json orders = json::array();
    for (std::size_t i = 1; i < r.records.size(); ++i) {
        const auto& a = r.records[i - 1];
        const auto& b = r.records[i];
        orders.push_back(std::log(a.max_error / b.max_error) / std::log(static_cast<double>(b.n) / a.n));
    }
    ctx.write_json("summary.json", {{"reference", r.reference},
                                    {"homogenized", homogenized_json(r.predicted)},
                                    {"reference_l2_mass", r.reference_l2_mass},
                                    {"reference_w_energy", r.reference_w_energy},
                                    {"max_error_orders", orders}});
}

inline void run_homogenize(const json& p, std::uint64_t seed, RunContext& ctx)
{
    io::check_keys(p, "homogenize",
                   {"d", "w", "A", "lambda", "f", "fk", "N_list", "solver", "reference", "dictionary_modes"});
    const auto r = run_study(p, seed, ctx, "homogenize");
    const auto c = parse_study(p, seed, "homogenize");
    const int modes = io::get_or<int>(p, "dictionary_modes", 2, "homogenize");
    if (modes < 0) throw ConfigError("homogenize: dictionary_modes must be >= 0");
    const auto dict = test_dictionary(c.w, modes);
    // weak convergence of 1/a_kk^N against the homogenized prediction
    std::ostringstream weak;
    weak << "N,axis,test,pairing,predicted,gap\n";
    for (int n : c.n_list) {
        const auto grid = make_grid(n, c.w);
        const auto a = build_field(c.spec, grid);
        const auto ah = build_homogenized_field(r.predicted, grid);
        for (int k = 0; k < grid->dim(); ++k) {
            MeshFunction inv(grid), inv_h(grid);
            for (std::size_t i = 0; i < grid->size(); ++i) {
                inv[i] = 1.0 / a(k, i);
                inv_h[i] = 1.0 / ah(k, i);
            }
            const auto got = dictionary_pairings(inv, dict);
            const auto want = dictionary_pairings(inv_h, dict);
            for (std::size_t t = 0; t < dict.size(); ++t)
                weak << n << ',' << k << ',' << dict[t].name << ',' << io::fmt(got[t]) << ',' << io::fmt(want[t]) << ','
                     << io::fmt(got[t] - want[t]) << '\n';
        }
    }
    ctx.write("weak_convergence.csv", weak.str());
    ctx.write_json("summary.json", {{"reference", r.reference},
                                    {"homogenized", homogenized_json(r.predicted)},
                                    {"reference_l2_mass", r.reference_l2_mass},
                                    {"reference_w_energy", r.reference_w_energy}});
}

inline void run_random_homogenize(const json& p, std::uint64_t seed, RunContext& ctx)
{
    io::check_keys(p, "random-homogenize", {"w", "A", "lambda", "f", "N", "seeds", "num_seeds", "solver"});
    const auto w = io::parse_w(p.value("w", json()), 1);
    const auto spec = io::parse_coefficients(io::get<json>(p, "A", "random-homogenize"), 1, seed);
    if (spec.kind != CoefficientSequenceSpec::Kind::RandomErgodic)
        throw ConfigError("random-homogenize: A must be of kind random");
    const auto f = io::parse_function(io::get<json>(p, "f", "random-homogenize"), 1, "f");
    const double lambda = io::get<double>(p, "lambda", "random-homogenize");
    const int n = io::get<int>(p, "N", "random-homogenize");
    std::vector<std::uint64_t> seeds;
    if (p.contains("seeds")) {
        seeds = io::get<std::vector<std::uint64_t>>(p, "seeds", "random-homogenize");
    } else {
        const int m = io::get<int>(p, "num_seeds", "random-homogenize");
        if (m < 2) throw ConfigError("random-homogenize: num_seeds must be >= 2");
        for (int i = 0; i < m; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));
    }
    if (!(lambda > 0.0) || n < 2 || seeds.size() < 2)
        throw ConfigError("random-homogenize: need lambda > 0, N >= 2 and at least two seeds");
    const auto r = random_effective_coefficient(spec, w, f, lambda, n, seeds, ctx.jobs, parse_solver(p));
    std::ostringstream s;
    s << "seed,fitted\n";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) s << r.seeds[i] << ',' << io::fmt(r.fitted[i]) << '\n';
    ctx.write("fits.csv", s.str());
    ctx.write_json("summary.json", {{"N", n},
                                    {"mean", r.mean},
                                    {"sd", r.sd},
                                    {"stderr", r.stderr_mean},
                                    {"predicted_off_slab", r.predicted_off},
                                    {"predicted_on_slab", r.predicted_on},
                                    {"z_score", (r.mean - r.predicted_off) / r.stderr_mean}});
}

inline void run_hydro(const json& p, std::uint64_t seed, RunContext& ctx)
{
    io::check_keys(p, "hydro", {"d", "N", "w", "A", "b", "b3", "rho0", "t_list", "M", "tests", "scheme", "implicit_dt",
                                "snapshots"});
    const int d = parse_dim(p);
    HydroCheckConfig c;
    c.n = io::get<int>(p, "N", "hydro");
    if (c.n < 4) throw ConfigError("hydro: N must be >= 4");
    c.w = io::parse_w(p.value("w", json()), d);
    c.a = p.contains("A") ? io::parse_coefficients(p["A"], d, seed) : CoefficientSequenceSpec::constant_field(1.0);
    c.b = io::get_or<double>(p, "b", 0.0, "hydro");
    c.b3 = io::get_or<double>(p, "b3", 0.0, "hydro");
    c.rho0 = io::parse_function(io::get<json>(p, "rho0", "hydro"), d, "rho0").as_function();
    c.times = io::get<std::vector<double>>(p, "t_list", "hydro");
    c.replicas = io::get<int>(p, "M", "hydro");
    c.seed = seed;
    c.jobs = ctx.jobs;
    const auto scheme = io::get_or<std::string>(p, "scheme", "explicit", "hydro");
    if (scheme == "implicit")
        c.pde.scheme = HydroStepControl::Scheme::Implicit;
    else if (scheme != "explicit")
        throw ConfigError("hydro: scheme must be explicit or implicit");
    c.pde.implicit_dt = io::get_or<double>(p, "implicit_dt", c.pde.implicit_dt, "hydro");
    if (p.contains("tests")) {
        for (const auto& t : p["tests"]) {
            io::check_keys(t, "test function", {"name", "f"});
            c.tests.push_back({io::get<std::string>(t, "name", "test function"),
                               io::parse_function(io::get<json>(t, "f", "test function"), d, "test function").as_function()});
        }
    } else {
        using std::numbers::pi;
        c.tests.push_back({"one", [](std::span<const double>) { return 1.0; }});
        for (int k = 0; k < d; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            c.tests.push_back({"cos_x" + std::to_string(k), [ks](std::span<const double> y) { return std::cos(2 * pi * y[ks]); }});
            c.tests.push_back({"sin_x" + std::to_string(k), [ks](std::span<const double> y) { return std::sin(2 * pi * y[ks]); }});
        }
    }
    HydroCheckReport rep;
    try {
        rep = hydrodynamic_check(c);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("hydro: ") + e.what());
    }
    std::ostringstream s;
    s << "t,test,mean,stderr,pde,gap\n";
    for (const auto& r : rep.rows)
        s << io::fmt(r.t) << ',' << r.test << ',' << io::fmt(r.mean) << ',' << io::fmt(r.stderr_mean) << ','
          << io::fmt(r.pde) << ',' << io::fmt(r.gap) << '\n';
    ctx.write("hydro.csv", s.str());
    if (io::get_or<bool>(p, "snapshots", false, "hydro")) {
        std::ostringstream prof;
        prof << "t,site,mean,stderr,pde\n";
        for (std::size_t ti = 0; ti < c.times.size(); ++ti)
            for (std::size_t x = 0; x < rep.site_mean[ti].size(); ++x)
                prof << io::fmt(c.times[ti]) << ',' << x << ',' << io::fmt(rep.site_mean[ti][x]) << ','
                     << io::fmt(rep.site_stderr[ti][x]) << ',' << io::fmt(rep.pde_profile[ti][x]) << '\n';
        ctx.write("profiles.csv", prof.str());
    }
    ctx.write_json("summary.json", {{"N", c.n}, {"M", c.replicas}, {"events", rep.total_events}});
}

inline std::string error_name(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const CompatibilityError*>(&e)) return "CompatibilityError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const QuadratureError*>(&e)) return "QuadratureError";
    if (dynamic_cast<const StepSizeUnderflow*>(&e)) return "StepSizeUnderflow";
    if (dynamic_cast<const EllipticityError*>(&e)) return "EllipticityError";
    if (dynamic_cast<const GridMismatch*>(&e)) return "GridMismatch";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    if (dynamic_cast<const json::exception*>(&e)) return "ConfigError";
    return "InternalError";
}

} // namespace detail

/// Unwraps a manifest (checking its hash) or returns the config unchanged.
inline io::json unwrap_config(const io::json& j)
{
    if (j.is_object() && j.contains("config") && j.contains("config_sha256")) {
        const auto& c = j["config"];
        if (sha256_hex(c.dump()) != j["config_sha256"].get<std::string>())
            throw ConfigError("manifest: config hash does not match its config");
        return c;
    }
    return j;
}

/// Validates and runs one experiment; never throws.
inline ExperimentResult run_experiment(const io::json& raw, const std::filesystem::path& output_root, int jobs = 1,
                                       const std::string& expected_command = {})
{
    using io::json;
    ExperimentResult res;
    const auto start = std::chrono::steady_clock::now();
    try {
        const json cfg = unwrap_config(raw);
        io::check_keys(cfg, "config", {"command", "seed", "output", "params"});
        const auto command = io::get<std::string>(cfg, "command", "config");
        bool known = false;
        for (const auto& c : experiment_commands()) known = known || c == command;
        if (!known) throw ConfigError("config: unknown command \"" + command + "\"");
        if (!expected_command.empty() && expected_command != command)
            throw ConfigError("config is for \"" + command + "\", not \"" + expected_command + "\"");
        const json params = cfg.value("params", json::object());
        io::require_object(params, "params");

        const bool stochastic = command == "random-homogenize" || command == "hydro" ||
                                (params.contains("A") && io::is_random(params["A"]));
        if (stochastic && !cfg.contains("seed")) throw ConfigError("config: command \"" + command + "\" needs an explicit seed");
        const std::uint64_t seed = cfg.contains("seed") ? io::get<std::uint64_t>(cfg, "seed", "config") : 0;
        if (jobs < 1) throw ConfigError("--jobs must be >= 1");

        detail::RunContext ctx;
        ctx.jobs = jobs;
        ctx.dir = output_root / io::get_or<std::string>(cfg, "output", command, "config");
        res.output_dir = ctx.dir;
        std::filesystem::create_directories(ctx.dir);

        if (command == "solve")
            detail::run_solve(params, seed, ctx);
        else if (command == "converge")
            detail::run_converge(params, seed, ctx);
        else if (command == "homogenize")
            detail::run_homogenize(params, seed, ctx);
        else if (command == "random-homogenize")
            detail::run_random_homogenize(params, seed, ctx);
        else
            detail::run_hydro(params, seed, ctx);

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json manifest = {{"command", command},
                         {"config", cfg},
                         {"config_sha256", sha256_hex(cfg.dump())},
                         {"seed", cfg.contains("seed") ? json(seed) : json(nullptr)},
                         {"version", version},
                         {"wall_time_seconds", wall},
                         {"outputs", ctx.files}};
        ctx.write_json("manifest.json", manifest);
        res.files = ctx.files;
    } catch (const std::exception& e) {
        const auto name = detail::error_name(e);
        res.error_type = name;
        res.message = e.what();
        const bool config = name == "ConfigError" || name == "InvalidArgument" || name == "EllipticityError";
        res.status = config ? ExitStatus::ConfigFailure : ExitStatus::NumericalFailure;
    }
    return res;
}

inline ExperimentResult run_experiment_file(const std::filesystem::path& path, const std::filesystem::path& output_root,
                                            int jobs = 1, const std::string& expected_command = {})
{
    std::ifstream in(path);
    if (!in) {
        ExperimentResult r;
        r.status = ExitStatus::ConfigFailure;
        r.error_type = "ConfigError";
        r.message = "cannot read config " + path.string();
        return r;
    }
    io::json j;
    try {
        j = io::json::parse(in);
    } catch (const io::json::exception& e) {
        ExperimentResult r;
        r.status = ExitStatus::ConfigFailure;
        r.error_type = "ConfigError";
        r.message = std::string("config is not valid JSON: ") + e.what();
        return r;
    }
    return run_experiment(j, output_root, jobs, expected_command);
}

} // namespace whomog
