#pragma once

// JSON descriptors for W, coefficient sequences and closed-form functions,
// and CSV output for mesh functions and interpolant samples.

#include "whomog/error.hpp"
#include "whomog/functions.hpp"
#include "whomog/homogenize.hpp"
#include "whomog/interp.hpp"
#include "whomog/mesh.hpp"
#include "whomog/w_measure.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace whomog::io {

using json = nlohmann::json;

/// Shortest round-trip representation used everywhere in CSV output.
inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void require_object(const json& j, const std::string& what)
{
    if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
}

/// Rejects keys outside `allowed` so that typos do not pass silently.
inline void check_keys(const json& j, const std::string& what, std::initializer_list<const char*> allowed)
{
    require_object(j, what);
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(what + ": unknown key \"" + key + "\"");
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& what)
{
    if (!j.contains(key)) throw ConfigError(what + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(what + ": bad value for \"" + key + "\": " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& what)
{
    return j.contains(key) ? get<T>(j, key, what) : fallback;
}

// ---------------------------------------------------------------------------
// W

inline WCoordinate parse_w_coordinate(const json& j)
{
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "identity")) return WCoordinate::identity();
    check_keys(j, "W spec", {"slopes", "atoms"});
    std::vector<WCoordinate::Segment> segs;
    std::vector<WCoordinate::Atom> atoms;
    const auto slopes = get_or<std::vector<std::vector<double>>>(j, "slopes", {{0.0, 1.0}}, "W spec");
    for (const auto& s : slopes) {
        if (s.size() != 2) throw ConfigError("W spec: each slope entry is [start, slope]");
        segs.push_back({s[0], s[1]});
    }
    for (const auto& a : get_or<std::vector<std::vector<double>>>(j, "atoms", {}, "W spec")) {
        if (a.size() != 2) throw ConfigError("W spec: each atom entry is [position, mass]");
        atoms.push_back({a[0], a[1]});
    }
    try {
        return {std::move(segs), std::move(atoms)};
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("W spec: ") + e.what());
    }
}

/// One descriptor shared by all axes, or an array with one per axis.
inline WProduct parse_w(const json& j, int d)
{
    if (j.is_array()) {
        if (static_cast<int>(j.size()) != d) throw ConfigError("W spec: need one entry per axis");
        std::vector<WCoordinate> c;
        for (const auto& e : j) c.push_back(parse_w_coordinate(e));
        return WProduct(std::move(c));
    }
    return WProduct::uniform(d, parse_w_coordinate(j));
}

inline json to_json(const WCoordinate& w)
{
    json s = json::array(), a = json::array();
    for (const auto& seg : w.segments()) s.push_back({seg.start, seg.slope});
    for (const auto& at : w.atoms()) a.push_back({at.position, at.mass});
    return {{"slopes", s}, {"atoms", a}};
}

// ---------------------------------------------------------------------------
// Functions

/// A number, or {"offset": c, "terms": [{"amplitude", "mode", "phase"}]}.
inline FourierSeries parse_function(const json& j, int d, const std::string& what = "function")
{
    if (j.is_number()) return FourierSeries::constant(j.get<double>());
    check_keys(j, what, {"offset", "terms"});
    FourierSeries f;
    f.offset = get_or<double>(j, "offset", 0.0, what);
    if (j.contains("terms")) {
        if (!j["terms"].is_array()) throw ConfigError(what + ": \"terms\" must be an array");
        for (const auto& t : j["terms"]) {
            check_keys(t, what + " term", {"amplitude", "mode", "phase"});
            FourierTerm term;
            term.amplitude = get_or<double>(t, "amplitude", 1.0, what);
            term.mode = get<std::vector<int>>(t, "mode", what);
            const auto phase = get_or<std::string>(t, "phase", "cos", what);
            if (phase == "cos")
                term.phase = FourierTerm::Phase::Cos;
            else if (phase == "sin")
                term.phase = FourierTerm::Phase::Sin;
            else
                throw ConfigError(what + ": phase must be \"cos\" or \"sin\"");
            f.terms.push_back(std::move(term));
        }
    }
    try {
        f.check_dim(d);
    } catch (const InvalidArgument& e) {
        throw ConfigError(what + ": " + e.what());
    }
    return f;
}

inline json to_json(const FourierSeries& f)
{
    json terms = json::array();
    for (const auto& t : f.terms)
        terms.push_back({{"amplitude", t.amplitude}, {"mode", t.mode},
                         {"phase", t.phase == FourierTerm::Phase::Cos ? "cos" : "sin"}});
    return {{"offset", f.offset}, {"terms", terms}};
}

// ---------------------------------------------------------------------------
// Coefficients

inline ScalarLaw parse_law(const json& j)
{
    check_keys(j, "law", {"kind", "lo", "hi", "values", "probs", "transition"});
    const auto kind = get<std::string>(j, "kind", "law");
    try {
        if (kind == "uniform") return ScalarLaw::uniform(get<double>(j, "lo", "law"), get<double>(j, "hi", "law"));
        if (kind == "discrete")
            return ScalarLaw::discrete(get<std::vector<double>>(j, "values", "law"),
                                       get<std::vector<double>>(j, "probs", "law"));
        if (kind == "markov")
            return ScalarLaw::markov(get<std::vector<double>>(j, "values", "law"),
                                     get<std::vector<std::vector<double>>>(j, "transition", "law"));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("law: ") + e.what());
    }
    throw ConfigError("law: kind must be uniform, discrete or markov");
}

/// {"kind": "constant" | "periodic" | "function" | "random", ...}; the seed
/// of a random environment comes from the run's seed.
inline CoefficientSequenceSpec parse_coefficients(const json& j, int d, std::uint64_t seed)
{
    check_keys(j, "A spec", {"kind", "value", "theta", "pattern", "axes", "law", "laws"});
    const auto kind = get<std::string>(j, "kind", "A spec");
    const double theta = get_or<double>(j, "theta", 0.0, "A spec");
    CoefficientSequenceSpec s;
    if (kind == "constant") {
        s = CoefficientSequenceSpec::constant_field(get<double>(j, "value", "A spec"), theta);
    } else if (kind == "periodic") {
        if (!j.contains("pattern") || !j["pattern"].is_array() || j["pattern"].empty())
            throw ConfigError("A spec: periodic needs a non-empty \"pattern\"");
        std::vector<std::vector<double>> p;
        if (j["pattern"].front().is_array())
            p = get<std::vector<std::vector<double>>>(j, "pattern", "A spec");
        else
            p = {get<std::vector<double>>(j, "pattern", "A spec")};
        double th = theta;
        if (th == 0.0)
            for (const auto& row : p)
                for (double v : row) th = std::max({th, v, 1.0 / v});
        s = CoefficientSequenceSpec::periodic(std::move(p), th);
    } else if (kind == "function") {
        if (!j.contains("axes") || !j["axes"].is_array()) throw ConfigError("A spec: function needs \"axes\"");
        if (theta <= 0.0) throw ConfigError("A spec: function coefficients need an explicit theta");
        std::vector<PointFunction> fs;
        for (const auto& e : j["axes"]) fs.push_back(parse_function(e, d, "A axis").as_function());
        s = CoefficientSequenceSpec::discretized(std::move(fs), theta);
    } else if (kind == "random") {
        RandomEnvironmentSpec env;
        env.seed = seed;
        if (j.contains("law")) env.laws.push_back(parse_law(j["law"]));
        if (j.contains("laws"))
            for (const auto& l : j["laws"]) env.laws.push_back(parse_law(l));
        double th = theta;
        if (th == 0.0)
            for (const auto& l : env.laws) th = std::max({th, l.max(), 1.0 / l.min()});
        s = CoefficientSequenceSpec::random_ergodic(std::move(env), th);
    } else {
        throw ConfigError("A spec: kind must be constant, periodic, function or random");
    }
    try {
        s.validate(d);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("A spec: ") + e.what());
    }
    return s;
}

inline bool is_random(const json& a) { return a.is_object() && a.value("kind", "") == "random"; }

// ---------------------------------------------------------------------------
// CSV

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + p.string());
}

/// CSV with header i0,...,i{d−1},value plus a JSON sidecar {"d", "N"}.
inline void write_mesh_function(const std::filesystem::path& csv, const MeshFunction& u)
{
    const auto& g = *u.grid();
    std::ostringstream s;
    for (int k = 0; k < g.dim(); ++k) s << 'i' << k << ',';
    s << "value\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (int k = 0; k < g.dim(); ++k) s << g.coord(i, k) << ',';
        s << fmt(u[i]) << '\n';
    }
    write_text(csv, s.str());
    auto side = csv;
    side.replace_extension(".json");
    write_text(side, json{{"d", g.dim()}, {"N", g.n()}}.dump(2) + "\n");
}

/// Reads back write_mesh_function output onto a grid with the given W.
inline MeshFunction read_mesh_function(const std::filesystem::path& csv, const WProduct& w)
{
    auto side = csv;
    side.replace_extension(".json");
    std::ifstream sj(side);
    if (!sj) throw ConfigError("missing sidecar " + side.string());
    const auto meta = json::parse(sj);
    const int d = get<int>(meta, "d", "sidecar"), n = get<int>(meta, "N", "sidecar");
    if (d != w.dim()) throw ConfigError("sidecar dimension does not match W");
    const auto grid = make_grid(n, w);
    MeshFunction u(grid);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<int> idx(static_cast<std::size_t>(d));
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        for (int k = 0; k < d; ++k) {
            std::getline(ls, cell, ',');
            idx[static_cast<std::size_t>(k)] = std::stoi(cell);
        }
        std::getline(ls, cell, ',');
        u[grid->index_of(idx)] = std::stod(cell);
        ++rows;
    }
    if (rows != grid->size()) throw ConfigError("mesh CSV has " + std::to_string(rows) + " rows, expected " +
                                                std::to_string(grid->size()));
    return u;
}

/// Interpolant sampled on an M^d uniform evaluation grid: y0,...,value.
inline std::string interpolant_csv(const MeshFunction& u, const InterpolantKind& kind, int m)
{
    if (m < 1) throw ConfigError("interpolant export: points per axis must be >= 1");
    const int d = u.grid()->dim();
    std::ostringstream s;
    for (int k = 0; k < d; ++k) s << 'y' << k << ',';
    s << "value\n";
    long total = 1;
    for (int k = 0; k < d; ++k) total *= m;
    std::vector<double> y(static_cast<std::size_t>(d));
    for (long c = 0; c < total; ++c) {
        long r = c;
        for (int k = 0; k < d; ++k) {
            y[static_cast<std::size_t>(k)] = static_cast<double>(r % m) / m;
            r /= m;
        }
        for (double v : y) s << fmt(v) << ',';
        s << fmt(interpolate(u, kind, y)) << '\n';
    }
    return s.str();
}

} // namespace whomog::io
