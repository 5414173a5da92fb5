#pragma once

// Sequences of coefficient fields A^N (discretized, periodic, random ergodic),
// their predicted homogenized limits, and H-convergence studies.

#include "whomog/elliptic.hpp"
#include "whomog/error.hpp"
#include "whomog/functions.hpp"
#include "whomog/interp.hpp"
#include "whomog/mesh.hpp"
#include "whomog/parallel.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace whomog {

// ---------------------------------------------------------------------------
// Random environments

/// Marginal law of one coefficient b_kk, plus the shift model: Uniform and
/// Discrete are i.i.d. over sites, MarkovChain runs along the coefficient's
/// own axis (independently on each line) started from its stationary law.
struct ScalarLaw {
    enum class Kind { Uniform, Discrete, MarkovChain };
    Kind kind = Kind::Uniform;
    double lo = 1.0, hi = 1.0;
    std::vector<double> values;
    std::vector<double> probs;
    std::vector<std::vector<double>> transition;

    static ScalarLaw uniform(double lo, double hi)
    {
        ScalarLaw l;
        l.kind = Kind::Uniform;
        l.lo = lo;
        l.hi = hi;
        l.validate();
        return l;
    }
    static ScalarLaw discrete(std::vector<double> values, std::vector<double> probs)
    {
        ScalarLaw l;
        l.kind = Kind::Discrete;
        l.values = std::move(values);
        l.probs = std::move(probs);
        l.validate();
        return l;
    }
    static ScalarLaw markov(std::vector<double> values, std::vector<std::vector<double>> transition)
    {
        ScalarLaw l;
        l.kind = Kind::MarkovChain;
        l.values = std::move(values);
        l.transition = std::move(transition);
        l.validate();
        l.probs = l.stationary();
        return l;
    }

    void validate() const
    {
        switch (kind) {
        case Kind::Uniform:
            if (!(lo > 0.0 && hi > lo) || !std::isfinite(hi))
                throw InvalidArgument("uniform law needs 0 < lo < hi");
            break;
        case Kind::Discrete:
            if (values.empty() || values.size() != probs.size())
                throw InvalidArgument("discrete law needs matching values and probabilities");
            for (double p : probs)
                if (!(p >= 0.0)) throw InvalidArgument("discrete law: negative probability");
            if (std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) > 1e-9)
                throw InvalidArgument("discrete law: probabilities must sum to 1");
            break;
        case Kind::MarkovChain:
            if (values.empty() || transition.size() != values.size())
                throw InvalidArgument("Markov law needs a square transition matrix matching the states");
            for (const auto& row : transition) {
                if (row.size() != values.size()) throw InvalidArgument("Markov law: transition matrix is not square");
                double s = 0.0;
                for (double p : row) {
                    if (!(p >= 0.0)) throw InvalidArgument("Markov law: negative transition probability");
                    s += p;
                }
                if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("Markov law: transition rows must sum to 1");
            }
            break;
        }
        if (kind != Kind::Uniform)
            for (double v : values)
                if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("law values must be finite and > 0");
    }

    /// Stationary distribution of an irreducible chain (power iteration on the lazy chain).
    [[nodiscard]] std::vector<double> stationary() const
    {
        const std::size_t n = values.size();
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<bool> seen(n, false);
            std::vector<std::size_t> stack{s};
            seen[s] = true;
            while (!stack.empty()) {
                const auto i = stack.back();
                stack.pop_back();
                for (std::size_t j = 0; j < n; ++j)
                    if (transition[i][j] > 0.0 && !seen[j]) {
                        seen[j] = true;
                        stack.push_back(j);
                    }
            }
            if (std::find(seen.begin(), seen.end(), false) != seen.end())
                throw InvalidArgument("Markov law: chain is not irreducible");
        }
        std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
        for (int it = 0; it < 100000; ++it) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * 0.5 * (transition[i][j] + (i == j ? 1.0 : 0.0));
            double diff = 0.0;
            for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(next[j] - pi[j]));
            pi.swap(next);
            if (diff < 1e-15) break;
        }
        for (double p : pi)
            if (!(p > 1e-12)) throw InvalidArgument("Markov law: chain is not irreducible");
        return pi;
    }

    [[nodiscard]] double mean() const
    {
        if (kind == Kind::Uniform) return 0.5 * (lo + hi);
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] * values[i];
        return s;
    }

    [[nodiscard]] double mean_reciprocal() const
    {
        if (kind == Kind::Uniform) return std::log(hi / lo) / (hi - lo);
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] / values[i];
        return s;
    }

    [[nodiscard]] double min() const
    {
        return kind == Kind::Uniform ? lo : *std::min_element(values.begin(), values.end());
    }
    [[nodiscard]] double max() const
    {
        return kind == Kind::Uniform ? hi : *std::max_element(values.begin(), values.end());
    }
};

struct RandomEnvironmentSpec {
    std::vector<ScalarLaw> laws; ///< one per axis, or a single law shared by all axes
    std::uint64_t seed = 0;

    [[nodiscard]] const ScalarLaw& law(int k) const
    {
        if (laws.empty()) throw InvalidArgument("random environment: no law given");
        return laws.size() == 1 ? laws.front() : laws.at(static_cast<std::size_t>(k));
    }
};

// ---------------------------------------------------------------------------
// Coefficient sequences

struct CoefficientSequenceSpec {
    enum class Kind { Constant, DiscretizedFixed, PeriodicPattern, RandomErgodic };
    Kind kind = Kind::Constant;
    double theta = 1.0;
    double constant = 1.0;
    std::vector<PointFunction> fixed;           ///< a_kk(y), one per axis (or one for all)
    std::vector<std::vector<double>> pattern;   ///< values along axis k, one pattern per axis (or one for all)
    RandomEnvironmentSpec random;

    static CoefficientSequenceSpec constant_field(double c, double theta = 0.0)
    {
        CoefficientSequenceSpec s;
        s.kind = Kind::Constant;
        s.constant = c;
        s.theta = theta > 0.0 ? theta : std::max(c, 1.0 / c);
        return s;
    }
    static CoefficientSequenceSpec periodic(std::vector<std::vector<double>> pattern, double theta)
    {
        CoefficientSequenceSpec s;
        s.kind = Kind::PeriodicPattern;
        s.pattern = std::move(pattern);
        s.theta = theta;
        return s;
    }
    static CoefficientSequenceSpec discretized(std::vector<PointFunction> a, double theta)
    {
        CoefficientSequenceSpec s;
        s.kind = Kind::DiscretizedFixed;
        s.fixed = std::move(a);
        s.theta = theta;
        return s;
    }
    static CoefficientSequenceSpec random_ergodic(RandomEnvironmentSpec env, double theta)
    {
        CoefficientSequenceSpec s;
        s.kind = Kind::RandomErgodic;
        s.random = std::move(env);
        s.theta = theta;
        return s;
    }

    [[nodiscard]] const std::vector<double>& pattern_for(int k) const
    {
        return pattern.size() == 1 ? pattern.front() : pattern.at(static_cast<std::size_t>(k));
    }
    [[nodiscard]] const PointFunction& fixed_for(int k) const
    {
        return fixed.size() == 1 ? fixed.front() : fixed.at(static_cast<std::size_t>(k));
    }

    void validate(int d) const
    {
        if (!(theta > 0.0)) throw InvalidArgument("coefficient spec: theta must be > 0");
        auto per_axis = [d](std::size_t n, const char* what) {
            if (n != 1 && n != static_cast<std::size_t>(d))
                throw InvalidArgument(std::string("coefficient spec: ") + what + " must be given once or once per axis");
        };
        switch (kind) {
        case Kind::Constant: break;
        case Kind::DiscretizedFixed: per_axis(fixed.size(), "fixed field"); break;
        case Kind::PeriodicPattern:
            per_axis(pattern.size(), "pattern");
            for (const auto& p : pattern)
                if (p.empty()) throw InvalidArgument("coefficient spec: empty periodic pattern");
            break;
        case Kind::RandomErgodic:
            per_axis(random.laws.size(), "law");
            for (int k = 0; k < d; ++k) {
                const auto& l = random.law(k);
                if (l.min() < 1.0 / theta * (1.0 - 1e-12) || l.max() > theta * (1.0 + 1e-12))
                    throw EllipticityError("random law support is not inside [1/theta, theta]");
            }
            break;
        }
    }
};

/// True when the closed cell [x/N, (x+1)/N] meets one of the positions (mod 1).
inline bool closed_cell_meets(int x, int n, const std::vector<double>& positions)
{
    const double a = static_cast<double>(x) / n, b = static_cast<double>(x + 1) / n;
    for (double p : positions)
        if ((p >= a && p <= b) || (p + 1.0 >= a && p + 1.0 <= b)) return true;
    return false;
}

namespace detail {

inline std::mt19937_64 environment_rng(std::uint64_t seed, int n, int k)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(k), 0x57u};
    return std::mt19937_64(seq);
}

/// b_kk(T_{Nx}ω) on the N-torus, one independent realization per (seed, N, k).
inline std::vector<double> sample_environment(const ScalarLaw& law, const TorusGrid& g, int k, std::uint64_t seed)
{
    auto rng = environment_rng(seed, g.n(), k);
    std::vector<double> out(g.size());
    switch (law.kind) {
    case ScalarLaw::Kind::Uniform: {
        std::uniform_real_distribution<double> u(law.lo, law.hi);
        for (auto& v : out) v = u(rng);
        break;
    }
    case ScalarLaw::Kind::Discrete: {
        std::discrete_distribution<std::size_t> dist(law.probs.begin(), law.probs.end());
        for (auto& v : out) v = law.values[dist(rng)];
        break;
    }
    case ScalarLaw::Kind::MarkovChain: {
        std::discrete_distribution<std::size_t> start(law.probs.begin(), law.probs.end());
        std::vector<std::discrete_distribution<std::size_t>> step;
        for (const auto& row : law.transition) step.emplace_back(row.begin(), row.end());
        // walk each line along axis k starting from its x_k = 0 site
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.coord(i, k) != 0) continue;
            std::size_t state = start(rng);
            std::size_t idx = i;
            for (int c = 0; c < g.n(); ++c) {
                out[idx] = law.values[state];
                state = step[state](rng);
                idx = g.shift(idx, k, 1);
            }
        }
        break;
    }
    }
    return out;
}

} // namespace detail

/// A^N for the grid. Random fields are overridden by E[b_kk] on every cell
/// whose closure meets the singular slab of W_k.
inline DiagonalField build_field(const CoefficientSequenceSpec& spec, const GridPtr& grid)
{
    const int d = grid->dim();
    spec.validate(d);
    std::vector<std::vector<double>> a(static_cast<std::size_t>(d), std::vector<double>(grid->size()));
    for (int k = 0; k < d; ++k) {
        auto& ak = a[static_cast<std::size_t>(k)];
        switch (spec.kind) {
        case CoefficientSequenceSpec::Kind::Constant:
            std::fill(ak.begin(), ak.end(), spec.constant);
            break;
        case CoefficientSequenceSpec::Kind::DiscretizedFixed: {
            const auto disc = discretize_weighted(spec.fixed_for(k), k, grid);
            std::copy(disc.values().begin(), disc.values().end(), ak.begin());
            break;
        }
        case CoefficientSequenceSpec::Kind::PeriodicPattern: {
            const auto& p = spec.pattern_for(k);
            for (std::size_t i = 0; i < grid->size(); ++i)
                ak[i] = p[static_cast<std::size_t>(grid->coord(i, k)) % p.size()];
            break;
        }
        case CoefficientSequenceSpec::Kind::RandomErgodic: {
            const auto& law = spec.random.law(k);
            ak = detail::sample_environment(law, *grid, k, spec.random.seed);
            const auto slab = grid->w()[k].singular_support();
            if (!slab.empty()) {
                const double eb = law.mean();
                for (std::size_t i = 0; i < grid->size(); ++i)
                    if (closed_cell_meets(grid->coord(i, k), grid->n(), slab)) ak[i] = eb;
            }
            break;
        }
        }
    }
    return {grid, std::move(a), spec.theta};
}

// ---------------------------------------------------------------------------
// Homogenized matrix

struct HomogenizedAxis {
    std::optional<double> constant; ///< set when the entry does not depend on position off the slab
    PointFunction pointwise;        ///< a_kk(y) when not constant
    std::vector<double> slab;       ///< atom positions of W_k where `on_slab` applies
    double on_slab = 0.0;

    [[nodiscard]] double off_slab(std::span<const double> y) const { return constant ? *constant : pointwise(y); }

    [[nodiscard]] double at(std::span<const double> y, int k) const
    {
        double yk = y[static_cast<std::size_t>(k)];
        yk -= std::floor(yk);
        for (double p : slab)
            if (yk == p) return on_slab;
        return off_slab(y);
    }
};

struct HomogenizedMatrix {
    std::vector<HomogenizedAxis> axes;
    double theta = 1.0;

    /// Constant on each axis and no slab: admits a Fourier reference.
    [[nodiscard]] bool is_constant() const
    {
        return std::all_of(axes.begin(), axes.end(), [](const HomogenizedAxis& a) { return a.constant && a.slab.empty(); });
    }
};

/// Entry-wise 1 / (weak limit of 1/a^N_kk).
inline HomogenizedMatrix predicted_homogenized_matrix(const CoefficientSequenceSpec& spec, const WProduct& w)
{
    const int d = w.dim();
    spec.validate(d);
    HomogenizedMatrix out;
    out.theta = spec.theta;
    for (int k = 0; k < d; ++k) {
        HomogenizedAxis ax;
        switch (spec.kind) {
        case CoefficientSequenceSpec::Kind::Constant:
            ax.constant = spec.constant;
            break;
        case CoefficientSequenceSpec::Kind::DiscretizedFixed:
            ax.pointwise = spec.fixed_for(k);
            break;
        case CoefficientSequenceSpec::Kind::PeriodicPattern: {
            const auto& p = spec.pattern_for(k);
            double s = 0.0;
            for (double v : p) s += 1.0 / v;
            ax.constant = static_cast<double>(p.size()) / s;
            break;
        }
        case CoefficientSequenceSpec::Kind::RandomErgodic: {
            const auto& law = spec.random.law(k);
            ax.constant = 1.0 / law.mean_reciprocal();
            ax.slab = w[k].singular_support();
            ax.on_slab = law.mean();
            break;
        }
        }
        out.axes.push_back(std::move(ax));
    }
    return out;
}

/// The homogenized matrix on a grid: slab cells (closed) get the slab value,
/// position-dependent entries are discretized like a fixed field.
inline DiagonalField build_homogenized_field(const HomogenizedMatrix& h, const GridPtr& grid)
{
    const int d = grid->dim();
    if (static_cast<int>(h.axes.size()) != d) throw InvalidArgument("build_homogenized_field: dimension mismatch");
    std::vector<std::vector<double>> a(static_cast<std::size_t>(d), std::vector<double>(grid->size()));
    for (int k = 0; k < d; ++k) {
        const auto& ax = h.axes[static_cast<std::size_t>(k)];
        auto& ak = a[static_cast<std::size_t>(k)];
        if (ax.constant) {
            std::fill(ak.begin(), ak.end(), *ax.constant);
        } else {
            const auto disc = discretize_weighted(ax.pointwise, k, grid);
            std::copy(disc.values().begin(), disc.values().end(), ak.begin());
        }
        if (!ax.slab.empty())
            for (std::size_t i = 0; i < grid->size(); ++i)
                if (closed_cell_meets(grid->coord(i, k), grid->n(), ax.slab)) ak[i] = ax.on_slab;
    }
    return {grid, std::move(a), h.theta};
}

// ---------------------------------------------------------------------------
// Energies and studies

struct EnergyPair {
    double l2_mass = 0.0;  ///< λ N^{−d} Σ u²
    double w_energy = 0.0; ///< N^{1−d} Σ_k Σ_x a_kk (∂ᴺ_{W_k}u)² ΔW_k
};

inline EnergyPair energy_pair(const DiagonalField& a, const MeshFunction& u, double lambda)
{
    if (!same_grid(a.grid(), u.grid())) throw GridMismatch("energy_pair");
    EnergyPair e;
    e.l2_mass = lambda * inner_l2(u, u);
    e.w_energy = bilinear_form(a, 0.0, u, u);
    return e;
}

struct HomogenizationRecord {
    int n = 0;
    double sobolev_norm = 0.0; ///< ‖u_N‖_{1,W,N}
    double l2_error = 0.0;     ///< ‖ũ_N − u₀‖_{L²(𝕋ᵈ)}
    double max_error = 0.0;    ///< max_x |u_N(x) − u₀(x/N)|
    double l2_mass = 0.0;
    double w_energy = 0.0;
    int iterations = 0;
};

struct ReferenceOptions {
    enum class Kind { Auto, Analytic, FineGrid };
    Kind kind = Kind::Auto;
    int fine_factor = 4;
};

struct StudyConfig {
    CoefficientSequenceSpec spec;
    WProduct w = WProduct::uniform(1);
    FourierSeries f0;                 ///< L² part of the right-hand side
    std::vector<FourierSeries> fk;    ///< optional flux parts, one per axis
    double lambda = 1.0;
    std::vector<int> n_list;
    ReferenceOptions reference;
    SolverOptions solver;
    int jobs = 1;
};

struct HomogenizationResult {
    std::vector<HomogenizationRecord> records;
    HomogenizedMatrix predicted;
    std::string reference;          ///< "analytic" or "fine-grid N=..."
    double reference_l2_mass = 0.0; ///< λ∫u₀²
    double reference_w_energy = 0.0; ///< Σ_k ∫ a_kk (∂_{W_k}u₀)² d(xᵏ⊗W_k)
};

namespace detail {

inline DualFunctional discretize_study_rhs(const StudyConfig& c, const GridPtr& grid)
{
    DualFunctional f = DualFunctional::zero(grid);
    const auto series = c.f0;
    f.f0 = discretize_l2_exact([&series](std::span<const double> lo, std::span<const double> hi) {
        return series.cell_integral(lo, hi);
    }, grid);
    for (std::size_t k = 0; k < c.fk.size(); ++k)
        f.fk[k] = discretize_weighted(c.fk[k].as_function(), static_cast<int>(k), grid);
    return f;
}

inline double affine_slope(const WCoordinate& w)
{
    return w.is_affine() ? w.segments().front().slope : 0.0;
}

} // namespace detail

/// Fourier-mode solution of λu₀ − ∇A∇_W u₀ = f for constant A and affine W.
inline FourierSeries analytic_reference(const FourierSeries& f, const std::vector<double>& a, const WProduct& w,
                                        double lambda)
{
    FourierSeries u;
    u.offset = f.offset / lambda;
    for (const auto& t : f.terms) {
        double denom = lambda;
        for (std::size_t k = 0; k < t.mode.size(); ++k) {
            const double s = detail::affine_slope(w[static_cast<int>(k)]);
            const double wk = 2.0 * std::numbers::pi * t.mode[k];
            denom += a[k] * wk * wk / s;
        }
        auto term = t;
        term.amplitude = t.amplitude / denom;
        u.terms.push_back(term);
    }
    return u;
}

inline HomogenizationResult run_h_convergence_study(const StudyConfig& c)
{
    const int d = c.w.dim();
    if (!(c.lambda > 0.0)) throw InvalidArgument("convergence study: lambda must be > 0");
    if (c.n_list.empty()) throw InvalidArgument("convergence study: empty N list");
    for (std::size_t i = 1; i < c.n_list.size(); ++i)
        if (c.n_list[i] <= c.n_list[i - 1]) throw InvalidArgument("convergence study: N list must be strictly increasing");
    c.f0.check_dim(d);
    if (c.fk.size() > static_cast<std::size_t>(d)) throw InvalidArgument("convergence study: too many flux components");
    for (const auto& fk : c.fk) fk.check_dim(d);

    HomogenizationResult result;
    result.predicted = predicted_homogenized_matrix(c.spec, c.w);

    bool affine = true;
    for (int k = 0; k < d; ++k) affine = affine && c.w[k].is_affine();
    const bool analytic_possible = affine && result.predicted.is_constant() && c.fk.empty();
    auto kind = c.reference.kind;
    if (kind == ReferenceOptions::Kind::Auto)
        kind = analytic_possible ? ReferenceOptions::Kind::Analytic : ReferenceOptions::Kind::FineGrid;
    if (kind == ReferenceOptions::Kind::Analytic && !analytic_possible)
        throw InvalidArgument("convergence study: analytic reference needs constant homogenized A, affine W and no flux terms");

    // reference solution
    std::optional<FourierSeries> u0;
    std::optional<MeshFunction> u_ref;
    if (kind == ReferenceOptions::Kind::Analytic) {
        std::vector<double> a;
        for (const auto& ax : result.predicted.axes) a.push_back(*ax.constant);
        u0 = analytic_reference(c.f0, a, c.w, c.lambda);
        const int m = 4 * (u0->max_mode() + 1);
        const auto& u = *u0;
        result.reference_l2_mass = c.lambda * trig_mean([&u](std::span<const double> y) { return u(y) * u(y); }, d, m);
        double e = 0.0;
        for (int k = 0; k < d; ++k) {
            const double s = detail::affine_slope(c.w[k]);
            e += a[static_cast<std::size_t>(k)] / s *
                 trig_mean([&u, k](std::span<const double> y) { return u.derivative(y, k) * u.derivative(y, k); }, d, m);
        }
        result.reference_w_energy = e;
        result.reference = "analytic";
    } else {
        if (c.reference.fine_factor < 1) throw InvalidArgument("convergence study: fine_factor must be >= 1");
        const int nref = c.reference.fine_factor * c.n_list.back();
        for (int n : c.n_list)
            if (nref % n != 0)
                throw InvalidArgument("convergence study: N=" + std::to_string(n) + " does not divide the reference size " +
                                      std::to_string(nref));
        const auto gref = make_grid(nref, c.w);
        const auto ahom = build_homogenized_field(result.predicted, gref);
        u_ref = solve_resolvent(ahom, c.lambda, dual_rhs(detail::discretize_study_rhs(c, gref)), c.solver);
        const auto e = energy_pair(ahom, *u_ref, c.lambda);
        result.reference_l2_mass = e.l2_mass;
        result.reference_w_energy = e.w_energy;
        result.reference = "fine-grid N=" + std::to_string(nref);
    }

    result.records.resize(c.n_list.size());
    parallel_for(c.n_list.size(), c.jobs, [&](std::size_t li) {
        const int n = c.n_list[li];
        const auto grid = make_grid(n, c.w);
        const auto a = build_field(c.spec, grid);
        SolveStats stats;
        MeshFunction u;
        try {
            u = solve_resolvent(a, c.lambda, dual_rhs(detail::discretize_study_rhs(c, grid)), c.solver, &stats);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("N=" + std::to_string(n) + ": " + e.what());
        }
        HomogenizationRecord r;
        r.n = n;
        r.iterations = stats.iterations;
        r.sobolev_norm = norm_sobolev(u);
        const auto e = energy_pair(a, u, c.lambda);
        r.l2_mass = e.l2_mass;
        r.w_energy = e.w_energy;
        const double cellvol = std::pow(static_cast<double>(n), -d);
        if (u0) {
            // ‖ũ_N − u₀‖² = Σ_x [u_N² |Q| − 2 u_N ∫_Q u₀] + ∫ u₀², all exact
            double s = result.reference_l2_mass / c.lambda;
            std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
            for (std::size_t i = 0; i < grid->size(); ++i) {
                for (int k = 0; k < d; ++k) {
                    lo[static_cast<std::size_t>(k)] = static_cast<double>(grid->coord(i, k)) / n;
                    hi[static_cast<std::size_t>(k)] = static_cast<double>(grid->coord(i, k) + 1) / n;
                }
                s += u[i] * u[i] * cellvol - 2.0 * u[i] * u0->cell_integral(lo, hi);
                r.max_error = std::max(r.max_error, std::abs(u[i] - (*u0)(lo)));
            }
            r.l2_error = std::sqrt(std::max(0.0, s));
        } else {
            // fine cells nest inside coarse ones; both interpolants are piecewise constant
            const auto& gref = *u_ref->grid();
            const int ratio = gref.n() / n;
            double s = 0.0;
            std::vector<int> x(static_cast<std::size_t>(d));
            for (std::size_t j = 0; j < gref.size(); ++j) {
                for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = gref.coord(j, k) / ratio;
                const auto i = grid->index_of(x);
                const double diff = u[i] - (*u_ref)[j];
                s += diff * diff;
                bool node = true;
                for (int k = 0; k < d; ++k) node = node && gref.coord(j, k) % ratio == 0;
                if (node) r.max_error = std::max(r.max_error, std::abs(diff));
            }
            r.l2_error = std::sqrt(s / static_cast<double>(gref.size()));
        }
        result.records[li] = r;
    });
    return result;
}

// ---------------------------------------------------------------------------
// Effective-coefficient fits

/// Isotropic effective coefficient read off the Fourier coefficient of u_N
/// along the first term of f (affine W, f0 a trigonometric polynomial).
inline double fit_effective_coefficient_fourier(const MeshFunction& u, const FourierSeries& f, double lambda)
{
    if (f.terms.empty()) throw InvalidArgument("Fourier fit: right-hand side has no oscillating term");
    const auto& g = *u.grid();
    const auto& t = f.terms.front();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double phi = FourierSeries::basis(t, g.point(i));
        num += u[i] * phi;
        den += phi * phi;
    }
    const double c = num / den / t.amplitude;
    double q = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
        const double s = detail::affine_slope(g.w()[k]);
        if (s == 0.0) throw InvalidArgument("Fourier fit: W must be affine");
        const double wk = 2.0 * std::numbers::pi * t.mode[static_cast<std::size_t>(k)];
        q += wk * wk / s;
    }
    return (1.0 / c - lambda) / q;
}

/// Least-squares fit of a constant off-slab coefficient: the field that equals
/// `on_slab` on closed slab cells and a elsewhere whose solution is closest to
/// u in ⟨·,·⟩_N. Searched in [lo, hi] by Brent's method.
inline double fit_offslab_coefficient(const MeshFunction& u, const MeshFunction& rhs, double lambda, double on_slab,
                                      double lo, double hi, const SolverOptions& opt = {})
{
    const auto& grid = u.grid();
    auto misfit = [&](double a) {
        HomogenizedMatrix h;
        h.theta = std::max({hi, 1.0 / lo, on_slab, 1.0 / on_slab});
        for (int k = 0; k < grid->dim(); ++k) {
            HomogenizedAxis ax;
            ax.constant = a;
            ax.slab = grid->w()[k].singular_support();
            ax.on_slab = on_slab;
            h.axes.push_back(ax);
        }
        const auto v = solve_resolvent(build_homogenized_field(h, grid), lambda, rhs, opt);
        const auto diff = u - v;
        return inner_l2(diff, diff);
    };
    const auto r = boost::math::tools::brent_find_minima(misfit, lo, hi, 26);
    return r.first;
}

struct RandomFitResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> fitted;  ///< per seed
    double mean = 0.0;
    double sd = 0.0;             ///< sample standard deviation across seeds
    double stderr_mean = 0.0;    ///< sd / √M
    double predicted_off = 0.0;  ///< 1/E[1/b]
    double predicted_on = 0.0;   ///< E[b]
};

/// Fits the off-slab coefficient of axis-0 random fields at one N for several seeds.
inline RandomFitResult random_effective_coefficient(const CoefficientSequenceSpec& spec, const WProduct& w,
                                                    const FourierSeries& f, double lambda, int n,
                                                    const std::vector<std::uint64_t>& seeds, int jobs = 1,
                                                    const SolverOptions& opt = {})
{
    if (spec.kind != CoefficientSequenceSpec::Kind::RandomErgodic)
        throw InvalidArgument("random fit: spec must be random_ergodic");
    if (seeds.size() < 2) throw InvalidArgument("random fit: need at least two seeds");
    const auto grid = make_grid(n, w);
    StudyConfig c;
    c.f0 = f;
    const auto rhs = dual_rhs(detail::discretize_study_rhs(c, grid));
    const auto& law = spec.random.law(0);
    RandomFitResult out;
    out.seeds = seeds;
    out.predicted_off = 1.0 / law.mean_reciprocal();
    out.predicted_on = law.mean();
    out.fitted.resize(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        auto s = spec;
        s.random.seed = seeds[i];
        const auto a = build_field(s, grid);
        const auto u = solve_resolvent(a, lambda, rhs, opt);
        out.fitted[i] = fit_offslab_coefficient(u, rhs, lambda, out.predicted_on, law.min(), law.max(), opt);
    });
    const double m = static_cast<double>(seeds.size());
    out.mean = std::accumulate(out.fitted.begin(), out.fitted.end(), 0.0) / m;
    double ss = 0.0;
    for (double v : out.fitted) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (m - 1.0));
    out.stderr_mean = out.sd / std::sqrt(m);
    return out;
}

// ---------------------------------------------------------------------------
// Weak-convergence diagnostics

/// N^{−d} Σ_x φ(x/N) v(x) for every dictionary entry.
inline std::vector<double> dictionary_pairings(const MeshFunction& v, const std::vector<NamedFunction>& dict)
{
    const auto& g = *v.grid();
    std::vector<double> out;
    for (const auto& phi : dict) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += phi.f(g.point(i)) * v[i];
        out.push_back(s / static_cast<double>(g.size()));
    }
    return out;
}

/// Averages of the flux a_kk ∂ᴺ_{W_k} u over the cells of a coarse M-grid,
/// weighted by the W_k cell measure: Σ a (u(x+e) − u(x)) / Σ ΔW_k.
inline std::vector<double> coarse_flux_average(const DiagonalField& a, const MeshFunction& u, int k, int m)
{
    const auto& g = *u.grid();
    if (g.n() % m != 0) throw InvalidArgument("coarse_flux_average: M must divide N");
    if (!same_grid(a.grid(), u.grid())) throw GridMismatch("coarse_flux_average");
    const int ratio = g.n() / m;
    std::size_t coarse = 1;
    for (int j = 0; j < g.dim(); ++j) coarse *= static_cast<std::size_t>(m);
    std::vector<double> num(coarse, 0.0), den(coarse, 0.0);
    const auto du = w_diff(u, k);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t ci = 0, st = 1;
        for (int j = 0; j < g.dim(); ++j) {
            ci += static_cast<std::size_t>(g.coord(i, j) / ratio) * st;
            st *= static_cast<std::size_t>(m);
        }
        const double dw = g.cell_weight(k, g.coord(i, k));
        num[ci] += a(k, i) * du[i] * dw;
        den[ci] += dw;
    }
    for (std::size_t c = 0; c < coarse; ++c) num[c] /= den[c];
    return num;
}

} // namespace whomog
