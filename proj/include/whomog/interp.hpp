#pragma once

// Interpolations of mesh functions (piecewise constant, W-multilinear, partial),
// the discretization maps from functions to mesh functions, and the step-function
// construction of W-test functions.

#include "whomog/elliptic.hpp"
#include "whomog/error.hpp"
#include "whomog/mesh.hpp"
#include "whomog/quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace whomog {

struct InterpolantKind {
    enum class Type { PiecewiseConstant, WFull, WPartial };
    Type type = Type::WFull;
    int m = -1; ///< omitted axis for WPartial

    static InterpolantKind piecewise_constant() { return {Type::PiecewiseConstant, -1}; }
    static InterpolantKind w_full() { return {Type::WFull, -1}; }
    static InterpolantKind w_partial(int m) { return {Type::WPartial, m}; }
};

/// Cell Q_N(x) holding y and the offsets τ_k = W_k(y_k) − W_k(x_k/N).
struct CellLocation {
    std::vector<int> x;
    std::vector<double> tau;
    std::size_t index = 0;
};

inline int locate_axis(double y, int n)
{
    int c = static_cast<int>(std::floor(y * n));
    if (static_cast<double>(c) / n > y) --c;
    else if (static_cast<double>(c + 1) / n <= y) ++c;
    return std::clamp(c, 0, n - 1);
}

inline CellLocation locate(const TorusGrid& g, std::span<const double> y)
{
    if (static_cast<int>(y.size()) != g.dim()) throw InvalidArgument("locate: point dimension mismatch");
    CellLocation loc;
    loc.x.resize(y.size());
    loc.tau.resize(y.size());
    for (int k = 0; k < g.dim(); ++k) {
        double yk = y[static_cast<std::size_t>(k)];
        yk -= std::floor(yk);
        if (yk >= 1.0) yk = 0.0;
        const int c = locate_axis(yk, g.n());
        loc.x[static_cast<std::size_t>(k)] = c;
        const auto& w = g.w()[k];
        loc.tau[static_cast<std::size_t>(k)] = std::max(0.0, w.eval(yk) - w.eval(static_cast<double>(c) / g.n()));
    }
    loc.index = g.index_of(loc.x);
    return loc;
}

/// Mixed W-difference Π_{k∈S} ∂ᴺ_{W_k} u at the site `base`, S given as a bitmask.
inline double mixed_w_difference(const MeshFunction& u, std::size_t base, unsigned mask)
{
    const auto& g = *u.grid();
    const int d = g.dim();
    double s = 0.0;
    // Σ_{T⊆S} (−1)^{|S|−|T|} u(x + e_T)
    for (unsigned t = mask;; t = (t - 1) & mask) {
        std::size_t idx = base;
        for (int k = 0; k < d; ++k)
            if (t & (1u << k)) idx = g.shift(idx, k, 1);
        const int sign = (std::popcount(mask) - std::popcount(t)) % 2 == 0 ? 1 : -1;
        s += sign * u[idx];
        if (t == 0) break;
    }
    double denom = 1.0;
    for (int k = 0; k < d; ++k)
        if (mask & (1u << k)) denom *= g.cell_weight(k, g.coord(base, k));
    return s / denom;
}

/// Coefficients c_S of the expansion Σ_S c_S Π_{k∈S} τ_k on the cell at `base`.
/// Subsets excluded by `kind` get coefficient 0.
inline std::vector<double> expansion_coefficients(const MeshFunction& u, std::size_t base, const InterpolantKind& kind)
{
    const int d = u.grid()->dim();
    const unsigned full = (1u << d);
    std::vector<double> c(full, 0.0);
    for (unsigned s = 0; s < full; ++s) {
        if (kind.type == InterpolantKind::Type::PiecewiseConstant && s != 0) continue;
        if (kind.type == InterpolantKind::Type::WPartial && (s & (1u << kind.m))) continue;
        c[s] = mixed_w_difference(u, base, s);
    }
    return c;
}

inline void check_kind(const TorusGrid& g, const InterpolantKind& kind)
{
    if (kind.type == InterpolantKind::Type::WPartial) g.check_axis(kind.m, "interpolate");
}

inline double interpolate(const MeshFunction& u, const InterpolantKind& kind, std::span<const double> y)
{
    const auto& g = *u.grid();
    check_kind(g, kind);
    const auto loc = locate(g, y);
    if (kind.type == InterpolantKind::Type::PiecewiseConstant) return u[loc.index];
    const auto c = expansion_coefficients(u, loc.index, kind);
    double s = 0.0;
    for (unsigned m = 0; m < c.size(); ++m) {
        if (c[m] == 0.0) continue;
        double p = c[m];
        for (int k = 0; k < g.dim(); ++k)
            if (m & (1u << k)) p *= loc.tau[static_cast<std::size_t>(k)];
        s += p;
    }
    return s;
}

/// ∂u*/∂W_m at y, i.e. the partial interpolation (omitting axis m) of ∂ᴺ_{W_m}u.
inline double w_derivative_of_interpolant(const MeshFunction& u, int m, std::span<const double> y)
{
    u.grid()->check_axis(m, "w_derivative_of_interpolant");
    return interpolate(w_diff(u, m), InterpolantKind::w_partial(m), y);
}

// ---------------------------------------------------------------------------
// Exact cell integrals of interpolants

namespace detail {

/// ∫_{[x/N,(x+1)/N)} τ(y)^p dy for p = 0, 1, 2, τ(y) = W(y) − W(x/N).
inline std::array<double, 3> tau_moments(const WCoordinate& w, int x, int n)
{
    const double a = static_cast<double>(x) / n;
    const double b = static_cast<double>(x + 1) / n;
    std::vector<double> cuts{a, b};
    for (const auto& s : w.segments())
        if (s.start > a && s.start < b) cuts.push_back(s.start);
    for (const auto& at : w.atoms())
        if (at.position > a && at.position < b) cuts.push_back(at.position);
    std::sort(cuts.begin(), cuts.end());
    const double w0 = w.eval(a);
    std::array<double, 3> m{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double l = cuts[i], r = cuts[i + 1];
        if (!(r > l)) continue;
        // τ is affine on [l, r): Simpson's rule is exact up to degree 3
        const double t0 = w.eval(l) - w0;
        const double t1 = w.eval_left(r) - w0;
        const double tm = 0.5 * (t0 + t1);
        const double h = r - l;
        m[0] += h;
        m[1] += h * tm;
        m[2] += h / 6.0 * (t0 * t0 + 4.0 * tm * tm + t1 * t1);
    }
    return m;
}

struct MomentTable {
    // moments[k][x][p]
    std::vector<std::vector<std::array<double, 3>>> moments;

    explicit MomentTable(const TorusGrid& g)
    {
        moments.resize(static_cast<std::size_t>(g.dim()));
        for (int k = 0; k < g.dim(); ++k)
            for (int x = 0; x < g.n(); ++x) moments[static_cast<std::size_t>(k)].push_back(tau_moments(g.w()[k], x, g.n()));
    }
};

/// ∫_{Q_N(x)} (Σ_S c_S Π τ)² dy, optionally with axis `stieltjes_axis` integrated
/// against dW_k over (x_k/N, (x_k+1)/N] instead of dy (only valid when the
/// expansion does not depend on that axis).
inline double cell_square_integral(const TorusGrid& g, const MomentTable& mt, std::size_t base,
                                   const std::vector<double>& c, int stieltjes_axis = -1)
{
    const int d = g.dim();
    double s = 0.0;
    for (unsigned a = 0; a < c.size(); ++a) {
        if (c[a] == 0.0) continue;
        for (unsigned b = 0; b < c.size(); ++b) {
            if (c[b] == 0.0) continue;
            double p = c[a] * c[b];
            for (int k = 0; k < d; ++k) {
                const int x = g.coord(base, k);
                if (k == stieltjes_axis) {
                    p *= g.cell_weight(k, x);
                    continue;
                }
                const int power = ((a >> k) & 1u) + ((b >> k) & 1u);
                p *= mt.moments[static_cast<std::size_t>(k)][static_cast<std::size_t>(x)][static_cast<std::size_t>(power)];
            }
            s += p;
        }
    }
    return s;
}

} // namespace detail

/// ‖u_kind‖_{L²(𝕋ᵈ)} by exact per-cell integration.
inline double interpolant_l2_norm(const MeshFunction& u, const InterpolantKind& kind)
{
    const auto& g = *u.grid();
    check_kind(g, kind);
    const detail::MomentTable mt(g);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        s += detail::cell_square_integral(g, mt, i, expansion_coefficients(u, i, kind));
    return std::sqrt(s);
}

/// ‖u_a − u_b‖_{L²(𝕋ᵈ)} for two interpolations of the same mesh function.
inline double interpolant_difference_l2(const MeshFunction& u, const InterpolantKind& a, const InterpolantKind& b)
{
    const auto& g = *u.grid();
    check_kind(g, a);
    check_kind(g, b);
    const detail::MomentTable mt(g);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto ca = expansion_coefficients(u, i, a);
        const auto cb = expansion_coefficients(u, i, b);
        for (std::size_t j = 0; j < ca.size(); ++j) ca[j] -= cb[j];
        s += detail::cell_square_integral(g, mt, i, ca);
    }
    return std::sqrt(s);
}

/// ‖u*‖_{H_{1,W}(𝕋ᵈ)}: L² part plus Σ_k ∫ (∂_{W_k}u*)² d(xᵏ⊗W_k).
inline double interpolant_h1w_norm(const MeshFunction& u)
{
    const auto& g = *u.grid();
    const detail::MomentTable mt(g);
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        s += detail::cell_square_integral(g, mt, i, expansion_coefficients(u, i, InterpolantKind::w_full()));
    for (int k = 0; k < g.dim(); ++k) {
        const auto dk = w_diff(u, k);
        for (std::size_t i = 0; i < g.size(); ++i)
            s += detail::cell_square_integral(g, mt, i, expansion_coefficients(dk, i, InterpolantKind::w_partial(k)), k);
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Discretizations

namespace detail {

inline void cell_box(const TorusGrid& g, std::size_t i, std::vector<double>& lo, std::vector<double>& hi)
{
    lo.resize(static_cast<std::size_t>(g.dim()));
    hi.resize(static_cast<std::size_t>(g.dim()));
    for (int k = 0; k < g.dim(); ++k) {
        const int c = g.coord(i, k);
        lo[static_cast<std::size_t>(k)] = static_cast<double>(c) / g.n();
        hi[static_cast<std::size_t>(k)] = static_cast<double>(c + 1) / g.n();
    }
}

} // namespace detail

/// f_N(x) = Nᵈ ∫_{Q_N(x)} f dy.
inline MeshFunction discretize_l2(const PointFunction& f, const GridPtr& grid, const QuadratureOptions& opt = {})
{
    MeshFunction out(grid);
    const double vol = std::pow(static_cast<double>(grid->n()), grid->dim());
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        detail::cell_box(*grid, i, lo, hi);
        out[i] = vol * integrate_box(f, lo, hi, opt);
    }
    return out;
}

/// Closed-form variant: `cell_integral(lo, hi)` returns ∫_{Π[lo,hi)} f dy.
using CellIntegral = std::function<double(std::span<const double>, std::span<const double>)>;

inline MeshFunction discretize_l2_exact(const CellIntegral& cell_integral, const GridPtr& grid)
{
    MeshFunction out(grid);
    const double vol = std::pow(static_cast<double>(grid->n()), grid->dim());
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        detail::cell_box(*grid, i, lo, hi);
        const double v = cell_integral(lo, hi);
        if (!std::isfinite(v)) throw QuadratureError("discretize_l2_exact: cell integral is not finite");
        out[i] = vol * v;
    }
    return out;
}

/// g_N(x) = N^{d−1} / ΔW_k(x_k) · ∫_{Q} g d(yᵏ⊗W_k), Stieltjes factor over (x_k/N, (x_k+1)/N].
inline MeshFunction discretize_weighted(const PointFunction& gfun, int k, const GridPtr& grid,
                                        const QuadratureOptions& opt = {})
{
    grid->check_axis(k, "discretize_weighted");
    MeshFunction out(grid);
    const double pre = std::pow(static_cast<double>(grid->n()), grid->dim() - 1);
    std::vector<double> lo, hi;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        detail::cell_box(*grid, i, lo, hi);
        const double integral = integrate_box_stieltjes(gfun, lo, hi, k, grid->w()[k], opt);
        out[i] = pre * integral / grid->cell_weight(k, grid->coord(i, k));
    }
    return out;
}

/// A continuous dual element: f0 ∈ L², f_k ∈ L²(xᵏ⊗W_k).
struct ContinuousFunctional {
    PointFunction f0;
    std::vector<PointFunction> fk; ///< empty entries mean zero
};

inline DualFunctional discretize_functional(const ContinuousFunctional& f, const GridPtr& grid,
                                            const QuadratureOptions& opt = {})
{
    if (f.fk.size() > static_cast<std::size_t>(grid->dim()))
        throw InvalidArgument("discretize_functional: more components than axes");
    DualFunctional out = DualFunctional::zero(grid);
    if (f.f0) out.f0 = discretize_l2(f.f0, grid, opt);
    for (std::size_t k = 0; k < f.fk.size(); ++k)
        if (f.fk[k]) out.fk[k] = discretize_weighted(f.fk[k], static_cast<int>(k), grid, opt);
    return out;
}

/// ‖f − f̃_N‖_{L²(𝕋ᵈ)} with f̃_N the piecewise-constant interpolant of u.
inline double piecewise_constant_error_l2(const PointFunction& f, const MeshFunction& u, const QuadratureOptions& opt = {})
{
    const auto& g = *u.grid();
    std::vector<double> lo, hi;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        detail::cell_box(g, i, lo, hi);
        const double ui = u[i];
        s += integrate_box([&](std::span<const double> y) { const double e = f(y) - ui; return e * e; }, lo, hi, opt);
    }
    return std::sqrt(s);
}

/// ‖g − g̃_N‖_{L²(xᵏ⊗W_k)} with Stieltjes cells along axis k.
inline double piecewise_constant_error_weighted(const PointFunction& gfun, const MeshFunction& u, int k,
                                                const QuadratureOptions& opt = {})
{
    const auto& g = *u.grid();
    g.check_axis(k, "piecewise_constant_error_weighted");
    std::vector<double> lo, hi;
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        detail::cell_box(g, i, lo, hi);
        const double ui = u[i];
        s += integrate_box_stieltjes([&](std::span<const double> y) { const double e = gfun(y) - ui; return e * e; }, lo,
                                     hi, k, g.w()[k], opt);
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Step-function W-test functions

/// G(x) = f(0) + ∫_{(0,x]} g dW with g constant on each (j/n, (j+1)/n].
class StepTestFunction {
public:
    StepTestFunction(const std::function<double(double)>& f, WCoordinate w, int n) : w_(std::move(w)), n_(n)
    {
        if (n < 1) throw InvalidArgument("approx_test_function: n must be >= 1");
        nodes_.resize(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) nodes_[static_cast<std::size_t>(j)] = f(static_cast<double>(j) / n);
        g_.resize(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            g_[static_cast<std::size_t>(j)] = (nodes_[static_cast<std::size_t>(j) + 1] - nodes_[static_cast<std::size_t>(j)]) /
                                             w_.cell_weight(j, n);
    }

    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] const std::vector<double>& slopes() const noexcept { return g_; }
    [[nodiscard]] const WCoordinate& w() const noexcept { return w_; }

    /// The step function g at x, with (j/n, (j+1)/n] cells.
    [[nodiscard]] double g(double x) const { return g_[static_cast<std::size_t>(cell_of(x).first)]; }

    [[nodiscard]] double operator()(double x) const
    {
        const auto [j, r] = cell_of(x);
        if (r == 0.0) return nodes_[0];
        const double left = static_cast<double>(j) / n_;
        return nodes_[static_cast<std::size_t>(j)] + g_[static_cast<std::size_t>(j)] * (w_.eval(r) - w_.eval(left));
    }

    /// ∫_{(0,1]} g dW.
    [[nodiscard]] double mean_derivative() const
    {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) s += g_[static_cast<std::size_t>(j)] * w_.cell_weight(j, n_);
        return s;
    }

private:
    /// Cell index J with r ∈ (J/n, (J+1)/n], r = x mod 1 (r = 0 reported as is).
    [[nodiscard]] std::pair<int, double> cell_of(double x) const
    {
        double r = x - std::floor(x);
        if (r >= 1.0) r = 0.0;
        if (r == 0.0) return {n_ - 1, 0.0};
        int j = static_cast<int>(std::ceil(r * n_)) - 1;
        if (static_cast<double>(j) / n_ >= r) --j;
        else if (static_cast<double>(j + 1) / n_ < r) ++j;
        return {std::clamp(j, 0, n_ - 1), r};
    }

    WCoordinate w_;
    int n_;
    std::vector<double> nodes_;
    std::vector<double> g_;
};

inline StepTestFunction approx_test_function(const std::function<double(double)>& f, const WCoordinate& w, int n)
{
    return {f, w, n};
}

// ---------------------------------------------------------------------------
// Test-function dictionary for weak-convergence checks

struct NamedFunction {
    std::string name;
    PointFunction f;
};

/// Constant 1, cos/sin(2π m y_k) for m = 1..modes on every axis, and two step
/// W-test functions along axis 0.
inline std::vector<NamedFunction> test_dictionary(const WProduct& w, int modes = 4, int step_cells = 8)
{
    using std::numbers::pi;
    std::vector<NamedFunction> out;
    out.push_back({"one", [](std::span<const double>) { return 1.0; }});
    for (int k = 0; k < w.dim(); ++k)
        for (int m = 1; m <= modes; ++m) {
            const auto ks = static_cast<std::size_t>(k);
            const std::string ax = std::to_string(k);
            out.push_back({"cos" + std::to_string(m) + "_x" + ax,
                           [ks, m](std::span<const double> y) { return std::cos(2.0 * pi * m * y[ks]); }});
            out.push_back({"sin" + std::to_string(m) + "_x" + ax,
                           [ks, m](std::span<const double> y) { return std::sin(2.0 * pi * m * y[ks]); }});
        }
    const auto s = std::make_shared<StepTestFunction>([](double x) { return std::sin(2.0 * pi * x); }, w[0], step_cells);
    const auto c = std::make_shared<StepTestFunction>([](double x) { return std::cos(2.0 * pi * x); }, w[0], step_cells);
    out.push_back({"step_sin_x0", [s](std::span<const double> y) { return (*s)(y[0]); }});
    out.push_back({"step_cos_x0", [c](std::span<const double> y) { return (*c)(y[0]); }});
    return out;
}

} // namespace whomog
