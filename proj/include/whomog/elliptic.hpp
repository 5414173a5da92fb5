#pragma once

// λu − ∇ᴺA∇ᴺ_W u = f on the discrete torus: operator application, the
// bilinear form, resolvent and Poisson solvers, and the discrete dual space.

#include "whomog/error.hpp"
#include "whomog/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace whomog {

inline MeshFunction apply_T_lambda(const DiagonalField& a, double lambda, const MeshFunction& u)
{
    if (!(lambda >= 0.0)) throw InvalidArgument("apply_T_lambda: lambda must be >= 0");
    MeshFunction out = divergence_form_apply(a, u);
    out *= -1.0;
    if (lambda != 0.0) out.axpy(lambda, u);
    return out;
}

/// λ⟨u,v⟩_N + N^{1−d} Σ_k Σ_x a_kk (∂ᴺ_{W_k}u)(∂ᴺ_{W_k}v) cell_weight.
inline double bilinear_form(const DiagonalField& a, double lambda, const MeshFunction& u, const MeshFunction& v)
{
    u.require_same(v, "bilinear_form");
    if (!same_grid(a.grid(), u.grid())) throw GridMismatch("bilinear_form");
    const auto& g = *u.grid();
    double s = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
        const auto du = w_diff(u, k);
        const auto dv = w_diff(v, k);
        const auto& ak = a.axis(k);
        for (std::size_t i = 0; i < g.size(); ++i) s += ak[i] * du[i] * dv[i] * g.cell_weight(k, g.coord(i, k));
    }
    s /= std::pow(static_cast<double>(g.n()), g.dim() - 1);
    return lambda * inner_l2(u, v) + s;
}

struct SolverOptions {
    enum class Method { Auto, ConjugateGradient, Dense };
    double rel_tol = 1e-10;
    int max_iter_factor = 50; ///< max iterations = factor · Nᵈ
    Method method = Method::Auto;
    std::size_t dense_limit = 4096; ///< Auto falls back to a dense solve up to this many sites
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
    bool dense = false;
};

namespace detail {

/// Edge conductances N a_kk(x) / ΔW_k(x) of −∇ᴺA∇ᴺ_W, one array per axis.
inline std::vector<std::vector<double>> edge_coefficients(const DiagonalField& a)
{
    const auto& g = *a.grid();
    std::vector<std::vector<double>> c(static_cast<std::size_t>(g.dim()), std::vector<double>(g.size()));
    for (int k = 0; k < g.dim(); ++k)
        for (std::size_t i = 0; i < g.size(); ++i)
            c[static_cast<std::size_t>(k)][i] = g.n() * a(k, i) / g.cell_weight(k, g.coord(i, k));
    return c;
}

/// y = diag(lambda) x − ∇ᴺA∇ᴺ_W x, using precomputed edge coefficients.
inline void apply_stencil(const TorusGrid& g, const std::vector<std::vector<double>>& c,
                          const std::vector<double>& lambda, const std::vector<double>& x, std::vector<double>& y)
{
    for (std::size_t i = 0; i < g.size(); ++i) y[i] = lambda[i] * x[i];
    for (int k = 0; k < g.dim(); ++k) {
        const auto& ck = c[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = g.shift(i, k, 1);
            const double flux = ck[i] * (x[j] - x[i]);
            y[i] -= flux;
            y[j] += flux;
        }
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void remove_mean(std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (auto& x : v) x -= m;
}

inline Eigen::MatrixXd assemble_dense(const TorusGrid& g, const std::vector<std::vector<double>>& c,
                                      const std::vector<double>& lambda)
{
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) k(i, i) = lambda[static_cast<std::size_t>(i)];
    for (int ax = 0; ax < g.dim(); ++ax)
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto j = static_cast<Eigen::Index>(g.shift(i, ax, 1));
            const auto ii = static_cast<Eigen::Index>(i);
            const double w = c[static_cast<std::size_t>(ax)][i];
            k(ii, ii) += w;
            k(j, j) += w;
            k(ii, j) -= w;
            k(j, ii) -= w;
        }
    return k;
}

inline std::vector<double> dense_solve(const TorusGrid& g, const std::vector<std::vector<double>>& c,
                                       const std::vector<double>& lambda, const std::vector<double>& f,
                                       bool singular)
{
    Eigen::MatrixXd k = assemble_dense(g, c, lambda);
    const auto n = k.rows();
    if (singular) k.array() += k.diagonal().mean() / static_cast<double>(n);
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(f.data(), n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    if (ldlt.info() != Eigen::Success) throw ConvergenceError("dense solve: factorization failed");
    Eigen::VectorXd u = ldlt.solve(rhs);
    std::vector<double> out(u.data(), u.data() + n);
    if (singular) remove_mean(out);
    return out;
}

/// Jacobi-preconditioned CG for diag(lambda) − ∇ᴺA∇ᴺ_W. With `singular`
/// the iteration stays in the mean-zero subspace.
inline std::optional<std::vector<double>> pcg(const TorusGrid& g, const std::vector<std::vector<double>>& c,
                                              const std::vector<double>& lambda, const std::vector<double>& f,
                                              bool singular, const SolverOptions& opt, SolveStats& stats,
                                              const std::vector<double>* guess = nullptr)
{
    const std::size_t n = g.size();
    std::vector<double> diag(lambda);
    for (int k = 0; k < g.dim(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const double w = c[static_cast<std::size_t>(k)][i];
            diag[i] += w;
            diag[g.shift(i, k, 1)] += w;
        }

    std::vector<double> x = guess ? *guess : std::vector<double>(n, 0.0);
    std::vector<double> r(n), z(n), p(n), q(n);
    apply_stencil(g, c, lambda, x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = f[i] - q[i];
    if (singular) remove_mean(r);

    const double fnorm = std::sqrt(dot(f, f));
    stats = {};
    if (fnorm == 0.0) return std::vector<double>(n, 0.0);
    const double target = opt.rel_tol * fnorm;

    auto precondition = [&] {
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        if (singular) remove_mean(z);
    };
    precondition();
    p = z;
    double rz = dot(r, z);
    const long max_iter = static_cast<long>(opt.max_iter_factor) * static_cast<long>(n);
    double rnorm = std::sqrt(dot(r, r));
    for (long it = 0; it < max_iter; ++it) {
        if (rnorm <= target) {
            stats.iterations = static_cast<int>(it);
            stats.relative_residual = rnorm / fnorm;
            return x;
        }
        apply_stencil(g, c, lambda, p, q);
        if (singular) remove_mean(q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break;
        const double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        // periodically recompute the true residual to stop drift
        if ((it + 1) % 200 == 0) {
            apply_stencil(g, c, lambda, x, q);
            for (std::size_t i = 0; i < n; ++i) r[i] = f[i] - q[i];
            if (singular) remove_mean(r);
        }
        rnorm = std::sqrt(dot(r, r));
        precondition();
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    stats.iterations = static_cast<int>(max_iter);
    stats.relative_residual = rnorm / fnorm;
    if (rnorm <= target) return x;
    return std::nullopt;
}

inline std::vector<double> solve_system(const DiagonalField& a, const std::vector<double>& lambda,
                                        const std::vector<double>& f, bool singular, const SolverOptions& opt,
                                        SolveStats& stats, const std::vector<double>* guess = nullptr)
{
    const auto& g = *a.grid();
    const auto c = edge_coefficients(a);
    if (opt.method == SolverOptions::Method::Dense) {
        stats = {0, 0.0, true};
        return dense_solve(g, c, lambda, f, singular);
    }
    auto x = pcg(g, c, lambda, f, singular, opt, stats, guess);
    if (x) return *x;
    if (opt.method == SolverOptions::Method::Auto && g.size() <= opt.dense_limit) {
        stats.dense = true;
        return dense_solve(g, c, lambda, f, singular);
    }
    throw ConvergenceError("conjugate gradients did not reach relative residual " + std::to_string(opt.rel_tol) +
                           " within " + std::to_string(stats.iterations) + " iterations (N=" +
                           std::to_string(g.n()) + ", residual " + std::to_string(stats.relative_residual) + ")");
}

} // namespace detail

/// Solves diag(lambda) u − ∇ᴺA∇ᴺ_W u = f for a strictly positive pointwise
/// lambda. Used by the implicit hydrodynamic stepper.
inline MeshFunction solve_pointwise_resolvent(const DiagonalField& a, const MeshFunction& lambda, const MeshFunction& f,
                                              const SolverOptions& opt = {}, const MeshFunction* guess = nullptr)
{
    if (!same_grid(a.grid(), f.grid()) || !same_grid(a.grid(), lambda.grid()))
        throw GridMismatch("solve_pointwise_resolvent");
    for (double l : lambda.values())
        if (!(l > 0.0)) throw InvalidArgument("solve_pointwise_resolvent: lambda must be > 0");
    SolveStats stats;
    const std::vector<double> lam(lambda.values().begin(), lambda.values().end());
    const std::vector<double> rhs(f.values().begin(), f.values().end());
    std::vector<double> g0;
    if (guess) g0.assign(guess->values().begin(), guess->values().end());
    return MeshFunction(f.grid(), detail::solve_system(a, lam, rhs, false, opt, stats, guess ? &g0 : nullptr));
}

inline MeshFunction solve_resolvent(const DiagonalField& a, double lambda, const MeshFunction& f,
                                    const SolverOptions& opt = {}, SolveStats* stats = nullptr)
{
    if (!(lambda > 0.0)) throw InvalidArgument("solve_resolvent: lambda must be > 0");
    if (!same_grid(a.grid(), f.grid())) throw GridMismatch("solve_resolvent");
    if (!f.all_finite()) throw InvalidArgument("solve_resolvent: right-hand side is not finite");
    SolveStats local;
    const std::vector<double> lam(f.size(), lambda);
    const std::vector<double> rhs(f.values().begin(), f.values().end());
    auto u = detail::solve_system(a, lam, rhs, false, opt, local);
    if (stats) *stats = local;
    return MeshFunction(f.grid(), std::move(u));
}

/// Mean-zero u with ∇ᴺA∇ᴺ_W u = f, i.e. apply_T_lambda(A, 0, u) = −f.
inline MeshFunction solve_poisson(const DiagonalField& a, const MeshFunction& f, const SolverOptions& opt = {},
                                  SolveStats* stats = nullptr)
{
    if (!same_grid(a.grid(), f.grid())) throw GridMismatch("solve_poisson");
    if (!f.all_finite()) throw InvalidArgument("solve_poisson: right-hand side is not finite");
    const double m = mean(f);
    const double fn = norm_l2(f);
    if (std::abs(m) > 1e-12 * fn)
        throw CompatibilityError("solve_poisson: right-hand side has mean " + std::to_string(m) +
                                 " and is not orthogonal to the constants");
    SolveStats local;
    const std::vector<double> lam(f.size(), 0.0);
    std::vector<double> rhs(f.values().begin(), f.values().end());
    for (auto& v : rhs) v = -(v - m);
    auto u = detail::solve_system(a, lam, rhs, true, opt, local);
    if (stats) *stats = local;
    return MeshFunction(f.grid(), std::move(u));
}

// ---------------------------------------------------------------------------
// Discrete dual space

/// F(v) = ⟨f0, v⟩_N + Σ_k ⟨f_k, ∂ᴺ_{W_k} v⟩_{W_k,N}.
struct DualFunctional {
    MeshFunction f0;
    std::vector<MeshFunction> fk;

    static DualFunctional zero(const GridPtr& grid)
    {
        return {MeshFunction(grid), std::vector<MeshFunction>(static_cast<std::size_t>(grid->dim()), MeshFunction(grid))};
    }

    void validate(const char* where) const
    {
        if (static_cast<int>(fk.size()) != f0.grid()->dim())
            throw InvalidArgument(std::string(where) + ": need one component per axis");
        for (const auto& f : fk) f0.require_same(f, where);
    }
};

inline double dual_apply(const DualFunctional& f, const MeshFunction& v)
{
    f.validate("dual_apply");
    f.f0.require_same(v, "dual_apply");
    double s = inner_l2(f.f0, v);
    for (int k = 0; k < v.grid()->dim(); ++k) s += inner_wk(f.fk[static_cast<std::size_t>(k)], w_diff(v, k), k);
    return s;
}

/// The mesh function r with ⟨r, v⟩_N = F(v) for all v.
inline MeshFunction dual_rhs(const DualFunctional& f)
{
    f.validate("dual_rhs");
    MeshFunction r = f.f0;
    for (int k = 0; k < r.grid()->dim(); ++k) r -= backward_diff(f.fk[static_cast<std::size_t>(k)], k);
    return r;
}

/// Riesz representative u (λ = 1, A = I) and its gradient.
inline DualFunctional dual_canonicalize(const DualFunctional& f, const SolverOptions& opt = {})
{
    const auto& grid = f.f0.grid();
    const auto identity = DiagonalField::constant(grid, 1.0);
    MeshFunction u = solve_resolvent(identity, 1.0, dual_rhs(f), opt);
    DualFunctional out{u, {}};
    for (int k = 0; k < grid->dim(); ++k) out.fk.push_back(w_diff(u, k));
    return out;
}

inline double dual_norm(const DualFunctional& f, const SolverOptions& opt = {})
{
    const auto c = dual_canonicalize(f, opt);
    return norm_sobolev(c.f0);
}

} // namespace whomog
