#pragma once

// Discrete torus (1/N)T_N^d, mesh functions, W-difference operators and the
// weighted inner products ⟨·,·⟩_N, ⟨·,·⟩_{W_k,N}, ⟨·,·⟩_{1,W,N}.
//
// Sites are stored row-major with axis 0 fastest. Periodic wrap is done with
// modular arithmetic; there are no ghost cells.

#include "whomog/error.hpp"
#include "whomog/w_measure.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace whomog {

class TorusGrid;
using GridPtr = std::shared_ptr<const TorusGrid>;

class TorusGrid {
public:
    TorusGrid(int n, WProduct w) : n_(n), w_(std::move(w))
    {
        if (n < 2) throw InvalidArgument("TorusGrid: N must be >= 2");
        const int d = w_.dim();
        stride_.resize(static_cast<std::size_t>(d));
        std::size_t s = 1;
        for (int k = 0; k < d; ++k) {
            stride_[static_cast<std::size_t>(k)] = s;
            s *= static_cast<std::size_t>(n);
        }
        size_ = s;
        weights_.resize(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            auto& wk = weights_[static_cast<std::size_t>(k)];
            wk.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) wk[static_cast<std::size_t>(i)] = w_[k].cell_weight(i, n);
        }
    }

    [[nodiscard]] int dim() const noexcept { return w_.dim(); }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] const WProduct& w() const noexcept { return w_; }
    [[nodiscard]] std::size_t stride(int k) const { return stride_.at(static_cast<std::size_t>(k)); }

    /// W_k((i+1)/N) - W_k(i/N) for the i-th cell along axis k.
    [[nodiscard]] double cell_weight(int k, int i) const
    {
        return weights_[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
    [[nodiscard]] const std::vector<double>& cell_weights(int k) const { return weights_.at(static_cast<std::size_t>(k)); }

    /// Coordinate of a site along axis k.
    [[nodiscard]] int coord(std::size_t index, int k) const
    {
        return static_cast<int>((index / stride_[static_cast<std::size_t>(k)]) % static_cast<std::size_t>(n_));
    }

    /// Site index shifted by `step` (any integer) along axis k, with wrap.
    [[nodiscard]] std::size_t shift(std::size_t index, int k, int step) const
    {
        const int c = coord(index, k);
        int m = (c + step) % n_;
        if (m < 0) m += n_;
        const auto st = stride_[static_cast<std::size_t>(k)];
        return index + static_cast<std::size_t>(m) * st - static_cast<std::size_t>(c) * st;
    }

    [[nodiscard]] std::vector<int> multi_index(std::size_t index) const
    {
        std::vector<int> x(static_cast<std::size_t>(dim()));
        for (int k = 0; k < dim(); ++k) x[static_cast<std::size_t>(k)] = coord(index, k);
        return x;
    }

    [[nodiscard]] std::size_t index_of(std::span<const int> x) const
    {
        if (static_cast<int>(x.size()) != dim()) throw InvalidArgument("TorusGrid::index_of: dimension mismatch");
        std::size_t idx = 0;
        for (int k = 0; k < dim(); ++k) {
            int c = x[static_cast<std::size_t>(k)] % n_;
            if (c < 0) c += n_;
            idx += static_cast<std::size_t>(c) * stride_[static_cast<std::size_t>(k)];
        }
        return idx;
    }

    /// The point x/N in [0,1)^d.
    [[nodiscard]] std::vector<double> point(std::size_t index) const
    {
        std::vector<double> p(static_cast<std::size_t>(dim()));
        for (int k = 0; k < dim(); ++k) p[static_cast<std::size_t>(k)] = static_cast<double>(coord(index, k)) / n_;
        return p;
    }

    void check_axis(int k, const char* where) const
    {
        if (k < 0 || k >= dim()) throw InvalidArgument(std::string(where) + ": axis out of range");
    }

    bool operator==(const TorusGrid& o) const { return n_ == o.n_ && w_ == o.w_; }

private:
    int n_;
    WProduct w_;
    std::size_t size_ = 0;
    std::vector<std::size_t> stride_;
    std::vector<std::vector<double>> weights_;
};

inline GridPtr make_grid(int n, WProduct w) { return std::make_shared<const TorusGrid>(n, std::move(w)); }
inline GridPtr make_grid(int d, int n, const WCoordinate& w = {}) { return make_grid(n, WProduct::uniform(d, w)); }

inline bool same_grid(const GridPtr& a, const GridPtr& b)
{
    return a == b || (a && b && *a == *b);
}

/// Real values on the sites of a torus grid.
class MeshFunction {
public:
    MeshFunction() = default;
    explicit MeshFunction(GridPtr grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_->size(), fill) {}
    MeshFunction(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values))
    {
        if (values_.size() != grid_->size())
            throw InvalidArgument("MeshFunction: value count does not match grid size");
    }

    /// u(x/N) = f(x/N).
    static MeshFunction sample(GridPtr grid, const std::function<double(std::span<const double>)>& f)
    {
        MeshFunction u(grid);
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const auto p = grid->point(i);
            u.values_[i] = f(p);
        }
        return u;
    }

    [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    MeshFunction& operator+=(const MeshFunction& o)
    {
        require_same(o, "MeshFunction::operator+=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    MeshFunction& operator-=(const MeshFunction& o)
    {
        require_same(o, "MeshFunction::operator-=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    MeshFunction& operator*=(double s)
    {
        for (auto& v : values_) v *= s;
        return *this;
    }
    /// this += s * o
    MeshFunction& axpy(double s, const MeshFunction& o)
    {
        require_same(o, "MeshFunction::axpy");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
        return *this;
    }

    friend MeshFunction operator+(MeshFunction a, const MeshFunction& b) { return a += b; }
    friend MeshFunction operator-(MeshFunction a, const MeshFunction& b) { return a -= b; }
    friend MeshFunction operator*(double s, MeshFunction a) { return a *= s; }

    [[nodiscard]] bool all_finite() const
    {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_same(const MeshFunction& o, const char* where) const
    {
        if (!same_grid(grid_, o.grid_)) throw GridMismatch(where);
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Diagonal coefficient field a_kk, one value per directed edge (x -> x + e_k),
/// sampled at the base site x.
class DiagonalField {
public:
    DiagonalField(GridPtr grid, std::vector<std::vector<double>> coeffs, double theta)
        : grid_(std::move(grid)), coeffs_(std::move(coeffs)), theta_(theta)
    {
        if (!(theta > 0.0)) throw InvalidArgument("DiagonalField: theta must be > 0");
        if (static_cast<int>(coeffs_.size()) != grid_->dim())
            throw InvalidArgument("DiagonalField: need one coefficient array per axis");
        const double lo = 1.0 / theta_, hi = theta_;
        // relative slack absorbs rounding in theta = 1/a round trips
        const double slack = 1e-12;
        for (const auto& ak : coeffs_) {
            if (ak.size() != grid_->size()) throw InvalidArgument("DiagonalField: coefficient array has wrong length");
            for (double a : ak)
                if (!(a >= lo * (1.0 - slack) && a <= hi * (1.0 + slack)))
                    throw EllipticityError("DiagonalField: coefficient " + std::to_string(a) +
                                           " outside [1/theta, theta] with theta = " + std::to_string(theta_));
        }
    }

    /// a_kk ≡ c on every axis; theta defaults to max(c, 1/c).
    static DiagonalField constant(GridPtr grid, double c, double theta = 0.0)
    {
        if (theta <= 0.0) theta = std::max(c, 1.0 / c);
        const auto d = static_cast<std::size_t>(grid->dim());
        std::vector<std::vector<double>> coeffs(d, std::vector<double>(grid->size(), c));
        return DiagonalField(std::move(grid), std::move(coeffs), theta);
    }

    [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
    [[nodiscard]] double theta() const noexcept { return theta_; }
    [[nodiscard]] double operator()(int k, std::size_t index) const
    {
        return coeffs_[static_cast<std::size_t>(k)][index];
    }
    [[nodiscard]] const std::vector<double>& axis(int k) const { return coeffs_.at(static_cast<std::size_t>(k)); }

private:
    GridPtr grid_;
    std::vector<std::vector<double>> coeffs_;
    double theta_;
};

// ---------------------------------------------------------------------------
// Difference operators

/// N[u(x+e_k) - u(x)].
inline MeshFunction forward_diff(const MeshFunction& u, int k)
{
    const auto& g = *u.grid();
    g.check_axis(k, "forward_diff");
    MeshFunction out(u.grid());
    const double n = g.n();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = n * (u[g.shift(i, k, 1)] - u[i]);
    return out;
}

/// N[u(x) - u(x-e_k)].
inline MeshFunction backward_diff(const MeshFunction& u, int k)
{
    const auto& g = *u.grid();
    g.check_axis(k, "backward_diff");
    MeshFunction out(u.grid());
    const double n = g.n();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = n * (u[i] - u[g.shift(i, k, -1)]);
    return out;
}

/// [u(x+e_k) - u(x)] / [W_k((x_k+1)/N) - W_k(x_k/N)].
inline MeshFunction w_diff(const MeshFunction& u, int k)
{
    const auto& g = *u.grid();
    g.check_axis(k, "w_diff");
    MeshFunction out(u.grid());
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = (u[g.shift(i, k, 1)] - u[i]) / g.cell_weight(k, g.coord(i, k));
    return out;
}

/// [u(x) - u(x-e_k)] over the forward increment at x, as used in the
/// summation-by-parts step of the interpolation estimates.
inline MeshFunction backward_w_diff(const MeshFunction& u, int k)
{
    const auto& g = *u.grid();
    g.check_axis(k, "backward_w_diff");
    MeshFunction out(u.grid());
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = (u[i] - u[g.shift(i, k, -1)]) / g.cell_weight(k, g.coord(i, k));
    return out;
}

// ---------------------------------------------------------------------------
// Inner products and norms

inline double inner_l2(const MeshFunction& u, const MeshFunction& v)
{
    u.require_same(v, "inner_l2");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s / static_cast<double>(u.size());
}

inline double inner_wk(const MeshFunction& u, const MeshFunction& v, int k)
{
    u.require_same(v, "inner_wk");
    const auto& g = *u.grid();
    g.check_axis(k, "inner_wk");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i] * g.cell_weight(k, g.coord(i, k));
    return s / std::pow(static_cast<double>(g.n()), g.dim() - 1);
}

inline double inner_sobolev(const MeshFunction& u, const MeshFunction& v)
{
    u.require_same(v, "inner_sobolev");
    double s = inner_l2(u, v);
    for (int k = 0; k < u.grid()->dim(); ++k) s += inner_wk(w_diff(u, k), w_diff(v, k), k);
    return s;
}

inline double norm_l2(const MeshFunction& u) { return std::sqrt(inner_l2(u, u)); }
inline double norm_wk(const MeshFunction& u, int k) { return std::sqrt(inner_wk(u, u, k)); }
inline double norm_sobolev(const MeshFunction& u) { return std::sqrt(inner_sobolev(u, u)); }

/// (Σ_k ‖∂ᴺ_{W_k} u‖²_{W_k,N})^{1/2}
inline double norm_w_gradient(const MeshFunction& u)
{
    double s = 0.0;
    for (int k = 0; k < u.grid()->dim(); ++k) {
        const auto dk = w_diff(u, k);
        s += inner_wk(dk, dk, k);
    }
    return std::sqrt(s);
}

inline double mean(const MeshFunction& u)
{
    return std::accumulate(u.values().begin(), u.values().end(), 0.0) / static_cast<double>(u.size());
}

inline MeshFunction mean_zero_project(const MeshFunction& u)
{
    MeshFunction out = u;
    const double m = mean(u);
    for (auto& v : out.values()) v -= m;
    return out;
}

inline double max_abs(const MeshFunction& u)
{
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
}

// ---------------------------------------------------------------------------

/// Σ_k N[g_k(x) - g_k(x-e_k)] with g_k = a_kk ∂ᴺ_{W_k} u.
///
/// The outer difference is the negative adjoint of the forward W-difference,
/// which is what makes ⟨∇ᴺA∇ᴺ_W u, v⟩_N = -Σ_k ⟨a_kk ∂ᴺ_{W_k}u, ∂ᴺ_{W_k}v⟩_{W_k,N}
/// hold exactly and matches the random-walk generator of the exclusion process.
inline MeshFunction divergence_form_apply(const DiagonalField& a, const MeshFunction& u)
{
    if (!same_grid(a.grid(), u.grid())) throw GridMismatch("divergence_form_apply");
    const auto& g = *u.grid();
    const double n = g.n();
    MeshFunction out(u.grid());
    std::vector<double> flux(g.size());
    for (int k = 0; k < g.dim(); ++k) {
        const auto& ak = a.axis(k);
        const auto& wk = g.cell_weights(k);
        for (std::size_t i = 0; i < g.size(); ++i)
            flux[i] = ak[i] * (u[g.shift(i, k, 1)] - u[i]) / wk[static_cast<std::size_t>(g.coord(i, k))];
        for (std::size_t i = 0; i < g.size(); ++i) out[i] += n * (flux[i] - flux[g.shift(i, k, -1)]);
    }
    return out;
}

} // namespace whomog
