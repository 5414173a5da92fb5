#pragma once

// Exclusion process with conductances in diffusive scaling, its kinetic Monte
// Carlo simulation, and the discrete hydrodynamic equation ∂_t ρ = ∇ᴺA∇ᴺ_W Φ(ρ).

#include "whomog/elliptic.hpp"
#include "whomog/error.hpp"
#include "whomog/homogenize.hpp"
#include "whomog/interp.hpp"
#include "whomog/mesh.hpp"
#include "whomog/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace whomog {

/// η ∈ {0,1}^{𝕋ᴺ_d} with a cached particle count.
class OccupancyConfig {
public:
    OccupancyConfig() = default;
    OccupancyConfig(GridPtr grid, std::vector<std::uint8_t> eta) : grid_(std::move(grid)), eta_(std::move(eta))
    {
        if (eta_.size() != grid_->size()) throw InvalidArgument("OccupancyConfig: wrong number of sites");
        for (auto v : eta_) {
            if (v > 1) throw InvalidArgument("OccupancyConfig: occupations must be 0 or 1");
            count_ += v;
        }
    }

    [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t particle_count() const noexcept { return count_; }
    [[nodiscard]] int operator[](std::size_t i) const { return eta_[i]; }
    [[nodiscard]] const std::vector<std::uint8_t>& eta() const noexcept { return eta_; }

    /// σ^{x,y}η; the count is unchanged.
    void swap_sites(std::size_t x, std::size_t y) { std::swap(eta_[x], eta_[y]); }

private:
    GridPtr grid_;
    std::vector<std::uint8_t> eta_;
    std::size_t count_ = 0;
};

/// Jump rates N² ξ_{x,x+e_j} c_{x,x+e_j}(η) of the gradient exclusion process.
///
/// c = 1 + b{η(x−e) + η(x+2e)} and, when `b3` is non-zero, the cubic
/// correction b3{η(x−2e)η(x−e) + η(x−e)η(x+2e) + η(x+2e)η(x+3e)}. The
/// corresponding flux function is Φ(α) = α + bα² + b3α³.
class RateModel {
public:
    RateModel(DiagonalField a, double b, double b3 = 0.0) : a_(std::move(a)), b_(b), b3_(b3)
    {
        if (!(b > -0.5)) throw InvalidArgument("RateModel: b must be > -1/2");
        // every c-rate must be strictly positive over all neighbour configurations
        for (int m = 0; m < 16; ++m) {
            const int l2 = m & 1, l1 = (m >> 1) & 1, r2 = (m >> 2) & 1, r3 = (m >> 3) & 1;
            if (!(c_value(l2, l1, r2, r3) > 0.0))
                throw InvalidArgument("RateModel: rates are not strictly positive for these b, b3");
        }
        if (!(phi_prime(0.0) > 0.0 && phi_prime(1.0) > 0.0)) throw InvalidArgument("RateModel: Phi is not increasing");
        const auto& g = *a_.grid();
        xi_.assign(static_cast<std::size_t>(g.dim()), std::vector<double>(g.size()));
        for (int k = 0; k < g.dim(); ++k)
            for (std::size_t i = 0; i < g.size(); ++i)
                xi_[static_cast<std::size_t>(k)][i] = a_(k, i) / (g.n() * g.cell_weight(k, g.coord(i, k)));
    }

    [[nodiscard]] const GridPtr& grid() const noexcept { return a_.grid(); }
    [[nodiscard]] const DiagonalField& field() const noexcept { return a_; }
    [[nodiscard]] double b() const noexcept { return b_; }
    [[nodiscard]] double b3() const noexcept { return b3_; }
    [[nodiscard]] bool cubic() const noexcept { return b3_ != 0.0; }
    /// Largest |offset| read by c along the bond axis.
    [[nodiscard]] int reach() const noexcept { return cubic() ? 3 : 2; }

    /// ξ_{x,x+e_k} = a_k(x) / (N ΔW_k(x_k)).
    [[nodiscard]] double conductance(std::size_t x, int k) const
    {
        check_bond(x, k);
        return xi_[static_cast<std::size_t>(k)][x];
    }

    [[nodiscard]] double c_rate(const OccupancyConfig& eta, std::size_t x, int k) const
    {
        const auto& g = *grid();
        const int l1 = eta[g.shift(x, k, -1)], r2 = eta[g.shift(x, k, 2)];
        if (!cubic()) return 1.0 + b_ * (l1 + r2);
        return c_value(eta[g.shift(x, k, -2)], l1, r2, eta[g.shift(x, k, 3)]);
    }

    /// N² ξ c for the bond (x, x+e_k), whether or not the swap changes η.
    [[nodiscard]] double swap_rate(const OccupancyConfig& eta, std::size_t x, int k) const
    {
        check_bond(x, k);
        const double n = grid()->n();
        return n * n * xi_[static_cast<std::size_t>(k)][x] * c_rate(eta, x, k);
    }

    [[nodiscard]] double phi(double alpha) const { return alpha + b_ * alpha * alpha + b3_ * alpha * alpha * alpha; }
    [[nodiscard]] double phi_prime(double alpha) const { return 1.0 + 2.0 * b_ * alpha + 3.0 * b3_ * alpha * alpha; }

    /// max of Φ' over [0, 1].
    [[nodiscard]] double phi_prime_max() const
    {
        double m = std::max(phi_prime(0.0), phi_prime(1.0));
        if (b3_ != 0.0) {
            const double v = -b_ / (3.0 * b3_);
            if (v > 0.0 && v < 1.0) m = std::max(m, phi_prime(v));
        }
        return m;
    }

    void check_bond(std::size_t x, int k) const
    {
        grid()->check_axis(k, "RateModel");
        if (x >= grid()->size()) throw InvalidArgument("RateModel: site index out of range");
    }

private:
    [[nodiscard]] double c_value(int l2, int l1, int r2, int r3) const
    {
        return 1.0 + b_ * (l1 + r2) + b3_ * (l2 * l1 + l1 * r2 + r2 * r3);
    }

    DiagonalField a_;
    double b_;
    double b3_;
    std::vector<std::vector<double>> xi_;
};

inline double conductance(const RateModel& m, std::size_t x, int k) { return m.conductance(x, k); }
inline double swap_rate(const RateModel& m, const OccupancyConfig& eta, std::size_t x, int k)
{
    return m.swap_rate(eta, x, k);
}

/// Independent sites with P(η(x) = 1) = ρ₀(x/N).
inline OccupancyConfig sample_initial(const PointFunction& rho0, const GridPtr& grid, std::uint64_t seed,
                                      std::uint64_t stream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x1u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> eta(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double p = rho0(grid->point(i));
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sample_initial: profile value outside [0,1]");
        eta[i] = u(rng) < p ? 1 : 0;
    }
    return {grid, std::move(eta)};
}

inline double empirical_pairing(const OccupancyConfig& eta, const MeshFunction& h)
{
    if (!same_grid(eta.grid(), h.grid())) throw GridMismatch("empirical_pairing");
    double s = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (eta[i]) s += h[i];
    return s / static_cast<double>(h.size());
}

// ---------------------------------------------------------------------------
// Kinetic Monte Carlo

namespace detail {

/// Binary indexed tree over non-negative weights with prefix search.
class FenwickTree {
public:
    explicit FenwickTree(std::size_t n) : tree_(n + 1, 0.0), values_(n, 0.0)
    {
        top_ = 1;
        while (top_ * 2 <= n) top_ *= 2;
    }

    void set(std::size_t i, double v)
    {
        const double delta = v - values_[i];
        values_[i] = v;
        for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
    }

    [[nodiscard]] double value(std::size_t i) const { return values_[i]; }

    [[nodiscard]] double total() const
    {
        double s = 0.0;
        for (std::size_t j = tree_.size() - 1; j > 0; j -= j & (~j + 1)) s += tree_[j];
        return s;
    }

    /// Smallest i with prefix sum through i exceeding `target`.
    [[nodiscard]] std::size_t find(double target) const
    {
        std::size_t pos = 0;
        for (std::size_t step = top_; step > 0; step /= 2) {
            const std::size_t next = pos + step;
            if (next < tree_.size() && tree_[next] <= target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return std::min(pos, values_.size() - 1);
    }

    void rebuild()
    {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        for (std::size_t i = 0; i < values_.size(); ++i) {
            tree_[i + 1] += values_[i];
            const std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
            if (parent < tree_.size()) tree_[parent] += tree_[i + 1];
        }
    }

    [[nodiscard]] double direct_sum() const
    {
        double s = 0.0;
        for (double v : values_) s += v;
        return s;
    }

private:
    std::vector<double> tree_;
    std::vector<double> values_;
    std::size_t top_;
};

} // namespace detail

struct SimulationStats {
    std::uint64_t events = 0;
    std::uint64_t consistency_checks = 0;
    double max_relative_desync = 0.0;
};

struct SimulationOptions {
    std::uint64_t check_interval = 10000; ///< events between rate-tree consistency checks
    double check_tolerance = 1e-9;
};

/// Exact continuous-time simulation up to the largest observation time.
/// Only bonds whose two sites differ carry weight in the rate tree: a swap
/// of equal occupations leaves η unchanged, so dropping them changes nothing
/// in law. Returns η at each requested (sorted, positive) macroscopic time.
inline std::vector<OccupancyConfig> simulate(const RateModel& model, OccupancyConfig eta,
                                             const std::vector<double>& times, std::uint64_t seed,
                                             std::uint64_t stream = 0, SimulationStats* stats = nullptr,
                                             const SimulationOptions& opt = {})
{
    if (!same_grid(model.grid(), eta.grid())) throw GridMismatch("simulate");
    if (times.empty()) throw InvalidArgument("simulate: no observation times");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1])))
            throw InvalidArgument("simulate: observation times must be positive and increasing");

    const auto& g = *model.grid();
    const int d = g.dim();
    const std::size_t nsites = g.size();
    const std::size_t nbonds = nsites * static_cast<std::size_t>(d);
    auto bond_weight = [&](std::size_t bond) {
        const auto x = bond % nsites;
        const int k = static_cast<int>(bond / nsites);
        if (eta[x] == eta[g.shift(x, k, 1)]) return 0.0;
        return model.swap_rate(eta, x, k);
    };

    detail::FenwickTree tree(nbonds);
    for (std::size_t b = 0; b < nbonds; ++b) tree.set(b, bond_weight(b));
    tree.rebuild();

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x2u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SimulationStats st;
    std::vector<OccupancyConfig> out;
    out.reserve(times.size());
    double t = 0.0;
    std::size_t next_obs = 0;
    const int reach = model.reach();

    while (next_obs < times.size()) {
        const double total = tree.total();
        if (!(total > 0.0)) {
            // frozen configuration (empty, full or otherwise jammed)
            while (next_obs < times.size()) {
                out.push_back(eta);
                ++next_obs;
            }
            break;
        }
        const double dt = -std::log1p(-unit(rng)) / total;
        while (next_obs < times.size() && t + dt > times[next_obs]) {
            out.push_back(eta);
            ++next_obs;
        }
        if (next_obs == times.size()) break;
        t += dt;

        const std::size_t bond = tree.find(unit(rng) * total);
        const auto x = bond % nsites;
        const int k = static_cast<int>(bond / nsites);
        const auto y = g.shift(x, k, 1);
        eta.swap_sites(x, y);
        ++st.events;

        // bonds (z, z+e_j) read η at z, z+e_j (whether the swap is active) and at
        // z − e_j ... z + reach e_j (the c-rate); refresh those touching x or y
        for (const auto s : {x, y})
            for (int j = 0; j < d; ++j)
                for (int r = -reach; r <= reach - 1; ++r) {
                    const auto z = g.shift(s, j, r);
                    const auto bz = static_cast<std::size_t>(j) * nsites + z;
                    tree.set(bz, bond_weight(bz));
                }

        if (opt.check_interval > 0 && st.events % opt.check_interval == 0) {
            double fresh = 0.0;
            for (std::size_t b = 0; b < nbonds; ++b) fresh += bond_weight(b);
            const double maintained = tree.total();
            const double rel = std::abs(fresh - maintained) / std::max(fresh, std::numeric_limits<double>::min());
            st.max_relative_desync = std::max(st.max_relative_desync, fresh > 0.0 ? rel : 0.0);
            ++st.consistency_checks;
            if (fresh > 0.0 && rel > opt.check_tolerance)
                throw Error("simulate: rate tree out of sync (relative difference " + std::to_string(rel) + ")");
            for (std::size_t b = 0; b < nbonds; ++b) tree.set(b, bond_weight(b));
            tree.rebuild();
        }
    }
    if (stats) *stats = st;
    return out;
}

// ---------------------------------------------------------------------------
// Hydrodynamic equation

struct DensityProfile {
    MeshFunction rho;

    explicit DensityProfile(MeshFunction r) : rho(std::move(r))
    {
        for (double v : rho.values())
            if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw InvalidArgument("DensityProfile: value outside [0,1]");
    }
    [[nodiscard]] const GridPtr& grid() const { return rho.grid(); }
};

struct HydroStepControl {
    enum class Scheme { Explicit, Implicit };
    Scheme scheme = Scheme::Explicit;
    double safety = 0.45;           ///< explicit dt = safety / max row sum
    std::uint64_t max_steps = 20000000;
    double implicit_dt = 1e-3;      ///< backward-Euler step
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
};

struct HydroStats {
    std::uint64_t steps = 0;
    double dt = 0.0;
    double max_mean_drift = 0.0; ///< max over steps of |mean ρ − mean ρ₀|
};

namespace detail {

/// L Φ(ρ) with L = ∇ᴺA∇ᴺ_W.
inline void apply_L_phi(const TorusGrid& g, const std::vector<std::vector<double>>& c, const std::vector<double>& phi,
                        std::vector<double>& out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = 0; k < g.dim(); ++k) {
        const auto& ck = c[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = g.shift(i, k, 1);
            const double flux = ck[i] * (phi[j] - phi[i]);
            out[i] += flux;
            out[j] -= flux;
        }
    }
}

} // namespace detail

/// ρ at each requested time for ρ' = ∇ᴺA∇ᴺ_W Φ(ρ), Φ(α) = α + bα² + b3α³.
inline std::vector<DensityProfile> solve_hydrodynamic(const DiagonalField& a, const DensityProfile& rho0, double b,
                                                      const std::vector<double>& times, const HydroStepControl& ctl = {},
                                                      HydroStats* stats = nullptr, double b3 = 0.0)
{
    if (!same_grid(a.grid(), rho0.grid())) throw GridMismatch("solve_hydrodynamic");
    if (times.empty()) throw InvalidArgument("solve_hydrodynamic: no output times");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1])))
            throw InvalidArgument("solve_hydrodynamic: output times must be positive and increasing");
    const RateModel phi_model(a, b, b3); // validates b and exposes Φ
    const auto& g = *a.grid();
    const auto c = detail::edge_coefficients(a);
    const std::size_t n = g.size();

    std::vector<double> rho(rho0.rho.values().begin(), rho0.rho.values().end());
    std::vector<double> phi(n), lphi(n);
    double mean0 = 0.0;
    for (double v : rho) mean0 += v;
    mean0 /= static_cast<double>(n);

    HydroStats st;
    std::vector<DensityProfile> out;
    double t = 0.0;

    auto mean_drift = [&] {
        double m = 0.0;
        for (double v : rho) m += v;
        return std::abs(m / static_cast<double>(n) - mean0);
    };

    if (ctl.scheme == HydroStepControl::Scheme::Explicit) {
        std::vector<double> diag(n, 0.0);
        for (int k = 0; k < g.dim(); ++k)
            for (std::size_t i = 0; i < n; ++i) {
                diag[i] += c[static_cast<std::size_t>(k)][i];
                diag[g.shift(i, k, 1)] += c[static_cast<std::size_t>(k)][i];
            }
        const double row = 2.0 * *std::max_element(diag.begin(), diag.end()) * phi_model.phi_prime_max();
        const double dt_max = ctl.safety / row;
        st.dt = dt_max;
        const double needed = std::ceil(times.back() / dt_max);
        if (needed > static_cast<double>(ctl.max_steps))
            throw StepSizeUnderflow("solve_hydrodynamic: explicit scheme needs " + std::to_string(needed) +
                                    " steps (dt = " + std::to_string(dt_max) + "); use the implicit scheme");
        for (double target : times) {
            while (t < target) {
                const double dt = std::min(dt_max, target - t);
                for (std::size_t i = 0; i < n; ++i) phi[i] = phi_model.phi(rho[i]);
                detail::apply_L_phi(g, c, phi, lphi);
                for (std::size_t i = 0; i < n; ++i) rho[i] += dt * lphi[i];
                t = (target - t <= dt_max) ? target : t + dt;
                ++st.steps;
                st.max_mean_drift = std::max(st.max_mean_drift, mean_drift());
            }
            out.emplace_back(MeshFunction(a.grid(), rho));
        }
    } else {
        std::vector<double> res(n);
        for (double target : times) {
            while (t < target) {
                const double dt = std::min(ctl.implicit_dt, target - t);
                const std::vector<double> old = rho;
                // F(ρ) = ρ − ρ_old − dt L Φ(ρ)
                auto residual = [&](const std::vector<double>& r, std::vector<double>& f) {
                    for (std::size_t i = 0; i < n; ++i) phi[i] = phi_model.phi(r[i]);
                    detail::apply_L_phi(g, c, phi, lphi);
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        f[i] = r[i] - old[i] - dt * lphi[i];
                        s += f[i] * f[i];
                    }
                    return std::sqrt(s / static_cast<double>(n));
                };
                double fn = residual(rho, res);
                int it = 0;
                while (fn > ctl.newton_tol && it < ctl.newton_max_iter) {
                    // J δ = −F with J = I − dt L D, D = diag Φ'(ρ); with z = D δ:
                    // (D⁻¹/dt − L) z = −F/dt
                    MeshFunction lam(a.grid()), rhs(a.grid());
                    for (std::size_t i = 0; i < n; ++i) {
                        lam[i] = 1.0 / (dt * phi_model.phi_prime(rho[i]));
                        rhs[i] = -res[i] / dt;
                    }
                    SolverOptions so;
                    so.rel_tol = 1e-12;
                    const auto z = solve_pointwise_resolvent(a, lam, rhs, so);
                    double step = 1.0;
                    std::vector<double> trial(n), tres(n);
                    double tn = fn;
                    for (int damp = 0; damp < 30; ++damp) {
                        for (std::size_t i = 0; i < n; ++i)
                            trial[i] = std::clamp(rho[i] + step * z[i] / phi_model.phi_prime(rho[i]), 0.0, 1.0);
                        tn = residual(trial, tres);
                        if (tn < fn) break;
                        step *= 0.5;
                    }
                    if (!(tn < fn)) break;
                    rho.swap(trial);
                    res.swap(tres);
                    fn = tn;
                    ++it;
                }
                if (fn > std::max(ctl.newton_tol, 1e-9))
                    throw ConvergenceError("solve_hydrodynamic: Newton iteration stalled at residual " + std::to_string(fn));
                t = (target - t <= ctl.implicit_dt) ? target : t + dt;
                ++st.steps;
                st.max_mean_drift = std::max(st.max_mean_drift, mean_drift());
            }
            out.emplace_back(MeshFunction(a.grid(), rho));
        }
        st.dt = ctl.implicit_dt;
    }
    if (stats) *stats = st;
    return out;
}

// ---------------------------------------------------------------------------
// Hydrodynamic-limit check

struct HydroCheckConfig {
    int n = 64;
    WProduct w = WProduct::uniform(1);
    CoefficientSequenceSpec a = CoefficientSequenceSpec::constant_field(1.0);
    double b = 0.0;
    double b3 = 0.0;
    PointFunction rho0;
    std::vector<double> times;
    int replicas = 200;
    std::uint64_t seed = 0;
    std::vector<NamedFunction> tests;
    HydroStepControl pde;
    int jobs = 1;
};

struct HydroCheckRow {
    double t = 0.0;
    std::string test;
    double mean = 0.0;   ///< replica mean of ⟨πᴺ_t, H⟩
    double stderr_mean = 0.0;
    double pde = 0.0;    ///< N^{−d} Σ H(x/N) ρ(t, x)
    double gap = 0.0;    ///< mean − pde
};

struct HydroCheckReport {
    std::vector<HydroCheckRow> rows;
    std::vector<std::vector<double>> site_mean;   ///< per time, replica mean of η(x)
    std::vector<std::vector<double>> site_stderr; ///< per time
    std::vector<std::vector<double>> pde_profile; ///< per time
    std::uint64_t total_events = 0;
};

inline HydroCheckReport hydrodynamic_check(const HydroCheckConfig& c)
{
    if (c.replicas < 2) throw InvalidArgument("hydrodynamic_check: need at least two replicas");
    if (!c.rho0) throw InvalidArgument("hydrodynamic_check: missing initial profile");
    const auto grid = make_grid(c.n, c.w);
    const RateModel model(build_field(c.a, grid), c.b, c.b3);
    const auto ahom = build_homogenized_field(predicted_homogenized_matrix(c.a, c.w), grid);

    const DensityProfile rho0(MeshFunction::sample(grid, c.rho0));
    const auto pde = solve_hydrodynamic(ahom, rho0, c.b, c.times, c.pde, nullptr, c.b3);

    std::vector<MeshFunction> hs;
    for (const auto& h : c.tests) hs.push_back(MeshFunction::sample(grid, h.f));

    const auto m = static_cast<std::size_t>(c.replicas);
    const std::size_t nt = c.times.size();
    // pairings[r][t][h], occupation sums per time
    std::vector<std::vector<std::vector<double>>> pairings(m);
    std::vector<std::vector<std::vector<std::uint8_t>>> snaps(m);
    std::vector<std::uint64_t> events(m, 0);
    parallel_for(m, c.jobs, [&](std::size_t r) {
        const auto eta0 = sample_initial(c.rho0, grid, c.seed, r);
        SimulationStats st;
        const auto obs = simulate(model, eta0, c.times, c.seed, r, &st);
        events[r] = st.events;
        pairings[r].resize(nt);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            for (const auto& h : hs) pairings[r][ti].push_back(empirical_pairing(obs[ti], h));
            snaps[r].push_back(obs[ti].eta());
        }
    });

    HydroCheckReport rep;
    const double mm = static_cast<double>(m);
    for (std::size_t ti = 0; ti < nt; ++ti) {
        for (std::size_t hi = 0; hi < hs.size(); ++hi) {
            double s = 0.0, s2 = 0.0;
            for (std::size_t r = 0; r < m; ++r) s += pairings[r][ti][hi];
            const double mean = s / mm;
            for (std::size_t r = 0; r < m; ++r) s2 += (pairings[r][ti][hi] - mean) * (pairings[r][ti][hi] - mean);
            HydroCheckRow row;
            row.t = c.times[ti];
            row.test = c.tests[hi].name;
            row.mean = mean;
            row.stderr_mean = std::sqrt(s2 / (mm - 1.0) / mm);
            row.pde = inner_l2(pde[ti].rho, hs[hi]);
            row.gap = row.mean - row.pde;
            rep.rows.push_back(row);
        }
        std::vector<double> sm(grid->size(), 0.0), se(grid->size(), 0.0);
        for (std::size_t x = 0; x < grid->size(); ++x) {
            double s = 0.0;
            for (std::size_t r = 0; r < m; ++r) s += snaps[r][ti][x];
            const double p = s / mm;
            sm[x] = p;
            // Bernoulli samples: sample variance is mm/(mm−1) p(1−p)
            se[x] = std::sqrt(p * (1.0 - p) / (mm - 1.0));
        }
        rep.site_mean.push_back(std::move(sm));
        rep.site_stderr.push_back(std::move(se));
        rep.pde_profile.emplace_back(pde[ti].rho.values().begin(), pde[ti].rho.values().end());
    }
    for (auto e : events) rep.total_events += e;
    return rep;
}

} // namespace whomog
