#include "oracles.hpp"
#include "whomog/elliptic.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace whomog;

namespace {

MeshFunction mf(const GridPtr& g, std::vector<double> v) { return MeshFunction(g, std::move(v)); }
MeshFunction random_mf(const GridPtr& g, std::mt19937_64& rng) { return mf(g, oracle::random_vector(g->size(), rng)); }

std::vector<std::vector<double>> random_coeffs(const GridPtr& g, std::mt19937_64& rng, double theta)
{
    std::vector<std::vector<double>> a;
    for (int k = 0; k < g->dim(); ++k) a.push_back(oracle::random_vector(g->size(), rng, 1.0 / theta, theta));
    return a;
}

std::vector<double> vals(const MeshFunction& u) { return {u.values().begin(), u.values().end()}; }

} // namespace

TEST(ApplyT, TwoSiteExampleMatchesDenseOracle)
{
    // For A ≡ 1, W = x, N = 2 the operator acts on (a, −a) as multiplication by λ + 16.
    const auto g = make_grid(1, 2);
    const auto a = DiagonalField::constant(g, 1.0);
    const auto t = oracle::dense_T(1, 2, {WCoordinate()}, {{1.0, 1.0}}, 1.0);
    const auto ref = oracle::dense_solve(t, {1.0, -1.0});
    EXPECT_NEAR(ref[0], 1.0 / 17.0, 1e-14);
    const auto tu = apply_T_lambda(a, 1.0, mf(g, ref));
    EXPECT_NEAR(tu[0], 1.0, 1e-12);
    EXPECT_NEAR(tu[1], -1.0, 1e-12);
}

TEST(ApplyT, Constants)
{
    const auto g = make_grid(2, 4, oracle::one_atom());
    const auto a = DiagonalField::constant(g, 2.0);
    EXPECT_NEAR(max_abs(apply_T_lambda(a, 0.0, MeshFunction(g, 3.0))), 0.0, 1e-12);
    const auto five = apply_T_lambda(a, 5.0, MeshFunction(g, 3.0));
    for (double v : five.values()) EXPECT_NEAR(v, 15.0, 1e-12);
    EXPECT_THROW(apply_T_lambda(a, -1.0, MeshFunction(g)), InvalidArgument);
}

TEST(BilinearForm, MatchesOperatorAndIsSymmetric)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 2;
        const auto g = make_grid(d, d == 1 ? 8 : 4, trial % 3 == 0 ? oracle::two_atoms() : oracle::one_atom());
        const DiagonalField a(g, random_coeffs(g, rng, 4.0), 4.0);
        const double lambda = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
        const auto u = random_mf(g, rng), v = random_mf(g, rng);
        const double b = bilinear_form(a, lambda, u, v);
        EXPECT_NEAR(b, inner_l2(apply_T_lambda(a, lambda, u), v), 1e-10 * std::max(1.0, std::abs(b)));
        EXPECT_NEAR(b, bilinear_form(a, lambda, v, u), 1e-10 * std::max(1.0, std::abs(b)));
    }
    const auto g = make_grid(1, 4);
    const auto one = DiagonalField::constant(g, 1.0);
    EXPECT_NEAR(bilinear_form(one, 1.0, MeshFunction(g, 2.0), MeshFunction(g, 2.0)), 4.0, 1e-14);
}

TEST(BilinearForm, EntriesMatchDenseAssembly)
{
    std::mt19937_64 rng(12);
    const auto g = make_grid(2, 3, oracle::one_atom());
    const auto coeffs = random_coeffs(g, rng, 4.0);
    const DiagonalField a(g, coeffs, 4.0);
    const auto t = oracle::dense_T(2, 3, {oracle::one_atom(), oracle::one_atom()}, coeffs, 0.7);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            MeshFunction ei(g), ej(g);
            ei[static_cast<std::size_t>(i)] = 1.0;
            ej[static_cast<std::size_t>(j)] = 1.0;
            EXPECT_NEAR(9.0 * bilinear_form(a, 0.7, ei, ej), t(i, j), 1e-11);
        }
}

TEST(SolveResolvent, TwoSite)
{
    const auto g = make_grid(1, 2);
    const auto a = DiagonalField::constant(g, 1.0);
    const auto u = solve_resolvent(a, 1.0, mf(g, {1.0, -1.0}));
    EXPECT_NEAR(u[0], 1.0 / 17.0, 1e-12);
    EXPECT_NEAR(u[1], -1.0 / 17.0, 1e-12);
}

TEST(SolveResolvent, ConstantRightHandSide)
{
    const auto g = make_grid(2, 8, oracle::two_atoms());
    std::mt19937_64 rng(2);
    const DiagonalField a(g, random_coeffs(g, rng, 4.0), 4.0);
    const auto u = solve_resolvent(a, 2.5, MeshFunction(g, 5.0));
    for (double v : u.values()) EXPECT_NEAR(v, 2.0, 1e-9);
    EXPECT_THROW(solve_resolvent(a, 0.0, MeshFunction(g, 1.0)), InvalidArgument);
}

TEST(SolveResolvent, FourierSolution)
{
    const int n = 512;
    const auto g = make_grid(1, n);
    const auto a = DiagonalField::constant(g, 1.0);
    const auto f = MeshFunction::sample(g, [](std::span<const double> y) { return std::cos(2.0 * std::numbers::pi * y[0]); });
    const auto u = solve_resolvent(a, 1.0, f);
    double err = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i)
        err = std::max(err, std::abs(u[i] - f[i] / (1.0 + 4.0 * std::numbers::pi * std::numbers::pi)));
    EXPECT_LT(err, 5.0 / n);
}

TEST(SolveResolvent, MatchesDenseOracleOnSmallGrids)
{
    std::mt19937_64 rng(42);
    const std::vector<WCoordinate> ws{WCoordinate(), oracle::one_atom(), oracle::two_atoms()};
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 1 + trial % 3;
        const int n = d == 1 ? 2 + static_cast<int>(rng() % 255) : (d == 2 ? 2 + static_cast<int>(rng() % 15) : 2 + static_cast<int>(rng() % 5));
        const auto& w = ws[static_cast<std::size_t>(trial % 3)];
        const auto g = make_grid(d, n, w);
        const auto coeffs = random_coeffs(g, rng, 4.0);
        const DiagonalField a(g, coeffs, 4.0);
        const double lambda = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
        const auto f = random_mf(g, rng);
        SolverOptions cg;
        cg.method = SolverOptions::Method::ConjugateGradient;
        const auto u = solve_resolvent(a, lambda, f, cg);
        const auto t = oracle::dense_T(d, n, std::vector<WCoordinate>(static_cast<std::size_t>(d), w), coeffs, lambda);
        EXPECT_LT(oracle::max_abs_diff(vals(u), oracle::dense_solve(t, vals(f))), 1e-9) << "d=" << d << " N=" << n;
        SolverOptions dense;
        dense.method = SolverOptions::Method::Dense;
        EXPECT_LT(oracle::max_abs_diff(vals(solve_resolvent(a, lambda, f, dense)), oracle::dense_solve(t, vals(f))), 1e-9);
    }
}

TEST(SolvePoisson, TwoSite)
{
    // ∇A∇ maps (a, −a) to (−16a, 16a)
    const auto g = make_grid(1, 2);
    const auto a = DiagonalField::constant(g, 1.0);
    const auto u = solve_poisson(a, mf(g, {1.0, -1.0}));
    EXPECT_NEAR(u[0], -1.0 / 16.0, 1e-12);
    EXPECT_NEAR(u[1], 1.0 / 16.0, 1e-12);
    const auto lu = divergence_form_apply(a, u);
    EXPECT_NEAR(lu[0], 1.0, 1e-12);
}

TEST(SolvePoisson, CompatibilityAndZero)
{
    const auto g = make_grid(1, 2);
    const auto a = DiagonalField::constant(g, 1.0);
    EXPECT_THROW(solve_poisson(a, mf(g, {1.0, 1.0})), CompatibilityError);
    const auto z = solve_poisson(a, MeshFunction(g));
    EXPECT_EQ(max_abs(z), 0.0);
}

TEST(SolvePoisson, MatchesDenseOracle)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 12; ++trial) {
        const int d = 1 + trial % 2;
        const int n = d == 1 ? 64 : 8;
        const auto w = trial % 3 == 0 ? WCoordinate() : oracle::one_atom();
        const auto g = make_grid(d, n, w);
        const auto coeffs = random_coeffs(g, rng, 4.0);
        const DiagonalField a(g, coeffs, 4.0);
        const auto f = mean_zero_project(random_mf(g, rng));
        const auto u = solve_poisson(a, f);
        EXPECT_NEAR(mean(u), 0.0, 1e-12);
        const auto t = oracle::dense_T(d, n, std::vector<WCoordinate>(static_cast<std::size_t>(d), w), coeffs, 0.0);
        EXPECT_LT(oracle::max_abs_diff(vals(u), oracle::dense_poisson(t, vals(f))), 1e-9);
        SolverOptions dense;
        dense.method = SolverOptions::Method::Dense;
        EXPECT_LT(oracle::max_abs_diff(vals(solve_poisson(a, f, dense)), oracle::dense_poisson(t, vals(f))), 1e-9);
    }
}

TEST(Operator, SymmetricPositiveSemidefinite)
{
    std::mt19937_64 rng(21);
    for (int d : {1, 2}) {
        const int n = d == 1 ? 12 : 4;
        const auto coeffs = [&] {
            std::vector<std::vector<double>> c;
            for (int k = 0; k < d; ++k) c.push_back(oracle::random_vector(oracle::ipow(n, d), rng, 0.25, 4.0));
            return c;
        }();
        const auto g = make_grid(d, n, oracle::one_atom());
        const DiagonalField a(g, coeffs, 4.0);
        const auto sz = static_cast<Eigen::Index>(g->size());
        Eigen::MatrixXd m(sz, sz);
        for (Eigen::Index j = 0; j < sz; ++j) {
            MeshFunction e(g);
            e[static_cast<std::size_t>(j)] = 1.0;
            const auto col = apply_T_lambda(a, 0.0, e);
            for (Eigen::Index i = 0; i < sz; ++i) m(i, j) = col[static_cast<std::size_t>(i)];
        }
        EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9);
        EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-9);
        EXPECT_GT(es.eigenvalues()(1), 1e-6);
    }
}

TEST(Limits, ResolventApproachesPoisson)
{
    std::mt19937_64 rng(4);
    const auto g = make_grid(1, 32, oracle::one_atom());
    const DiagonalField a(g, random_coeffs(g, rng, 4.0), 4.0);
    const auto f = mean_zero_project(random_mf(g, rng));
    // λu − ∇A∇u = f tends to the solution of −∇A∇u = f, i.e. Poisson with −f
    MeshFunction neg = f;
    neg *= -1.0;
    const auto p = solve_poisson(a, neg);
    double prev = 1e300;
    for (double lambda : {1e-2, 1e-4, 1e-6}) {
        const auto u = mean_zero_project(solve_resolvent(a, lambda, f));
        const double err = max_abs(u - p);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-4);
}

TEST(Bounds, ResolventAPriori)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = make_grid(1, 16 << (trial % 3), trial % 2 ? oracle::one_atom() : WCoordinate());
        const DiagonalField a(g, random_coeffs(g, rng, 4.0), 4.0);
        const double lambda = std::uniform_real_distribution<double>(0.05, 5.0)(rng);
        const auto f = random_mf(g, rng);
        const auto u = solve_resolvent(a, lambda, f);
        EXPECT_LE(lambda * norm_l2(u), norm_l2(f) + 1e-8);
        const DualFunctional F{f, {MeshFunction(g)}};
        EXPECT_LE(std::min(lambda, 1.0 / 4.0) * norm_sobolev(u), dual_norm(F) + 1e-8);
    }
}

TEST(Bounds, PoissonConstantStableAcrossN)
{
    for (const auto& w : {WCoordinate(), oracle::one_atom()}) {
        std::vector<double> cs;
        for (int n : {16, 32, 64, 128}) {
            const auto g = make_grid(1, n, w);
            const auto a = DiagonalField::constant(g, 1.0);
            double c = 0.0;
            for (int m = 1; m <= 3; ++m) {
                const auto f = mean_zero_project(MeshFunction::sample(
                    g, [m](std::span<const double> y) { return std::sin(2.0 * std::numbers::pi * m * y[0]); }));
                const auto u = solve_poisson(a, f);
                c = std::max(c, norm_sobolev(u) / norm_l2(f));
            }
            cs.push_back(c);
        }
        const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
        EXPECT_LT(*hi / *lo, 1.5);
    }
}

TEST(Dual, ApplyExamples)
{
    const auto g = make_grid(1, 2);
    const auto v = mf(g, {0.0, 1.0});
    DualFunctional c{MeshFunction(g, 3.0), {MeshFunction(g)}};
    EXPECT_NEAR(dual_apply(c, v), 1.5, 1e-14);
    DualFunctional f1{MeshFunction(g), {MeshFunction(g, 1.0)}};
    EXPECT_NEAR(dual_apply(f1, v), 0.0, 1e-14);
}

TEST(Dual, CanonicalForm)
{
    const auto g = make_grid(2, 4, oracle::one_atom());
    DualFunctional c{MeshFunction(g, 2.0), {MeshFunction(g), MeshFunction(g)}};
    const auto cc = dual_canonicalize(c);
    for (double v : cc.f0.values()) EXPECT_NEAR(v, 2.0, 1e-10);
    for (const auto& fk : cc.fk) EXPECT_NEAR(max_abs(fk), 0.0, 1e-10);
    EXPECT_NEAR(dual_norm(DualFunctional::zero(g)), 0.0, 1e-15);

    std::mt19937_64 rng(14);
    const auto g1 = make_grid(1, 4, oracle::one_atom());
    const DualFunctional F{random_mf(g1, rng), {random_mf(g1, rng)}};
    const auto C = dual_canonicalize(F);
    for (int i = 0; i < 20; ++i) {
        const auto v = random_mf(g1, rng);
        const double a = dual_apply(F, v), b = dual_apply(C, v);
        EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a)));
        EXPECT_NEAR(b, inner_sobolev(C.f0, v), 1e-12 * std::max(1.0, std::abs(b)));
    }
    const double n2 = inner_l2(C.f0, C.f0) + inner_wk(C.fk[0], C.fk[0], 0);
    EXPECT_NEAR(dual_norm(F) * dual_norm(F), n2, 1e-10);
    // the Riesz representative attains the norm: F(u)/‖u‖ = ‖F‖
    EXPECT_NEAR(dual_apply(F, C.f0) / norm_sobolev(C.f0), dual_norm(F), 1e-9);
}
