#pragma once

// Cell integrals against Lebesgue measure and against d(xᵏ⊗W_k).
// The density part goes through adaptive Gauss-Kronrod; atoms are summed exactly.

#include "whomog/error.hpp"
#include "whomog/w_measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace whomog {

using PointFunction = std::function<double(std::span<const double>)>;

struct QuadratureOptions {
    double tol = 1e-12;
    unsigned max_depth = 12;
};

namespace detail {

inline double gk(const std::function<double(double)>& f, double a, double b, const QuadratureOptions& opt)
{
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, opt.max_depth, opt.tol, &err);
    if (!std::isfinite(v)) throw QuadratureError("quadrature returned a non-finite value");
    return v;
}

/// ∫_{(a,b]} h dW for a one-dimensional W (a < b, any reals).
inline double stieltjes_1d(const std::function<double(double)>& h, const WCoordinate& w, double a, double b,
                           const QuadratureOptions& opt)
{
    double s = 0.0;
    const auto lo_shift = static_cast<long>(std::floor(a));
    const auto hi_shift = static_cast<long>(std::floor(b));
    for (long m = lo_shift; m <= hi_shift; ++m) {
        // absolutely continuous part, piece by piece
        const auto& segs = w.segments();
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const double s0 = std::max(a, segs[i].start + static_cast<double>(m));
            const double s1 = std::min(b, w.segment_end(i) + static_cast<double>(m));
            if (s1 > s0) s += segs[i].slope * gk(h, s0, s1, opt);
        }
        for (const auto& atom : w.atoms()) {
            const double p = atom.position + static_cast<double>(m);
            if (p > a && p <= b) {
                const double v = h(p);
                if (!std::isfinite(v)) throw QuadratureError("integrand is not finite at an atom");
                s += atom.mass * v;
            }
        }
    }
    return s;
}

inline double box_recurse(const PointFunction& f, std::span<const double> lo, std::span<const double> hi,
                          int stieltjes_axis, const WCoordinate* w, std::vector<double>& point, std::size_t axis,
                          const QuadratureOptions& opt)
{
    if (axis == point.size()) {
        const double v = f(point);
        if (!std::isfinite(v)) throw QuadratureError("integrand is not finite");
        return v;
    }
    auto inner = [&](double y) {
        point[axis] = y;
        return box_recurse(f, lo, hi, stieltjes_axis, w, point, axis + 1, opt);
    };
    if (static_cast<int>(axis) == stieltjes_axis) return stieltjes_1d(inner, *w, lo[axis], hi[axis], opt);
    return gk(inner, lo[axis], hi[axis], opt);
}

} // namespace detail

/// ∫ f dy over the box Π [lo_j, hi_j).
inline double integrate_box(const PointFunction& f, std::span<const double> lo, std::span<const double> hi,
                            const QuadratureOptions& opt = {})
{
    std::vector<double> point(lo.size());
    return detail::box_recurse(f, lo, hi, -1, nullptr, point, 0, opt);
}

/// ∫ f d(yᵏ⊗W_k) over the box, with the k-th factor taken as (lo_k, hi_k].
inline double integrate_box_stieltjes(const PointFunction& f, std::span<const double> lo, std::span<const double> hi,
                                      int k, const WCoordinate& w, const QuadratureOptions& opt = {})
{
    std::vector<double> point(lo.size());
    return detail::box_recurse(f, lo, hi, k, &w, point, 0, opt);
}

} // namespace whomog
