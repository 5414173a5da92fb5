#pragma once

// Closed-form functions used as right-hand sides, initial profiles and test
// functions: a constant plus finitely many cos/sin(2π m·x) terms.

#include "whomog/error.hpp"
#include "whomog/quadrature.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace whomog {

struct FourierTerm {
    enum class Phase { Cos, Sin };
    double amplitude = 1.0;
    std::vector<int> mode; ///< one wave number per axis
    Phase phase = Phase::Cos;
};

struct FourierSeries {
    double offset = 0.0;
    std::vector<FourierTerm> terms;

    static FourierSeries constant(double c) { return {c, {}}; }
    static FourierSeries cosine(int d, int axis, int m, double amplitude = 1.0, double offset = 0.0)
    {
        std::vector<int> mode(static_cast<std::size_t>(d), 0);
        mode.at(static_cast<std::size_t>(axis)) = m;
        return {offset, {{amplitude, mode, FourierTerm::Phase::Cos}}};
    }
    static FourierSeries sine(int d, int axis, int m, double amplitude = 1.0, double offset = 0.0)
    {
        auto s = cosine(d, axis, m, amplitude, offset);
        s.terms[0].phase = FourierTerm::Phase::Sin;
        return s;
    }

    void check_dim(int d) const
    {
        for (const auto& t : terms)
            if (static_cast<int>(t.mode.size()) != d)
                throw InvalidArgument("FourierSeries: mode vector has " + std::to_string(t.mode.size()) +
                                      " entries, expected " + std::to_string(d));
    }

    [[nodiscard]] double operator()(std::span<const double> y) const
    {
        double s = offset;
        for (const auto& t : terms) s += t.amplitude * basis(t, y);
        return s;
    }

    /// ∂/∂y_k.
    [[nodiscard]] double derivative(std::span<const double> y, int k) const
    {
        double s = 0.0;
        for (const auto& t : terms) {
            const double w = 2.0 * std::numbers::pi * t.mode[static_cast<std::size_t>(k)];
            if (w == 0.0) continue;
            const double arg = phase_arg(t, y);
            s += t.amplitude * w * (t.phase == FourierTerm::Phase::Cos ? -std::sin(arg) : std::cos(arg));
        }
        return s;
    }

    /// ∫_{Π[lo_k, hi_k)} f dy in closed form.
    [[nodiscard]] double cell_integral(std::span<const double> lo, std::span<const double> hi) const
    {
        double vol = 1.0;
        for (std::size_t k = 0; k < lo.size(); ++k) vol *= hi[k] - lo[k];
        double s = offset * vol;
        for (const auto& t : terms) {
            // ∫ e^{i 2π m·y} dy factorizes over the axes
            std::complex<double> z(1.0, 0.0);
            for (std::size_t k = 0; k < lo.size(); ++k) {
                const double w = 2.0 * std::numbers::pi * t.mode[k];
                if (w == 0.0) {
                    z *= hi[k] - lo[k];
                } else {
                    const std::complex<double> i(0.0, 1.0);
                    z *= (std::exp(i * (w * hi[k])) - std::exp(i * (w * lo[k]))) / (i * w);
                }
            }
            s += t.amplitude * (t.phase == FourierTerm::Phase::Cos ? z.real() : z.imag());
        }
        return s;
    }

    [[nodiscard]] int max_mode() const
    {
        int m = 0;
        for (const auto& t : terms)
            for (int v : t.mode) m = std::max(m, std::abs(v));
        return m;
    }

    [[nodiscard]] PointFunction as_function() const
    {
        return [s = *this](std::span<const double> y) { return s(y); };
    }

    static double phase_arg(const FourierTerm& t, std::span<const double> y)
    {
        double arg = 0.0;
        for (std::size_t k = 0; k < t.mode.size(); ++k) arg += t.mode[k] * y[k];
        return 2.0 * std::numbers::pi * arg;
    }

    static double basis(const FourierTerm& t, std::span<const double> y)
    {
        const double arg = phase_arg(t, y);
        return t.phase == FourierTerm::Phase::Cos ? std::cos(arg) : std::sin(arg);
    }
};

/// Σ over an M^d uniform grid divided by M^d: exact for trigonometric
/// polynomials of degree < M/2 in each variable.
inline double trig_mean(const std::function<double(std::span<const double>)>& f, int d, int m)
{
    std::vector<double> y(static_cast<std::size_t>(d), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    double s = 0.0;
    long total = 1;
    for (int k = 0; k < d; ++k) total *= m;
    for (long c = 0; c < total; ++c) {
        long r = c;
        for (int k = 0; k < d; ++k) {
            y[static_cast<std::size_t>(k)] = static_cast<double>(r % m) / m;
            r /= m;
        }
        s += f(y);
    }
    return s / static_cast<double>(total);
}

} // namespace whomog
