#pragma once

// Weight functions W_k (strictly increasing, càdlàg, periodic increments) and
// the Stieltjes measures they induce on the one-dimensional torus.
//
// A coordinate is a piecewise-linear absolutely continuous part plus finitely
// many atoms. The measure of a half-open interval (a, b] is W(b) - W(a); an
// atom at p is counted by W(x) for every x >= p.

#include "whomog/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace whomog {

class WCoordinate {
public:
    /// Density slope on [start, next start) (last segment runs to 1).
    struct Segment {
        double start;
        double slope;
        bool operator==(const Segment&) const = default;
    };
    struct Atom {
        double position;
        double mass;
        bool operator==(const Atom&) const = default;
    };

    /// The identity weight W(x) = x.
    WCoordinate() : WCoordinate({{0.0, 1.0}}, {}) {}

    WCoordinate(std::vector<Segment> segments, std::vector<Atom> atoms)
        : segments_(std::move(segments)), atoms_(std::move(atoms))
    {
        if (segments_.empty())
            throw InvalidArgument("WCoordinate: at least one density segment is required");
        if (segments_.front().start != 0.0)
            throw InvalidArgument("WCoordinate: first density segment must start at 0");
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& s = segments_[i];
            if (!(s.slope > 0.0) || !std::isfinite(s.slope))
                throw InvalidArgument("WCoordinate: every slope must be finite and > 0");
            if (!(s.start >= 0.0 && s.start < 1.0))
                throw InvalidArgument("WCoordinate: segment start outside [0,1)");
            if (i > 0 && !(s.start > segments_[i - 1].start))
                throw InvalidArgument("WCoordinate: segment starts must be strictly increasing");
        }
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const auto& a = atoms_[i];
            if (!(a.position >= 0.0 && a.position < 1.0))
                throw InvalidArgument("WCoordinate: atom position outside [0,1)");
            if (!(a.mass > 0.0) || !std::isfinite(a.mass))
                throw InvalidArgument("WCoordinate: atom masses must be finite and > 0");
            if (i > 0 && !(a.position > atoms_[i - 1].position))
                throw InvalidArgument("WCoordinate: atom positions must be strictly increasing");
        }

        cumulative_density_.resize(segments_.size() + 1, 0.0);
        for (std::size_t i = 0; i < segments_.size(); ++i)
            cumulative_density_[i + 1] = cumulative_density_[i] + segments_[i].slope * (segment_end(i) - segments_[i].start);
        cumulative_mass_.resize(atoms_.size() + 1, 0.0);
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            cumulative_mass_[i + 1] = cumulative_mass_[i] + atoms_[i].mass;
        total_ = cumulative_density_.back() + cumulative_mass_.back();
    }

    static WCoordinate identity() { return {}; }

    /// Unit density plus the given atoms.
    static WCoordinate with_atoms(std::vector<Atom> atoms) { return {{{0.0, 1.0}}, std::move(atoms)}; }

    [[nodiscard]] double total_increment() const noexcept { return total_; }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    [[nodiscard]] bool has_atoms() const noexcept { return !atoms_.empty(); }

    /// True when W(x) = slope * x + const.
    [[nodiscard]] bool is_affine() const noexcept { return segments_.size() == 1 && atoms_.empty(); }

    [[nodiscard]] double eval(double x) const
    {
        const double shift = std::floor(x);
        double r = x - shift;
        if (r >= 1.0) r = 0.0; // x just below an integer rounds up
        return base(r, /*include_atom_at_r=*/true) + shift * total_;
    }

    /// W(x-), the left limit.
    [[nodiscard]] double eval_left(double x) const
    {
        const double shift = std::floor(x);
        double r = x - shift;
        if (r >= 1.0) r = 0.0;
        return base(r, /*include_atom_at_r=*/false) + shift * total_;
    }

    /// Stieltjes measure of (a, b].
    [[nodiscard]] double increment(double a, double b) const
    {
        if (!(a < b))
            throw InvalidArgument("WCoordinate::increment: requires a < b");
        return eval(b) - eval(a);
    }

    /// W((i+1)/N) - W(i/N).
    [[nodiscard]] double cell_weight(int index, int n) const
    {
        if (n < 1 || index < 0 || index >= n)
            throw InvalidArgument("WCoordinate::cell_weight: index out of range");
        return eval(static_cast<double>(index + 1) / n) - eval(static_cast<double>(index) / n);
    }

    /// Positions of the atoms, i.e. the support of the singular part.
    [[nodiscard]] std::vector<double> singular_support() const
    {
        std::vector<double> out;
        out.reserve(atoms_.size());
        for (const auto& a : atoms_) out.push_back(a.position);
        return out;
    }

    /// Density (slope) at r in [0,1).
    [[nodiscard]] double density_at(double r) const
    {
        return segments_[segment_index(r)].slope;
    }

    /// End of segment i (1 for the last one).
    [[nodiscard]] double segment_end(std::size_t i) const
    {
        return i + 1 < segments_.size() ? segments_[i + 1].start : 1.0;
    }

    bool operator==(const WCoordinate& other) const
    {
        return segments_ == other.segments_ && atoms_ == other.atoms_;
    }

private:
    [[nodiscard]] std::size_t segment_index(double r) const
    {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), r,
                                   [](double v, const Segment& s) { return v < s.start; });
        return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
    }

    [[nodiscard]] double base(double r, bool include_atom_at_r) const
    {
        const std::size_t i = segment_index(r);
        const double density = cumulative_density_[i] + segments_[i].slope * (r - segments_[i].start);
        auto it = include_atom_at_r
            ? std::upper_bound(atoms_.begin(), atoms_.end(), r, [](double v, const Atom& a) { return v < a.position; })
            : std::lower_bound(atoms_.begin(), atoms_.end(), r, [](const Atom& a, double v) { return a.position < v; });
        const auto count = static_cast<std::size_t>(std::distance(atoms_.begin(), it));
        return density + cumulative_mass_[count];
    }

    std::vector<Segment> segments_;
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_density_;
    std::vector<double> cumulative_mass_;
    double total_ = 0.0;
};

/// W(x) = Σ_k W_k(x_k): one coordinate weight per axis.
class WProduct {
public:
    explicit WProduct(std::vector<WCoordinate> coords) : coords_(std::move(coords))
    {
        if (coords_.empty())
            throw InvalidArgument("WProduct: dimension must be >= 1");
    }

    /// Same weight on every axis.
    static WProduct uniform(int d, const WCoordinate& w = {})
    {
        if (d < 1) throw InvalidArgument("WProduct: dimension must be >= 1");
        return WProduct(std::vector<WCoordinate>(static_cast<std::size_t>(d), w));
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(coords_.size()); }
    [[nodiscard]] const WCoordinate& operator[](int k) const { return coords_.at(static_cast<std::size_t>(k)); }
    [[nodiscard]] const std::vector<WCoordinate>& coords() const noexcept { return coords_; }

    [[nodiscard]] double eval(std::span<const double> x) const
    {
        if (static_cast<int>(x.size()) != dim())
            throw InvalidArgument("WProduct::eval: point dimension mismatch");
        double s = 0.0;
        for (int k = 0; k < dim(); ++k) s += coords_[static_cast<std::size_t>(k)].eval(x[static_cast<std::size_t>(k)]);
        return s;
    }

    bool operator==(const WProduct&) const = default;

private:
    std::vector<WCoordinate> coords_;
};

} // namespace whomog
