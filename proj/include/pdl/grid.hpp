#pragma once

/// Structured space-time grids and fields sampled on them.
///
/// Node (i, j, l) sits at x = i dx, y = j dy, z = l dz. z is elevation:
/// l = 0 is the bottom face and l = nz - 1 the soil surface, so that the
/// gravity term in grad(psi + z) points downward.

#include <pdl/constitutive.hpp>
#include <pdl/core.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace pdl {

struct Grid3D {
    std::size_t nx = 20;
    std::size_t ny = 20;
    std::size_t nz = 10;
    double dx = 40.0 / 19.0;
    double dy = 40.0 / 19.0;
    double dz = 20.0 / 9.0;

    /// Grid with the given node counts spanning [0, lx] x [0, ly] x [0, lz].
    static Grid3D spanning(std::size_t nx, std::size_t ny, std::size_t nz, double lx, double ly, double lz)
    {
        Grid3D g{nx, ny, nz, 0.0, 0.0, 0.0};
        if (nx >= 2) g.dx = lx / static_cast<double>(nx - 1);
        if (ny >= 2) g.dy = ly / static_cast<double>(ny - 1);
        if (nz >= 2) g.dz = lz / static_cast<double>(nz - 1);
        g.validate();
        return g;
    }

    void validate() const
    {
        if (nx < 2 || ny < 2 || nz < 2) throw ConfigError("grid needs at least 2 nodes per axis");
        if (!(dx > 0.0 && dy > 0.0 && dz > 0.0)) throw ConfigError("grid spacings must be positive");
    }

    [[nodiscard]] std::size_t nodes() const { return nx * ny * nz; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t l) const
    {
        return (i * ny + j) * nz + l;
    }
    [[nodiscard]] double x(std::size_t i) const { return static_cast<double>(i) * dx; }
    [[nodiscard]] double y(std::size_t j) const { return static_cast<double>(j) * dy; }
    [[nodiscard]] double z(std::size_t l) const { return static_cast<double>(l) * dz; }
    [[nodiscard]] double lx() const { return x(nx - 1); }
    [[nodiscard]] double ly() const { return y(ny - 1); }
    [[nodiscard]] double lz() const { return z(nz - 1); }

    friend bool operator==(const Grid3D&, const Grid3D&) = default;
};

/// Water-volume bookkeeping recorded by the solver so the balance can be
/// checked from the saved series alone.
struct MassLedger {
    double initial_storage = 0.0;       // integral of theta dV at the initial condition
    std::vector<double> interval_inflow;  // boundary inflow volume over (t_{k-1}, t_k]
};

/// psi on a structured space-time grid, values laid out as (time, x, y, z)
/// row-major.
struct FieldSeries {
    Grid3D grid;
    std::vector<double> times;
    std::vector<double> values;
    VanGenuchtenParams vg;
    std::string bc_description;
    MassLedger ledger;

    [[nodiscard]] std::size_t time_steps() const { return times.size(); }
    [[nodiscard]] std::size_t index(std::size_t k, std::size_t i, std::size_t j, std::size_t l) const
    {
        return k * grid.nodes() + grid.index(i, j, l);
    }
    [[nodiscard]] double at(std::size_t k, std::size_t i, std::size_t j, std::size_t l) const
    {
        return values[index(k, i, j, l)];
    }
    [[nodiscard]] std::span<const double> snapshot(std::size_t k) const
    {
        return std::span<const double>(values).subspan(k * grid.nodes(), grid.nodes());
    }
    [[nodiscard]] SpaceTimePoint point(std::size_t k, std::size_t i, std::size_t j, std::size_t l) const
    {
        return {grid.x(i), grid.y(j), grid.z(l), times[k]};
    }
    [[nodiscard]] DomainBox box() const
    {
        DomainBox b;
        b.lo = {0.0, 0.0, 0.0, times.empty() ? 0.0 : times.front()};
        b.hi = {grid.lx(), grid.ly(), grid.lz(), times.empty() ? 1.0 : times.back()};
        if (b.hi[3] <= b.lo[3]) b.hi[3] = b.lo[3] + 1.0;
        return b;
    }

    /// Throws if shapes disagree or a value is not finite.
    void validate() const
    {
        grid.validate();
        if (values.size() != times.size() * grid.nodes())
            throw Error("field series holds " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(times.size() * grid.nodes()));
        for (std::size_t k = 1; k < times.size(); ++k)
            if (!(times[k] > times[k - 1])) throw Error("field series times are not strictly increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw NumericError("field series holds a non-finite value");
    }
};

}  // namespace pdl
