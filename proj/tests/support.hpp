#pragma once

// Helpers shared by the test binaries: random fixtures and the
// finite-difference oracles. Oracles here only use value evaluations, never
// the derivative machinery they are checked against.

#include <pdl/network.hpp>

#include <cmath>
#include <functional>
#include <random>

namespace pdl::testing {

inline DomainBox default_box()
{
    DomainBox b;
    b.lo = {0.0, 0.0, 0.0, 0.03};
    b.hi = {40.0, 40.0, 20.0, 0.9};
    return b;
}

inline NetworkParams random_network(std::uint64_t seed, Architecture arch = {})
{
    Scaling s;
    s.box = default_box();
    s.out_shift = -55.0;
    s.out_scale = 45.0;
    NetworkParams p = init(arch, seed, s);
    // Non-zero biases so every code path sees them.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (std::size_t l = 0; l < arch.layer_count(); ++l)
        for (std::size_t r = 0; r < arch.fan_out(l); ++r) p.values[arch.bias_offset(l) + r] = u(rng);
    return p;
}

inline SpaceTimePoint random_point(std::mt19937_64& rng, const DomainBox& b = default_box())
{
    std::array<double, 4> c{};
    for (std::size_t i = 0; i < 4; ++i) c[i] = std::uniform_real_distribution<double>(b.lo[i], b.hi[i])(rng);
    return {c[0], c[1], c[2], c[3]};
}

inline SpaceTimePoint shifted(SpaceTimePoint p, std::size_t dir, double h)
{
    switch (dir) {
    case 0: p.x += h; break;
    case 1: p.y += h; break;
    case 2: p.z += h; break;
    default: p.t += h; break;
    }
    return p;
}

/// Richardson-extrapolated central first difference along `dir`.
inline double fd_first(const std::function<double(const SpaceTimePoint&)>& f, const SpaceTimePoint& p,
                       std::size_t dir, double h)
{
    auto d = [&](double s) { return (f(shifted(p, dir, s)) - f(shifted(p, dir, -s))) / (2.0 * s); };
    return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

/// Richardson-extrapolated central second difference along `dir`.
inline double fd_second(const std::function<double(const SpaceTimePoint&)>& f, const SpaceTimePoint& p,
                        std::size_t dir, double h)
{
    const double f0 = f(p);
    auto d = [&](double s) { return (f(shifted(p, dir, s)) - 2.0 * f0 + f(shifted(p, dir, -s))) / (s * s); };
    return (4.0 * d(h / 2.0) - d(h)) / 3.0;
}

/// |a - b| <= max(rel |b|, abs_floor)
inline bool close(double a, double b, double rel, double abs_floor = 1e-8)
{
    return std::abs(a - b) <= std::max(rel * std::abs(b), abs_floor);
}

}  // namespace pdl::testing
