#pragma once

/// Shared vocabulary: space-time points, domain boxes, derivative jets,
/// error types and the reduction helpers every loss uses.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdl {

/// Base of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed config, inconsistent options, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced during evaluation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Picard iteration failed to reach tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

struct SpaceTimePoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double t = 0.0;

    [[nodiscard]] std::array<double, 4> as_array() const { return {x, y, z, t}; }
    [[nodiscard]] bool finite() const
    {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(t);
    }
};

/// Axis-aligned space-time box, used for input normalization and
/// collocation bounds.
struct DomainBox {
    std::array<double, 4> lo{0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> hi{1.0, 1.0, 1.0, 1.0};

    [[nodiscard]] bool contains(const SpaceTimePoint& p, double slack = 1e-12) const
    {
        const auto c = p.as_array();
        for (std::size_t i = 0; i < 4; ++i) {
            const double pad = slack * std::max(1.0, std::abs(hi[i] - lo[i]));
            if (c[i] < lo[i] - pad || c[i] > hi[i] + pad) return false;
        }
        return true;
    }
};

/// Value of a scalar field plus the derivative set the residual consumes:
/// d1 over (x, y, z, t) and the pure second derivatives over (x, y, z).
struct InputJet {
    double value = 0.0;
    std::array<double, 4> d1{};
    std::array<double, 3> d2_diag{};

    [[nodiscard]] bool finite() const
    {
        if (!std::isfinite(value)) return false;
        for (double v : d1)
            if (!std::isfinite(v)) return false;
        for (double v : d2_diag)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Summation in a fixed pairwise tree over the given order.
inline double pairwise_sum(std::span<const double> v)
{
    if (v.empty()) return 0.0;
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Pairwise sum over the terms in sorted order, so the result does not
/// depend on the order the terms were produced in.
inline double canonical_sum(std::vector<double> terms)
{
    std::sort(terms.begin(), terms.end());
    return pairwise_sum(terms);
}

inline double canonical_mean(std::vector<double> terms)
{
    const auto n = static_cast<double>(terms.size());
    return canonical_sum(std::move(terms)) / n;
}

}  // namespace pdl
