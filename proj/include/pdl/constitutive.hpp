#pragma once

/// Van Genuchten water-retention curve theta(psi) and hydraulic conductivity
/// K(psi) with closed-form first derivatives.
///
/// With a = alpha |psi|, P = 1 + a^n, m = 1 - 1/n:
///
///   theta(psi)  = theta_r + (theta_s - theta_r) P^-m
///   K(psi)      = K_s (1 - a^(n-1) P^-m)^2 P^(-m/2)
///   dtheta/dpsi = (theta_s - theta_r) m n alpha a^(n-1) P^(-m-1)
///   dK/dpsi     = alpha K_s P^(-m/2) B [2 m n a^(n-2) P^(-m-1) + (m n / 2) a^(n-1) B / P]
///
/// where B = 1 - a^(n-1) P^-m. The dK/dpsi form uses (n - 1) = m n to merge
/// the two terms of d/da(a^(n-1) P^-m) into m n a^(n-2) P^(-m-1).
///
/// For psi >= 0 the soil is saturated: theta = theta_s, K = K_s, both
/// derivatives are zero.
///
/// All functions are templates over the scalar type so they can be
/// evaluated on `Jet2` / `Var` to obtain higher derivatives.

#include <pdl/autodiff.hpp>
#include <pdl/core.hpp>

#include <cmath>
#include <string>

namespace pdl {

struct VanGenuchtenParams {
    double theta_r = 0.102;
    double theta_s = 0.368;
    double alpha = 0.0335;  // 1/cm
    double n = 2.0;
    double k_s = 0.00922 * 3600.0;  // cm/h (0.00922 cm/s)

    [[nodiscard]] double m() const { return 1.0 - 1.0 / n; }

    /// Throws ConfigError naming the first violated constraint.
    void validate() const
    {
        auto fail = [](const std::string& what) { throw ConfigError("van Genuchten parameters: " + what); };
        if (!(theta_r >= 0.0)) fail("theta_r must be >= 0");
        if (!(theta_r < theta_s)) fail("theta_r must be < theta_s");
        if (!(theta_s <= 1.0)) fail("theta_s must be <= 1");
        if (!(alpha > 0.0)) fail("alpha must be > 0");
        if (!(n > 1.0)) fail("n must be > 1");
        if (!(k_s > 0.0)) fail("K_s must be > 0");
    }
};

namespace vg {

template <typename S>
S theta(const VanGenuchtenParams& p, const S& psi)
{
    using std::pow;
    if (!(value_of(psi) < 0.0)) return S(p.theta_s);
    const S a = -psi * p.alpha;
    const S big_p = pow(a, p.n) + 1.0;
    return pow(big_p, -p.m()) * (p.theta_s - p.theta_r) + p.theta_r;
}

template <typename S>
S k(const VanGenuchtenParams& p, const S& psi)
{
    using std::pow;
    if (!(value_of(psi) < 0.0)) return S(p.k_s);
    const double m = p.m();
    const S a = -psi * p.alpha;
    const S big_p = pow(a, p.n) + 1.0;
    const S b = 1.0 - pow(a, p.n - 1.0) * pow(big_p, -m);
    return b * b * pow(big_p, -0.5 * m) * p.k_s;
}

template <typename S>
S dtheta_dpsi(const VanGenuchtenParams& p, const S& psi)
{
    using std::pow;
    if (!(value_of(psi) < 0.0)) return S(0.0);
    const double m = p.m();
    const S a = -psi * p.alpha;
    const S big_p = pow(a, p.n) + 1.0;
    return pow(a, p.n - 1.0) * pow(big_p, -m - 1.0) * ((p.theta_s - p.theta_r) * m * p.n * p.alpha);
}

template <typename S>
S dk_dpsi(const VanGenuchtenParams& p, const S& psi)
{
    using std::pow;
    if (!(value_of(psi) < 0.0)) return S(0.0);
    const double m = p.m();
    const double mn = m * p.n;
    const S a = -psi * p.alpha;
    const S big_p = pow(a, p.n) + 1.0;
    const S w = pow(a, p.n - 1.0);
    const S b = 1.0 - w * pow(big_p, -m);
    const S term_b = pow(a, p.n - 2.0) * pow(big_p, -m - 1.0) * (2.0 * mn);
    const S term_p = w * b / big_p * (0.5 * mn);
    return pow(big_p, -0.5 * m) * b * (term_b + term_p) * (p.alpha * p.k_s);
}

/// Effective saturation (theta - theta_r) / (theta_s - theta_r) = P^-m.
template <typename S>
S effective_saturation(const VanGenuchtenParams& p, const S& psi)
{
    using std::pow;
    if (!(value_of(psi) < 0.0)) return S(1.0);
    const S a = -psi * p.alpha;
    return pow(pow(a, p.n) + 1.0, -p.m());
}

/// Values and derivatives up to the order the residual backward pass needs.
struct Response {
    double theta = 0.0;
    double dtheta = 0.0;
    double d2theta = 0.0;
    double k = 0.0;
    double dk = 0.0;
    double d2k = 0.0;
};

/// theta', K, K' and their psi-derivatives in one call.
inline Response response(const VanGenuchtenParams& p, double psi)
{
    using J = Jet2<double>;
    const J x = J::variable(psi);
    const J th = theta(p, x);
    const J dth = dtheta_dpsi(p, x);
    const J dk = dk_dpsi(p, x);
    Response r;
    r.theta = th.v;
    r.dtheta = dth.v;
    r.d2theta = dth.d;
    r.k = k(p, psi);
    r.dk = dk.v;
    r.d2k = dk.d;
    return r;
}

}  // namespace vg
}  // namespace pdl
