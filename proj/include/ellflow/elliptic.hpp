#pragma once

// Real-argument Jacobi elliptic functions and the incomplete/complete
// elliptic integrals of the first kind.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "ellflow/errors.hpp"

namespace ellflow {

/// Jacobi modulus together with its complementary modulus and both complete
/// integrals. `kc` is stored explicitly because computing it from `k` near
/// k = 1 throws away most of its digits.
struct EllipticModulus {
    double k = 0.0;
    double kc = 1.0;
    double K = std::numbers::pi / 2;
    double Kprime = std::numeric_limits<double>::infinity();
};

struct JacobiTriple {
    double sn = 0.0;
    double cn = 1.0;
    double dn = 1.0;
};

/// sn, cn, dn evaluated at u + iK'.
struct ImagShiftTriple {
    std::complex<double> sn_shift;
    std::complex<double> cn_shift;
    std::complex<double> dn_shift;
};

namespace detail {

// Arithmetic-geometric mean; stops at 1e-16 relative agreement.
inline double agm(double a, double b) {
    for (int i = 0; i < 64; ++i) {
        if (std::abs(a - b) <= 1e-16 * a) break;
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return 0.5 * (a + b);
}

inline double agm_quarter_period(double kc) {
    if (kc == 0.0) return std::numeric_limits<double>::infinity();
    return std::numbers::pi / (2.0 * agm(1.0, kc));
}

// Carlson's symmetric integral R_F(x, y, z) by duplication.
inline double carlson_rf(double x, double y, double z) {
    constexpr double errtol = 8e-4;
    for (int i = 0; i < 200; ++i) {
        const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
        const double lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        const double ave = (x + y + z) / 3.0;
        const double dx = (ave - x) / ave, dy = (ave - y) / ave, dz = (ave - z) / ave;
        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < errtol) {
            const double e2 = dx * dy - dz * dz;
            const double e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / std::sqrt(ave);
        }
    }
    throw numerical_error("carlson_rf: duplication did not converge");
}

} // namespace detail

/// Modulus from k in [0, 1).
inline EllipticModulus make_modulus(double k) {
    if (!(k >= 0.0 && k < 1.0))
        throw domain_error("elliptic modulus must satisfy 0 <= k < 1, got " + std::to_string(k));
    EllipticModulus m;
    m.k = k;
    m.kc = std::sqrt((1.0 - k) * (1.0 + k));
    m.K = detail::agm_quarter_period(m.kc);
    m.Kprime = detail::agm_quarter_period(k);
    return m;
}

/// Modulus from the complementary modulus kc in (0, 1]. This is the
/// well-conditioned entry point when k is within a few ulps of 1.
inline EllipticModulus make_modulus_complementary(double kc) {
    if (!(kc > 0.0 && kc <= 1.0))
        throw domain_error("complementary modulus must satisfy 0 < kc <= 1, got " + std::to_string(kc));
    EllipticModulus m;
    m.kc = kc;
    m.k = std::sqrt((1.0 - kc) * (1.0 + kc));
    m.K = detail::agm_quarter_period(kc);
    m.Kprime = detail::agm_quarter_period(m.k);
    return m;
}

/// Complete elliptic integral of the first kind, K(k) = pi / (2 AGM(1, kc)).
inline double complete_K(double k) { return make_modulus(k).K; }

/// Incomplete integral F(phi, k). Arguments outside [-pi/2, pi/2] use
/// F(phi + pi) = F(phi) + 2K.
inline double incomplete_F(double phi, const EllipticModulus& mod) {
    const double turns = std::nearbyint(phi / std::numbers::pi);
    const double r = phi - turns * std::numbers::pi;
    const double s = std::sin(r), c = std::cos(r);
    const double principal =
        s == 0.0 ? 0.0 : s * detail::carlson_rf(c * c, c * c + mod.kc * mod.kc * s * s, 1.0);
    return principal + 2.0 * turns * mod.K;
}

inline double incomplete_F(double phi, double k) { return incomplete_F(phi, make_modulus(k)); }

namespace detail {

// Descending Landen (AGM) recursion for the amplitude. `t` is assumed
// already reduced to [-2K, 2K].
inline double landen_amplitude(double t, const EllipticModulus& mod) {
    constexpr int max_levels = 24;
    double a[max_levels + 1];
    double c[max_levels + 1];
    a[0] = 1.0;
    c[0] = mod.k;
    double b = mod.kc;
    int n = 0;
    while (n < max_levels && std::abs(c[n]) > 1e-17 * a[n]) {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = c[n] * c[n] / (4.0 * a[n + 1]);
        b = std::sqrt(a[n] * b);
        ++n;
    }
    double phi = std::ldexp(a[n] * t, n);
    for (int i = n; i >= 1; --i) phi = 0.5 * (phi + std::asin(c[i] / a[i] * std::sin(phi)));
    return phi;
}

} // namespace detail

/// Amplitude am(t, k), continuous in t with am(t + 4K) = am(t) + 2 pi.
inline double amplitude(double t, const EllipticModulus& mod) {
    if (mod.k == 0.0) return t;
    const double period = 4.0 * mod.K;
    if (!std::isfinite(period)) return std::copysign(2.0 * std::atan(std::tanh(0.5 * std::abs(t))), t);
    const double turns = std::nearbyint(t / period);
    const double r = t - turns * period;
    return detail::landen_amplitude(r, mod) + 2.0 * std::numbers::pi * turns;
}

/// sn, cn, dn at real t. The argument is reduced modulo 4K before the
/// Landen recursion, and dn is formed as sqrt(kc^2 + k^2 cn^2) so that it
/// keeps full relative accuracy near its minimum kc.
inline JacobiTriple jacobi(double t, const EllipticModulus& mod) {
    if (mod.kc == 0.0) {
        const double sech = 1.0 / std::cosh(t);
        return {std::tanh(t), sech, sech};
    }
    const double phi = mod.k == 0.0 ? t : detail::landen_amplitude(std::remainder(t, 4.0 * mod.K), mod);
    JacobiTriple r;
    r.sn = std::sin(phi);
    r.cn = std::cos(phi);
    r.dn = std::sqrt(mod.kc * mod.kc + mod.k * mod.k * r.cn * r.cn);
    return r;
}

inline JacobiTriple jacobi(double t, double k) { return jacobi(t, make_modulus(k)); }

/// Quarter-period shift identities:
///   sn(u + iK') = 1 / (k sn u),
///   cn(u + iK') = -i dn u / (k sn u),
///   dn(u + iK') = -i cn u / sn u.
inline ImagShiftTriple jacobi_imag_shift(double u, const EllipticModulus& mod) {
    const JacobiTriple j = jacobi(u, mod);
    if (std::abs(j.sn) < 1e-14 || mod.k == 0.0)
        throw domain_error("jacobi_imag_shift: u + iK' is a pole (sn u = 0)");
    using namespace std::complex_literals;
    ImagShiftTriple r;
    r.sn_shift = 1.0 / (mod.k * j.sn);
    r.cn_shift = -1i * (j.dn / (mod.k * j.sn));
    r.dn_shift = -1i * (j.cn / j.sn);
    return r;
}

} // namespace ellflow
