#pragma once

// The ellipse x^2/a^2 + y^2/b^2 = 1, its confocal caustics and the
// natural parameterizations in which the billiard dynamics is a shift.

#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "ellflow/elliptic.hpp"
#include "ellflow/errors.hpp"

namespace ellflow {

using Point = Eigen::Vector2d;

struct EllipseTable {
    double a = 2.0;
    double b = 1.0;
    double c = std::sqrt(3.0);
};

/// A convex confocal caustic C_lambda. `lambda_gap` is b - lambda carried
/// separately so that caustics within 1e-13 of the separatrix stay usable.
struct CausticData {
    double lambda = 0.0;
    double lambda_gap = 0.0;
    EllipticModulus modulus;
    double delta = 0.0;
    double zeta = 0.0;
    double rho = 0.0;
};

struct Resonance {
    int m = 1;
    int n = 3;
};

struct HyperbolicData {
    double h = 0.0;
    double eigenvalue = 1.0;
};

struct EllipticCoords {
    double mu = 0.0;
    double phi = 0.0;
};

inline EllipseTable make_table(double a, double b) {
    if (!(b > 0.0 && b < a) || !std::isfinite(a))
        throw domain_error("ellipse table requires 0 < b < a, got a=" + std::to_string(a) +
                           " b=" + std::to_string(b));
    return {a, b, std::sqrt((a - b) * (a + b))};
}

inline Resonance make_resonance(int m, int n) {
    if (m < 1 || 2 * m >= n)
        throw domain_error("resonance requires 1 <= m < n/2, got (" + std::to_string(m) + "," +
                           std::to_string(n) + ")");
    if (std::gcd(m, n) != 1)
        throw domain_error("resonance requires gcd(m, n) = 1, got (" + std::to_string(m) + "," +
                           std::to_string(n) + ")");
    return {m, n};
}

namespace detail {

// Shift and rotation number from a caustic whose lambda, b - lambda and
// modulus are already set. Of the two half-shifts
//   sn(delta/2) = lambda/b,  sn(zeta/2) = sqrt(a^2 - lambda^2)/a,
// the one with the smaller sine is integrated and the other follows from
// delta + zeta = 2K, so neither end of (0, b) suffers cancellation.
inline CausticData finish_caustic(const EllipseTable& table, CausticData cd) {
    const double K = cd.modulus.K;
    const double sin_half_delta = cd.lambda / table.b;
    const double sin_half_zeta = std::sqrt((table.a - cd.lambda) * (table.a + cd.lambda)) / table.a;
    if (sin_half_delta <= sin_half_zeta) {
        cd.delta = 2.0 * incomplete_F(std::asin(sin_half_delta), cd.modulus);
        cd.zeta = 2.0 * K - cd.delta;
    } else {
        cd.zeta = 2.0 * incomplete_F(std::asin(sin_half_zeta), cd.modulus);
        cd.delta = 2.0 * K - cd.zeta;
    }
    cd.rho = cd.delta / (4.0 * K);
    return cd;
}

} // namespace detail

/// Caustic from its parameter lambda in (0, b), with k^2 = c^2/(a^2 - lambda^2).
inline CausticData caustic_from_lambda(const EllipseTable& table, double lambda) {
    if (!(lambda > 0.0 && lambda < table.b))
        throw domain_error("caustic parameter must lie in (0, b); got " + std::to_string(lambda));
    CausticData cd;
    cd.lambda = lambda;
    cd.lambda_gap = table.b - lambda;
    const double kc2 = (table.b - lambda) * (table.b + lambda) / ((table.a - lambda) * (table.a + lambda));
    cd.modulus = make_modulus_complementary(std::sqrt(kc2));
    return detail::finish_caustic(table, cd);
}

/// Caustic from the complementary modulus kc in (0, b/a). Inverting
/// kc^2 = (b^2 - lambda^2)/(a^2 - lambda^2) gives
///   lambda^2 = (b^2 - a^2 kc^2) / k^2,   b^2 - lambda^2 = kc^2 c^2 / k^2.
inline CausticData caustic_from_complementary_modulus(const EllipseTable& table, double kc) {
    if (!(kc > 0.0 && kc < table.b / table.a))
        throw domain_error("complementary modulus must lie in (0, b/a); got " + std::to_string(kc));
    CausticData cd;
    cd.modulus = make_modulus_complementary(kc);
    const double k2 = (1.0 - kc) * (1.0 + kc);
    cd.lambda = std::sqrt((table.b - table.a * kc) * (table.b + table.a * kc) / k2);
    cd.lambda_gap = kc * kc * table.c * table.c / (k2 * (table.b + cd.lambda));
    return detail::finish_caustic(table, cd);
}

/// The unique convex caustic with rotation number m/n. rho is increasing
/// in lambda, hence decreasing in kc; the bisection runs over log(kc) so the
/// caustics of near-half resonances, which sit exponentially close to b,
/// are resolved to full precision.
inline CausticData resonant_caustic(const EllipseTable& table, const Resonance& res) {
    const Resonance r = make_resonance(res.m, res.n);
    const double target = static_cast<double>(r.m) / r.n;
    double lo = std::log(1e-300);                       // rho close to 1/2
    double hi = std::log(table.b / table.a) - 1e-15;    // rho close to 0
    if (caustic_from_complementary_modulus(table, std::exp(lo)).rho < target)
        throw numerical_error("resonant_caustic: rotation number " + std::to_string(target) +
                              " lies beyond the representable caustic range");
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (caustic_from_complementary_modulus(table, std::exp(mid)).rho > target)
            lo = mid;
        else
            hi = mid;
    }
    const CausticData lower = caustic_from_complementary_modulus(table, std::exp(lo));
    const CausticData upper = caustic_from_complementary_modulus(table, std::exp(hi));
    return std::abs(lower.rho - target) <= std::abs(upper.rho - target) ? lower : upper;
}

/// Subharmonic parameterization (a sn t, b cn t).
inline Point point_t(const EllipseTable& table, const CausticData& caustic, double t) {
    const JacobiTriple j = jacobi(t, caustic.modulus);
    return {table.a * j.sn, table.b * j.cn};
}

/// Homoclinic parameterization (a tanh s, b sech s) of the upper half.
inline Point point_s(const EllipseTable& table, double s) {
    return {table.a * std::tanh(s), table.b / std::cosh(s)};
}

/// Tangency of the line n.x = w to C_lambda is A n_x^2 + B n_y^2 = w^2 with
/// A = a^2 - lambda^2, B = b^2 - lambda^2 and n a unit normal. The returned
/// residual is (A n_x^2 + B n_y^2 - w^2)/a^2: zero on tangency, positive for
/// a secant line.
inline double line_tangency_residual(const EllipseTable& table, const CausticData& caustic,
                                     const Point& p, const Point& q) {
    const Point d = (q - p).normalized();
    const Point n(-d.y(), d.x());
    const double w = n.dot(p);
    const double lam = caustic.lambda;
    const double A = (table.a - lam) * (table.a + lam);
    const double B = caustic.lambda_gap * (table.b + lam);
    return (A * n.x() * n.x() + B * n.y() * n.y() - w * w) / (table.a * table.a);
}

/// Residual for the chord from point_t(t) to point_t(t + shift).
inline double tangency_residual(const EllipseTable& table, const CausticData& caustic, double t,
                                double shift) {
    return line_tangency_residual(table, caustic, point_t(table, caustic, t),
                                  point_t(table, caustic, t + shift));
}

inline double tangency_residual(const EllipseTable& table, const CausticData& caustic, double t) {
    return tangency_residual(table, caustic, t, caustic.delta);
}

inline HyperbolicData characteristic_exponent(const EllipseTable& table) {
    HyperbolicData hd;
    hd.h = 2.0 * std::log((table.a + table.c) / table.b);
    hd.eigenvalue = std::exp(hd.h);
    return hd;
}

/// Distance from the focus (-c, 0) to the line through point_s(s) and
/// -point_s(s + shift).
inline double focal_residual(const EllipseTable& table, double s, double shift) {
    const Point p = point_s(table, s);
    const Point q = -point_s(table, s + shift);
    const Point d = (q - p).normalized();
    const Point f(-table.c, 0.0);
    const Point v = f - p;
    return std::abs(d.x() * v.y() - d.y() * v.x());
}

inline double focal_residual(const EllipseTable& table, double s) {
    return focal_residual(table, s, characteristic_exponent(table).h);
}

/// Elliptic coordinates x = c cosh(mu) sin(phi), y = c sinh(mu) cos(phi).
/// mu comes from the focal-distance sum, phi from atan2 so it lies in (-pi, pi].
inline EllipticCoords elliptic_coords(const EllipseTable& table, const Point& p) {
    const double c = table.c;
    const double d_plus = std::hypot(p.x() - c, p.y());
    const double d_minus = std::hypot(p.x() + c, p.y());
    const double ch = 0.5 * (d_plus + d_minus) / c;
    if (ch - 1.0 < 1e-12)
        throw domain_error("elliptic_coords: point lies on the focal segment");
    const double mu = std::acosh(ch);
    const double sh = std::sinh(mu);
    return {mu, std::atan2(p.x() * sh, p.y() * ch)};
}

inline Point from_elliptic_coords(const EllipseTable& table, const EllipticCoords& ec) {
    return {table.c * std::cosh(ec.mu) * std::sin(ec.phi), table.c * std::sinh(ec.mu) * std::cos(ec.phi)};
}

/// mu0 of the table boundary, cosh(mu0) = a/c.
inline double boundary_mu(const EllipseTable& table) { return std::asinh(table.b / table.c); }

/// Boundary parameter phi of the point (a sin(phi), b cos(phi)) reached at
/// time t of the subharmonic parameterization, continuous in t.
inline double phi_of_t(const CausticData& caustic, double t) { return amplitude(t, caustic.modulus); }

} // namespace ellflow
