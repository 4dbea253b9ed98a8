#pragma once

// Billiard map on a convex table given by a clockwise parameterization
// phi -> q(phi): impacts, reflections, conserved caustics, Birkhoff
// periodic orbits, the major-axis two-periodic orbit and its invariant
// manifolds.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "ellflow/conic.hpp"
#include "ellflow/curvature_flow.hpp"
#include "ellflow/elliptic.hpp"
#include "ellflow/errors.hpp"

namespace ellflow {

template <class B>
concept ConvexBoundary = requires(const B& b, double phi) {
    { b.point(phi) } -> std::convertible_to<Point>;
    { b.jet(phi) } -> std::convertible_to<BoundaryJet>;
    { b.table() } -> std::convertible_to<EllipseTable>;
};

/// Impact parameter and outgoing unit direction. The map keeps phi in
/// (-pi, pi] and counts completed turns separately, so long trajectories do
/// not lose resolution in phi while windings stay available.
struct PhaseState {
    double phi = 0.0;
    Point direction = Point(0.0, -1.0);
    long turns = 0;

    double unwrapped() const { return phi + 2.0 * std::numbers::pi * static_cast<double>(turns); }
};

inline double cross(const Point& u, const Point& v) { return u.x() * v.y() - u.y() * v.x(); }

inline double wrap_angle(double phi) {
    const double r = std::remainder(phi, 2.0 * std::numbers::pi);
    return r <= -std::numbers::pi ? r + 2.0 * std::numbers::pi : r;
}

/// Unit tangent in the direction of increasing phi and the inward normal
/// (tangent rotated clockwise, since the parameterization runs clockwise).
template <ConvexBoundary B>
std::pair<Point, Point> tangent_frame(const B& boundary, double phi) {
    const Point t = boundary.jet(phi).dq.normalized();
    return {t, Point(t.y(), -t.x())};
}

/// Direction with cosine p against the tangent, pointing into the table.
template <ConvexBoundary B>
PhaseState state_from_cosine(const B& boundary, double phi, double p) {
    if (!(std::abs(p) < 1.0)) throw domain_error("phase cosine must satisfy |p| < 1");
    const auto [t, n] = tangent_frame(boundary, phi);
    return {phi, p * t + std::sqrt((1.0 - p) * (1.0 + p)) * n};
}

template <ConvexBoundary B>
double cosine_of(const B& boundary, const PhaseState& s) {
    return s.direction.dot(tangent_frame(boundary, s.phi).first);
}

/// Reflection of a direction about the boundary tangent at phi.
template <ConvexBoundary B>
Point reflect(const B& boundary, double phi, const Point& d) {
    const Point t = tangent_frame(boundary, phi).first;
    return 2.0 * d.dot(t) * t - d;
}

namespace detail {

// Forward parameter increment sigma in (0, 2 pi) at which the ray from
// q(phi) along d meets the boundary again. The scan uses
//   H(sigma) = cross(d, q(phi+sigma) - q(phi)) / (sigma (2 pi - sigma)),
// which is positive near 0 and negative near 2 pi for an inward d, so a
// sign change always exists; it is then refined by Newton on the
// unnormalized cross product, falling back to bisection.
template <ConvexBoundary B>
double chord_increment(const B& boundary, double phi, const Point& d) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    constexpr int scan = 64;
    phi = wrap_angle(phi);   // keeps phi + sigma resolved to ~1e-16 after many turns
    const Point p = boundary.point(phi);
    const double h0 = cross(d, boundary.jet(phi).dq);
    if (!(h0 > 0.0))
        throw numerical_error("billiard_step: direction does not enter the table at phi = " + std::to_string(phi));
    auto G = [&](double s) { return cross(d, boundary.point(phi + s) - p); };
    double lo = 0.0, hi = two_pi;
    for (int i = 1; i < scan; ++i) {
        const double s = two_pi * i / scan;
        if (G(s) <= 0.0) {
            hi = s;
            break;
        }
        lo = s;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double g = G(x);
        if (g > 0.0)
            lo = x;
        else
            hi = x;
        const double dg = cross(d, boundary.jet(phi + x).dq);
        double next = dg != 0.0 ? x - g / dg : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-14 || hi - lo <= 1e-14) return next;
        x = next;
    }
    throw numerical_error("billiard_step: impact search did not converge from phi = " + std::to_string(phi) +
                          ", bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

} // namespace detail

/// Next impact and reflected direction.
template <ConvexBoundary B>
PhaseState billiard_step(const B& boundary, const PhaseState& state) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double phi0 = wrap_angle(state.phi);
    long turns = state.turns + std::lround((state.phi - phi0) / two_pi);
    const double sigma = detail::chord_increment(boundary, phi0, state.direction);
    double phi1 = phi0 + sigma;
    const double len = (boundary.point(phi1) - boundary.point(phi0)).norm();
    if (!(len > 1e-12)) throw numerical_error("billiard_step: chord length below 1e-12");
    if (phi1 > std::numbers::pi) {
        phi1 -= two_pi;
        ++turns;
    }
    return {phi1, reflect(boundary, phi1, state.direction), turns};
}

/// Inverse map, as T f T with the time reversal T(phi, d) = (phi, -reflect(d)).
/// The returned unwrapped phi lies below the input by the chord increment.
template <ConvexBoundary B>
PhaseState inverse_step(const B& boundary, const PhaseState& state) {
    const PhaseState rev{state.phi, -reflect(boundary, state.phi, state.direction), state.turns};
    const PhaseState fwd = billiard_step(boundary, rev);
    return {fwd.phi, -reflect(boundary, fwd.phi, fwd.direction), fwd.turns - 1};
}

/// (phi, p) -> (phi', p') with p the cosine against the forward tangent.
template <ConvexBoundary B>
Eigen::Vector2d step_phi_p(const B& boundary, const Eigen::Vector2d& z, bool inverse = false) {
    const PhaseState s = state_from_cosine(boundary, z.x(), z.y());
    const PhaseState n = inverse ? inverse_step(boundary, s) : billiard_step(boundary, s);
    return {n.unwrapped(), cosine_of(boundary, n)};
}

/// Jacobian of `iterates` steps in (phi, p) by central differences with
/// relative step 1e-6. Kept as a cross-check of the exact Jacobian below.
template <ConvexBoundary B>
Eigen::Matrix2d jacobian_phi_p_fd(const B& boundary, const Eigen::Vector2d& z, int iterates = 1) {
    auto F = [&](Eigen::Vector2d w) {
        for (int i = 0; i < iterates; ++i) w = step_phi_p(boundary, w);
        return w;
    };
    Eigen::Matrix2d J;
    const double hs[2] = {1e-6 * std::max(1.0, std::abs(z.x())), 1e-6};
    for (int k = 0; k < 2; ++k) {
        Eigen::Vector2d zp = z, zm = z;
        zp[k] += hs[k];
        zm[k] -= hs[k];
        J.col(k) = (F(zp) - F(zm)) / (2.0 * hs[k]);
    }
    return J;
}

namespace detail {

// Unit tangent and its phi-derivative.
inline std::pair<Point, Point> unit_tangent_jet(const BoundaryJet& j) {
    const double speed = j.dq.norm();
    const Point t = j.dq / speed;
    return {t, (j.ddq - t * t.dot(j.ddq)) / speed};
}

} // namespace detail

/// Exact Jacobian of one step in (phi, p), by implicit differentiation of
/// the impact condition cross(d, q(phi') - q(phi)) = 0 and of p' = d . T(phi').
/// Returns the image point through `image` when given.
template <ConvexBoundary B>
Eigen::Matrix2d step_jacobian_phi_p(const B& boundary, const Eigen::Vector2d& z, Eigen::Vector2d* image = nullptr) {
    const double p0 = z.y();
    const double r0 = std::sqrt((1.0 - p0) * (1.0 + p0));
    const BoundaryJet j0 = boundary.jet(z.x());
    const auto [t0, dt0] = detail::unit_tangent_jet(j0);
    const Point n0(t0.y(), -t0.x()), dn0(dt0.y(), -dt0.x());
    const Point d = p0 * t0 + r0 * n0;
    const double phi1 = z.x() + detail::chord_increment(boundary, z.x(), d);
    const BoundaryJet j1 = boundary.jet(phi1);
    const auto [t1, dt1] = detail::unit_tangent_jet(j1);
    const Point v = j1.q - j0.q;
    const Point dd_dphi = p0 * dt0 + r0 * dn0;
    const Point dd_dp = t0 - (p0 / r0) * n0;
    const double F1 = cross(d, j1.dq);
    const double dphi1_dphi = -(cross(dd_dphi, v) - cross(d, j0.dq)) / F1;
    const double dphi1_dp = -cross(dd_dp, v) / F1;
    const double dT = d.dot(dt1);
    Eigen::Matrix2d J;
    J << dphi1_dphi, dphi1_dp, dd_dphi.dot(t1) + dT * dphi1_dphi, dd_dp.dot(t1) + dT * dphi1_dp;
    if (image) *image = {phi1, d.dot(t1)};
    return J;
}

/// Exact Jacobian of `iterates` steps in (phi, p).
template <ConvexBoundary B>
Eigen::Matrix2d jacobian_phi_p(const B& boundary, Eigen::Vector2d z, int iterates = 1) {
    Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
    for (int i = 0; i < iterates; ++i) {
        Eigen::Vector2d next;
        J = step_jacobian_phi_p(boundary, z, &next) * J;
        z = next;
    }
    return J;
}

/// Jacobian of one step in Birkhoff coordinates (arclength, cosine).
template <ConvexBoundary B>
Eigen::Matrix2d jacobian_birkhoff(const B& boundary, const PhaseState& state) {
    const Eigen::Vector2d z(state.phi, cosine_of(boundary, state));
    const Eigen::Vector2d w = step_phi_p(boundary, z);
    const Eigen::Matrix2d J = jacobian_phi_p(boundary, z);
    const double speed0 = boundary.jet(z.x()).dq.norm();
    const double speed1 = boundary.jet(w.x()).dq.norm();
    Eigen::Matrix2d out = J;
    out.row(0) *= speed1;
    out.col(0) /= speed0;
    return out;
}

/// Arclength s(phi) from phi = 0 by composite Gauss-Legendre on equal panels.
class ArclengthTable {
public:
    template <ConvexBoundary B>
    explicit ArclengthTable(const B& boundary, int panels = 256) : panel_(2.0 * std::numbers::pi / panels) {
        speed_ = [boundary](double phi) { return boundary.jet(phi).dq.norm(); };
        cumulative_.assign(panels + 1, 0.0);
        for (int i = 0; i < panels; ++i)
            cumulative_[i + 1] = cumulative_[i] + integrate(i * panel_, (i + 1) * panel_);
    }

    double length() const { return cumulative_.back(); }

    double arclength(double phi) const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        const double turns = std::floor(phi / two_pi);
        const double r = phi - turns * two_pi;
        const int i = std::min(static_cast<int>(r / panel_), static_cast<int>(cumulative_.size()) - 2);
        return turns * length() + cumulative_[i] + integrate(i * panel_, r);
    }

    /// s / length reduced to [0, 1).
    double fraction(double phi) const {
        const double f = arclength(phi) / length();
        return f - std::floor(f);
    }

private:
    double integrate(double lo, double hi) const {
        if (hi <= lo) return 0.0;
        return boost::math::quadrature::gauss<double, 10>::integrate(speed_, lo, hi);
    }

    double panel_;
    std::function<double(double)> speed_;
    std::vector<double> cumulative_;
};

enum class CausticKind { elliptic, focal, hyperbolic };

struct CausticClass {
    CausticKind kind = CausticKind::elliptic;
    double lambda = 0.0;       // sqrt(lambda^2); meaningful for the elliptic branch
    double lambda_sq = 0.0;
};

/// Confocal conic tangent to the line through p and q. With unit normal n
/// and offset w = n.p, tangency to the member of parameter lambda reads
/// (a^2 - lambda^2) n_x^2 + (b^2 - lambda^2) n_y^2 = w^2, hence
///   lambda^2 = a^2 n_x^2 + b^2 n_y^2 - w^2.
/// lambda^2 above b^2 is a hyperbola (the line separates the foci);
/// lambda^2 within `focal_tol` b^2 of b^2 is a line through a focus.
inline CausticClass conserved_caustic(const EllipseTable& table, const Point& p, const Point& q,
                                      double focal_tol = 1e-12) {
    const Point d = (q - p).normalized();
    const Point n(-d.y(), d.x());
    const double w = n.dot(p);
    CausticClass cc;
    cc.lambda_sq = table.a * table.a * n.x() * n.x() + table.b * table.b * n.y() * n.y() - w * w;
    const double b2 = table.b * table.b;
    if (std::abs(cc.lambda_sq - b2) <= focal_tol * b2)
        cc.kind = CausticKind::focal;
    else if (cc.lambda_sq > b2)
        cc.kind = CausticKind::hyperbolic;
    cc.lambda = std::sqrt(std::max(cc.lambda_sq, 0.0));
    return cc;
}

/// Measured rotation number: total phi advance over `bounces` steps in turns per bounce.
template <ConvexBoundary B>
double measured_rotation_number(const B& boundary, PhaseState s, int bounces) {
    const double phi0 = s.unwrapped();
    for (int i = 0; i < bounces; ++i) s = billiard_step(boundary, s);
    return (s.unwrapped() - phi0) / (2.0 * std::numbers::pi * bounces);
}

struct OrbitResult {
    std::vector<PhaseState> states;
    std::vector<Point> points;
    double length = 0.0;
    double closure_residual = 0.0;
    double gradient_norm = 0.0;
    int winding = 0;
    double phase = 0.0;   // pulled back to the caustic parameter, modulo zeta, in [-zeta/4, 3 zeta/4)
};

namespace detail {

// Perimeter of the n-gon with vertices phis (phi_n = phi_0 + 2 pi m
// implied), its gradient and Hessian.
struct PerimeterSystem {
    double length = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

template <ConvexBoundary B>
PerimeterSystem perimeter_system(const B& boundary, const std::vector<double>& phis) {
    const int n = static_cast<int>(phis.size());
    std::vector<BoundaryJet> jets;
    jets.reserve(n);
    for (double phi : phis) jets.push_back(boundary.jet(phi));
    PerimeterSystem ps;
    ps.grad = Eigen::VectorXd::Zero(n);
    ps.hess = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        const BoundaryJet& qi = jets[i];
        const BoundaryJet& qj = jets[j];
        const Point v = qj.q - qi.q;
        const double l = v.norm();
        const Point e = v / l;
        const double ei = e.dot(qi.dq), ej = e.dot(qj.dq);
        ps.length += l;
        ps.grad[i] -= ei;
        ps.grad[j] += ej;
        ps.hess(i, i) += -e.dot(qi.ddq) + (qi.dq.squaredNorm() - ei * ei) / l;
        ps.hess(j, j) += e.dot(qj.ddq) + (qj.dq.squaredNorm() - ej * ej) / l;
        const double off = -(qi.dq.dot(qj.dq) - ei * ej) / l;
        ps.hess(i, j) += off;
        ps.hess(j, i) += off;
    }
    return ps;
}

// Maximizes the perimeter over phi_1..phi_{n-1} with phi_0 held fixed.
template <ConvexBoundary B>
PerimeterSystem maximize_with_pinned_vertex(const B& boundary, std::vector<double>& phis) {
    const int n = static_cast<int>(phis.size());
    for (int it = 0; it < 60; ++it) {
        const PerimeterSystem ps = perimeter_system(boundary, phis);
        const Eigen::VectorXd g = ps.grad.tail(n - 1);
        if (g.lpNorm<Eigen::Infinity>() <= 1e-14) return ps;
        const Eigen::VectorXd step = ps.hess.bottomRightCorner(n - 1, n - 1).ldlt().solve(-g);
        for (int k = 1; k < n; ++k) phis[k] += step[k - 1];
        if (step.lpNorm<Eigen::Infinity>() <= 1e-15) return perimeter_system(boundary, phis);
    }
    const PerimeterSystem ps = perimeter_system(boundary, phis);
    if (ps.grad.tail(n - 1).lpNorm<Eigen::Infinity>() > 1e-10)
        throw numerical_error("birkhoff_orbit: constrained perimeter maximization did not converge");
    return ps;
}

// Circular mean of values defined modulo `period`, returned in
// [-period/4, 3 period/4) so that neither 0 nor period/2 sits at a cut.
inline double circular_mean(const std::vector<double>& xs, double period) {
    double c = 0.0, s = 0.0;
    for (double x : xs) {
        c += std::cos(2.0 * std::numbers::pi * x / period);
        s += std::sin(2.0 * std::numbers::pi * x / period);
    }
    double m = std::atan2(s, c) * period / (2.0 * std::numbers::pi);
    if (m < -0.25 * period) m += period;
    return m;
}

} // namespace detail

inline double circular_distance(double x, double y, double period) {
    const double d = std::abs(std::remainder(x - y, period));
    return d;
}

/// Birkhoff (m, n) orbit of the table near the unperturbed polygon that
/// starts at caustic parameter `seed`.
///
/// The perimeter is maximized over all vertices but the first, which gives
/// a reduced functional G of the first vertex alone. G is constant along
/// the resonant family of the ellipse; on a perturbed table its critical
/// points are the periodic orbits. The nearest zero of G' on either side
/// of the seed is bracketed on steps of zeta/64 and bisected.
template <ConvexBoundary B>
OrbitResult birkhoff_orbit(const B& boundary, const CausticData& caustic, const Resonance& res, double seed) {
    const Resonance r = make_resonance(res.m, res.n);
    const int n = r.n;
    auto initial = [&](double t) {
        std::vector<double> phis(n);
        for (int j = 0; j < n; ++j) phis[j] = amplitude(t + j * caustic.delta, caustic.modulus);
        return phis;
    };
    auto reduced = [&](double t, std::vector<double>& phis) {
        phis = initial(t);
        return detail::maximize_with_pinned_vertex(boundary, phis);
    };

    std::vector<double> phis;
    double t_star = seed;
    const double g_seed = reduced(seed, phis).grad[0];
    if (std::abs(g_seed) > 1e-12) {
        const double step = caustic.zeta / 64.0;
        double lo = 0.0, hi = 0.0, glo = 0.0;
        bool found = false;
        for (int k = 1; k <= 64 && !found; ++k) {
            for (int side : {+1, -1}) {
                const double t0 = seed + side * (k - 1) * step;
                const double t1 = seed + side * k * step;
                const double g0 = reduced(t0, phis).grad[0];
                const double g1 = reduced(t1, phis).grad[0];
                if (g1 == 0.0) {
                    lo = hi = t1;
                    found = true;
                    break;
                }
                if ((g0 < 0.0) != (g1 < 0.0)) {
                    lo = std::min(t0, t1);
                    hi = std::max(t0, t1);
                    glo = lo == t0 ? g0 : g1;
                    found = true;
                    break;
                }
            }
        }
        if (!found) throw numerical_error("birkhoff_orbit: no critical point of the reduced perimeter near the seed");
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double g = reduced(mid, phis).grad[0];
            if (g == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((g < 0.0) == (glo < 0.0)) {
                lo = mid;
                glo = g;
            } else {
                hi = mid;
            }
        }
        t_star = 0.5 * (lo + hi);
    }
    detail::PerimeterSystem ps = reduced(t_star, phis);

    OrbitResult out;
    out.length = ps.length;
    out.gradient_norm = ps.grad.lpNorm<Eigen::Infinity>();
    const double turns = 2.0 * std::numbers::pi * r.m;
    std::vector<double> closed = phis;
    closed.push_back(phis[0] + turns);
    for (int j = 0; j < n; ++j) {
        const Point qj = boundary.point(closed[j]);
        out.points.push_back(qj);
        out.states.push_back({closed[j], (boundary.point(closed[j + 1]) - qj).normalized()});
    }
    const double total = closed[n] - closed[0];
    for (int j = 0; j < n; ++j)
        if (!(closed[j + 1] - closed[j] > 0.0 && closed[j + 1] - closed[j] < 2.0 * std::numbers::pi))
            throw numerical_error("birkhoff_orbit: vertices out of cyclic order");
    out.winding = static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
    if (out.winding != r.m) throw numerical_error("birkhoff_orbit: converged to the wrong winding");

    PhaseState s = out.states.front();
    for (int j = 0; j < n; ++j) s = billiard_step(boundary, s);
    out.closure_residual = std::max(std::abs(s.unwrapped() - (out.states.front().phi + turns)),
                                    (s.direction - out.states.front().direction).norm());

    std::vector<double> pulled;
    for (int j = 0; j < n; ++j) pulled.push_back(incomplete_F(closed[j], caustic.modulus) - j * caustic.delta);
    out.phase = detail::circular_mean(pulled, caustic.zeta);
    return out;
}

/// Orbits found from `seeds` equally spaced seeds i zeta/seeds, merged
/// when their phases agree within `merge_tol` modulo zeta.
template <ConvexBoundary B>
std::vector<OrbitResult> birkhoff_sweep(const B& boundary, const CausticData& caustic, const Resonance& res,
                                        int seeds = 32, double merge_tol = 1e-7) {
    std::vector<OrbitResult> found;
    for (int i = 0; i < seeds; ++i) {
        OrbitResult o = birkhoff_orbit(boundary, caustic, res, caustic.zeta * i / seeds);
        const bool dup = std::any_of(found.begin(), found.end(), [&](const OrbitResult& f) {
            return circular_distance(f.phase, o.phase, caustic.zeta) <= merge_tol;
        });
        if (!dup) found.push_back(std::move(o));
    }
    std::sort(found.begin(), found.end(), [](const OrbitResult& x, const OrbitResult& y) { return x.phase < y.phase; });
    return found;
}

/// Two-periodic orbit on the major axis. `multiplier` is the per-bounce
/// expansion, the square root of the leading eigenvalue of the twice
/// iterated map, whose eigenvalues are reported as-is.
struct HyperbolicOrbit {
    Eigen::Vector2d vertex_right;   // (phi, p) at the impact on x > 0
    Eigen::Vector2d vertex_left;
    Eigen::Matrix2d jacobian2;      // twice-iterated map at vertex_right, (phi, p) coordinates
    double eigen_large = 0.0;
    double eigen_small = 0.0;
    double determinant = 0.0;
    double multiplier = 0.0;
    Eigen::Vector2d unstable_dir;   // unit, in (phi, p)
    Eigen::Vector2d stable_dir;
};

namespace detail {

inline Eigen::Vector2d eigvec_2x2(const Eigen::Matrix2d& J, double ev) {
    Eigen::Vector2d v;
    if (std::abs(J(0, 1)) >= std::abs(J(1, 0)))
        v = {J(0, 1), ev - J(0, 0)};
    else
        v = {ev - J(1, 1), J(1, 0)};
    return v.normalized();
}

} // namespace detail

template <ConvexBoundary B>
HyperbolicOrbit hyperbolic_orbit(const B& boundary) {
    HyperbolicOrbit ho;
    ho.vertex_right = {0.5 * std::numbers::pi, 0.0};
    ho.vertex_left = {-0.5 * std::numbers::pi, 0.0};
    ho.jacobian2 = jacobian_phi_p(boundary, ho.vertex_right, 2);
    const double tr = ho.jacobian2.trace();
    ho.determinant = ho.jacobian2.determinant();
    const double disc = 0.25 * tr * tr - ho.determinant;
    if (!(disc > 0.0)) throw numerical_error("hyperbolic_orbit: two-periodic orbit is not hyperbolic");
    const double root = std::sqrt(disc);
    ho.eigen_large = 0.5 * std::abs(tr) + root;
    ho.eigen_small = ho.determinant / ho.eigen_large;
    if (tr < 0.0) {
        ho.eigen_large = -ho.eigen_large;
        ho.eigen_small = -ho.eigen_small;
    }
    ho.multiplier = std::sqrt(std::abs(ho.eigen_large));
    ho.unstable_dir = detail::eigvec_2x2(ho.jacobian2, ho.eigen_large);
    ho.stable_dir = detail::eigvec_2x2(ho.jacobian2, ho.eigen_small);
    return ho;
}

enum class Branch { unstable, stable };

struct ManifoldPoint {
    double phi = 0.0;    // wrapped to (-pi, pi]
    double s_fraction = 0.0;
    double p = 0.0;
};

struct ManifoldSegment {
    Branch branch = Branch::unstable;
    Eigen::Vector2d base;
    std::vector<ManifoldPoint> points;
};

namespace detail {

// Base point and seed direction of the upper separatrix branch: the
// unstable branch leaves the left vertex into phi > -pi/2, the stable one
// arrives at the right vertex from phi < pi/2. Both are invariant under the
// twice-iterated map (forward for unstable, inverse for stable).
template <ConvexBoundary B>
std::pair<Eigen::Vector2d, Eigen::Vector2d> separatrix_seed(const B& boundary, const HyperbolicOrbit& ho, Branch br) {
    if (br == Branch::unstable) {
        const Eigen::Matrix2d J = jacobian_phi_p(boundary, ho.vertex_left, 2);
        const double tr = J.trace(), det = J.determinant();
        const double ev = 0.5 * tr + (tr > 0 ? 1.0 : -1.0) * std::sqrt(0.25 * tr * tr - det);
        Eigen::Vector2d v = eigvec_2x2(J, ev);
        if (v.x() < 0.0) v = -v;
        return {ho.vertex_left, v};
    }
    Eigen::Vector2d v = ho.stable_dir;
    if (v.x() > 0.0) v = -v;
    return {ho.vertex_right, v};
}

template <ConvexBoundary B>
Eigen::Vector2d iterate_phi_p(const B& boundary, Eigen::Vector2d z, int steps, bool inverse) {
    for (int i = 0; i < steps; ++i) {
        z = step_phi_p(boundary, z, inverse);
        z.x() = wrap_angle(z.x());
    }
    return z;
}

} // namespace detail

/// Upper separatrix branch from seeds at distance 1e-7 Lambda^u along the
/// eigendirection, u = i/n_points, each pushed through 2k steps for
/// k = 0..n_iterates (inverse steps for the stable branch).
template <ConvexBoundary B>
ManifoldSegment manifold_segment(const B& boundary, Branch branch, int n_points, int n_iterates,
                                 double max_spacing = 0.05) {
    if (n_points < 2 || n_iterates < 0) throw domain_error("manifold_segment: need n_points >= 2, n_iterates >= 0");
    const HyperbolicOrbit ho = hyperbolic_orbit(boundary);
    const auto [base, dir] = detail::separatrix_seed(boundary, ho, branch);
    const double lam = std::abs(ho.eigen_large);
    const bool inverse = branch == Branch::stable;
    const ArclengthTable arc(boundary);
    ManifoldSegment seg;
    seg.branch = branch;
    seg.base = base;
    for (int k = 0; k <= n_iterates; ++k) {
        for (int i = 0; i < n_points; ++i) {
            const double u = static_cast<double>(i) / n_points;
            Eigen::Vector2d z = base + 1e-7 * std::pow(lam, u) * dir;
            z = detail::iterate_phi_p(boundary, z, 2 * k, inverse);
            seg.points.push_back({z.x(), arc.fraction(z.x()), z.y()});
        }
    }
    for (std::size_t i = 1; i < seg.points.size(); ++i) {
        const double ds = std::abs(std::remainder(seg.points[i].s_fraction - seg.points[i - 1].s_fraction, 1.0));
        const double dp = std::abs(seg.points[i].p - seg.points[i - 1].p);
        if (std::hypot(ds, dp) > max_spacing)
            throw numerical_error("manifold_segment: adjacent images " + std::to_string(std::hypot(ds, dp)) +
                                  " apart; increase n_points");
    }
    return seg;
}

/// Where a separatrix branch crosses the boundary parameter `phi_target`
/// on the upper arc.
struct SectionCrossing {
    double p = 0.0;
    double scaled_p = 0.0;   // p |q'(phi)|
    double slope = 0.0;      // dp/ds along the branch
    int steps = 0;
    double u = 0.0;
};

template <ConvexBoundary B>
SectionCrossing separatrix_crossing(const B& boundary, const HyperbolicOrbit& ho, Branch branch, double phi_target,
                                    int max_steps = 60) {
    const auto [base, dir] = detail::separatrix_seed(boundary, ho, branch);
    const double lam = std::abs(ho.eigen_large);
    const bool inverse = branch == Branch::stable;
    auto image = [&](double u, int steps) {
        return detail::iterate_phi_p(boundary, base + 1e-7 * std::pow(lam, u) * dir, steps, inverse);
    };
    for (int steps = 2; steps <= max_steps; steps += 2) {
        double lo = 0.0, hi = 1.05;
        double flo = image(lo, steps).x() - phi_target;
        const double fhi = image(hi, steps).x() - phi_target;
        if ((flo < 0.0) == (fhi < 0.0)) continue;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double f = image(mid, steps).x() - phi_target;
            if ((f < 0.0) == (flo < 0.0)) {
                lo = mid;
                flo = f;
            } else {
                hi = mid;
            }
        }
        SectionCrossing sc;
        sc.u = 0.5 * (lo + hi);
        sc.steps = steps;
        const Eigen::Vector2d z = image(sc.u, steps);
        sc.p = z.y();
        const double speed = boundary.jet(z.x()).dq.norm();
        sc.scaled_p = sc.p * speed;
        constexpr double du = 1e-5;
        const Eigen::Vector2d zp = image(sc.u + du, steps), zm = image(sc.u - du, steps);
        sc.slope = (zp.y() - zm.y()) / ((zp.x() - zm.x()) * speed);
        return sc;
    }
    throw numerical_error("separatrix_crossing: branch does not reach phi = " + std::to_string(phi_target) +
                          " within " + std::to_string(max_steps) + " steps; increase iterates");
}

/// Separatrix splitting on the upper arc.
///
/// `signed_gap` is the difference (stable minus unstable) of p|q'(phi)| at
/// phi = asin(tanh(h/4)), the image of the separatrix parameter h/4, which
/// lies between the two primary homoclinic points s = 0 and s = h/2.
/// `angle` is the crossing angle in (s, p) at the primary homoclinic point
/// on the symmetry line phi = 0.
struct SplittingResult {
    double epsilon = 0.0;
    double signed_gap = 0.0;
    double angle = 0.0;
    bool transversal = false;
    double section_phi = 0.0;
    double homoclinic_p_mismatch = 0.0;   // |p_s - p_u| at phi = 0
};

template <ConvexBoundary B>
SplittingResult splitting_measure(const B& boundary, double epsilon) {
    const HyperbolicOrbit ho = hyperbolic_orbit(boundary);
    const double h = characteristic_exponent(boundary.table()).h;
    SplittingResult sr;
    sr.epsilon = epsilon;
    sr.section_phi = std::asin(std::tanh(0.25 * h));
    const SectionCrossing u1 = separatrix_crossing(boundary, ho, Branch::unstable, sr.section_phi);
    const SectionCrossing s1 = separatrix_crossing(boundary, ho, Branch::stable, sr.section_phi);
    sr.signed_gap = s1.scaled_p - u1.scaled_p;
    const SectionCrossing u0 = separatrix_crossing(boundary, ho, Branch::unstable, 0.0);
    const SectionCrossing s0 = separatrix_crossing(boundary, ho, Branch::stable, 0.0);
    sr.angle = std::abs(std::atan(u0.slope) - std::atan(s0.slope));
    sr.homoclinic_p_mismatch = std::abs(s0.p - u0.p);
    sr.transversal = sr.angle > 1e-7;
    return sr;
}

/// Caustic parameter along a trajectory, one value per chord.
struct DriftSeries {
    std::vector<double> lambda;
    double max_drift = 0.0;   // max |lambda_j - lambda_0|
};

template <ConvexBoundary B>
DriftSeries caustic_drift(const B& boundary, PhaseState s, int bounces) {
    DriftSeries ds;
    const EllipseTable table = boundary.table();
    for (int i = 0; i < bounces; ++i) {
        const PhaseState n = billiard_step(boundary, s);
        ds.lambda.push_back(conserved_caustic(table, boundary.point(s.phi), boundary.point(n.phi)).lambda);
        ds.max_drift = std::max(ds.max_drift, std::abs(ds.lambda.back() - ds.lambda.front()));
        s = n;
    }
    return ds;
}

/// Start of a resonant polygon at caustic parameter t: vertex am(t) aimed
/// at the table point of parameter am(t + delta).
template <ConvexBoundary B>
PhaseState polygon_start(const B& boundary, const CausticData& caustic, double t) {
    const double phi0 = amplitude(t, caustic.modulus);
    const double phi1 = amplitude(t + caustic.delta, caustic.modulus);
    return {phi0, (boundary.point(phi1) - boundary.point(phi0)).normalized()};
}

} // namespace ellflow
