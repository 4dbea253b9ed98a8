#pragma once

// First-order curvature-flow deformation of the ellipse and a small
// explicit curve-shortening integrator used to check it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ellflow/conic.hpp"
#include "ellflow/errors.hpp"

namespace ellflow {

/// Value and first two derivatives of a scalar function of phi.
struct Jet1 {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Boundary point with first and second derivatives in its parameter.
struct BoundaryJet {
    Point q = Point::Zero();
    Point dq = Point::Zero();
    Point ddq = Point::Zero();
};

namespace detail {

// a^2 cos^2(phi) + b^2 sin^2(phi) written as b^2 + c^2 cos^2(phi).
inline double ellipse_metric(const EllipseTable& t, double phi) {
    const double cs = std::cos(phi);
    return t.b * t.b + t.c * t.c * cs * cs;
}

} // namespace detail

/// mu1(phi) = -ab / (a^2 cos^2 phi + b^2 sin^2 phi)^2.
inline double mu1(const EllipseTable& table, double phi) {
    const double D = detail::ellipse_metric(table, phi);
    return -table.a * table.b / (D * D);
}

inline Jet1 mu1_jet(const EllipseTable& table, double phi) {
    const double D = detail::ellipse_metric(table, phi);
    const double c2 = table.c * table.c;
    const double dD = -c2 * std::sin(2.0 * phi);
    const double ddD = -2.0 * c2 * std::cos(2.0 * phi);
    const double ab = table.a * table.b;
    const double D2 = D * D, D3 = D2 * D;
    return {-ab / D2, 2.0 * ab * dD / D3, 2.0 * ab * (ddD / D3 - 3.0 * dD * dD / (D3 * D))};
}

/// Curvature of the ellipse at q0(phi) = (a sin phi, b cos phi).
inline double curvature_kappa0(const EllipseTable& table, double phi) {
    const double D = detail::ellipse_metric(table, phi);
    return table.a * table.b / (D * std::sqrt(D));
}

/// Inward unit normal at q0(phi).
inline Point normal_N0(const EllipseTable& table, double phi) {
    const double D = detail::ellipse_metric(table, phi);
    return -Point(table.b * std::sin(phi), table.a * std::cos(phi)) / std::sqrt(D);
}

/// The unperturbed ellipse as a parameterized boundary.
class EllipseBoundary {
public:
    explicit EllipseBoundary(EllipseTable table) : table_(table) {}

    const EllipseTable& table() const { return table_; }
    double epsilon() const { return 0.0; }

    Point point(double phi) const { return {table_.a * std::sin(phi), table_.b * std::cos(phi)}; }

    BoundaryJet jet(double phi) const {
        const double s = std::sin(phi), c = std::cos(phi);
        return {{table_.a * s, table_.b * c}, {table_.a * c, -table_.b * s}, {-table_.a * s, -table_.b * c}};
    }

private:
    EllipseTable table_;
};

/// The boundary mu = mu0 + eps mu1(phi) in elliptic coordinates, truncated at
/// first order in eps.
///
/// With nu = eps mu1 the point is (C sin phi, S cos phi) where
///   C = c cosh(mu0 + nu) = a cosh nu + b sinh nu,
///   S = c sinh(mu0 + nu) = b cosh nu + a sinh nu,
/// which reproduces (a sin phi, b cos phi) exactly at eps = 0.
class PerturbedTable {
public:
    PerturbedTable(EllipseTable table, double epsilon, int convexity_samples = 4096)
        : table_(table), epsilon_(epsilon), mu0_(boundary_mu(table)) {
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
            throw domain_error("perturbation size must be a finite eps >= 0");
        for (int i = 0; i < convexity_samples; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / convexity_samples;
            if (signed_curvature(phi) >= 0.0)
                throw numerical_error("perturbed table is not strictly convex at eps = " +
                                      std::to_string(epsilon) + " (phi = " + std::to_string(phi) + ")");
        }
    }

    const EllipseTable& table() const { return table_; }
    double epsilon() const { return epsilon_; }
    double mu0() const { return mu0_; }
    double mu(double phi) const { return mu0_ + epsilon_ * mu1(table_, phi); }

    Point point(double phi) const {
        const double nu = epsilon_ * mu1(table_, phi);
        const double ch = std::cosh(nu), sh = std::sinh(nu);
        return {(table_.a * ch + table_.b * sh) * std::sin(phi), (table_.b * ch + table_.a * sh) * std::cos(phi)};
    }

    BoundaryJet jet(double phi) const {
        const Jet1 m = mu1_jet(table_, phi);
        const double nu = epsilon_ * m.value, dnu = epsilon_ * m.d1, ddnu = epsilon_ * m.d2;
        const double ch = std::cosh(nu), sh = std::sinh(nu);
        const double C = table_.a * ch + table_.b * sh;
        const double S = table_.b * ch + table_.a * sh;
        const double dC = dnu * S, dS = dnu * C;
        const double ddC = ddnu * S + dnu * dnu * C;
        const double ddS = ddnu * C + dnu * dnu * S;
        const double s = std::sin(phi), c = std::cos(phi);
        BoundaryJet j;
        j.q = {C * s, S * c};
        j.dq = {dC * s + C * c, dS * c - S * s};
        j.ddq = {ddC * s + 2.0 * dC * c - C * s, ddS * c - 2.0 * dS * s - S * c};
        return j;
    }

    /// cross(q', q'') / |q'|^3; negative everywhere for a convex boundary
    /// traversed clockwise, which is the orientation of increasing phi.
    double signed_curvature(double phi) const {
        const BoundaryJet j = jet(phi);
        const double cross = j.dq.x() * j.ddq.y() - j.dq.y() * j.ddq.x();
        const double n = j.dq.norm();
        return cross / (n * n * n);
    }

private:
    EllipseTable table_;
    double epsilon_;
    double mu0_;
};

/// Closed polygonal curve; the last point connects back to the first.
struct CurveMesh {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }

    double length() const {
        double l = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) l += (points[(i + 1) % points.size()] - points[i]).norm();
        return l;
    }

    /// Enclosed area (shoelace, orientation-independent).
    double area() const {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Point& p = points[i];
            const Point& q = points[(i + 1) % points.size()];
            s += p.x() * q.y() - p.y() * q.x();
        }
        return 0.5 * std::abs(s);
    }

    double min_spacing() const {
        double h = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i)
            h = std::min(h, (points[(i + 1) % points.size()] - points[i]).norm());
        return h;
    }
};

/// Uniform-in-phi samples of a boundary, phi_i = 2 pi i / N.
template <class Boundary>
CurveMesh sample_mesh(const Boundary& boundary, int n) {
    if (n < 8) throw domain_error("mesh needs at least 8 points");
    CurveMesh mesh;
    mesh.points.reserve(n);
    for (int i = 0; i < n; ++i) mesh.points.push_back(boundary.point(2.0 * std::numbers::pi * i / n));
    return mesh;
}

inline CurveMesh ellipse_mesh(const EllipseTable& table, int n) { return sample_mesh(EllipseBoundary(table), n); }

inline CurveMesh circle_mesh(double radius, int n) {
    if (n < 8) throw domain_error("mesh needs at least 8 points");
    CurveMesh mesh;
    for (int i = 0; i < n; ++i) {
        const double th = 2.0 * std::numbers::pi * i / n;
        mesh.points.emplace_back(radius * std::cos(th), radius * std::sin(th));
    }
    return mesh;
}

/// Largest step allowed by the explicit scheme on this mesh.
inline double stable_time_step(const CurveMesh& mesh) {
    const double h = mesh.min_spacing();
    return 0.25 * h * h;
}

namespace detail {

// One explicit Euler step of q_t = kappa N, with kappa N = q_ss taken from
// the three-point second difference on the non-uniform chord spacing.
inline void flow_step(std::vector<Point>& pts, std::vector<Point>& scratch, double dt) {
    const std::size_t n = pts.size();
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point& qm = pts[(i + n - 1) % n];
        const Point& q = pts[i];
        const Point& qp = pts[(i + 1) % n];
        const double h1 = (q - qm).norm();
        const double h2 = (qp - q).norm();
        if (h1 < 1e-10 || h2 < 1e-10)
            throw numerical_error("flow_integrate: adjacent mesh points closer than 1e-10 at index " +
                                  std::to_string(i));
        scratch[i] = q + dt * (2.0 / (h1 + h2)) * ((qp - q) / h2 - (q - qm) / h1);
    }
    pts.swap(scratch);
}

} // namespace detail

/// Explicit curve-shortening flow with a fixed step. Every step requires
/// dt <= 0.25 (min spacing)^2.
inline CurveMesh flow_integrate(CurveMesh mesh, double dt, int steps) {
    if (!(dt > 0.0) || steps < 0) throw domain_error("flow_integrate: need dt > 0 and steps >= 0");
    std::vector<Point> scratch;
    for (int s = 0; s < steps; ++s) {
        if (dt > stable_time_step(mesh))
            throw numerical_error("flow_integrate: dt exceeds 0.25 (min spacing)^2 at step " + std::to_string(s));
        detail::flow_step(mesh.points, scratch, dt);
    }
    return mesh;
}

/// Flow for total time `duration`, re-choosing dt at every step as
/// `safety` times the stability bound.
inline CurveMesh flow_to_time(CurveMesh mesh, double duration, double safety = 0.8) {
    if (!(duration >= 0.0)) throw domain_error("flow_to_time: duration must be >= 0");
    std::vector<Point> scratch;
    double t = 0.0;
    while (t < duration) {
        const double dt = std::min(duration - t, safety * stable_time_step(mesh));
        detail::flow_step(mesh.points, scratch, dt);
        t += dt;
        if (duration - t < 1e-15 * duration) break;
    }
    return mesh;
}

namespace detail {

// Periodic monotone cubic Hermite (Fritsch-Carlson) interpolation of
// samples (x_i, y_i), x sorted within one period.
class PeriodicPchip {
public:
    PeriodicPchip(std::vector<double> x, std::vector<double> y, double period)
        : x_(std::move(x)), y_(std::move(y)), period_(period) {
        const std::size_t n = x_.size();
        std::vector<double> h(n), delta(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + 1) % n;
            h[i] = x_[j] - x_[i] + (j == 0 ? period_ : 0.0);
            delta[i] = (y_[j] - y_[i]) / h[i];
        }
        slope_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = (i + n - 1) % n;
            if (delta[p] * delta[i] > 0.0) {
                const double w1 = 2.0 * h[i] + h[p], w2 = h[i] + 2.0 * h[p];
                slope_[i] = (w1 + w2) / (w1 / delta[p] + w2 / delta[i]);
            }
        }
        h_ = std::move(h);
    }

    double operator()(double xq) const {
        const std::size_t n = x_.size();
        double u = xq - x_[0];
        u -= period_ * std::floor(u / period_);
        const double xr = x_[0] + u;
        auto it = std::upper_bound(x_.begin(), x_.end(), xr);
        const std::size_t i = (it == x_.begin()) ? n - 1 : static_cast<std::size_t>(it - x_.begin()) - 1;
        const std::size_t j = (i + 1) % n;
        const double hi = h_[i];
        const double s = (xr - x_[i]) / hi;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * y_[i] + h10 * hi * slope_[i] + h01 * y_[j] + h11 * hi * slope_[j];
    }

private:
    std::vector<double> x_, y_, h_, slope_;
    double period_;
};

} // namespace detail

/// Result of comparing the numerically flowed ellipse with mu0 + eps mu1.
struct FirstOrderCheck {
    double epsilon = 0.0;
    int mesh_size = 0;
    double error_norm = 0.0;   // max |(mu_flow - mu0)/eps - mu1|
    int steps = 0;
};

/// Flows the exact ellipse for time eps, reads the mesh in elliptic
/// coordinates, resamples mu by phi and measures the sup-distance of the
/// first-order quotient from mu1.
inline FirstOrderCheck validate_first_order(const EllipseTable& table, double epsilon, int mesh_size) {
    FirstOrderCheck out;
    out.epsilon = epsilon;
    out.mesh_size = mesh_size;
    if (epsilon == 0.0) return out;
    const double window = 0.01 * table.b * table.b * table.b / table.a;
    if (!(epsilon > 0.0) || epsilon > window)
        throw numerical_error("validate_first_order: eps = " + std::to_string(epsilon) +
                              " outside the validated window (0, 0.01 b^3/a = " + std::to_string(window) + "]");
    PerturbedTable model(table, epsilon);   // throws on loss of convexity

    CurveMesh mesh = ellipse_mesh(table, mesh_size);
    const double dt0 = 0.8 * stable_time_step(mesh);
    out.steps = static_cast<int>(std::ceil(epsilon / dt0));
    mesh = flow_integrate(std::move(mesh), epsilon / out.steps, out.steps);

    std::vector<std::pair<double, double>> samples;
    samples.reserve(mesh.size());
    for (const Point& p : mesh.points) {
        const EllipticCoords ec = elliptic_coords(table, p);
        samples.emplace_back(ec.phi, ec.mu);
    }
    std::sort(samples.begin(), samples.end());
    std::vector<double> xs, ys;
    for (auto& [x, y] : samples) {
        if (!xs.empty() && x <= xs.back())
            throw numerical_error("validate_first_order: flowed mesh is not a graph over phi");
        xs.push_back(x);
        ys.push_back(y);
    }
    const detail::PeriodicPchip interp(std::move(xs), std::move(ys), 2.0 * std::numbers::pi);

    const double mu0 = model.mu0();
    for (int i = 0; i < mesh_size; ++i) {
        const double phi = -std::numbers::pi + 2.0 * std::numbers::pi * i / mesh_size;
        const double quotient = (interp(phi) - mu0) / epsilon;
        out.error_norm = std::max(out.error_norm, std::abs(quotient - mu1(table, phi)));
    }
    return out;
}

} // namespace ellflow
