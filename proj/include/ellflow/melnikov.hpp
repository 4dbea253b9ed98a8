#pragma once

// Subharmonic and homoclinic Melnikov potentials of the curvature-flow
// perturbation, their critical points, the leading Laurent coefficients
// at the nearest complex poles, and the near-separatrix limit relation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ellflow/conic.hpp"
#include "ellflow/curvature_flow.hpp"
#include "ellflow/elliptic.hpp"
#include "ellflow/errors.hpp"

namespace ellflow {

namespace detail {

// -ab/f^2 and its first two derivatives from the jet of f.
inline Jet1 inverse_square_jet(double ab, double f, double df, double ddf) {
    const double f2 = f * f, f3 = f2 * f;
    return {-ab / f2, 2.0 * ab * df / f3, 2.0 * ab * (ddf / f3 - 3.0 * df * df / (f3 * f))};
}

} // namespace detail

/// mu1 along the caustic parameterization, -ab/(a^2 cn^2 t + b^2 sn^2 t)^2,
/// with t-derivatives.
inline Jet1 mu1_tilde_jet(const EllipseTable& table, const CausticData& caustic, double t) {
    const JacobiTriple j = jacobi(t, caustic.modulus);
    const double c2 = table.c * table.c;
    const double k2 = caustic.modulus.k * caustic.modulus.k;
    const double f = table.b * table.b + c2 * j.cn * j.cn;
    const double df = -2.0 * c2 * j.sn * j.cn * j.dn;
    const double ddf = -2.0 * c2 * (j.cn * j.cn * j.dn * j.dn - j.sn * j.sn * j.dn * j.dn - k2 * j.sn * j.sn * j.cn * j.cn);
    return detail::inverse_square_jet(table.a * table.b, f, df, ddf);
}

inline double mu1_tilde(const EllipseTable& table, const CausticData& caustic, double t) {
    return mu1_tilde_jet(table, caustic, t).value;
}

/// mu1 along the separatrix minus its value at the vertices (a, 0):
///   a/b^3 - ab/(a^2 sech^2 s + b^2 tanh^2 s)^2.
/// Written as a c^2 sech^2 s (g + b^2)/(b^3 g^2), g = b^2 + c^2 sech^2 s,
/// which keeps relative accuracy in the exponentially small tails.
inline Jet1 mu1_hat_jet(const EllipseTable& table, double s) {
    const double a = table.a, b = table.b, c2 = table.c * table.c;
    const double th = std::tanh(s);
    const double sech = 1.0 / std::cosh(s);
    const double sech2 = sech * sech;
    const double g = b * b + c2 * sech2;
    const double dg = -2.0 * c2 * sech2 * th;
    const double ddg = -2.0 * c2 * sech2 * (sech2 - 2.0 * th * th);
    Jet1 r = detail::inverse_square_jet(a * b, g, dg, ddg);
    r.value = a * c2 * sech2 * (g + b * b) / (b * b * b * g * g);
    return r;
}

inline double mu1_hat(const EllipseTable& table, double s) { return mu1_hat_jet(table, s).value; }

/// 2 lambda sum_{j<n} mu1_tilde(t + j delta) for a resonant caustic.
///
/// Since n delta = 4Km, the shifts j delta are taken as 4K((jm) mod n)/n,
/// which bounds every argument by 4K + |t| and keeps the sum exactly
/// delta-periodic on the grid of shifts.
class SubharmonicPotential {
public:
    SubharmonicPotential(const EllipseTable& table, const Resonance& res)
        : table_(table), res_(make_resonance(res.m, res.n)), caustic_(resonant_caustic(table, res_)) {
        const double four_k = 4.0 * caustic_.modulus.K;
        shifts_.reserve(res_.n);
        for (int j = 0; j < res_.n; ++j)
            shifts_.push_back(four_k * static_cast<double>((static_cast<long long>(j) * res_.m) % res_.n) / res_.n);
    }

    const EllipseTable& table() const { return table_; }
    const Resonance& resonance() const { return res_; }
    const CausticData& caustic() const { return caustic_; }
    double period() const { return caustic_.zeta; }
    std::string kind() const { return "subharmonic"; }

    Jet1 jet(double t) const {
        Jet1 sum;
        for (double shift : shifts_) {
            const Jet1 m = mu1_tilde_jet(table_, caustic_, t + shift);
            sum.value += m.value;
            sum.d1 += m.d1;
            sum.d2 += m.d2;
        }
        const double w = 2.0 * caustic_.lambda;
        return {w * sum.value, w * sum.d1, w * sum.d2};
    }

    double value(double t) const { return jet(t).value; }
    double derivative(double t) const { return jet(t).d1; }
    double second(double t) const { return jet(t).d2; }

    /// The half-sum 4 lambda sum_{j < n/2}, available for even n.
    double half_sum_value(double t) const {
        if (res_.n % 2 != 0) throw domain_error("half-sum form requires even n");
        double sum = 0.0;
        for (int j = 0; j < res_.n / 2; ++j) sum += mu1_tilde(table_, caustic_, t + j * caustic_.delta);
        return 4.0 * caustic_.lambda * sum;
    }

private:
    EllipseTable table_;
    Resonance res_;
    CausticData caustic_;
    std::vector<double> shifts_;
};

/// 2b sum_{j in Z} mu1_hat(s + j h), truncated at |j| <= J with J picked
/// from the tail bound |mu1_hat(s)| <= (8 a c^2/b^5) e^{-2|s|} so that four
/// times the neglected tail stays below `tol`.
class HomoclinicPotential {
public:
    explicit HomoclinicPotential(const EllipseTable& table, double tol = 1e-12)
        : table_(table), tol_(tol), h_(characteristic_exponent(table).h) {
        if (!(tol > 0.0)) throw domain_error("homoclinic truncation tolerance must be positive");
    }

    const EllipseTable& table() const { return table_; }
    double tolerance() const { return tol_; }
    double period() const { return h_; }
    std::string kind() const { return "homoclinic"; }

    /// Smallest J whose tail estimate, with safety factor 4, is below tol.
    int truncation(double s) const {
        const double a = table_.a, b = table_.b, c2 = table_.c * table_.c;
        const double C = 8.0 * a * c2 / (b * b * b * b * b);
        const double ratio = std::exp(-2.0 * h_);
        for (int J = 1; J < 100000; ++J) {
            const double tail = 2.0 * 2.0 * b * C * std::exp(2.0 * std::abs(s) - 2.0 * (J + 1) * h_) / (1.0 - ratio);
            if (4.0 * tail < tol_) return J;
        }
        throw numerical_error("homoclinic truncation did not reach tol = " + std::to_string(tol_));
    }

    Jet1 jet(double s, int J) const {
        Jet1 sum;
        for (int j = -J; j <= J; ++j) {
            const Jet1 m = mu1_hat_jet(table_, s + j * h_);
            sum.value += m.value;
            sum.d1 += m.d1;
            sum.d2 += m.d2;
        }
        const double w = 2.0 * table_.b;
        return {w * sum.value, w * sum.d1, w * sum.d2};
    }

    Jet1 jet(double s) const { return jet(s, truncation(s)); }
    double value(double s) const { return jet(s).value; }
    double derivative(double s) const { return jet(s).d1; }
    double second(double s) const { return jet(s).d2; }

private:
    EllipseTable table_;
    double tol_;
    double h_;
};

struct CriticalPoint {
    double location = 0.0;
    double value = 0.0;
    double derivative = 0.0;
    double second = 0.0;
};

/// One period of a Melnikov potential sampled on [0, period) together
/// with its critical points.
struct MelnikovProfile {
    std::string kind;
    double period = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> derivatives;
    std::vector<CriticalPoint> critical_points;
    double nondegeneracy_margin = 0.0;   // min |L''| over the critical points
    double nonconstancy_margin = 0.0;    // max - min of the samples
};

template <class P>
concept MelnikovPotential = requires(const P& p, double x) {
    { p.jet(x) } -> std::convertible_to<Jet1>;
    { p.period() } -> std::convertible_to<double>;
    { p.kind() } -> std::convertible_to<std::string>;
};

namespace detail {

// Root of L' in [lo, hi] given a sign change; Newton steps on L'' kept
// inside the bracket, bisection otherwise.
template <MelnikovPotential P>
double polish_critical_point(const P& pot, double lo, double hi) {
    double dlo = pot.jet(lo).d1;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const Jet1 j = pot.jet(x);
        if (j.d1 == 0.0) return x;
        if ((j.d1 < 0.0) == (dlo < 0.0)) {
            lo = x;
            dlo = j.d1;
        } else {
            hi = x;
        }
        double next = j.d2 != 0.0 ? x - j.d1 / j.d2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(x)))
            return next;
        x = next;
    }
    return x;
}

} // namespace detail

/// Samples the potential at i*period/N and locates every zero of L' by a
/// sign-change scan on the half-offset grid (i + 1/2)*period/N followed by
/// a Newton polish. Throws property_violation unless the critical set is
/// exactly {0, period/2} and both points are nondegenerate.
template <MelnikovPotential P>
MelnikovProfile critical_points(const P& pot, int samples = 512) {
    if (samples < 8) throw domain_error("critical_points needs at least 8 samples");
    MelnikovProfile prof;
    prof.kind = pot.kind();
    prof.period = pot.period();
    const double T = prof.period;
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (int i = 0; i < samples; ++i) {
        const double x = T * i / samples;
        const Jet1 j = pot.jet(x);
        prof.grid.push_back(x);
        prof.values.push_back(j.value);
        prof.derivatives.push_back(j.d1);
        vmin = std::min(vmin, j.value);
        vmax = std::max(vmax, j.value);
    }
    prof.nonconstancy_margin = vmax - vmin;

    std::vector<double> offs(samples + 1), dv(samples + 1);
    for (int i = 0; i <= samples; ++i) {
        offs[i] = T * (i - 0.5) / samples;   // first point at -T/(2N) so 0 is bracketed
        dv[i] = pot.jet(offs[i]).d1;
    }
    for (int i = 0; i < samples; ++i) {
        if ((dv[i] < 0.0) == (dv[i + 1] < 0.0) && dv[i] != 0.0) continue;
        const double x = detail::polish_critical_point(pot, offs[i], offs[i + 1]);
        const Jet1 j = pot.jet(x);
        prof.critical_points.push_back({x, j.value, j.d1, j.d2});
    }

    const double match = 1e-6 * T;
    auto near = [&](double x, double target) { return std::abs(x - target) <= match; };
    bool has_zero = false, has_half = false;
    for (const CriticalPoint& cp : prof.critical_points) {
        has_zero = has_zero || near(cp.location, 0.0);
        has_half = has_half || near(cp.location, 0.5 * T);
    }
    if (prof.critical_points.size() != 2 || !has_zero || !has_half) {
        std::string where;
        for (const CriticalPoint& cp : prof.critical_points) where += " " + std::to_string(cp.location);
        throw property_violation(prof.kind + " potential: expected critical set {0, " + std::to_string(0.5 * T) +
                                 "}, found" + (where.empty() ? " none" : where));
    }
    prof.nondegeneracy_margin = std::min(std::abs(prof.critical_points[0].second),
                                         std::abs(prof.critical_points[1].second));
    if (!(prof.nondegeneracy_margin > 0.0))
        throw property_violation(prof.kind + " potential: degenerate critical point");
    return prof;
}

/// Leading Laurent coefficients of mu1_tilde (or mu1_hat) at its pole
/// nearest the real axis: coefficient2/tau^2 + coefficient1/tau + O(1).
struct LaurentEstimate {
    double coefficient2 = 0.0;
    std::complex<double> coefficient1;
    std::complex<double> pole;
    double root_residual = 0.0;   // |f| (or |g|) at the pole
    double derivative_at_pole = 0.0;
};

/// alpha2 = -ab/f'(t+)^2 at t+ = zeta/2 + iK', f = a^2 cn^2 + b^2 sn^2.
/// With the quarter-period shift the triple at t+ is expressible through
/// the real triple at zeta/2, giving the real value
///   f'(t+) = 2 c^2 cn dn / (k^2 sn^3).
inline LaurentEstimate alpha2(const EllipseTable& table, const CausticData& caustic) {
    const EllipticModulus& mod = caustic.modulus;
    const double u = 0.5 * caustic.zeta;
    const ImagShiftTriple s = jacobi_imag_shift(u, mod);
    const double c2 = table.c * table.c;
    const double k2 = mod.k * mod.k;
    const std::complex<double> f = table.b * table.b + c2 * s.cn_shift * s.cn_shift;
    const std::complex<double> df = -2.0 * c2 * s.sn_shift * s.cn_shift * s.dn_shift;
    const std::complex<double> ddf =
        -2.0 * c2 * (s.cn_shift * s.cn_shift * s.dn_shift * s.dn_shift - s.sn_shift * s.sn_shift * s.dn_shift * s.dn_shift -
                     k2 * s.sn_shift * s.sn_shift * s.cn_shift * s.cn_shift);
    const double ab = table.a * table.b;
    LaurentEstimate le;
    le.pole = {u, mod.Kprime};
    le.derivative_at_pole = df.real();
    le.coefficient2 = -ab / (df.real() * df.real());
    le.coefficient1 = ab * ddf / (df * df * df);
    le.root_residual = std::abs(f);
    return le;
}

/// beta2 = -ab/g'(s+)^2 at s+ = h/2 + i pi/2, g = a^2 sech^2 + b^2 tanh^2.
/// There cosh s+ = i c/b and sinh s+ = i a/b, so g'(s+) = 2ab^2/c and
/// beta2 = -c^2/(4ab^3).
inline LaurentEstimate beta2(const EllipseTable& table) {
    const double a = table.a, b = table.b, c = table.c;
    const double h = characteristic_exponent(table).h;
    using namespace std::complex_literals;
    const std::complex<double> ch = 1i * (c / b);
    const std::complex<double> sh = 1i * (a / b);
    const std::complex<double> g = a * a / (ch * ch) + b * b * (sh * sh) / (ch * ch);
    const double dg = 2.0 * a * b * b / c;
    const double ddg = 2.0 * b * b - 6.0 * a * a * b * b / (c * c);
    LaurentEstimate le;
    le.pole = {0.5 * h, 0.5 * std::numbers::pi};
    le.derivative_at_pole = dg;
    le.coefficient2 = -a * b / (dg * dg);
    le.coefficient1 = a * b * ddg / (dg * dg * dg);
    le.root_residual = std::abs(g);
    return le;
}

/// Mean-subtracted distance between the subharmonic potentials of a
/// resonance ladder and kappa times the homoclinic potential,
///   sup_x |(L_sub - <L_sub>) - kappa (L_hom - <L_hom>)|,
/// on `samples` equispaced points of [lo, hi]; means over the same points.
struct LimitGapRow {
    Resonance res;
    double lambda_gap = 0.0;   // b - lambda
    double gap = 0.0;
};

inline std::vector<LimitGapRow> limit_gaps(const EllipseTable& table, const std::vector<Resonance>& ladder, double kappa,
                                           double lo = -1.0, double hi = 1.0, double tol = 1e-12, int samples = 41) {
    if (!(hi > lo) || samples < 2) throw domain_error("limit_gaps: need lo < hi and at least 2 samples");
    const HomoclinicPotential hom(table, tol);
    std::vector<double> xs(samples), hv(samples);
    double hmean = 0.0;
    for (int i = 0; i < samples; ++i) {
        xs[i] = lo + (hi - lo) * i / (samples - 1);
        hv[i] = hom.value(xs[i]);
        hmean += hv[i];
    }
    hmean /= samples;
    std::vector<LimitGapRow> rows;
    for (const Resonance& r : ladder) {
        const SubharmonicPotential sub(table, r);
        std::vector<double> sv(samples);
        double smean = 0.0;
        for (int i = 0; i < samples; ++i) {
            sv[i] = sub.value(xs[i]);
            smean += sv[i];
        }
        smean /= samples;
        double gap = 0.0;
        for (int i = 0; i < samples; ++i) gap = std::max(gap, std::abs((sv[i] - smean) - kappa * (hv[i] - hmean)));
        rows.push_back({sub.resonance(), sub.caustic().lambda_gap, gap});
    }
    return rows;
}

/// Odd ladder (j, 2j+1) or even ladder (2j-1, 4j) for j = j_min..j_max.
inline std::vector<Resonance> resonance_ladder(bool odd, int j_min, int j_max) {
    std::vector<Resonance> out;
    for (int j = j_min; j <= j_max; ++j) out.push_back(odd ? make_resonance(j, 2 * j + 1) : make_resonance(2 * j - 1, 4 * j));
    return out;
}

/// A ladder converges when its gaps decrease strictly and the last gap is
/// at least ten times smaller than the first.
inline bool limit_gaps_converge(const std::vector<LimitGapRow>& rows) {
    if (rows.size() < 2) return false;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].gap < rows[i - 1].gap)) return false;
    return rows.back().gap * 10.0 <= rows.front().gap;
}

inline void require_limit_convergence(const std::vector<LimitGapRow>& rows) {
    if (limit_gaps_converge(rows)) return;
    std::string seq;
    for (const LimitGapRow& r : rows) seq += " " + std::to_string(r.gap);
    throw property_violation("limit gaps do not decrease to the homoclinic profile:" + seq);
}

} // namespace ellflow
