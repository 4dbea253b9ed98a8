// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ellflow/ellflow.hpp"

using namespace ellflow;
using std::numbers::pi;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

bool strictly_decreasing_10x(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return v.back() * 10.0 <= v.front();
}

const EllipseTable kTable = make_table(2, 1);
const std::vector<Resonance> kResonances = {{1, 3}, {1, 4}, {2, 5}, {3, 7}};

Verdict elliptic_identities() {
    Verdict v;
    std::mt19937_64 rng(20261014);
    std::uniform_real_distribution<double> ut(-50.0, 50.0), uk(0.0, 1.0 - 1e-9);
    double worst1 = 0.0, worst2 = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double k = uk(rng);
        const JacobiTriple j = jacobi(ut(rng), k);
        worst1 = std::max(worst1, std::abs(j.sn * j.sn + j.cn * j.cn - 1.0));
        worst2 = std::max(worst2, std::abs(j.dn * j.dn + k * k * j.sn * j.sn - 1.0));
    }
    v.require(worst1 < 1e-12, "sn^2+cn^2-1 = " + sci(worst1));
    v.require(worst2 < 1e-12, "dn^2+k^2 sn^2-1 = " + sci(worst2));
    const double k0 = std::abs(complete_K(0.0) - pi / 2);
    v.require(k0 <= 1e-14, "K(0) error " + sci(k0));
    boost::math::quadrature::tanh_sinh<double> ts;
    double worstK = 0.0;
    for (double k : {0.05, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
        const double q = ts.integrate(
            [k](double p) { return 1.0 / std::sqrt(1.0 - k * k * std::sin(p) * std::sin(p)); }, 0.0, pi / 2);
        worstK = std::max(worstK, std::abs(complete_K(k) - q));
    }
    v.require(worstK <= 1e-10, "AGM vs quadrature " + sci(worstK));
    v.note("identity residuals " + sci(worst1) + ", " + sci(worst2) + "; K(0) " + sci(k0) + "; AGM vs quadrature " +
           sci(worstK));
    return v;
}

Verdict tangency() {
    Verdict v;
    double worst = 0.0;
    for (Resonance r : kResonances) {
        const CausticData cd = resonant_caustic(kTable, r);
        for (int i = 0; i < 1000; ++i)
            worst = std::max(worst, std::abs(tangency_residual(kTable, cd, 4.0 * cd.modulus.K * i / 1000.0)));
    }
    v.require(worst <= 1e-10, "residual " + sci(worst));
    v.note("max residual " + sci(worst));
    return v;
}

Verdict focal() {
    Verdict v;
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) worst = std::max(worst, focal_residual(kTable, -5.0 + 10.0 * i / 1000.0));
    v.require(worst <= 1e-10, "residual " + sci(worst));
    v.note("max residual " + sci(worst));
    return v;
}

Verdict separatrix_limit() {
    Verdict v;
    const double h = characteristic_exponent(kTable).h;
    std::vector<double> dz, dkp, dq;
    for (double kc : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        const CausticData cd = caustic_from_complementary_modulus(kTable, kc);
        dz.push_back(std::abs(cd.zeta - h));
        dkp.push_back(std::abs(cd.modulus.Kprime - pi / 2));
        double sup = 0.0;
        for (int i = 0; i <= 600; ++i) {
            const double s = -3.0 + 6.0 * i / 600.0;
            sup = std::max(sup, (point_t(kTable, cd, s) - point_s(kTable, s)).norm());
        }
        dq.push_back(sup);
    }
    v.require(strictly_decreasing_10x(dz), "|zeta-h| ladder");
    v.require(strictly_decreasing_10x(dkp), "|K'-pi/2| ladder");
    v.require(strictly_decreasing_10x(dq), "sup|q~-q^| ladder");
    v.note("|zeta-h| " + sci(dz.front()) + " -> " + sci(dz.back()) + ", |K'-pi/2| " + sci(dkp.front()) + " -> " +
           sci(dkp.back()) + ", sup " + sci(dq.front()) + " -> " + sci(dq.back()));
    return v;
}

Verdict first_order() {
    Verdict v;
    std::vector<double> err;
    for (double eps : {4e-3, 2e-3, 1e-3}) err.push_back(validate_first_order(kTable, eps, 2048).error_norm);
    for (std::size_t i = 1; i < err.size(); ++i) {
        const double ratio = err[i] / err[i - 1];
        v.require(std::abs(ratio - 0.5) <= 0.3 * 0.5, "ratio " + sci(ratio));
        v.note("ratio " + sci(ratio));
    }
    v.require(err.back() < 10 * 1e-3, "error norm at 1e-3 is " + sci(err.back()));
    return v;
}

template <class P>
double parity_period_defect(const P& p, double period) {
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double t = -3.0 + 6.0 * i / 400;
        const double val = p.value(t);
        worst = std::max({worst, std::abs(p.value(-t) - val), std::abs(p.value(t + period) - val)});
    }
    return worst;
}

template <class P>
void check_profile(Verdict& v, const P& p, const std::string& label) {
    const double period = p.period();
    try {
        const MelnikovProfile prof = critical_points(p);
        const bool at_expected = prof.critical_points.size() == 2 &&
                                 circular_distance(prof.critical_points[0].location, 0.0, period) <= 1e-6 * period &&
                                 circular_distance(prof.critical_points[1].location, period / 2, period) <= 1e-6 * period;
        v.require(at_expected, label + " critical set");
        v.require(prof.nondegeneracy_margin > 0.0, label + " degenerate");
        v.require(prof.nonconstancy_margin > 0.0, label + " constant");
        v.note(label + " max-min " + sci(prof.nonconstancy_margin));
    } catch (const error& e) {
        v.require(false, label + ": " + e.what());
    }
}

Verdict subharmonic() {
    Verdict v;
    double worst = 0.0;
    for (Resonance r : kResonances) {
        const SubharmonicPotential p(kTable, r);
        worst = std::max(worst, parity_period_defect(p, p.period()));
        check_profile(v, p, "(" + std::to_string(r.m) + "," + std::to_string(r.n) + ")");
    }
    v.require(worst <= 1e-10, "parity/period defect " + sci(worst));
    v.note("parity/period defect " + sci(worst));
    return v;
}

Verdict homoclinic() {
    Verdict v;
    const HomoclinicPotential p(kTable, 1e-12);
    const double worst = parity_period_defect(p, p.period());
    v.require(worst <= 1e-10, "parity/period defect " + sci(worst));
    check_profile(v, p, "homoclinic");
    v.note("parity/period defect " + sci(worst));
    return v;
}

Verdict final_limit() {
    Verdict v;
    const auto odd = limit_gaps(kTable, resonance_ladder(true, 2, 6), 1.0);
    const auto even = limit_gaps(kTable, resonance_ladder(false, 2, 5), 2.0);
    v.require(limit_gaps_converge(odd), "odd ladder");
    v.require(limit_gaps_converge(even), "even ladder");
    v.note("odd gap " + sci(odd.front().gap) + " -> " + sci(odd.back().gap) + ", even gap " + sci(even.front().gap) +
           " -> " + sci(even.back().gap));
    v.require(!limit_gaps_converge(limit_gaps(kTable, resonance_ladder(true, 2, 6), 2.0)), "swapped odd converges");
    v.require(!limit_gaps_converge(limit_gaps(kTable, resonance_ladder(false, 2, 5), 1.0)), "swapped even converges");
    const double b2 = beta2(kTable).coefficient2;
    std::vector<double> gaps;
    for (double kc : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6})
        gaps.push_back(std::abs(alpha2(kTable, caustic_from_complementary_modulus(kTable, kc)).coefficient2 - b2));
    v.require(strictly_decreasing_10x(gaps), "alpha2 -> beta2");
    v.note("|alpha2-beta2| " + sci(gaps.front()) + " -> " + sci(gaps.back()));
    return v;
}

Verdict unperturbed_dynamics() {
    Verdict v;
    const EllipseBoundary e(kTable);
    const CausticData cd = caustic_from_lambda(kTable, 0.5);
    const DriftSeries ds = caustic_drift(e, polygon_start(e, cd, 0.2), 10000);
    v.require(ds.max_drift <= 1e-10, "caustic drift " + sci(ds.max_drift));

    const double expected = std::exp(2.0 * std::log((kTable.a + kTable.c) / kTable.b));
    const HyperbolicOrbit ho = hyperbolic_orbit(e);
    const double dev = std::abs(ho.multiplier - expected);
    v.require(dev <= 1e-6, "multiplier off by " + sci(dev));

    // Single steps from exact polygon vertices; iterating would measure the twist near the separatrix instead.
    double step_err = 0.0;
    for (Resonance r : kResonances) {
        const CausticData rc = resonant_caustic(kTable, r);
        for (int i = 0; i < 2000; ++i) {
            const double t0 = 4.0 * rc.modulus.K * i / 2000.0;
            const PhaseState s = billiard_step(e, polygon_start(e, rc, t0));
            step_err = std::max(step_err, std::abs(s.unwrapped() - amplitude(t0 + rc.delta, rc.modulus)));
        }
    }
    v.require(step_err <= 1e-9, "rigid rotation error " + sci(step_err));
    v.note("drift " + sci(ds.max_drift) + ", multiplier error " + sci(dev) + ", step error " + sci(step_err));
    return v;
}

Verdict perturbed_dynamics() {
    Verdict v;
    const double eps = 1e-3;
    const PerturbedTable p(kTable, eps);
    const Resonance r{1, 3};
    const CausticData cd = resonant_caustic(kTable, r);
    const std::vector<OrbitResult> orbits = birkhoff_sweep(p, cd, r);
    bool phases = orbits.size() == 2;
    if (phases) {
        phases = circular_distance(orbits[0].phase, 0.0, cd.zeta) <= 5 * eps &&
                 circular_distance(orbits[1].phase, cd.zeta / 2, cd.zeta) <= 5 * eps;
    }
    v.require(phases, std::to_string(orbits.size()) + " Birkhoff orbits or phases off");
    v.note(std::to_string(orbits.size()) + " orbits");

    const EllipseBoundary e(kTable);
    const int bounces = 10 * r.n;
    const double d0 = caustic_drift(e, polygon_start(e, cd, cd.zeta / 4), bounces).max_drift;
    const double d1 = caustic_drift(p, polygon_start(p, cd, cd.zeta / 4), bounces).max_drift;
    v.require(d1 > 0.0 && d1 >= 10 * d0, "drift " + sci(d1) + " vs " + sci(d0));
    v.note("drift " + sci(d1) + " vs unperturbed " + sci(d0));

    const HomoclinicPotential hom(kTable);
    const double expected_sign = hom.value(0.0) - hom.value(hom.period() / 2) < 0 ? -1.0 : 1.0;
    std::vector<double> ratio;
    bool sign_ok = true;
    for (double e2 : {4e-4, 2e-4, 1e-4}) {
        const SplittingResult sr = splitting_measure(PerturbedTable(kTable, e2), e2);
        ratio.push_back(sr.signed_gap / e2);
        sign_ok = sign_ok && (sr.signed_gap < 0 ? -1.0 : 1.0) == expected_sign;
    }
    const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
    const double spread = (*hi - *lo) / std::abs(ratio.back());
    v.require(spread <= 0.2, "gap/eps spread " + sci(spread));
    v.require(sign_ok, "splitting sign");
    v.note("gap/eps " + sci(ratio.front()) + ", spread " + sci(spread));
    return v;
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "elliptic identities", 5, elliptic_identities},
        {2, "caustic tangency", 5, tangency},
        {3, "focal property", 1, focal},
        {4, "separatrix limits", 5, separatrix_limit},
        {5, "first-order flow validation", 60, first_order},
        {6, "subharmonic potentials", 5, subharmonic},
        {7, "homoclinic potential", 2, homoclinic},
        {8, "limit gaps and alpha2 -> beta2", 30, final_limit},
        {9, "unperturbed dynamics", 30, unperturbed_dynamics},
        {10, "perturbed dynamics", 300, perturbed_dynamics},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.ok = false;
            v.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.budget_s) v.require(false, "over runtime budget");
        if (!v.ok) ++failures;
        std::printf("%s criterion %d (%s) %.2fs/%.0fs: %s\n", v.ok ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures;
}
