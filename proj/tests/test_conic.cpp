#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "ellflow/conic.hpp"
#include "oracles.hpp"

using namespace ellflow;

namespace {

const std::vector<Resonance> kResonances = {{1, 3}, {1, 4}, {2, 5}, {3, 7}};

double on_ellipse(const EllipseTable& t, const Point& p) {
    return p.x() * p.x() / (t.a * t.a) + p.y() * p.y() / (t.b * t.b) - 1.0;
}

} // namespace

TEST_CASE("table construction", "[conic]") {
    CHECK(std::abs(make_table(2, 1).c - std::sqrt(3.0)) <= 1e-15);
    CHECK(make_table(5, 3).c == 4.0);
    CHECK_THROWS_AS(make_table(1, 1), domain_error);
    CHECK_THROWS_AS(make_table(1, 2), domain_error);
    CHECK_THROWS_AS(make_table(1, 0), domain_error);
    CHECK_THROWS_AS(make_table(1, -1), domain_error);
}

TEST_CASE("resonance constraints", "[conic]") {
    CHECK_NOTHROW(make_resonance(1, 3));
    CHECK_NOTHROW(make_resonance(3, 7));
    CHECK_THROWS_AS(make_resonance(1, 2), domain_error);
    CHECK_THROWS_AS(make_resonance(2, 6), domain_error);
    CHECK_THROWS_AS(make_resonance(0, 5), domain_error);
    CHECK_THROWS_AS(make_resonance(3, 5), domain_error);
}

TEST_CASE("caustic invariants", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    for (int i = 1; i < 200; ++i) {
        const double lam = t.b * i / 200.0;
        const CausticData cd = caustic_from_lambda(t, lam);
        const double k2 = t.c * t.c / (t.a * t.a - lam * lam);
        CHECK(std::abs(cd.modulus.k * cd.modulus.k - k2) <= 1e-13);
        CHECK(std::abs(jacobi(cd.delta / 2, cd.modulus).sn - lam / t.b) <= 1e-11);
        CHECK(cd.delta > 0.0);
        CHECK(cd.delta < 2 * cd.modulus.K);
        CHECK(std::abs(cd.zeta + cd.delta - 2 * cd.modulus.K) <= 1e-13 * cd.modulus.K);
        CHECK(cd.rho > 0.0);
        CHECK(cd.rho < 0.5);
    }
    CHECK_THROWS_AS(caustic_from_lambda(t, 0.0), domain_error);
    CHECK_THROWS_AS(caustic_from_lambda(t, 1.0), domain_error);
    CHECK_THROWS_AS(caustic_from_lambda(t, 1.5), domain_error);
}

TEST_CASE("caustic at lambda = 0.5 matches the reference values", "[conic]") {
    const CausticData cd = caustic_from_lambda(make_table(2, 1), 0.5);
    CHECK(std::abs(cd.modulus.k - oracle::lam05_k) <= 1e-14);
    CHECK(std::abs(cd.modulus.K - oracle::lam05_K) <= 1e-13);
    CHECK(std::abs(cd.delta - oracle::lam05_delta) <= 1e-13);
    CHECK(std::abs(cd.zeta - oracle::lam05_zeta) <= 1e-13);
    CHECK(std::abs(cd.rho - oracle::lam05_rho) <= 1e-14);
}

TEST_CASE("the two caustic constructors agree", "[conic]") {
    const EllipseTable t = make_table(3, 2);
    for (double lam : {0.1, 0.8, 1.5, 1.99, 1.99999}) {
        const CausticData a = caustic_from_lambda(t, lam);
        const CausticData b = caustic_from_complementary_modulus(t, a.modulus.kc);
        CHECK(std::abs(a.lambda - b.lambda) <= 1e-13);
        CHECK(std::abs(a.lambda_gap - b.lambda_gap) <= 1e-12 * a.lambda_gap);
        CHECK(std::abs(a.delta - b.delta) <= 1e-12);
    }
    CHECK_THROWS_AS(caustic_from_complementary_modulus(t, 0.0), domain_error);
    CHECK_THROWS_AS(caustic_from_complementary_modulus(t, 2.0 / 3.0), domain_error);
}

TEST_CASE("rotation number is increasing with the endpoint values", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
        const double rho = caustic_from_lambda(t, t.b * i / 1000.0).rho;
        CHECK(rho > prev);
        prev = rho;
    }
    CHECK(caustic_from_lambda(t, 1e-9).rho < 1e-9);
    CHECK(0.5 - caustic_from_complementary_modulus(t, 1e-12).rho < 0.05);
    CHECK(0.5 - caustic_from_complementary_modulus(t, 1e-200).rho < 0.003);
}

TEST_CASE("resonant caustics", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    const double expected[] = {oracle::lambda_1_3, oracle::lambda_1_4, oracle::lambda_2_5, oracle::lambda_3_7};
    for (size_t i = 0; i < kResonances.size(); ++i) {
        const Resonance r = kResonances[i];
        const CausticData cd = resonant_caustic(t, r);
        CHECK(std::abs(cd.lambda - expected[i]) <= 1e-13);
        CHECK(std::abs(cd.rho - double(r.m) / r.n) <= 1e-13);
        CHECK(std::abs(r.n * cd.delta - 4 * cd.modulus.K * r.m) <= 1e-10);
    }
    CHECK_THROWS_AS(resonant_caustic(t, {1, 2}), domain_error);
}

TEST_CASE("near-half resonances resolve close to the separatrix", "[conic]") {
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{3.0, 2.0}, std::pair{1.5, 1.0}}) {
        const EllipseTable t = make_table(a, b);
        for (Resonance r : {Resonance{6, 13}, Resonance{9, 20}, Resonance{5, 11}, Resonance{9, 19}}) {
            const CausticData cd = resonant_caustic(t, r);
            CHECK(std::abs(cd.rho - double(r.m) / r.n) <= 1e-13);
            CHECK(std::abs(r.n * cd.delta - 4 * cd.modulus.K * r.m) <= 1e-10);
            CHECK(cd.lambda_gap > 0.0);
        }
    }
}

TEST_CASE("closed resonant polygon winds m times", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    for (Resonance r : kResonances) {
        const CausticData cd = resonant_caustic(t, r);
        for (double t0 : {0.0, 0.3, 1.7}) {
            double winding = 0.0;
            for (int j = 1; j <= r.n; ++j)
                winding += phi_of_t(cd, t0 + j * cd.delta) - phi_of_t(cd, t0 + (j - 1) * cd.delta);
            CHECK(std::abs(winding - 2 * std::numbers::pi * r.m) <= 1e-9);
            CHECK((point_t(t, cd, t0 + r.n * cd.delta) - point_t(t, cd, t0)).norm() <= 1e-9);
        }
    }
}

TEST_CASE("parameterized points lie on the ellipse", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    const CausticData cd = caustic_from_lambda(t, 0.7);
    for (int i = -500; i <= 500; ++i) {
        CHECK(std::abs(on_ellipse(t, point_t(t, cd, i * 0.037))) <= 1e-12);
        const Point p = point_s(t, i * 0.02);
        CHECK(std::abs(on_ellipse(t, p)) <= 1e-12);
        CHECK(p.y() > 0.0);
    }
    CHECK((point_t(t, cd, 0.0) - Point(0, 1)).norm() == 0.0);
    CHECK((point_t(t, cd, cd.modulus.K) - Point(2, 0)).norm() <= 1e-14);
    CHECK((point_s(t, 0.0) - Point(0, 1)).norm() == 0.0);
    CHECK((point_s(t, 1.0) - Point(2 * std::tanh(1.0), 1 / std::cosh(1.0))).norm() <= 1e-15);
    CHECK((point_s(t, 40.0) - Point(2, 0)).norm() <= 1e-15);
    CHECK((point_s(t, -40.0) - Point(-2, 0)).norm() <= 1e-15);
}

TEST_CASE("chords of the shift are tangent to the caustic", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    for (Resonance r : kResonances) {
        const CausticData cd = resonant_caustic(t, r);
        double worst = 0.0, off = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double s = -4 * cd.modulus.K + 8 * cd.modulus.K * i / 1000.0;
            worst = std::max(worst, std::abs(tangency_residual(t, cd, s)));
            off = std::max(off, std::abs(tangency_residual(t, cd, s, cd.delta + 0.1)));
            CHECK(std::abs(tangency_residual(t, cd, s) - tangency_residual(t, cd, s + 2 * cd.modulus.K)) <= 1e-12);
        }
        CHECK(worst <= 1e-10);
        CHECK(off > 1e-2);
    }
}

TEST_CASE("homoclinic chords pass through the focus", "[conic]") {
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{5.0, 3.0}}) {
        const EllipseTable t = make_table(a, b);
        for (int i = 0; i <= 1000; ++i)
            CHECK(focal_residual(t, -5.0 + 10.0 * i / 1000.0) <= 1e-10);
        const double h = characteristic_exponent(t).h;
        CHECK(focal_residual(t, 0.0, h + 0.1) > 1e-3);
    }
}

TEST_CASE("characteristic exponent", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    const HyperbolicData hd = characteristic_exponent(t);
    CHECK(std::abs(hd.h - oracle::h) <= 1e-14);
    CHECK(std::abs(hd.eigenvalue - oracle::exp_h) <= 1e-12);
    // Independent root of sinh(h/2) = c/b.
    std::uintmax_t iters = 100;
    auto [lo, hi] = boost::math::tools::bisect([&](double x) { return std::sinh(x / 2) - t.c / t.b; }, 0.0, 10.0,
                                               boost::math::tools::eps_tolerance<double>(52), iters);
    CHECK(std::abs(hd.h - 0.5 * (lo + hi)) <= 1e-13);
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{5.0, 3.0}, std::pair{1.01, 1.0}}) {
        const EllipseTable u = make_table(a, b);
        const double hh = characteristic_exponent(u).h;
        CHECK(std::abs(std::sinh(hh / 2) - u.c / u.b) <= 1e-13);
        CHECK(std::abs(std::cosh(hh / 2) - u.a / u.b) <= 1e-13);
        CHECK(std::abs(std::tanh(hh / 2) - u.c / u.a) <= 1e-13);
    }
    CHECK(characteristic_exponent(make_table(1.0, 1.0 - 1e-10)).h < 1e-4);
}

TEST_CASE("elliptic coordinates", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    const double mu0 = boundary_mu(t);
    CHECK(std::abs(std::cosh(mu0) - t.a / t.c) <= 1e-15);
    const EllipticCoords top = elliptic_coords(t, {0.0, 1.0});
    CHECK(std::abs(top.mu - mu0) <= 1e-14);
    CHECK(std::abs(top.phi) <= 1e-15);
    const EllipticCoords right = elliptic_coords(t, {2.0, 0.0});
    CHECK(std::abs(right.mu - mu0) <= 1e-12);
    CHECK(std::abs(right.phi - std::numbers::pi / 2) <= 1e-15);
    CHECK_THROWS_AS(elliptic_coords(t, {0.5, 0.0}), domain_error);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uphi(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < 2000; ++i) {
        const double phi = uphi(rng);
        const Point p(t.a * std::sin(phi), t.b * std::cos(phi));
        const EllipticCoords ec = elliptic_coords(t, p);
        CHECK(std::abs(ec.mu - mu0) <= 1e-11);
        CHECK((from_elliptic_coords(t, ec) - p).norm() <= 1e-11);
    }
}

TEST_CASE("subharmonic data tends to the homoclinic data near the separatrix", "[conic]") {
    const EllipseTable t = make_table(2, 1);
    const double h = characteristic_exponent(t).h;
    std::vector<double> dz, dkp, dq, dshift;
    for (double kc : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        const CausticData cd = caustic_from_complementary_modulus(t, kc);
        dz.push_back(std::abs(cd.zeta - h));
        dkp.push_back(std::abs(cd.modulus.Kprime - std::numbers::pi / 2));
        double sup = 0.0, sup_shift = 0.0;
        for (int i = 0; i <= 600; ++i) {
            const double s = -3.0 + 6.0 * i / 600.0;
            sup = std::max(sup, (point_t(t, cd, s) - point_s(t, s)).norm());
            sup_shift = std::max(sup_shift, (point_t(t, cd, s + cd.delta) + point_s(t, s - h)).norm());
            sup_shift = std::max(sup_shift, (point_t(t, cd, s - cd.delta) + point_s(t, s + h)).norm());
        }
        dq.push_back(sup);
        dshift.push_back(sup_shift);
    }
    for (const auto* seq : {&dz, &dkp, &dq, &dshift}) {
        for (size_t i = 1; i < seq->size(); ++i) CHECK((*seq)[i] < (*seq)[i - 1]);
        CHECK(seq->back() <= seq->front() / 10.0);
    }
}
