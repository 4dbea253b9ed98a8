// ellflow: command-line front end. Each subcommand prints a JSON summary
// on stdout and, with --out PREFIX, writes PREFIX.csv and PREFIX.json.
//
// Exit codes: 0 ok, 2 usage or domain error, 3 property violation,
// 4 numerical guard.

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ellflow/ellflow.hpp"

#ifndef ELLFLOW_VERSION
#define ELLFLOW_VERSION "0.0.0"
#endif

using json = nlohmann::ordered_json;
using namespace ellflow;

namespace {

struct Common {
    double a = 2.0;
    double b = 1.0;
    std::string out;
};

struct Output {
    json meta;
    std::optional<CsvWriter> csv;
    int exit_code = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--a", c.a, "major semi-axis")->capture_default_str();
    cmd->add_option("--b", c.b, "minor semi-axis")->capture_default_str();
    cmd->add_option("--out", c.out, "output prefix for PREFIX.csv and PREFIX.json");
}

json table_json(const EllipseTable& t) { return {{"a", t.a}, {"b", t.b}, {"c", t.c}}; }

json caustic_json(const CausticData& cd) {
    return {{"lambda", cd.lambda},   {"b_minus_lambda", cd.lambda_gap}, {"k", cd.modulus.k},
            {"kc", cd.modulus.kc},   {"K", cd.modulus.K},               {"Kprime", cd.modulus.Kprime},
            {"delta", cd.delta},     {"zeta", cd.zeta},                 {"rho", cd.rho}};
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw domain_error("not a number in list: '" + item + "'");
        v.push_back(x);
    }
    return v;
}

// ---------------------------------------------------------------- caustic

struct CausticArgs {
    Common common;
    int m = 0, n = 0;
    double lambda = 0.0;
    int vertices = 16;
};

Output run_caustic(const CausticArgs& args, CLI::App* cmd) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const bool by_lambda = cmd->count("--lambda") > 0;
    const bool by_res = cmd->count("--m") > 0 || cmd->count("--n") > 0;
    if (by_lambda == by_res) throw domain_error("give either --m and --n or --lambda");
    CausticData cd;
    int count = args.vertices;
    Output out;
    if (by_res) {
        const Resonance r = make_resonance(args.m, args.n);
        cd = resonant_caustic(table, r);
        count = r.n;
        out.meta["resonance"] = {{"m", r.m}, {"n", r.n}};
        out.meta["resonance_residual"] = std::abs(r.n * cd.delta - 4.0 * cd.modulus.K * r.m);
    } else {
        cd = caustic_from_lambda(table, args.lambda);
    }
    out.meta["caustic"] = caustic_json(cd);
    out.csv.emplace(std::vector<std::string>{"j", "t", "phi", "x", "y", "tangency_residual"});
    double worst = 0.0;
    for (int j = 0; j < count; ++j) {
        const double t = j * cd.delta;
        const Point q = point_t(table, cd, t);
        const double res = tangency_residual(table, cd, t);
        worst = std::max(worst, std::abs(res));
        out.csv->row({double(j), t, phi_of_t(cd, t), q.x(), q.y(), res});
    }
    out.meta["max_tangency_residual"] = worst;
    if (by_res) {
        const EllipseBoundary ellipse(table);
        PhaseState s = polygon_start(ellipse, cd, 0.0);
        const PhaseState s0 = s;
        for (int j = 0; j < count; ++j) s = billiard_step(ellipse, s);
        out.meta["closure_residual"] =
            std::max(std::abs(s.unwrapped() - s0.unwrapped() - 2.0 * std::numbers::pi * args.m), (s.direction - s0.direction).norm());
    }
    return out;
}

// --------------------------------------------------------------- melnikov

struct MelnikovArgs {
    Common common;
    std::string kind;
    int m = 1, n = 3;
    int samples = 512;
    double tol = 1e-12;
};

template <class P>
void fill_profile(Output& out, const P& pot, int samples) {
    out.csv.emplace(std::vector<std::string>{"argument", "value", "derivative"});
    out.meta["period"] = pot.period();
    double even = 0.0, periodic = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double x = pot.period() * i / samples;
        even = std::max(even, std::abs(pot.jet(x).value - pot.jet(-x).value));
        periodic = std::max(periodic, std::abs(pot.jet(x + pot.period()).value - pot.jet(x).value));
    }
    out.meta["evenness_residual"] = even;
    out.meta["periodicity_residual"] = periodic;
    try {
        const MelnikovProfile prof = critical_points(pot, samples);
        for (std::size_t i = 0; i < prof.grid.size(); ++i)
            out.csv->row({prof.grid[i], prof.values[i], prof.derivatives[i]});
        json cps = json::array();
        for (const CriticalPoint& cp : prof.critical_points)
            cps.push_back({{"location", cp.location}, {"value", cp.value}, {"derivative", cp.derivative},
                           {"second_derivative", cp.second}});
        out.meta["critical_points"] = cps;
        out.meta["nondegeneracy_margin"] = prof.nondegeneracy_margin;
        out.meta["nonconstancy_margin"] = prof.nonconstancy_margin;
    } catch (const property_violation& e) {
        for (int i = 0; i < samples; ++i) {
            const double x = pot.period() * i / samples;
            const Jet1 j = pot.jet(x);
            out.csv->row({x, j.value, j.d1});
        }
        out.meta["violation"] = e.what();
        out.exit_code = e.exit_code();
    }
}

Output run_melnikov(const MelnikovArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    Output out;
    out.meta["kind"] = args.kind;
    if (args.kind == "sub") {
        const SubharmonicPotential pot(table, make_resonance(args.m, args.n));
        out.meta["resonance"] = {{"m", args.m}, {"n", args.n}};
        out.meta["caustic"] = caustic_json(pot.caustic());
        const LaurentEstimate le = alpha2(table, pot.caustic());
        out.meta["alpha2"] = le.coefficient2;
        out.meta["alpha1"] = {le.coefficient1.real(), le.coefficient1.imag()};
        out.meta["pole"] = {le.pole.real(), le.pole.imag()};
        out.meta["pole_root_residual"] = le.root_residual;
        fill_profile(out, pot, args.samples);
    } else {
        const HomoclinicPotential pot(table, args.tol);
        out.meta["tol"] = args.tol;
        const LaurentEstimate le = beta2(table);
        out.meta["beta2"] = le.coefficient2;
        out.meta["beta1"] = {le.coefficient1.real(), le.coefficient1.imag()};
        out.meta["pole"] = {le.pole.real(), le.pole.imag()};
        out.meta["pole_root_residual"] = le.root_residual;
        out.meta["L_at_0_minus_L_at_half_period"] = pot.value(0.0) - pot.value(0.5 * pot.period());
        fill_profile(out, pot, args.samples);
    }
    return out;
}

// ------------------------------------------------------------------ limit

struct LimitArgs {
    Common common;
    std::string parity = "odd";
    int j_min = 2;
    int j_max = 0;
    double lo = -1.0, hi = 1.0;
    int samples = 41;
    double kappa = 0.0;
    double tol = 1e-12;
};

Output run_limit(const LimitArgs& args, CLI::App* cmd) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const bool odd = args.parity == "odd";
    const int j_max = args.j_max > 0 ? args.j_max : (odd ? 6 : 5);
    if (j_max < 3 || j_max < args.j_min) throw domain_error("limit: need j_max >= 3 and j_max >= j_min");
    const double kappa = cmd->count("--kappa") ? args.kappa : (odd ? 1.0 : 2.0);
    const auto rows = limit_gaps(table, resonance_ladder(odd, args.j_min, j_max), kappa, args.lo, args.hi, args.tol,
                                 args.samples);
    Output out;
    out.meta["parity"] = args.parity;
    out.meta["kappa"] = kappa;
    out.meta["compact"] = {args.lo, args.hi};
    out.csv.emplace(std::vector<std::string>{"j", "m", "n", "b_minus_lambda", "gap"});
    json gaps = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.csv->row({double(args.j_min + int(i)), double(rows[i].res.m), double(rows[i].res.n), rows[i].lambda_gap,
                      rows[i].gap});
        gaps.push_back(rows[i].gap);
    }
    out.meta["gaps"] = gaps;
    const bool ok = limit_gaps_converge(rows);
    out.meta["converges"] = ok;
    if (!ok) out.exit_code = property_violation("").exit_code();
    return out;
}

// --------------------------------------------------------------- dynamics

struct DynamicsArgs {
    Common common;
    int m = 1, n = 3;
    double eps = 1e-3;
    int seeds = 32;
    int points = 256;
    int iterates = 4;
    std::string eps_ladder = "4e-4,2e-4,1e-4";
    int bounces = 0;
};

Output run_orbit(const DynamicsArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const Resonance r = make_resonance(args.m, args.n);
    const CausticData cd = resonant_caustic(table, r);
    const PerturbedTable pt(table, args.eps);
    const auto orbits = birkhoff_sweep(pt, cd, r, args.seeds);
    Output out;
    out.meta["resonance"] = {{"m", r.m}, {"n", r.n}};
    out.meta["eps"] = args.eps;
    out.meta["zeta"] = cd.zeta;
    out.csv.emplace(std::vector<std::string>{"orbit", "vertex", "phi", "x", "y"});
    json list = json::array();
    for (std::size_t i = 0; i < orbits.size(); ++i) {
        const OrbitResult& o = orbits[i];
        for (std::size_t j = 0; j < o.points.size(); ++j)
            out.csv->row({double(i), double(j), o.states[j].phi, o.points[j].x(), o.points[j].y()});
        const double to_zero = circular_distance(o.phase, 0.0, cd.zeta);
        const double to_half = circular_distance(o.phase, 0.5 * cd.zeta, cd.zeta);
        list.push_back({{"phase", o.phase},
                        {"distance_to_symmetric_phase", std::min(to_zero, to_half)},
                        {"length", o.length},
                        {"closure_residual", o.closure_residual},
                        {"gradient_norm", o.gradient_norm},
                        {"winding", o.winding}});
    }
    out.meta["orbits"] = list;
    out.meta["orbit_count"] = orbits.size();
    return out;
}

Output run_hyperbolic(const DynamicsArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const PerturbedTable pt(table, args.eps);
    const HyperbolicOrbit ho = hyperbolic_orbit(pt);
    const HyperbolicData hd = characteristic_exponent(table);
    Output out;
    out.meta["eps"] = args.eps;
    out.meta["h"] = hd.h;
    out.meta["exp_h"] = hd.eigenvalue;
    out.meta["multiplier"] = ho.multiplier;
    out.meta["multiplier_minus_exp_h"] = ho.multiplier - hd.eigenvalue;
    out.meta["squared_map_eigenvalues"] = {ho.eigen_large, ho.eigen_small};
    out.meta["determinant"] = ho.determinant;
    out.csv.emplace(std::vector<std::string>{"vertex", "phi", "p", "x", "y"});
    for (int i = 0; i < 2; ++i) {
        const Eigen::Vector2d v = i == 0 ? ho.vertex_right : ho.vertex_left;
        const Point q = pt.point(v.x());
        out.csv->row({double(i), v.x(), v.y(), q.x(), q.y()});
    }
    return out;
}

Output run_manifolds(const DynamicsArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const PerturbedTable pt(table, args.eps);
    Output out;
    out.meta["eps"] = args.eps;
    out.meta["points"] = args.points;
    out.meta["iterates"] = args.iterates;
    out.csv.emplace(std::vector<std::string>{"branch", "index", "phi", "s_fraction", "p"});
    for (Branch br : {Branch::unstable, Branch::stable}) {
        const ManifoldSegment seg = manifold_segment(pt, br, args.points, args.iterates);
        for (std::size_t i = 0; i < seg.points.size(); ++i)
            out.csv->row({br == Branch::unstable ? 0.0 : 1.0, double(i), seg.points[i].phi, seg.points[i].s_fraction,
                          seg.points[i].p});
    }
    return out;
}

Output run_splitting(const DynamicsArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const std::vector<double> ladder = parse_list(args.eps_ladder);
    if (ladder.empty()) throw domain_error("splitting: empty eps ladder");
    const HomoclinicPotential hom(table);
    const double melnikov_sign = hom.value(0.0) - hom.value(0.5 * hom.period());
    Output out;
    out.csv.emplace(std::vector<std::string>{"eps", "signed_gap", "gap_over_eps", "angle", "transversal"});
    json rows = json::array();
    double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
    bool signs_ok = true, transversal = true;
    for (double eps : ladder) {
        if (!(eps > 0.0)) throw domain_error("splitting: ladder values must be positive");
        const PerturbedTable pt(table, eps);
        const SplittingResult sr = splitting_measure(pt, eps);
        const double ratio = sr.signed_gap / eps;
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
        signs_ok = signs_ok && (sr.signed_gap < 0.0) == (melnikov_sign < 0.0);
        transversal = transversal && sr.transversal;
        out.csv->row({eps, sr.signed_gap, ratio, sr.angle, sr.transversal ? 1.0 : 0.0});
        rows.push_back({{"eps", eps}, {"signed_gap", sr.signed_gap}, {"gap_over_eps", ratio}, {"angle", sr.angle},
                        {"transversal", sr.transversal}, {"homoclinic_p_mismatch", sr.homoclinic_p_mismatch}});
    }
    const double spread = (rmax - rmin) / std::max(std::abs(rmax), std::abs(rmin));
    out.meta["section_phi"] = std::asin(std::tanh(0.25 * characteristic_exponent(table).h));
    out.meta["ladder"] = rows;
    out.meta["ratio_spread"] = spread;
    out.meta["L_at_0_minus_L_at_half_period"] = melnikov_sign;
    out.meta["sign_matches"] = signs_ok;
    out.meta["transversal"] = transversal;
    if (!(spread <= 0.2) || !signs_ok || !transversal) out.exit_code = property_violation("").exit_code();
    return out;
}

Output run_drift(const DynamicsArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const Resonance r = make_resonance(args.m, args.n);
    const CausticData cd = resonant_caustic(table, r);
    const int bounces = args.bounces > 0 ? args.bounces : 10 * r.n;
    const double t0 = 0.25 * cd.zeta;
    const EllipseBoundary ellipse(table);
    const PerturbedTable pt(table, args.eps);
    const DriftSeries base = caustic_drift(ellipse, polygon_start(ellipse, cd, t0), bounces);
    const DriftSeries pert = caustic_drift(pt, polygon_start(pt, cd, t0), bounces);
    Output out;
    out.meta["resonance"] = {{"m", r.m}, {"n", r.n}};
    out.meta["eps"] = args.eps;
    out.meta["start_phase"] = t0;
    out.meta["bounces"] = bounces;
    out.meta["caustic_lambda"] = cd.lambda;
    out.meta["max_drift"] = pert.max_drift;
    out.meta["unperturbed_max_drift"] = base.max_drift;
    out.csv.emplace(std::vector<std::string>{"bounce", "lambda", "lambda_minus_start", "unperturbed_lambda"});
    for (int i = 0; i < bounces; ++i)
        out.csv->row({double(i), pert.lambda[i], pert.lambda[i] - pert.lambda[0], base.lambda[i]});
    return out;
}

// ---------------------------------------------------------- flow-validate

struct FlowArgs {
    Common common;
    std::string eps_ladder = "4e-3,2e-3,1e-3";
    int mesh = 2048;
};

Output run_flow(const FlowArgs& args) {
    const EllipseTable table = make_table(args.common.a, args.common.b);
    const std::vector<double> ladder = parse_list(args.eps_ladder);
    if (ladder.size() < 3) throw domain_error("flow-validate: need at least 3 eps values");
    Output out;
    out.meta["mesh"] = args.mesh;
    out.csv.emplace(std::vector<std::string>{"eps", "error_norm", "ratio_to_previous", "steps"});
    json rows = json::array();
    bool ok = true;
    double prev = 0.0;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const FirstOrderCheck fc = validate_first_order(table, ladder[i], args.mesh);
        const double ratio = i ? fc.error_norm / prev : std::nan("");
        if (i) {
            const double expected = ladder[i] / ladder[i - 1];
            ok = ok && std::abs(ratio - expected) <= 0.3 * expected;
        }
        out.csv->row({ladder[i], fc.error_norm, ratio, double(fc.steps)});
        rows.push_back({{"eps", ladder[i]}, {"error_norm", fc.error_norm}, {"steps", fc.steps}});
        if (i) rows.back()["ratio_to_previous"] = ratio;
        prev = fc.error_norm;
    }
    out.meta["ladder"] = rows;
    out.meta["first_order"] = ok;
    if (!ok) out.exit_code = property_violation("").exit_code();
    return out;
}

// ------------------------------------------------------------ config file

// Reads key=value lines ('#' comments) into "--key=value" arguments.
std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw domain_error("cannot read config file " + path);
    std::vector<std::string> argsv;
    std::string line;
    while (std::getline(f, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw domain_error("config line without '=': " + line);
        std::string key = trim(line.substr(0, eq));
        for (char& ch : key)
            if (ch == '_') ch = '-';
        argsv.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    return argsv;
}

// Splices config-file options in right after the subcommand words so that
// options given on the command line, which come later, take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> in(argv + 1, argv + argc);
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == "--config" && i + 1 < in.size()) {
            path = in[++i];
        } else if (in[i].rfind("--config=", 0) == 0) {
            path = in[i].substr(9);
        } else {
            rest.push_back(in[i]);
        }
    }
    if (path.empty()) return rest;
    const std::vector<std::string> extra = config_arguments(path);
    std::size_t words = rest.empty() ? 0 : 1;
    if (!rest.empty() && rest[0] == "dynamics" && rest.size() > 1) words = 2;
    std::vector<std::string> out(rest.begin(), rest.begin() + words);
    out.insert(out.end(), extra.begin(), extra.end());
    out.insert(out.end(), rest.begin() + words, rest.end());
    return out;
}

void emit(const std::string& command, const std::vector<std::string>& args, Output& out, const Common& common) {
    json meta;
    meta["tool"] = "ellflow";
    meta["version"] = ELLFLOW_VERSION;
    meta["command"] = command;
    meta["arguments"] = args;
    meta["table"] = table_json(make_table(common.a, common.b));
    for (auto it = out.meta.begin(); it != out.meta.end(); ++it) meta[it.key()] = it.value();
    meta["exit_code"] = out.exit_code;
    const std::string text = meta.dump(2) + "\n";
    if (!common.out.empty()) {
        if (out.csv) write_file_atomic(common.out + ".csv", out.csv->str());
        write_file_atomic(common.out + ".json", text);
    }
    std::cout << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Elliptic billiards under curvature-flow deformation: caustics, Melnikov potentials, dynamics"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", ELLFLOW_VERSION);
    std::string config_path;
    app.add_option("--config", config_path, "key=value file; command-line flags override it");

    CausticArgs ca;
    auto* caustic = app.add_subcommand("caustic", "caustic data and tangent polygon");
    add_common(caustic, ca.common);
    caustic->add_option("--m", ca.m, "turns of the resonance");
    caustic->add_option("--n", ca.n, "sides of the resonance");
    caustic->add_option("--lambda", ca.lambda, "caustic parameter in (0, b)");
    caustic->add_option("--vertices", ca.vertices, "chords to list for --lambda")->capture_default_str();

    MelnikovArgs ma;
    auto* melnikov = app.add_subcommand("melnikov", "Melnikov potential profile and critical points");
    add_common(melnikov, ma.common);
    melnikov->add_option("kind", ma.kind, "sub or hom")->required()->check(CLI::IsMember({"sub", "hom"}));
    melnikov->add_option("--m", ma.m)->capture_default_str();
    melnikov->add_option("--n", ma.n)->capture_default_str();
    melnikov->add_option("--samples", ma.samples)->capture_default_str();
    melnikov->add_option("--tol", ma.tol, "homoclinic truncation tolerance")->capture_default_str();

    LimitArgs la;
    auto* limit = app.add_subcommand("limit", "gaps between subharmonic and homoclinic profiles along a ladder");
    add_common(limit, la.common);
    limit->add_option("--parity", la.parity)->check(CLI::IsMember({"odd", "even"}))->capture_default_str();
    limit->add_option("--j-min", la.j_min)->capture_default_str();
    limit->add_option("--j-max", la.j_max, "default 6 (odd) or 5 (even)");
    limit->add_option("--compact-lo", la.lo)->capture_default_str();
    limit->add_option("--compact-hi", la.hi)->capture_default_str();
    limit->add_option("--samples", la.samples)->capture_default_str();
    limit->add_option("--kappa", la.kappa, "override the parity factor (1 odd, 2 even)");
    limit->add_option("--tol", la.tol)->capture_default_str();

    DynamicsArgs da;
    auto* dynamics = app.add_subcommand("dynamics", "billiard simulations");
    dynamics->require_subcommand(1);
    auto add_dyn = [&](const std::string& name, const std::string& help) {
        auto* s = dynamics->add_subcommand(name, help);
        add_common(s, da.common);
        s->add_option("--eps", da.eps)->capture_default_str();
        return s;
    };
    auto* orbit = add_dyn("orbit", "Birkhoff periodic orbits from a seed sweep");
    orbit->add_option("--m", da.m)->capture_default_str();
    orbit->add_option("--n", da.n)->capture_default_str();
    orbit->add_option("--seeds", da.seeds)->capture_default_str();
    auto* hyperbolic = add_dyn("hyperbolic", "major-axis two-periodic orbit");
    auto* manifolds = add_dyn("manifolds", "upper separatrix branches");
    manifolds->add_option("--points", da.points)->capture_default_str();
    manifolds->add_option("--iterates", da.iterates)->capture_default_str();
    auto* splitting = add_dyn("splitting", "separatrix splitting over an eps ladder");
    splitting->add_option("--eps-ladder", da.eps_ladder)->capture_default_str();
    auto* drift = add_dyn("drift", "caustic parameter along a perturbed trajectory");
    drift->add_option("--m", da.m)->capture_default_str();
    drift->add_option("--n", da.n)->capture_default_str();
    drift->add_option("--bounces", da.bounces, "default 10 n");

    FlowArgs fa;
    auto* flow = app.add_subcommand("flow-validate", "first-order check of the curvature-flow deformation");
    add_common(flow, fa.common);
    flow->add_option("--eps-ladder", fa.eps_ladder)->capture_default_str();
    flow->add_option("--mesh", fa.mesh)->capture_default_str();

    std::vector<std::string> args;
    try {
        args = expand_config(argc, argv);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ellflow::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }

    std::string command;
    const Common* common = nullptr;
    try {
        Output out;
        if (*caustic) {
            command = "caustic", common = &ca.common, out = run_caustic(ca, caustic);
        } else if (*melnikov) {
            command = "melnikov", common = &ma.common, out = run_melnikov(ma);
        } else if (*limit) {
            command = "limit", common = &la.common, out = run_limit(la, limit);
        } else if (*flow) {
            command = "flow-validate", common = &fa.common, out = run_flow(fa);
        } else {
            common = &da.common;
            if (*orbit) command = "dynamics orbit", out = run_orbit(da);
            if (*hyperbolic) command = "dynamics hyperbolic", out = run_hyperbolic(da);
            if (*manifolds) command = "dynamics manifolds", out = run_manifolds(da);
            if (*splitting) command = "dynamics splitting", out = run_splitting(da);
            if (*drift) command = "dynamics drift", out = run_drift(da);
        }
        emit(command, args, out, *common);
        return out.exit_code;
    } catch (const ellflow::error& e) {
        json diag = {{"tool", "ellflow"}, {"version", ELLFLOW_VERSION}, {"command", command}, {"arguments", args},
                     {"error", e.what()}, {"exit_code", e.exit_code()}};
        std::cerr << diag.dump(2) << "\n";
        if (common && !common->out.empty()) {
            try {
                write_file_atomic(common->out + ".json", diag.dump(2) + "\n");
            } catch (const std::exception&) {
            }
        }
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
