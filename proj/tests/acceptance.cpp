// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "cknlab/branch_analysis.hpp"
#include "cknlab/cylinder.hpp"
#include "cknlab/errors.hpp"
#include "cknlab/functionals.hpp"
#include "cknlab/params.hpp"
#include "cknlab/sphere_flows.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cknlab;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// collects failures with a short message; the first few are reported
struct Tally {
    int failed = 0, total = 0;
    std::ostringstream first;
    void check(bool c, const std::string& what) {
        ++total;
        if (!c && failed++ < 3) first << (failed > 1 ? "; " : "") << what;
    }
    Outcome outcome(const std::string& summary) const {
        Outcome o;
        o.ok = failed == 0;
        o.detail = summary + " [" + std::to_string(total - failed) + "/" + std::to_string(total) + " checks]";
        if (!o.ok) o.detail += " first failures: " + first.str();
        return o;
    }
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const int D = 5;
const double P = 2.8;

CKNParams cyl(int d, double p, double Lambda, double theta = 1) {
    ParamInputs in;
    in.p = p;
    in.Lambda = Lambda;
    in.theta = theta;
    return derive_params(d, in, Mode::cylinder);
}

// ---- independent oracles

double sphere_area(int d) { return 2 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0); }

// CKN quotient of v_*(x) = (1 + |x|^k)^{-2/(p-2)}, k = (p-2)(a_c-a), in s = k log r
double cstar_quadrature(int d, double a, double p) {
    const double ac = 0.5 * (d - 2);
    const double b = a + d / p - ac;
    const double k = (p - 2) * (ac - a);
    const double e = -2 / (p - 2);
    auto ex = [](double A, double B, double s) {
        return s > 0 ? (A + B) * s + A * std::log1p(std::exp(-s)) : B * s + A * std::log1p(std::exp(s));
    };
    const double cp = (-b * p + d) / k, cg = (2 * (k - 1) - 2 * a + d) / k;
    const double Ap = p * e, Ag = 2 * (e - 1);
    const double p0 = ex(Ap, cp, 0), g0 = ex(Ag, cg, 0);
    boost::math::quadrature::sinh_sinh<double> ss;
    double lIp = std::log(ss.integrate([&](double s) { return std::exp(ex(Ap, cp, s) - p0); })) + p0 - std::log(k);
    double lIg = std::log(ss.integrate([&](double s) { return std::exp(ex(Ag, cg, s) - g0); })) + g0 -
                 std::log(k) + 2 * std::log(std::abs(e) * k);
    const double lS = std::log(sphere_area(d));
    return std::exp((2 / p) * (lS + lIp) - lS - lIg);
}

// mu_* at theta = 1 from quadrature of the explicit cosh profile solving the ODE
double mu_star_quadrature(double p, double Lambda) {
    boost::math::quadrature::exp_sinh<double> es;
    double k = (p - 2) * std::sqrt(Lambda) / 2, c = std::pow(p * Lambda / 2, 1 / (p - 2));
    auto u = [&](double s) { return c * std::pow(std::cosh(k * s), -2 / (p - 2)); };
    auto du = [&](double s) { return -2 * k / (p - 2) * std::tanh(k * s) * u(s); };
    double g2 = 2 * es.integrate([&](double s) { return du(s) * du(s); }, 0.0, INFINITY);
    double l2 = 2 * es.integrate([&](double s) { return u(s) * u(s); }, 0.0, INFINITY);
    double lp = 2 * es.integrate([&](double s) { return std::pow(u(s), p); }, 0.0, INFINITY);
    return (g2 + Lambda * l2) / std::pow(lp, 2 / p);
}

// ---- criteria

Outcome c1_poschl_teller() {
    Tally t;
    const double lfs = lambda_fs(D, P);
    auto g = make_cylinder_grid(D, 20 / std::sqrt(lfs), 0.02, 8);
    double worst = 0, slowest = 0;
    for (double L : {2.0, lfs, 6.0, 8.0}) {
        auto t0 = std::chrono::steady_clock::now();
        CylinderField phi = solve_symmetric(D, P, L, g);
        double ev = linearized_spectrum(phi, L, 1, 1).eigenvalues(0);
        double el = seconds_since(t0);
        slowest = std::max(slowest, el);
        double ref = -0.25 * (P * P - 4) * (L - lfs);
        if (L == lfs) {
            t.check(std::abs(ev) <= 1e-4, "|eig| at Lambda_FS = " + fmt("%.2e", std::abs(ev)));
        } else {
            double rel = std::abs(ev - ref) / std::abs(ref);
            worst = std::max(worst, rel);
            t.check(rel <= 1e-3, "rel err at Lambda " + fmt("%g", L) + " = " + fmt("%.2e", rel));
        }
        t.check(el <= 10, "point time " + fmt("%.1f s", el));
    }
    return t.outcome("max rel err " + fmt("%.2e", worst) + ", slowest point " + fmt("%.1f s", slowest));
}

Outcome c2_symmetric_profile() {
    Tally t;
    double worst_res = 0, worst_q = 0;
    for (double L : {0.5, 1.0, 4.0, 8.0}) {
        auto g = make_cylinder_grid(D, 20 / std::sqrt(std::min(L, 1.0)), 0.02, 4);
        CylinderField phi = solve_symmetric(D, P, L, g);
        double res = residual_norm(phi, L);
        CylinderEnergies e = energies(phi);
        double mu = cylinder_quotient(phi, L, P, 1.0).mu;
        double rel = std::abs(mu - std::pow(e.lpp, (P - 2) / P)) / mu;
        worst_res = std::max(worst_res, res);
        worst_q = std::max(worst_q, rel);
        t.check(res <= 1e-10, "residual " + fmt("%.2e", res) + " at Lambda " + fmt("%g", L));
        t.check(rel <= 1e-8, "quotient vs norm " + fmt("%.2e", rel) + " at Lambda " + fmt("%g", L));
    }
    return t.outcome("max residual " + fmt("%.2e", worst_res) + ", quotient identity " + fmt("%.2e", worst_q));
}

Outcome c3_scaling() {
    Tally t;
    const double m1 = mu_star_quadrature(P, 1.0);
    double worst = 0;
    for (double L : {0.5, 1.0, 4.0}) {
        double ratio = mu_star_quadrature(P, L) / m1;
        double rel = std::abs(ratio / std::pow(L, (P + 2) / (2 * P)) - 1);
        worst = std::max(worst, rel);
        t.check(rel <= 1e-8, "ratio at Lambda " + fmt("%g", L) + " off by " + fmt("%.2e", rel));
        double lib = mu_star(cyl(D, P, L), L, 1.0);
        t.check(std::abs(lib / mu_star_quadrature(P, L) - 1) <= 1e-8, "library mu_star at " + fmt("%g", L));
    }
    return t.outcome("max rel deviation " + fmt("%.2e", worst));
}

Outcome c4_optimal_constant() {
    Tally t;
    auto t0 = std::chrono::steady_clock::now();
    struct S {
        int d;
        double a, p;
    };
    double worst = 0;
    for (S s : {S{5, 0.0, 2.5}, S{3, -1.0, 3.5}, S{4, -0.5, 3.0}, S{6, 1.2, 2.3}, S{3, -0.2, 5.0}}) {
        const double b = s.a + s.d / s.p - 0.5 * (s.d - 2);
        ParamInputs in;
        in.a = s.a;
        in.b = b;
        CKNParams prm = derive_params(s.d, in, Mode::critical);
        double q = cstar_quadrature(s.d, s.a, s.p), c = optimal_constant_star(prm);
        double rel = std::abs(c - q) / q;
        worst = std::max(worst, rel);
        t.check(rel <= 1e-7, "d=" + std::to_string(s.d) + " a=" + fmt("%g", s.a) + " rel " + fmt("%.2e", rel));
    }
    double el = seconds_since(t0);
    t.check(el <= 5, "runtime " + fmt("%.1f s", el));
    return t.outcome("max rel err " + fmt("%.2e", worst));
}

// shared by 5, 6 and 12
struct FlowLog {
    int trajectories = 0;
    double worst_mass = 0, min_density = INFINITY;
};
FlowLog flow_log;

GridFunction1D unit_mass_density(std::shared_ptr<const ZonalBasis> B, std::mt19937_64& rng) {
    std::normal_distribution<double> N;
    double c[4];
    for (double& x : c) x = 0.6 * N(rng);
    auto f = [=](double z) { return std::exp(c[0] * z + c[1] * z * z + c[2] * z * z * z + 0.3 * c[3] * std::cos(4 * z)); };
    double M = integrate(zonal_function(B, f));
    return zonal_function(B, [&](double z) { return f(z) / M; });
}

double log_trajectory(const Trajectory& tr) {
    double rise = -INFINITY;
    const double m0 = tr.samples.front().mass;
    for (size_t i = 0; i < tr.samples.size(); ++i) {
        const FlowSample& s = tr.samples[i];
        flow_log.worst_mass = std::max(flow_log.worst_mass, std::abs(s.mass - m0));
        flow_log.min_density = std::min(flow_log.min_density, s.min_density);
        if (i) rise = std::max(rise, s.deficit - tr.samples[i - 1].deficit);
    }
    ++flow_log.trajectories;
    return rise;
}

Outcome c5_heat() {
    Tally t;
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(501);
    auto B = std::make_shared<ZonalBasis>(3, 64);
    double worst = -INFINITY;
    for (double p : {3.0, 4.5}) {
        for (int k = 0; k < 20; ++k) {
            FlowSpec spec;
            spec.p = p;
            spec.t_end = 0.5;
            double rise = log_trajectory(integrate(make_state(unit_mass_density(B, rng)), spec));
            worst = std::max(worst, rise);
            t.check(rise <= 1e-8, "p=" + fmt("%g", p) + " rise " + fmt("%.2e", rise));
        }
    }
    CounterexampleResult ce = counterexample_search(3, 5.5);
    t.check(ce.derivative > 10 * ce.error,
            "counterexample derivative " + fmt("%.3e", ce.derivative) + " error " + fmt("%.3e", ce.error));
    double el = seconds_since(t0);
    t.check(el <= 120, "runtime " + fmt("%.1f s", el));
    return t.outcome("max deficit rise " + fmt("%.2e", worst) + "; p=5.5 derivative " + fmt("%.3e", ce.derivative) +
                     " vs error " + fmt("%.1e", ce.error));
}

Outcome c6_fde() {
    Tally t;
    std::mt19937_64 rng(601);
    auto B = std::make_shared<ZonalBasis>(3, 64);
    double worst = -INFINITY;
    for (double p : {3.0, 5.0, 5.9}) {
        for (int k = 0; k < 10; ++k) {
            FlowSpec spec;
            spec.kind = FlowKind::fde;
            spec.p = p;
            spec.m = 1 - (p - 2) / (2 * p);
            spec.t_end = 0.5;
            double rise = log_trajectory(integrate(make_state(unit_mass_density(B, rng)), spec));
            worst = std::max(worst, rise);
            t.check(rise <= 1e-7, "p=" + fmt("%g", p) + " rise " + fmt("%.2e", rise));
        }
    }
    return t.outcome("max deficit rise " + fmt("%.2e", worst));
}

const Branch& branch12() {
    static const Branch br = [] {
        ContinuationConfig cfg;
        cfg.lambda_max = 12;
        cfg.compute_eigs = false;
        return continue_branch(D, P, cfg);
    }();
    return br;
}

Outcome c7_branch() {
    Tally t;
    const Branch& br = branch12();
    t.check(br.points.size() >= 10, "too few points");
    t.check(std::abs(br.lambda_fs_grid - br.lambda_fs_exact) <= 1e-4 * br.lambda_fs_exact, "bifurcation point");
    t.check(!br.points.empty() && br.points.back().lambda >= 12, "branch stops short of 12");
    double prev_gap = 0, min_gap = INFINITY;
    for (const BranchPoint& pt : br.points) {
        double gap = pt.mu_star_grid - pt.mu;
        min_gap = std::min(min_gap, gap);
        t.check(pt.lambda > br.lambda_fs_grid, "point left of the bifurcation");
        t.check(gap > 0, "mu >= mu_star at lambda " + fmt("%.4f", pt.lambda));
        t.check(pt.mu < pt.mu_star, "mu >= closed-form mu_star at lambda " + fmt("%.4f", pt.lambda));
        t.check(gap > prev_gap, "gap not increasing at lambda " + fmt("%.4f", pt.lambda));
        prev_gap = gap;
    }
    std::vector<double> x, y;
    for (const BranchPoint& pt : br.points) {
        double dl = pt.lambda - br.lambda_fs_grid;
        if (dl >= 0.01 && dl <= 0.2) x.push_back(std::log(dl)), y.push_back(std::log(pt.mu_star_grid - pt.mu));
    }
    double slope = NAN;
    if (x.size() >= 3) {
        double mx = 0, my = 0, sxy = 0, sxx = 0;
        for (size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / x.size();
        for (size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
        slope = sxy / sxx;
    }
    t.check(std::abs(slope - 2) <= 0.2, "fit exponent " + fmt("%.3f", slope));
    return t.outcome(std::to_string(br.points.size()) + " points to lambda " + fmt("%.2f", br.points.back().lambda) +
                     ", fit exponent " + fmt("%.3f", slope));
}

Outcome c8_reparametrized() {
    Tally t;
    const double theta = 0.718;
    CurveB c = reparametrize(branch12(), theta);
    BifurcationClass bc = classify_bifurcation(c);
    const double lfs_t = lambda_fs_theta(cyl(D, P, 1.0, theta), theta);
    t.check(bc.direction == Direction::left, "direction right");
    t.check(bc.turning_points.size() == 1, std::to_string(bc.turning_points.size()) + " turning points");
    double lt = bc.turning_points.empty() ? NAN : bc.turning_points[0].Lambda;
    t.check(lt < lfs_t, "turning point at " + fmt("%.5f", lt));
    // near the bifurcation; closer than 1e-4 the margin (~ dlambda^2) is below roundoff
    double margin = INFINITY;
    int near = 0;
    for (const CurveSample& s : c.samples) {
        double dl = s.lambda - c.lambda_bif;
        if (dl < 1e-4 || dl > 0.1) continue;
        ++near;
        margin = std::min(margin, (s.mu - s.mu_star_theta_grid) / s.mu);
        t.check(s.mu > s.mu_star_theta_grid, "below the symmetric value at lambda " + fmt("%.6f", s.lambda));
    }
    t.check(near >= 3, "too few samples near the bifurcation");
    return t.outcome(std::string("direction ") + to_string(bc.direction) + ", turn at Lambda " + fmt("%.5f", lt) +
                     " < " + fmt("%.5f", lfs_t) + ", min rel margin " + fmt("%.2e", margin) + " over " + std::to_string(near) + " samples");
}

Outcome c9_gaussian() {
    Tally t;
    for (int d : {3, 5})
        for (double dl : {1e-2, 1e-3}) {
            double h = gaussian_h(d, 2 + dl);
            t.check(h < 1, "h = " + fmt("%.8f", h) + " at d=" + std::to_string(d));
        }
    double worst = 0;
    for (int d : {3, 5}) {
        double e = std::abs(gaussian_h(d, 2 + 1e-6) - 1);
        worst = std::max(worst, e);
        t.check(e < 1e-3, "|h-1| = " + fmt("%.2e", e));
    }
    return t.outcome("h(2+1e-2) = " + fmt("%.6f", gaussian_h(3, 2.01)) + " (d=3), |h(2+1e-6)-1| <= " + fmt("%.2e", worst));
}

// random cylinder parameters with Lambda <= Lambda_FS and n > d
CKNParams admissible_k_params(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> U(0, 1);
    const double pmax = critical_exponent(d);
    double p = 2.1 + (pmax - 2.1) * 0.95 * U(rng);
    return cyl(d, p, lambda_fs(d, p) * (0.05 + 0.95 * U(rng)));
}

Outcome c10_k_functional() {
    Tally t;
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> U(0, 1);
    auto g = make_tensor_grid(D, 2000, 8);
    double worst_int = 0, worst_pt = 0;
    for (int k = 0; k < 20; ++k) {
        CKNParams prm = admissible_k_params(rng, D);
        t.check(prm.alpha <= alpha_fs(D, prm.n) && prm.n > D, "parameter condition");
        double a = 0.1 + U(rng), b = 0.1 + U(rng);
        PressureField pf;
        pf.grid = g;
        pf.m = prm.m;
        pf.values = sample(g, [&](double r, double) { return a + b * r * r; }).values;
        KResult K = k_functional(pf, prm, 1.0);
        // relative to the size of the leading term alpha^4 (p'')^2 u^m
        double scale2 = std::pow(prm.alpha * prm.alpha * 2 * b, 2);
        TensorField um = density_from_pressure(pf);
        um.values = scale2 * um.values.array().pow(prm.m);
        double ri = std::abs(K.integral) / integrate(um, prm.n);
        double pt = 0;
        for (int i = 0; i < K.field.values.rows(); ++i)
            if (g->radial.r[i] >= 1e-2 && g->radial.r[i] <= 1e2)
                pt = std::max(pt, K.field.values.row(i).cwiseAbs().maxCoeff() / scale2);
        worst_int = std::max(worst_int, ri);
        worst_pt = std::max(worst_pt, pt);
        t.check(ri <= 1e-10, "integral " + fmt("%.2e", ri));
        t.check(pt <= 1e-10, "pointwise " + fmt("%.2e", pt));
    }
    auto gs = make_tensor_grid(D, 600, 10, 1e-2, 1e2);
    std::normal_distribution<double> N;
    double minK = INFINITY;
    for (int k = 0; k < 100; ++k) {
        CKNParams prm = admissible_k_params(rng, D);
        double c[4];
        for (double& x : c) x = 0.3 * N(rng);
        PressureField pf;
        pf.grid = gs;
        pf.m = prm.m;
        pf.values = sample(gs, [&](double r, double z) {
                        return 1 + r * r + c[0] * z * r + c[1] * z * z * r * r / (1 + r) + c[2] * std::sin(r) +
                               c[3] * z * z * z;
                    }).values;
        double mk = k_functional(pf, prm, 1.0).field.values.minCoeff();
        minK = std::min(minK, mk);
        t.check(mk >= 0, "min K " + fmt("%.3e", mk));
    }
    return t.outcome("quadratic |int K| rel " + fmt("%.1e", worst_int) + ", pointwise rel " + fmt("%.1e", worst_pt) +
                     "; min K over random pressures " + fmt("%.3e", minK));
}

Outcome c11_equivalence() {
    Tally t;
    std::mt19937_64 rng(1101);
    std::uniform_real_distribution<double> U(0, 1);
    int disagree = 0;
    for (int k = 0; k < 1000; ++k) {
        int d = 2 + int(U(rng) * 7);
        double pmax = d <= 2 ? 12.0 : std::min(12.0, critical_exponent(d));
        double p = 2 + (pmax - 2) * (0.001 + 0.998 * U(rng));
        double L = 3 * lambda_fs(d, p) * U(rng) + 1e-6;
        Equivalence e = check_equivalence(cyl(d, p, L));
        if (!e.agree()) ++disagree;
        t.check(e.agree(), "d=" + std::to_string(d) + " p=" + fmt("%.4f", p) + " Lambda=" + fmt("%.4f", L));
    }
    return t.outcome(std::to_string(disagree) + " disagreements in 1000 samples");
}

Outcome c12_conservation() {
    Tally t;
    t.check(flow_log.trajectories > 0, "no trajectories recorded");
    t.check(flow_log.worst_mass <= 1e-9, "mass drift " + fmt("%.2e", flow_log.worst_mass));
    t.check(flow_log.min_density > 0, "min density " + fmt("%.3e", flow_log.min_density));
    return t.outcome(std::to_string(flow_log.trajectories) + " unit-mass trajectories, max drift " +
                     fmt("%.2e", flow_log.worst_mass) + ", min density " + fmt("%.3e", flow_log.min_density));
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"Poschl-Teller eigenvalue law", c1_poschl_teller},
        {"symmetric profile exactness", c2_symmetric_profile},
        {"mu_star scaling law", c3_scaling},
        {"closed-form optimal constant", c4_optimal_constant},
        {"heat-flow monotonicity and its failure", c5_heat},
        {"fast-diffusion monotonicity", c6_fde},
        {"theta = 1 branch structure", c7_branch},
        {"theta = 0.718 left bifurcation with a turning point", c8_reparametrized},
        {"Gaussian criterion", c9_gaussian},
        {"K-functional rigidity", c10_k_functional},
        {"parameter equivalence", c11_equivalence},
        {"conservation and positivity", c12_conservation},
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.ok;
        std::printf("%s criterion %zu (%s): %s (%.1f s)\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures ? 1 : 0;
}
