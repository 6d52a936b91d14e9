#include "cknlab/branch_analysis.hpp"

#include "cknlab/errors.hpp"
#include "cknlab/numerics.hpp"
#include "cknlab/params.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <future>
#include <limits>

namespace cknlab {

using Eigen::VectorXd;

namespace {

CKNParams cyl_params(int d, double p) {
    CKNParams prm;
    prm.d = d;
    prm.mode = Mode::cylinder;
    prm.p = p;
    return prm;
}

// int_R cosh^{-2a}
double jcosh(double a) { return std::sqrt(M_PI) * std::exp(std::lgamma(a) - std::lgamma(a + 0.5)); }

struct SymEval {
    double t, grad2, l2sq, lpp;
};

SymEval grid_symmetric(const CylinderGrid& g, double p, double lam) {
    VectorXd u = symmetric_profile(g, p, lam);
    VectorXd w = g.ws();
    VectorXd Du = g.neg_d2_half() * u;
    SymEval e;
    e.grad2 = (w.array() * u.array() * Du.array()).sum();
    e.l2sq = (w.array() * u.array().square()).sum();
    e.lpp = (w.array() * u.array().abs().pow(p)).sum();
    e.t = e.grad2 / e.l2sq;
    return e;
}

double q_theta(double grad2, double l2sq, double lpp, double Lambda, double theta, double p) {
    return std::exp(theta * std::log(grad2 + Lambda * l2sq) + (1 - theta) * std::log(l2sq) -
                    (2 / p) * std::log(lpp));
}

// symmetric Q_theta on the grid: solve theta lam - (1 - theta) t_h(lam) = Lambda by secant
double mu_star_theta_on_grid(const CylinderGrid& g, double p, double Lambda, double theta) {
    if (theta == 1.0) {
        SymEval e = grid_symmetric(g, p, Lambda);
        return theta_quotient(e.grad2, e.l2sq, e.lpp, Lambda, 1.0, p);
    }
    const double t1 = (p - 2) / (p + 2);
    auto f = [&](double lam, SymEval& e) {
        e = grid_symmetric(g, p, lam);
        return theta * lam - (1 - theta) * e.t - Lambda;
    };
    double x0 = Lambda / (theta - (1 - theta) * t1);
    double x1 = x0 * (1 + 1e-4);
    SymEval e0, e1;
    double f0 = f(x0, e0), f1 = f(x1, e1);
    for (int it = 0; it < 50; ++it) {
        if (std::abs(f1) <= 1e-14 * std::max(1.0, Lambda)) break;
        if (f1 == f0) break;
        double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1, f0 = f1, e0 = e1;
        x1 = x2;
        f1 = f(x1, e1);
    }
    if (!(std::abs(f1) <= 1e-11 * std::max(1.0, Lambda)))
        throw InversionError("grid inversion of Lambda(lambda) failed");
    return theta_quotient(e1.grad2, e1.l2sq, e1.lpp, Lambda, theta, p);
}

}  // namespace

double mu_star_theta_closed(double p, double Lambda, double theta) {
    if (!(p > 2 && Lambda > 0)) throw DomainError("need p > 2 and Lambda > 0");
    const double t1 = (p - 2) / (p + 2);
    const double den = theta - (1 - theta) * t1;
    if (!(den > 0)) throw DomainError("theta too small for the inversion");
    const double lam = Lambda / den;
    const double q = 2 / (p - 2);
    const double k = (p - 2) * std::sqrt(lam) / 2;
    const double l2 = jcosh(q) / k;
    const double lpp = jcosh(p / (p - 2)) / k;
    const double g2 = q * q * k * (jcosh(q) - jcosh(q + 1));
    return q_theta(g2, l2, lpp, Lambda, theta, p);
}

CurveB reparametrize(const Branch& branch, double theta, bool grid_comparator) {
    const double vt = vartheta(branch.d, branch.p);
    if (!(theta <= 1 && theta >= vt * (1 - 1e-15)))
        throw DomainError("theta outside [vartheta(p), 1]");
    const double p = branch.p;
    CurveB c;
    c.d = branch.d;
    c.p = p;
    c.theta = theta;
    c.source = &branch;
    c.lambda_bif = branch.lambda_fs_grid;
    c.Lambda_bif = theta == 1.0 ? branch.lambda_fs_grid
                                : theta * branch.lambda_fs_grid - (1 - theta) * branch.t_at_bifurcation;
    c.mu_bif = branch.mu_at_bifurcation;
    if (theta != 1.0) {
        // Q_theta at the bifurcation: (g + Lambda l) = theta (g + lambda l)
        CylinderField f0 = constant_in_z(
            branch.grid, symmetric_profile(*branch.grid, p, branch.lambda_fs_grid), p,
            branch.lambda_fs_grid);
        CylinderEnergies e = energies(f0);
        c.mu_bif = theta_quotient(e.grad2, e.l2sq, e.lpp, c.Lambda_bif, theta, p);
    }
    for (const BranchPoint& bp : branch.points) {
        CurveSample s;
        s.lambda = bp.lambda;
        s.t_phi = bp.t_phi;
        if (theta == 1.0) {
            s.Lambda = bp.lambda;
            s.mu = bp.mu;
        } else {
            s.Lambda = theta * bp.lambda - (1 - theta) * bp.t_phi;
            s.mu = theta_quotient(bp.grad2, bp.l2sq, bp.lpp, s.Lambda, theta, p);
        }
        if (s.Lambda > 0) {
            s.mu_star_theta = mu_star_theta_closed(p, s.Lambda, theta);
            s.mu_star_theta_grid = grid_comparator
                                       ? mu_star_theta_on_grid(*branch.grid, p, s.Lambda, theta)
                                       : std::numeric_limits<double>::quiet_NaN();
        } else {
            s.mu_star_theta = s.mu_star_theta_grid = std::numeric_limits<double>::quiet_NaN();
        }
        c.samples.push_back(s);
    }
    // finite differences, the bifurcation point acting as left neighbour of the first sample
    const int n = int(c.samples.size());
    std::vector<double> x{c.lambda_bif}, y{c.Lambda_bif};
    for (auto& s : c.samples) x.push_back(s.lambda), y.push_back(s.Lambda);
    for (int i = 1; i <= n; ++i) {
        double dl;
        if (i < n) {
            double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
            dl = (h0 * h0 * (y[i + 1] - y[i]) + h1 * h1 * (y[i] - y[i - 1])) / (h0 * h1 * (h0 + h1));
        } else {
            dl = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        }
        c.samples[i - 1].d_Lambda_d_lambda = dl;
    }
    return c;
}

const char* to_string(Direction d) { return d == Direction::left ? "left" : "right"; }

BifurcationClass classify_bifurcation(const CurveB& curve) {
    const int n = int(curve.samples.size());
    if (n < 10) throw InsufficientSamples("need at least 10 samples past the bifurcation");
    BifurcationClass out;
    // least-squares slope through the bifurcation point and the first 5 samples
    std::vector<double> x{curve.lambda_bif}, y{curve.Lambda_bif};
    for (int i = 0; i < 5; ++i) x.push_back(curve.samples[i].lambda), y.push_back(curve.samples[i].Lambda);
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size(), my /= y.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    out.slope = sxy / sxx;
    out.direction = out.slope < 0 ? Direction::left : Direction::right;

    for (int i = 0; i + 1 < n; ++i) {
        double a = curve.samples[i].d_Lambda_d_lambda, b = curve.samples[i + 1].d_Lambda_d_lambda;
        if (!((a < 0 && b > 0) || (a > 0 && b < 0))) continue;
        // local quadratic through the extremal sample and its neighbours
        int j = i;
        bool is_min = a < 0;
        for (int k = std::max(0, i - 1); k <= std::min(n - 1, i + 2); ++k) {
            double v = curve.samples[k].Lambda;
            if ((is_min && v < curve.samples[j].Lambda) || (!is_min && v > curve.samples[j].Lambda)) j = k;
        }
        int c0 = std::clamp(j, 1, n - 2);
        double x0 = curve.samples[c0 - 1].lambda, x1 = curve.samples[c0].lambda, x2 = curve.samples[c0 + 1].lambda;
        double y0 = curve.samples[c0 - 1].Lambda, y1 = curve.samples[c0].Lambda, y2 = curve.samples[c0 + 1].Lambda;
        double d01 = (y1 - y0) / (x1 - x0), d12 = (y2 - y1) / (x2 - x1);
        double A = (d12 - d01) / (x2 - x0);
        double B = d01 - A * (x0 + x1);
        TurningPoint tp;
        tp.index = j;
        if (A != 0) {
            tp.lambda = std::clamp(-B / (2 * A), x0, x2);
            tp.Lambda = y0 + d01 * (tp.lambda - x0) + A * (tp.lambda - x0) * (tp.lambda - x1);
        } else {
            tp.lambda = curve.samples[j].lambda;
            tp.Lambda = curve.samples[j].Lambda;
        }
        out.turning_points.push_back(tp);
    }
    return out;
}

// ------------------------------------------------------------ ground state

namespace {

using State = std::array<double, 2>;

struct Shot {
    std::vector<double> r, u, du;
    int verdict = 0;  // +1 crosses zero, -1 turns up, 0 neither before rmax
    int event_index = -1;
};

Shot shoot(int d, double p, double c, const std::vector<double>& times) {
    namespace ode = boost::numeric::odeint;
    const double r0 = times.front();
    State x{1 + (1 - c) * r0 * r0 / (2 * d), (1 - c) * r0 / d};
    auto rhs = [&](const State& s, State& dsdt, double r) {
        double u = s[0];
        dsdt[0] = s[1];
        dsdt[1] = -(d - 1) * s[1] / r + u - c * std::pow(std::abs(u), p - 2) * u;
    };
    Shot sh;
    auto obs = [&](const State& s, double r) {
        sh.r.push_back(r);
        sh.u.push_back(s[0]);
        sh.du.push_back(s[1]);
    };
    auto stepper = ode::make_dense_output(1e-14, 1e-14, ode::runge_kutta_dopri5<State>());
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), 1e-3, obs);
    for (size_t k = 1; k < sh.u.size(); ++k) {
        if (!std::isfinite(sh.u[k]) || std::abs(sh.u[k]) > 1e30) {
            sh.verdict = -1;
            sh.event_index = int(k);
            break;
        }
        if (sh.u[k] <= 0) {
            sh.verdict = 1;
            sh.event_index = int(k);
            break;
        }
        if (sh.du[k] > 0) {
            sh.verdict = -1;
            sh.event_index = int(k);
            break;
        }
    }
    return sh;
}

std::vector<double> radial_times(double r0, double dr, double rmax) {
    std::vector<double> t{r0};
    for (int k = 1; k * dr <= rmax; ++k) t.push_back(k * dr);
    return t;
}

// Simpson on a grid with uniform spacing from index 1, trapezoid on the first cell
double radial_integral(const std::vector<double>& r, const std::vector<double>& f, int nmax) {
    double s = 0.5 * (f[0] + f[1]) * (r[1] - r[0]);
    int m = nmax - 1;
    if (m % 2) --m;
    double h = r[2] - r[1];
    double acc = 0;
    for (int k = 1; k + 2 <= 1 + m; k += 2) acc += f[k] + 4 * f[k + 1] + f[k + 2];
    s += acc * h / 3;
    for (int k = 1 + m; k < nmax; ++k) s += 0.5 * (f[k] + f[k + 1]) * (r[k + 1] - r[k]);
    return s;
}

struct Norms {
    double g2, l2, lpp;
};

Norms radial_norms(int d, double p, const std::vector<double>& r, const std::vector<double>& u,
                   const std::vector<double>& du, int cut) {
    std::vector<double> fg(cut + 1), fl(cut + 1), fp(cut + 1);
    for (int k = 0; k <= cut; ++k) {
        double w = std::pow(r[k], d - 1);
        fg[k] = du[k] * du[k] * w;
        fl[k] = u[k] * u[k] * w;
        fp[k] = std::pow(std::abs(u[k]), p) * w;
    }
    Norms n{radial_integral(r, fg, cut), radial_integral(r, fl, cut), radial_integral(r, fp, cut)};
    // exponential tails u ~ A r^{-(d-1)/2} e^{-r}
    double R = r[cut], w = std::pow(R, d - 1);
    n.g2 += du[cut] * du[cut] * w / 2;
    n.l2 += u[cut] * u[cut] * w / 2;
    n.lpp += std::pow(u[cut], p) * w / p;
    return n;
}

double gn_from_norms(const Norms& n, double vt, double p) {
    return std::exp(vt * std::log(n.g2) + (1 - vt) * std::log(n.l2) - (2 / p) * std::log(n.lpp));
}

constexpr double kR0 = 1e-4, kDr = 2.5e-3, kRmax = 40;

}  // namespace

GroundState ground_state(int d, double p) {
    if (d < 2) throw DomainError("ground state needs d >= 2");
    if (!(p > 2 && p < critical_exponent(d))) throw DomainError("need p in (2, 2*)");
    const auto coarse = radial_times(kR0, 0.05, kRmax);
    double lo = 1.0, hi = 2.0;
    int guard = 0;
    while (shoot(d, p, hi, coarse).verdict != 1) {
        lo = hi;
        hi *= 2;
        if (++guard > 60) throw ShootingFailed("no overshooting parameter found");
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (shoot(d, p, mid, coarse).verdict == 1 ? hi : lo) = mid;
    }
    if (!(hi - lo <= 1e-12 * hi)) throw ShootingFailed("bisection did not reach tolerance");

    const auto fine = radial_times(kR0, kDr, kRmax);
    Shot a = shoot(d, p, lo, fine), b = shoot(d, p, hi, fine);
    int n = int(std::min(a.u.size(), b.u.size()));
    int cut = 0;
    for (int k = 0; k < n; ++k) {
        if (std::abs(a.u[k] - b.u[k]) > 1e-9 || a.u[k] <= 0 || b.u[k] <= 0 || a.du[k] > 0) break;
        cut = k;
    }
    if (cut < 100) throw ShootingFailed("shot profile too short");
    // keep the decreasing part where the local decay rate is still close to 1
    GroundState gs;
    gs.shooting_c = 0.5 * (lo + hi);
    for (int k = 0; k <= cut; ++k) {
        gs.r.push_back(fine[k]);
        gs.u.push_back(0.5 * (a.u[k] + b.u[k]));
        gs.du.push_back(0.5 * (a.du[k] + b.du[k]));
    }
    gs.cutoff = gs.r.back();

    // residual by 6th-order central differences on every 4th node
    double res = 0;
    const int st = 4;
    const double h = st * kDr;
    for (int k = 1 + 3 * st; k + 3 * st <= cut; k += st) {
        auto U = [&](int o) { return gs.u[k + o * st]; };
        double d2 = (2 * (U(-3) + U(3)) - 27 * (U(-2) + U(2)) + 270 * (U(-1) + U(1)) - 490 * U(0)) /
                    (180 * h * h);
        double d1 = (-(U(-3)) + 9 * U(-2) - 45 * U(-1) + 45 * U(1) - 9 * U(2) + U(3)) / (60 * h);
        double r = gs.r[k];
        double e = -d2 - (d - 1) * d1 / r + U(0) - gs.shooting_c * std::pow(U(0), p - 1);
        res = std::max(res, std::abs(e));
    }
    gs.residual = res;

    Norms nm = radial_norms(d, p, gs.r, gs.u, gs.du, cut);
    const double vt = vartheta(d, p);
    gs.c_gn_normalized = gn_from_norms(nm, vt, p);
    gs.c_gn = gs.c_gn_normalized * std::pow(sphere_surface(d), 1 - 2 / p);
    return gs;
}

double gn_constant(int d, double p) { return ground_state(d, p).c_gn; }

double gn_quotient_scaled(int d, double p, double c, const GroundState& gs) {
    if (!(c > 0)) throw DomainError("scale must be positive");
    // v(r) = u(c r): sample u at c r on a grid covering the same profile
    std::vector<double> times{kR0 * c};
    for (int k = 1; k * kDr * c <= gs.cutoff + 1e-12; ++k) times.push_back(k * kDr * c);
    std::vector<double> r(times.size());
    for (size_t k = 0; k < times.size(); ++k) r[k] = times[k] / c;
    Shot s = shoot(d, p, gs.shooting_c, times);
    int cut = int(s.u.size()) - 1;
    if (s.event_index > 0) cut = std::min(cut, s.event_index - 1);
    std::vector<double> dv(s.du.size());
    for (size_t k = 0; k < dv.size(); ++k) dv[k] = c * s.du[k];
    Norms nm = radial_norms(d, p, r, s.u, dv, cut);
    return gn_from_norms(nm, vartheta(d, p), p);
}

// ------------------------------------------------------------ criteria

CriterionReport lemma_criterion(int d, double p, const CurveB* curve) {
    CriterionReport rep;
    rep.d = d;
    rep.p = p;
    rep.vartheta = vartheta(d, p);
    CKNParams prm = cyl_params(d, p);
    rep.lambda_fs_theta = lambda_fs_theta(prm, rep.vartheta);
    rep.mu_star_at_fs = mu_star(prm, rep.lambda_fs_theta, rep.vartheta);
    rep.c_gn = ground_state(d, p).c_gn_normalized;
    rep.breaking_predicted = rep.c_gn < rep.mu_star_at_fs;
    if (rep.breaking_predicted) {
        // mu(vt, Lambda) <= C_GN < mu_*(vt, Lambda) for Lambda > Lambda_c
        auto f = [&](double L) { return mu_star(prm, L, rep.vartheta) - rep.c_gn; };
        double lo = rep.lambda_fs_theta;
        while (f(lo) > 0) lo /= 2;
        double upper = bisect(f, lo, rep.lambda_fs_theta, 1e-14);
        if (curve) {
            for (const CurveSample& s : curve->samples)
                if (s.Lambda > 0 && s.mu < s.mu_star_theta) upper = std::min(upper, s.Lambda);
        }
        rep.lambda_s_bracket = std::make_pair(0.0, upper);
    }
    return rep;
}

namespace {

bool curve_monotone(const CurveB& c) {
    for (size_t i = 0; i < c.samples.size(); ++i) {
        double L0 = i ? c.samples[i - 1].Lambda : c.Lambda_bif;
        double m0 = i ? c.samples[i - 1].mu : c.mu_bif;
        double dL = c.samples[i].Lambda - L0, dm = c.samples[i].mu - m0;
        if (!(dL > 0 && dm > 0)) return false;
    }
    return true;
}

ProbeRow probe_row(const Branch& br, double theta, bool breaking) {
    CurveB c = reparametrize(br, theta, true);
    BifurcationClass bc = classify_bifurcation(c);
    ProbeRow row;
    row.theta = theta;
    row.direction = bc.direction;
    row.slope = bc.slope;
    row.turning_points = bc.turning_points;
    row.monotone = curve_monotone(c);
    row.breaking_predicted = breaking;
    for (const CurveSample& s : c.samples)
        if (s.Lambda > 0 && s.mu < s.mu_star_theta_grid) {
            row.breaking_from = row.breaking_from ? std::min(*row.breaking_from, s.Lambda) : s.Lambda;
        }
    return row;
}

}  // namespace

ProbeReport conjecture_probe(const Branch& branch, const std::vector<double>& theta_grid) {
    if (theta_grid.empty()) throw DomainError("empty theta grid");
    const double vt = vartheta(branch.d, branch.p);
    for (double th : theta_grid)
        if (!(th <= 1 && th >= vt * (1 - 1e-15))) throw DomainError("theta outside [vartheta(p), 1]");
    ProbeReport rep;
    rep.d = branch.d;
    rep.p = branch.p;
    rep.criterion = lemma_criterion(branch.d, branch.p);
    const bool brk = rep.criterion.breaking_predicted;

    std::vector<std::future<ProbeRow>> jobs;
    for (double th : theta_grid)
        jobs.push_back(std::async(std::launch::async, [&branch, th, brk] { return probe_row(branch, th, brk); }));
    for (auto& j : jobs) rep.rows.push_back(j.get());

    for (const ProbeRow& r : rep.rows)
        if (std::abs(r.theta - vt) <= 1e-12) rep.monotone_at_vartheta = r.monotone;

    // locate the direction flip between adjacent grid values (sorted by theta)
    std::vector<const ProbeRow*> sorted;
    for (auto& r : rep.rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->theta < b->theta; });
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i]->direction == sorted[i + 1]->direction) continue;
        auto slope = [&](double th) {
            return classify_bifurcation(reparametrize(branch, th, false)).slope;
        };
        rep.theta_flip = bisect(slope, sorted[i]->theta, sorted[i + 1]->theta, 1e-10);
        break;
    }
    return rep;
}

}  // namespace cknlab
