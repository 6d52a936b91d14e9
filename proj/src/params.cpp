#include "cknlab/params.hpp"

#include "cknlab/errors.hpp"
#include "cknlab/numerics.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cknlab {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw AdmissibilityError(what);
}

// Integral over the real line of cosh(x)^{-2a} sinh(x)^{2j}, j in {0,1}.
// Rescaled by sqrt(a) so the integrand looks like a unit Gaussian for large a.
double cosh_moment(double a, int j) {
    boost::math::quadrature::exp_sinh<double> integrator;
    const double sa = std::sqrt(a);
    auto f = [&](double y) {
        double x = y / sa;
        if (j == 1) {
            double th = std::tanh(x);
            return th * th * std::exp(-2 * (a - 1) * logcosh(x));
        }
        return std::exp(-2 * a * logcosh(x));
    };
    double err = 0;
    double val = integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-15,
                                      &err);
    return 2 * val / sa;
}

void check_cylinder_p(int d, double p) {
    if (!(p > 2)) throw DomainError("p must exceed 2, got " + fmt(p));
    if (!(p <= critical_exponent(d)))
        throw DomainError("p exceeds 2d/(d-2) for d = " + std::to_string(d));
}

}  // namespace

Mode parse_mode(const std::string& s) {
    if (s == "critical") return Mode::critical;
    if (s == "subcritical") return Mode::subcritical;
    if (s == "cylinder") return Mode::cylinder;
    throw AdmissibilityError("unknown mode '" + s + "'");
}

std::string to_string(Mode m) {
    switch (m) {
    case Mode::critical: return "critical";
    case Mode::subcritical: return "subcritical";
    case Mode::cylinder: return "cylinder";
    }
    return "?";
}

double critical_exponent(int d) {
    if (d <= 2) return std::numeric_limits<double>::infinity();
    return 2.0 * d / (d - 2);
}

double vartheta(int d, double p) { return d * (p - 2) / (2 * p); }

static void fill_critical(CKNParams& r, const ParamInputs& in) {
    const int d = r.d;
    r.alpha = (r.a_c() - *r.a) * (r.p - 2) / 2;
    r.n = 2 * r.p / (r.p - 2);
    r.m = 1 - 1 / r.n;
    r.Lambda = (*r.a - r.a_c()) * (*r.a - r.a_c());
    r.theta = in.theta.value_or(1.0);
    double vt = vartheta(d, r.p);
    require(r.theta <= 1 && r.theta >= vt,
            "theta outside [vartheta(p), 1] = [" + fmt(vt) + ", 1]");
}

CKNParams derive_params(int d, const ParamInputs& in, Mode mode) {
    require(d >= 2, "d >= 2 required");
    CKNParams r;
    r.d = d;
    r.mode = mode;
    const double ac = 0.5 * (d - 2);
    auto reject_extra = [&](bool extra, const char* what) {
        require(!extra, std::string("unexpected inputs for this mode: ") + what);
    };

    switch (mode) {
    case Mode::critical: {
        require(in.a && in.b, "critical mode needs a and b");
        reject_extra(in.beta || in.gamma || in.p || in.Lambda, "beta/gamma/p/Lambda");
        double a = *in.a, b = *in.b;
        require(std::isfinite(a) && std::isfinite(b), "a, b must be finite");
        require(a < ac, "a >= a_c = " + fmt(ac));
        if (d == 2) require(b > a, "b <= a (d = 2 needs a < b)");
        else require(b >= a, "b < a");
        require(b < a + 1, "b >= a + 1 (p <= 2)");
        r.a = a;
        r.b = b;
        r.p = 2.0 * d / (d - 2 + 2 * (b - a));
        fill_critical(r, in);
        break;
    }
    case Mode::cylinder: {
        require(in.p && in.Lambda, "cylinder mode needs p and Lambda");
        reject_extra(in.a || in.b || in.beta || in.gamma, "a/b/beta/gamma");
        double p = *in.p, L = *in.Lambda;
        require(std::isfinite(p) && std::isfinite(L), "p, Lambda must be finite");
        require(L > 0, "Lambda <= 0");
        require(p > 2, "p <= 2");
        require(p <= critical_exponent(d), "p > 2d/(d-2)");
        r.p = p;
        r.a = ac - std::sqrt(L);
        r.b = *r.a + d / p - ac;
        fill_critical(r, in);
        r.Lambda = L;
        break;
    }
    case Mode::subcritical: {
        require(in.beta && in.gamma && in.p, "subcritical mode needs beta, gamma and p");
        reject_extra(in.a || in.b || in.Lambda, "a/b/Lambda");
        double beta = *in.beta, gamma = *in.gamma, p = *in.p;
        require(std::isfinite(beta) && std::isfinite(gamma) && std::isfinite(p),
                "beta, gamma, p must be finite");
        require(gamma < d, "gamma >= d");
        require(beta > gamma - 2, "beta <= gamma - 2");
        // the endpoint beta = (d-2)gamma/d is kept (unweighted case beta = gamma = 0)
        require(beta <= (d - 2) * gamma / d, "beta > (d-2)gamma/d");
        double pstar = (d - gamma) / (d - beta - 2);
        require(p > 1, "p <= 1");
        require(p <= pstar * (1 + 1e-15), "p > p_star = " + fmt(pstar));
        r.beta = beta;
        r.gamma = gamma;
        r.p = p;
        r.alpha = 1 + (beta - gamma) / 2;
        r.n = 2 * (d - gamma) / (beta + 2 - gamma);
        r.m = (p + 1) / (2 * p);
        r.theta = (d - gamma) * (p - 1) /
                  (p * (d + beta + 2 - 2 * gamma - p * (d - beta - 2)));
        if (in.theta) require(std::abs(*in.theta - r.theta) < 1e-12,
                              "theta is fixed by (beta, gamma, p) in subcritical mode");
        break;
    }
    }
    return r;
}

double lambda_fs(int d, double p) {
    if (!(p > 2)) throw DomainError("lambda_fs needs p > 2");
    return 4.0 * (d - 1) / (p * p - 4);
}

double b_fs(int d, double a) {
    double x = 0.5 * (d - 2) - a;
    return d * x / (2 * std::sqrt(x * x + d - 1)) - x;
}

double beta_fs(int d, double gamma) {
    double rad = (gamma - d) * (gamma - d) - 4.0 * (d - 1);
    if (rad < 0) throw DomainError("beta_fs undefined: (gamma-d)^2 < 4(d-1)");
    return d - 2 - std::sqrt(rad);
}

double alpha_fs(int d, double n) {
    if (!(n > 1)) throw DomainError("alpha_fs needs n > 1");
    return std::sqrt((d - 1) / (n - 1));
}

double two_sharp(int d) {
    if (d < 2) throw DomainError("two_sharp needs d >= 2");
    double dm = d - 1.0;
    return (2.0 * d * d + 1) / (dm * dm);
}

Thresholds thresholds(const CKNParams& prm) {
    Thresholds t;
    const int d = prm.d;
    t.two_sharp = two_sharp(d);
    t.alpha_fs = alpha_fs(d, prm.n);
    if (prm.mode == Mode::subcritical) {
        t.p_star = (d - *prm.gamma) / (d - *prm.beta - 2);
        t.beta_fs = beta_fs(d, *prm.gamma);
    } else {
        t.lambda_fs = lambda_fs(d, prm.p);
        t.b_fs = b_fs(d, *prm.a);
        t.vartheta = vartheta(d, prm.p);
        t.lambda_fs_theta = lambda_fs_theta(prm, prm.theta);
    }
    return t;
}

double a_fs(int d, double p) {
    const double ac = 0.5 * (d - 2);
    auto g = [&](double a) {
        double x = ac - a;
        return d * x / (2 * std::sqrt(x * x + d - 1)) - d / p;
    };
    return bisect(g, -1e3, ac, 1e-16);
}

Equivalence check_equivalence(const CKNParams& prm) {
    if (prm.mode == Mode::subcritical || !prm.a || !prm.Lambda)
        throw AdmissibilityError("check_equivalence needs a critical record");
    const int d = prm.d;
    const double tol = 1e-12;
    const double ac = prm.a_c();
    const double a = *prm.a, L = *prm.Lambda;
    Equivalence e;
    double lfs = lambda_fs(d, prm.p);
    e.lambda_cond = L > 0 && L <= lfs * (1 + tol);
    double afs = a_fs(d, prm.p);
    e.b_cond = a >= afs - tol * std::max(1.0, std::abs(afs)) && a < ac;
    double afs_alpha = alpha_fs(d, prm.n);
    e.alpha_cond = prm.alpha > 0 && prm.alpha <= afs_alpha * (1 + tol);
    return e;
}

double optimal_constant_star(const CKNParams& prm) {
    if (!prm.a || prm.mode == Mode::subcritical)
        throw AdmissibilityError("optimal_constant_star needs a critical record");
    const double p = prm.p;
    if (!(p > 2)) throw DomainError("optimal_constant_star needs p > 2");
    const double x = std::abs(*prm.a - prm.a_c());
    if (!(x > 0)) throw AdmissibilityError("a = a_c");
    const double logB = std::log(2 * std::sqrt(std::numbers::pi)) + std::lgamma(p / (p - 2)) -
                        std::log(p - 2) - std::lgamma((3 * p - 2) / (2 * (p - 2)));
    const double logS = std::log(sphere_surface(prm.d));
    double logC = (2 / p - 1) * logS - (1 + 2 / p) * std::log(x) - std::log(p / 2) -
                  (p - 2) / p * logB;
    return std::exp(logC);
}

StarNorms star_norms(double p, double lambda) {
    if (!(p > 2)) throw DomainError("star profile needs p > 2");
    if (!(lambda > 0)) throw DomainError("star profile needs lambda > 0");
    const double q = 2 / (p - 2);
    const double k = (p - 2) * std::sqrt(lambda) / 2;
    StarNorms r;
    r.l2sq = cosh_moment(q, 0) / k;
    r.lpp = cosh_moment(p / (p - 2), 0) / k;
    r.grad2 = q * q * k * k * cosh_moment(q + 1, 1) / k;
    return r;
}

double t_star(double p, double lambda) {
    StarNorms n = star_norms(p, lambda);
    return n.grad2 / n.l2sq;
}

double theta_quotient(double grad2, double l2sq, double lpp, double Lambda, double theta,
                      double p) {
    if (theta == 1.0) return (grad2 + Lambda * l2sq) / std::pow(lpp, 2 / p);
    return std::pow(grad2 + Lambda * l2sq, theta) * std::pow(l2sq, 1 - theta) /
           std::pow(lpp, 2 / p);
}

double mu_star_one(double p) {
    StarNorms n = star_norms(p, 1.0);
    return theta_quotient(n.grad2, n.l2sq, n.lpp, 1.0, 1.0, p);
}

double lambda_star_theta(double p, double Lambda, double theta) {
    if (!(Lambda > 0)) throw DomainError("Lambda must be positive");
    if (theta == 1.0) return Lambda;
    auto g = [&](double lam) { return theta * lam - (1 - theta) * t_star(p, lam) - Lambda; };
    double hi = Lambda;
    int it = 0;
    while (g(hi) <= 0) {
        hi *= 2;
        if (++it > 200) throw InversionError("no bracket for Lambda*^theta");
    }
    double lo = hi / 2;
    while (g(lo) > 0) {
        lo /= 2;
        if (++it > 400) throw InversionError("no lower bracket for Lambda*^theta");
    }
    return bisect(g, lo, hi, 1e-15);
}

double mu_star(const CKNParams& prm, double Lambda, double theta) {
    const double p = prm.p;
    check_cylinder_p(prm.d, p);
    if (!(Lambda > 0)) throw DomainError("mu_star needs Lambda > 0");
    double vt = vartheta(prm.d, p);
    if (!(theta <= 1 && theta >= vt * (1 - 1e-15)))
        throw DomainError("theta outside [vartheta(p), 1]");
    if (theta == 1.0) return mu_star_one(p) * std::pow(Lambda, (p + 2) / (2 * p));
    double lam = lambda_star_theta(p, Lambda, theta);
    StarNorms n = star_norms(p, lam);
    return theta_quotient(n.grad2, n.l2sq, n.lpp, Lambda, theta, p);
}

double lambda_fs_theta(const CKNParams& prm, double theta) {
    check_cylinder_p(prm.d, prm.p);
    double vt = vartheta(prm.d, prm.p);
    if (!(theta <= 1 && theta >= vt * (1 - 1e-15)))
        throw DomainError("theta outside [vartheta(p), 1]");
    double L = lambda_fs(prm.d, prm.p);
    if (theta == 1.0) return L;
    return theta * L - (1 - theta) * t_star(prm.p, L);
}

}  // namespace cknlab
