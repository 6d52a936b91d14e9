#include "cknlab/functionals.hpp"

#include "cknlab/errors.hpp"

#include <cmath>
#include <numbers>

namespace cknlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

GridFunction1D zonal_function(std::shared_ptr<const ZonalBasis> basis,
                              const std::function<double(double)>& f) {
    VectorXd v(basis->size());
    for (int j = 0; j < basis->size(); ++j) v(j) = f(basis->nodes()(j));
    return zonal_function(std::move(basis), v);
}

GridFunction1D zonal_function(std::shared_ptr<const ZonalBasis> basis, const VectorXd& v) {
    GridFunction1D g;
    g.nodes.assign(basis->nodes().data(), basis->nodes().data() + basis->size());
    g.values.assign(v.data(), v.data() + v.size());
    g.weight = {MeasureKind::sphere_zonal, basis->dim(), 0, false};
    g.basis = std::move(basis);
    return g;
}

GridFunction1D flat_function(double L, int n, const std::function<double(double)>& f,
                             bool periodic) {
    GridFunction1D g;
    g.weight = {MeasureKind::flat, 0, 0, periodic};
    double h = periodic ? 2 * L / n : 2 * L / (n - 1);
    for (int i = 0; i < n; ++i) {
        double s = -L + i * h;
        g.nodes.push_back(s);
        g.values.push_back(f(s));
    }
    return g;
}

double integrate(const GridFunction1D& f) {
    const auto& x = f.nodes;
    const auto& v = f.values;
    switch (f.weight.kind) {
    case MeasureKind::sphere_zonal:
        if (!f.basis) throw DomainError("zonal function without basis");
        return f.basis->integrate(f.vec());
    case MeasureKind::flat: {
        double h = x[1] - x[0], s = 0;
        for (size_t i = 0; i < v.size(); ++i) s += v[i];
        if (!f.weight.periodic) s -= 0.5 * (v.front() + v.back());
        return h * s;
    }
    case MeasureKind::radial: {
        double s = 0;
        for (size_t i = 0; i + 1 < v.size(); ++i) {
            double a = v[i] * std::pow(x[i], f.weight.n - 1);
            double b = v[i + 1] * std::pow(x[i + 1], f.weight.n - 1);
            s += 0.5 * (a + b) * (x[i + 1] - x[i]);
        }
        return s;
    }
    }
    return 0;
}

// ---------------------------------------------------------------- profiles

double eval_profile(const ProfileSpec& spec, double x) {
    const CKNParams& prm = spec.params;
    const double p = prm.p;
    if (spec.kind != ProfileKind::phi_star_cylinder && x < 0)
        throw DomainError("radial profile evaluated at negative |x|");
    switch (spec.kind) {
    case ProfileKind::phi_star_cylinder: {
        double L = spec.Lambda > 0 ? spec.Lambda : prm.Lambda.value_or(0);
        if (!(p > 2) || !(L > 0)) throw DomainError("phi_star needs p > 2 and Lambda > 0");
        double k = (p - 2) * std::sqrt(L) / 2;
        return std::exp(std::log(p * L / 2) / (p - 2) - 2 / (p - 2) * logcosh(k * x));
    }
    case ProfileKind::v_star_critical: {
        if (!prm.a || !(p > 2)) throw DomainError("v_star needs a critical record with p > 2");
        double e = (p - 2) * (prm.a_c() - *prm.a);
        return std::pow(1 + std::pow(x, e), -2 / (p - 2));
    }
    case ProfileKind::w_star_critical_n:
        if (!(prm.n > 2)) throw DomainError("w_star needs n > 2");
        return std::pow(1 + x * x, -(prm.n - 2) / 2);
    case ProfileKind::w_star_subcritical: {
        if (!prm.beta || !prm.gamma || !(p > 1))
            throw DomainError("subcritical w_star needs beta, gamma, p > 1");
        return std::pow(1 + std::pow(x, 2 + *prm.beta - *prm.gamma), -1 / (p - 1));
    }
    case ProfileKind::gaussian:
        return std::pow(2 * std::numbers::pi, -prm.d / 4.0) * std::exp(-x * x / 4);
    }
    return 0;
}

// ---------------------------------------------------------------- sphere

namespace {

const ZonalBasis& zonal_basis_of(const GridFunction1D& rho) {
    if (rho.weight.kind != MeasureKind::sphere_zonal || !rho.basis)
        throw DomainError("expected a sphere-zonal grid function");
    for (double v : rho.values)
        if (!(v >= 0) || !std::isfinite(v)) throw DomainError("density must be finite and >= 0");
    return *rho.basis;
}

}  // namespace

double sphere_entropy(const GridFunction1D& rho, double p) {
    const ZonalBasis& B = zonal_basis_of(rho);
    if (!(p >= 1)) throw DomainError("sphere_entropy needs p >= 1");
    VectorXd r = rho.vec();
    double mass = B.integrate(r);
    if (!(mass > 0)) throw DegenerateInput("density has zero mass");
    if (p == 2.0) {
        VectorXd f(r.size());
        for (int j = 0; j < r.size(); ++j) f(j) = r(j) > 0 ? r(j) * std::log(r(j) / mass) : 0.0;
        return 0.5 * B.integrate(f);
    }
    VectorXd f = r.array().pow(2 / p);
    return (std::pow(mass, 2 / p) - B.integrate(f)) / (p - 2);
}

double sphere_fisher(const GridFunction1D& rho, double p) {
    const ZonalBasis& B = zonal_basis_of(rho);
    VectorXd r = rho.vec();
    if (!(B.integrate(r) > 0)) throw DegenerateInput("density has zero mass");
    VectorXd f = r.array().pow(1 / p);
    VectorXd g = B.diff() * f;
    VectorXd z = B.nodes();
    VectorXd integrand = (1 - z.array().square()) * g.array().square();
    return B.integrate(integrand);
}

double sphere_deficit(const GridFunction1D& rho, double p) {
    return sphere_fisher(rho, p) - rho.basis->dim() * sphere_entropy(rho, p);
}

// ---------------------------------------------------------------- tensor grids

std::shared_ptr<const TensorGrid> make_tensor_grid(int d, int nr, int nz, double r_lo,
                                                   double r_hi) {
    if (!(r_lo > 0)) throw DomainError("radial grid needs r_lo > 0");
    if (!(r_hi > r_lo) || nr < 6) throw DomainError("bad radial grid");
    auto g = std::make_shared<TensorGrid>();
    g->d = d;
    g->radial.r_lo = r_lo;
    g->radial.r_hi = r_hi;
    double t0 = std::log(r_lo), t1 = std::log(r_hi);
    g->radial.dt = (t1 - t0) / (nr - 1);
    for (int i = 0; i < nr; ++i) g->radial.r.push_back(std::exp(t0 + i * g->radial.dt));
    g->zonal = std::make_shared<ZonalBasis>(d - 1, nz);
    return g;
}

TensorField sample(std::shared_ptr<const TensorGrid> g,
                   const std::function<double(double, double)>& f) {
    TensorField u;
    const auto& r = g->radial.r;
    const auto& z = g->zonal->nodes();
    u.values.resize(r.size(), z.size());
    for (size_t i = 0; i < r.size(); ++i)
        for (int j = 0; j < z.size(); ++j) u.values(i, j) = f(r[i], z(j));
    u.grid = std::move(g);
    return u;
}

double integrate(const TensorField& f, double n) {
    const auto& R = f.grid->radial;
    if (!(R.r_lo > 0)) throw DomainError("radial grid needs r_lo > 0");
    VectorXd ang = f.values * f.grid->zonal->weights();  // zonal average per radius
    double s = 0;
    const int nr = int(R.r.size());
    for (int i = 0; i < nr; ++i) {
        double w = (i == 0 || i == nr - 1) ? 0.5 : 1.0;
        s += w * ang(i) * std::pow(R.r[i], n);
    }
    return s * R.dt;
}

namespace {

// radial derivatives of every column via t = log r
void radial_derivs(const MatrixXd& f, const RadialGrid& R, MatrixXd* fr, MatrixXd* frr) {
    const int nr = int(f.rows()), nz = int(f.cols());
    if (fr) fr->resize(nr, nz);
    if (frr) frr->resize(nr, nz);
    std::vector<double> col(nr);
    for (int j = 0; j < nz; ++j) {
        for (int i = 0; i < nr; ++i) col[i] = f(i, j);
        auto ft = fd_d1(col, R.dt);
        std::vector<double> ftt;
        if (frr) ftt = fd_d2(col, R.dt);
        for (int i = 0; i < nr; ++i) {
            double r = R.r[i];
            if (fr) (*fr)(i, j) = ft[i] / r;
            if (frr) (*frr)(i, j) = (ftt[i] - ft[i]) / (r * r);
        }
    }
}

void check_positive(const MatrixXd& u) {
    for (Eigen::Index k = 0; k < u.size(); ++k)
        if (!(u.data()[k] > 0)) throw DegenerateInput("density must be positive on the grid");
}

}  // namespace

TensorDerivs tensor_derivs(const TensorField& f) {
    const auto& B = *f.grid->zonal;
    TensorDerivs d;
    radial_derivs(f.values, f.grid->radial, &d.f_r, &d.f_rr);
    d.f_z = f.values * B.diff().transpose();
    d.f_zz = d.f_z * B.diff().transpose();
    d.lap_omega = f.values * B.laplacian().transpose();
    radial_derivs(d.f_z, f.grid->radial, &d.f_rz, nullptr);
    return d;
}

PressureField pressure_from_density(const TensorField& u, double m) {
    if (!(m > 0 && m < 1)) throw DomainError("pressure needs m in (0, 1)");
    check_positive(u.values);
    PressureField pf;
    pf.grid = u.grid;
    pf.m = m;
    pf.values = (m / (1 - m)) * u.values.array().pow(m - 1);
    return pf;
}

PressureField pressure_from_density(const TensorField& u, const CKNParams& prm) {
    PressureField pf = pressure_from_density(u, prm.m);
    pf.n = prm.n;
    pf.alpha = prm.alpha;
    return pf;
}

TensorField density_from_pressure(const PressureField& pf) {
    const double m = pf.m;
    TensorField u;
    u.grid = pf.grid;
    u.values = (pf.values.array() * ((1 - m) / m)).pow(1 / (m - 1));
    return u;
}

namespace {

// u |Dp|^2 pointwise
MatrixXd u_Dp2(const MatrixXd& u, const TensorDerivs& D, const TensorGrid& g, double alpha) {
    const auto& r = g.radial.r;
    const auto& z = g.zonal->nodes();
    MatrixXd out(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            double pr = D.f_r(i, j), pz = D.f_z(i, j);
            double g2 = alpha * alpha * pr * pr + (1 - z(j) * z(j)) * pz * pz / (r[i] * r[i]);
            out(i, j) = u(i, j) * g2;
        }
    return out;
}

}  // namespace

double weighted_fisher(const TensorField& u, const CKNParams& prm) {
    PressureField pf = pressure_from_density(u, prm.m);
    TensorField pt{u.grid, pf.values};
    TensorDerivs D = tensor_derivs(pt);
    TensorField integrand{u.grid, u_Dp2(u.values, D, *u.grid, prm.alpha)};
    return integrate(integrand, prm.n);
}

KResult k_functional(const PressureField& pf, const CKNParams& prm, double zeta_star) {
    const double n = prm.n, alpha = prm.alpha;
    const int d = prm.d;
    if (!(pf.grid->radial.r_lo > 0)) throw DomainError("k_functional needs r_lo > 0");
    if (!(n >= 2)) throw DomainError("k_functional needs n >= 2");
    if (!(zeta_star > 0)) throw DomainError("zeta_star must be positive");
    const double afs2 = (d - 1) / (n - 1);
    TensorDerivs D = tensor_derivs(TensorField{pf.grid, pf.values});
    const auto& r = pf.grid->radial.r;
    const auto& z = pf.grid->zonal->nodes();
    KResult res;
    res.field.grid = pf.grid;
    res.field.values.resize(pf.values.rows(), pf.values.cols());
    const double a2 = alpha * alpha;
    for (Eigen::Index i = 0; i < pf.values.rows(); ++i) {
        const double ri = r[i], r2 = ri * ri, r4 = r2 * r2;
        for (Eigen::Index j = 0; j < pf.values.cols(); ++j) {
            const double s2 = 1 - z(j) * z(j);
            double br = D.f_rr(i, j) - D.f_r(i, j) / ri - D.lap_omega(i, j) / (a2 * (n - 1) * r2);
            double t1 = a2 * a2 * (1 - 1 / n) * br * br;
            double mix = D.f_rz(i, j) - D.f_z(i, j) / ri;
            double t2 = 2 * a2 / r2 * s2 * mix * mix;
            double go2 = s2 * D.f_z(i, j) * D.f_z(i, j);
            double t3 = (n - 2) * (afs2 - a2) * go2 / r4;
            double t4 = zeta_star * (n - d) * go2 * go2 / r4;
            res.field.values(i, j) = t1 + t2 + t3 + t4;
        }
    }
    PressureField pm = pf;
    if (!(pm.m > 0)) pm.m = prm.m;
    MatrixXd um = density_from_pressure(pm).values.array().pow(pm.m);
    res.integral = integrate(TensorField{pf.grid, res.field.values.cwiseProduct(um)}, n);
    return res;
}

double h_functional(const TensorField& u, const CKNParams& prm, HWeighting weighting,
                    double zeta_star) {
    const double m = prm.m, n = prm.n, alpha = prm.alpha;
    const double m1 = 1 - 1 / n;
    if (!(m >= m1 && m < 1)) throw DomainError("h_functional needs m in [m1, 1)");
    PressureField pf = pressure_from_density(u, m);
    pf.n = n;
    pf.alpha = alpha;
    KResult K = k_functional(pf, prm, zeta_star);
    TensorDerivs D = tensor_derivs(TensorField{u.grid, pf.values});
    const auto& r = u.grid->radial.r;
    MatrixXd Lp(u.values.rows(), u.values.cols());
    for (Eigen::Index i = 0; i < Lp.rows(); ++i)
        for (Eigen::Index j = 0; j < Lp.cols(); ++j)
            Lp(i, j) = alpha * alpha * (D.f_rr(i, j) + (n - 1) * D.f_r(i, j) / r[i]) +
                       D.lap_omega(i, j) / (r[i] * r[i]);
    MatrixXd um = u.values.array().pow(m);
    MatrixXd flux = u_Dp2(u.values, D, *u.grid, alpha);
    const double int_um = integrate(TensorField{u.grid, um}, n);
    if (!(int_um > 0)) throw DegenerateInput("zero u^m integral");
    double first = 0;
    if (m > m1) {
        if (weighting == HWeighting::as_printed) {
            double cbar = integrate(TensorField{u.grid, flux.cwiseProduct(um)}, n) / int_um;
            MatrixXd dev = (Lp.array() - cbar).square();
            first = integrate(TensorField{u.grid, dev}, n);
        } else if (weighting == HWeighting::variance) {
            double cbar = integrate(TensorField{u.grid, flux}, n) / int_um;
            MatrixXd dev = (Lp.array() - cbar).square().matrix().cwiseProduct(um);
            first = integrate(TensorField{u.grid, dev}, n);
        }
    }
    if (weighting == HWeighting::centered) {
        double cbar = integrate(TensorField{u.grid, flux}, n) / int_um;
        MatrixXd dev = (Lp.array() - cbar).square().matrix().cwiseProduct(um);
        return (m - m1) * integrate(TensorField{u.grid, dev}, n) + K.integral;
    }
    // R[p] u^m = K u^m + (m - m1)(Lp)^2 u^m
    MatrixXd Rum = K.field.values.cwiseProduct(um) +
                   (m - m1) * MatrixXd(Lp.array().square()).cwiseProduct(um);
    return (m - m1) * first + integrate(TensorField{u.grid, Rum}, n);
}

RenyiPower renyi_power(const TensorField& u, const CKNParams& prm) {
    const double m = prm.m, n = prm.n;
    if (!(m < 1 && m >= 1 - 1 / n)) throw DomainError("renyi_power needs m in [m1, 1)");
    check_positive(u.values);
    MatrixXd um = u.values.array().pow(m);
    double I = integrate(TensorField{u.grid, um}, n);
    if (!(I > 0)) throw DegenerateInput("zero u^m integral");
    RenyiPower r;
    r.sigma = (2 / n) / (1 - m) - 1;
    r.F = std::pow(I, r.sigma);
    return r;
}

// ---------------------------------------------------------------- cylinder quotient

QuotientResult cylinder_quotient(const GridFunction1D& phi, double Lambda, double p,
                                 double theta) {
    if (phi.weight.kind != MeasureKind::flat)
        throw DomainError("cylinder_quotient expects a flat s-grid");
    const auto& v = phi.values;
    const int n = int(v.size());
    if (n < 5) throw DomainError("grid too small");
    const double h = phi.nodes[1] - phi.nodes[0];
    const bool per = phi.weight.periodic;
    auto at = [&](int i) -> double {
        if (per) return v[((i % n) + n) % n];
        return (i < 0 || i >= n) ? 0.0 : v[i];
    };
    double grad2 = 0, l2 = 0, lp = 0;
    for (int i = 0; i < n; ++i) {
        double d2 = (-at(i - 2) + 16 * at(i - 1) - 30 * at(i) + 16 * at(i + 1) - at(i + 2)) /
                    (12 * h * h);
        grad2 -= v[i] * d2;
        l2 += v[i] * v[i];
        lp += std::pow(std::abs(v[i]), p);
    }
    grad2 *= h;
    l2 *= h;
    lp *= h;
    if (!(l2 > 0)) throw DegenerateInput("zero profile");
    QuotientResult q;
    q.t = grad2 / l2;
    q.mu = theta_quotient(grad2, l2, lp, Lambda, theta, p);
    return q;
}

double gaussian_h(int d, double p) {
    const double theta = vartheta(d, p);
    ParamInputs in;
    in.p = p;
    in.Lambda = 1.0;
    in.theta = theta;
    CKNParams prm = derive_params(d, in, Mode::cylinder);
    const double Lt = lambda_fs_theta(prm, theta);
    const double ms = mu_star(prm, Lt, theta);
    const double pi = std::numbers::pi;
    // ||grad g||^2 = d/4, ||g||_2 = 1, ||g||_p^2 = (2 pi)^{-d/2} (4 pi / p)^{d/p}
    double log_gp2 = -0.5 * d * std::log(2 * pi) + (d / p) * std::log(4 * pi / p);
    double logh = (2 / p - 1) * std::log(sphere_surface(d)) + theta * std::log(d / 4.0) -
                  log_gp2 - std::log(ms);
    return std::exp(logh);
}

}  // namespace cknlab
