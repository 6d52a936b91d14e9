#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cknlab/errors.hpp"
#include "cknlab/functionals.hpp"
#include "cknlab/params.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

using namespace cknlab;

namespace {

// probability measure on S^d in the zonal variable, by tanh-sinh
double sphere_avg(int d, const std::function<double(double)>& f) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto w = [&](double z) { return std::pow(1 - z * z, 0.5 * (d - 2)); };
    double norm = ts.integrate(w, -1.0, 1.0);
    return ts.integrate([&](double z) { return f(z) * w(z); }, -1.0, 1.0) / norm;
}

std::shared_ptr<const ZonalBasis> basis(int d, int n) { return std::make_shared<ZonalBasis>(d, n); }

ParamInputs cyl(double p, double L) {
    ParamInputs in;
    in.p = p;
    in.Lambda = L;
    return in;
}

CKNParams sub_params(int d, double beta, double gamma, double p) {
    ParamInputs in;
    in.beta = beta;
    in.gamma = gamma;
    in.p = p;
    return derive_params(d, in, Mode::subcritical);
}

}  // namespace

TEST_CASE("profiles") {
    CKNParams prm = derive_params(5, cyl(2.8, 1.0), Mode::cylinder);
    CHECK(eval_profile({ProfileKind::phi_star_cylinder, prm, 1.0}, 0.0) ==
          doctest::Approx(std::pow(1.4, 1.25)).epsilon(1e-15));
    CHECK(eval_profile({ProfileKind::w_star_critical_n, prm}, 0.0) == 1.0);
    CHECK(eval_profile({ProfileKind::w_star_critical_n, prm}, 1.0) ==
          doctest::Approx(std::pow(2.0, -(prm.n - 2) / 2)).epsilon(1e-15));
    // v_* decays like |x|^{-2 (a_c - a)}
    double x = 1e6, e = 2 * (prm.a_c() - *prm.a);
    CHECK(eval_profile({ProfileKind::v_star_critical, prm}, x) * std::pow(x, e) ==
          doctest::Approx(1.0).epsilon(1e-4));
    CKNParams g = prm;
    g.d = 3;
    CHECK(eval_profile({ProfileKind::gaussian, g}, 0.0) == doctest::Approx(std::pow(2 * M_PI, -0.75)));
    CKNParams sp = sub_params(5, 0, 0, 1.5);
    CHECK(eval_profile({ProfileKind::w_star_subcritical, sp}, 1.0) == doctest::Approx(std::pow(2.0, -2.0)));
    CHECK_THROWS_AS(eval_profile({ProfileKind::w_star_critical_n, prm}, -1.0), DomainError);
}

TEST_CASE("entropy vanishes on constants and is order eps^2") {
    auto B = basis(3, 48);
    for (double p : {1.0, 1.5, 2.0, 3.0, 6.0})
        CHECK(std::abs(sphere_entropy(zonal_function(B, [](double) { return 1.0; }), p)) < 1e-14);
    const double p = 3.0;
    for (double eps : {1e-2, 1e-3}) {
        auto rho = zonal_function(B, [&](double z) { return std::pow(1 + eps * z, p); });
        double E = sphere_entropy(rho, p);
        // oracle: exact integrals of the polynomial-like density
        double m = sphere_avg(3, [&](double z) { return std::pow(1 + eps * z, p); });
        double m2 = sphere_avg(3, [&](double z) { return std::pow(1 + eps * z, 2); });
        double oracle = (std::pow(m, 2 / p) - m2) / (p - 2);
        CHECK(E > 0);
        CHECK(E == doctest::Approx(oracle).epsilon(1e-7));
        CHECK(E / (eps * eps) == doctest::Approx(0.25).epsilon(1e-2));  // 1/(d+1)
    }
}

TEST_CASE("entropy p -> 2 limit") {
    auto B = basis(3, 48);
    auto rho = zonal_function(B, [](double z) { return std::exp(0.7 * z + 0.2 * z * z); });
    double E2 = sphere_entropy(rho, 2.0);
    CHECK(sphere_entropy(rho, 2.0 + 1e-6) == doctest::Approx(E2).epsilon(1e-5));
    CHECK(sphere_entropy(rho, 2.0 - 1e-6) == doctest::Approx(E2).epsilon(1e-5));
    CHECK_THROWS_AS(sphere_entropy(zonal_function(B, [](double) { return 0.0; }), 3.0), DegenerateInput);
}

TEST_CASE("Fisher information") {
    auto B = basis(3, 48);
    CHECK(std::abs(sphere_fisher(zonal_function(B, [](double) { return 2.0; }), 3.0)) < 1e-14);
    auto f = [](double z) { return std::exp(0.5 * z - 0.3 * z * z * z); };
    auto fr = [&](double z) { return f(-z); };
    double I1 = sphere_fisher(zonal_function(B, f), 3.0);
    double I2 = sphere_fisher(zonal_function(B, fr), 3.0);
    CHECK(I1 == doctest::Approx(I2).epsilon(1e-12));
    // oracle on the analytic derivative of rho^{1/p}
    double oracle = sphere_avg(3, [&](double z) {
        double g = std::pow(f(z), 1 / 3.0);
        double dg = g * (0.5 - 0.9 * z * z) / 3;
        return (1 - z * z) * dg * dg;
    });
    CHECK(I1 == doctest::Approx(oracle).epsilon(1e-10));
    // near the equality case the deficit is o(eps^2)
    const double p = 3.0;
    double prev = INFINITY;
    for (double eps : {1e-1, 1e-2}) {
        auto rho = zonal_function(B, [&](double z) { return std::pow(1 + eps * z, p); });
        double r = sphere_deficit(rho, p) / (eps * eps);
        CHECK(std::abs(r) < prev);
        prev = std::abs(r);
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("deficit is nonnegative") {
    auto B = basis(3, 48);
    CHECK(std::abs(sphere_deficit(zonal_function(B, [](double) { return 1.0; }), 3.0)) < 1e-14);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    for (int k = 0; k < 50; ++k) {
        double c[4];
        for (double& x : c) x = 0.5 * N(rng);
        auto rho = zonal_function(B, [&](double z) {
            return std::exp(c[0] * z + c[1] * z * z + c[2] * z * z * z + c[3] * std::sin(3 * z));
        });
        CHECK(sphere_deficit(rho, 3.0) >= -1e-9);
    }
    // log-Sobolev path, u = 1 + z/2, rho = u^2
    auto rho = zonal_function(B, [](double z) { return std::pow(1 + 0.5 * z, 2); });
    double D = sphere_deficit(rho, 2.0);
    double mass = sphere_avg(3, [](double z) { return std::pow(1 + 0.5 * z, 2); });
    double E2 = 0.5 * sphere_avg(3, [&](double z) {
        double r = std::pow(1 + 0.5 * z, 2);
        return r * std::log(r / mass);
    });
    double I2 = sphere_avg(3, [](double z) { return (1 - z * z) * 0.25; });
    CHECK(D > 0);
    CHECK(D == doctest::Approx(I2 - 3 * E2).epsilon(1e-10));
}

TEST_CASE("pressure variable") {
    auto g = make_tensor_grid(5, 200, 8);
    auto one = sample(g, [](double, double) { return 1.0; });
    PressureField pf = pressure_from_density(one, 0.8);
    CHECK((pf.values.array() - 4.0).abs().maxCoeff() < 1e-14);
    // u = (1 + r^2)^{1/(m-1)} has pressure m/(1-m) (1 + r^2)
    const double m = 0.7;
    auto u = sample(g, [&](double r, double) { return std::pow(1 + r * r, 1 / (m - 1)); });
    PressureField q = pressure_from_density(u, m);
    double worst = 0;
    for (int i = 0; i < q.values.rows(); ++i) {
        double r = g->radial.r[i];
        for (int j = 0; j < q.values.cols(); ++j)
            worst = std::max(worst, std::abs(q.values(i, j) / (m / (1 - m) * (1 + r * r)) - 1));
    }
    CHECK(worst < 1e-12);
    TensorField back = density_from_pressure(q);
    CHECK(((back.values.array() / u.values.array()) - 1).abs().maxCoeff() < 1e-12);
    // larger density, smaller pressure
    auto u2 = sample(g, [](double r, double) { return 2.0 / (1 + r); });
    auto u1 = sample(g, [](double r, double) { return 1.0 / (1 + r); });
    CHECK(((pressure_from_density(u2, 0.7).values - pressure_from_density(u1, 0.7).values).array() < 0).all());
    auto bad = sample(g, [](double r, double) { return r > 1 ? 0.0 : 1.0; });
    CHECK_THROWS_AS(pressure_from_density(bad, 0.7), DegenerateInput);
}

TEST_CASE("weighted Fisher information of a quadratic pressure") {
    auto g = make_tensor_grid(5, 2500, 8);
    CKNParams prm = derive_params(5, cyl(2.8, 2.0), Mode::cylinder);
    const double a = 1.3, b = 0.7;
    PressureField pf;
    pf.grid = g;
    pf.m = prm.m;
    pf.values = sample(g, [&](double r, double) { return a + b * r * r; }).values;
    TensorField u = density_from_pressure(pf);
    double I = weighted_fisher(u, prm);
    auto ur2 = u;
    for (int i = 0; i < ur2.values.rows(); ++i) ur2.values.row(i) *= g->radial.r[i] * g->radial.r[i];
    double oracle = prm.alpha * prm.alpha * 4 * b * b * integrate(ur2, prm.n);
    CHECK(I == doctest::Approx(oracle).epsilon(1e-8));
    auto cst = sample(g, [](double, double) { return 0.5; });
    CHECK(std::abs(weighted_fisher(cst, prm)) < 1e-8);  // roundoff times r^n at r_hi
    CHECK_THROWS_AS(make_tensor_grid(5, 200, 8, 0.0, 1e4), DomainError);
}

TEST_CASE("K vanishes on quadratic pressures") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0, 1);
    auto g = make_tensor_grid(5, 2000, 8);
    for (int k = 0; k < 5; ++k) {
        CKNParams prm = derive_params(5, cyl(2.2 + U(rng), lambda_fs(5, 2.8) * U(rng)), Mode::cylinder);
        double a = 0.1 + U(rng), b = 0.1 + U(rng);
        PressureField pf;
        pf.grid = g;
        pf.m = prm.m;
        pf.values = sample(g, [&](double r, double) { return a + b * r * r; }).values;
        KResult K = k_functional(pf, prm, 1.0);
        // natural size of the first term, a^4 (1 - 1/n) (p'')^2 u^m
        double scale2 = std::pow(prm.alpha * prm.alpha * 2 * b, 2);
        TensorField um = density_from_pressure(pf);
        um.values = scale2 * um.values.array().pow(prm.m);
        CHECK(std::abs(K.integral) < 1e-10 * integrate(um, prm.n));
        // pointwise on r in [1e-2, 1e2]; closer to the origin the constant part of p
        // cancels in p'' - p'/r at roundoff level divided by r^2
        const auto& F = K.field.values;
        double worst = 0;
        for (int i = 0; i < F.rows(); ++i)
            if (g->radial.r[i] >= 1e-2 && g->radial.r[i] <= 1e2)
                worst = std::max(worst, F.row(i).cwiseAbs().maxCoeff());
        CHECK(worst < 1e-10 * scale2);
    }
}

TEST_CASE("K sign structure") {
    auto g = make_tensor_grid(5, 600, 10, 1e-2, 1e2);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    CKNParams prm = derive_params(5, cyl(2.8, 2.0), Mode::cylinder);  // alpha < alpha_FS
    for (int k = 0; k < 20; ++k) {
        double c[4];
        for (double& x : c) x = 0.3 * N(rng);
        PressureField pf;
        pf.grid = g;
        pf.m = prm.m;
        pf.values = sample(g, [&](double r, double z) {
                        return 1 + r * r + c[0] * z * r + c[1] * z * z * r * r / (1 + r) + c[2] * std::sin(r) +
                               c[3] * z * z * z;
                    }).values;
        KResult K = k_functional(pf, prm, 1.0);
        CHECK(K.field.values.minCoeff() >= 0);
    }
    // alpha > alpha_FS: a purely angular perturbation drives the third term negative
    CKNParams brk = derive_params(5, cyl(2.8, 10.0), Mode::cylinder);
    REQUIRE(brk.alpha > alpha_fs(5, brk.n));
    PressureField pf;
    pf.grid = g;
    pf.m = brk.m;
    pf.values = sample(g, [](double r, double z) { return r * r + 1e-2 * z * r; }).values;
    CHECK(k_functional(pf, brk, 1.0).field.values.minCoeff() < 0);
    CHECK_THROWS_AS(k_functional(pf, brk, 0.0), DomainError);
}

TEST_CASE("H functional") {
    // beta = gamma = 0, d = 5: alpha = alpha_FS = 1, n = 5
    auto g = make_tensor_grid(5, 2500, 6);
    const double p = 1.4;
    CKNParams prm = sub_params(5, 0, 0, p);
    auto baren = sample(g, [&](double r, double) { return std::pow(1 + r * r, -2 * p / (p - 1)); });
    // pressure c (1 + r^2), L p = 2 n c, K = 0
    CHECK(std::abs(h_functional(baren, prm, HWeighting::centered)) < 1e-8);
    const double c = prm.m / (1 - prm.m), m1 = 1 - 1 / prm.n, q = 2 * p * prm.m / (p - 1);
    double int_um = 0.5 * std::beta(prm.n / 2, q - prm.n / 2);
    double tail = (prm.m - m1) * std::pow(2 * prm.n * c, 2) * int_um;
    CHECK(h_functional(baren, prm, HWeighting::variance) == doctest::Approx(tail).epsilon(1e-7));
    CHECK(std::isfinite(h_functional(baren, prm, HWeighting::as_printed)));

    // m = m1 at p = p_*
    CKNParams crit = sub_params(5, 0, 0, 5.0 / 3);
    CHECK(crit.m == doctest::Approx(1 - 1 / crit.n).epsilon(1e-14));
    crit.m = 1 - 1 / crit.n;
    auto u = sample(g, [](double r, double) { return std::pow(1 + r * r + 0.1 * std::sin(r), -3.0); });
    PressureField pf = pressure_from_density(u, crit);
    for (HWeighting w : {HWeighting::as_printed, HWeighting::variance, HWeighting::centered})
        CHECK(h_functional(u, crit, w) == doctest::Approx(k_functional(pf, crit).integral).epsilon(1e-12));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0, 1);
    for (int k = 0; k < 5; ++k) {
        double q = 2 * p / (p - 1) * (1 + U(rng)), c = 0.3 * U(rng);
        auto v = sample(g, [&](double r, double) { return std::pow(1 + r * r, -q) * (1 + c * std::exp(-r)); });
        CHECK(h_functional(v, prm, HWeighting::variance) >= -1e-9);
        CHECK(h_functional(v, prm, HWeighting::centered) >= -1e-9);
    }
}

TEST_CASE("Renyi entropy power") {
    auto g = make_tensor_grid(5, 1500, 6);
    auto g2 = make_tensor_grid(5, 3000, 6);
    CKNParams prm = sub_params(5, 0, 0, 1.4);
    auto f = [](double r, double) { return std::pow(1 + r * r, -2 * 1.4 / 0.4); };
    RenyiPower R = renyi_power(sample(g, f), prm);
    CHECK(R.sigma > 1);
    auto u = sample(g, f);
    u.values *= 3.0;
    CHECK(renyi_power(u, prm).F == doctest::Approx(R.F * std::pow(3.0, prm.m * R.sigma)).epsilon(1e-12));
    CHECK(renyi_power(sample(g2, f), prm).F == doctest::Approx(R.F).epsilon(1e-6));
    for (double pp : {1.1, 1.3, 1.6}) CHECK(renyi_power(sample(g, f), sub_params(5, 0, 0, pp)).sigma > 1);
}

TEST_CASE("cylinder quotient on the line") {
    const double p = 2.8, L = 1.0;
    CKNParams prm = derive_params(5, cyl(p, L), Mode::cylinder);
    auto phi = flat_function(20, 4001, [&](double s) { return eval_profile({ProfileKind::phi_star_cylinder, prm, L}, s); });
    QuotientResult q = cylinder_quotient(phi, L, p, 1.0);
    CHECK(q.mu == doctest::Approx(mu_star(prm, L, 1.0)).epsilon(1e-6));
    double lp = std::pow(integrate(flat_function(20, 4001, [&](double s) {
                                       return std::pow(eval_profile({ProfileKind::phi_star_cylinder, prm, L}, s), p);
                                   })),
                         (p - 2) / p);
    CHECK(q.mu == doctest::Approx(lp).epsilon(1e-6));
    CHECK(q.t == doctest::Approx(t_star(p, L)).epsilon(1e-6));
    auto cst = flat_function(M_PI, 64, [](double) { return 2.0; }, true);
    CHECK(std::abs(cylinder_quotient(cst, 1.0, p, 1.0).t) < 1e-14);
    CHECK_THROWS_AS(cylinder_quotient(flat_function(1, 10, [](double) { return 0.0; }), 1, p, 1), DegenerateInput);
}

TEST_CASE("Gaussian test quantity") {
    CHECK(gaussian_h(3, 2 + 1e-6) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(gaussian_h(3, 2.05) < 1);
    CHECK(gaussian_h(3, 2.01) == doctest::Approx(0.99809).epsilon(2e-5));
    for (int d : {3, 5})
        for (double dl : {1e-2, 1e-3}) CHECK(gaussian_h(d, 2 + dl) < 1);
    // |g|_2 = 1
    boost::math::quadrature::tanh_sinh<double> ts;
    for (int d : {3, 5}) {
        double S = 2 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
        double n2 = S * ts.integrate([&](double r) { return std::pow(2 * M_PI, -d / 2.0) * std::exp(-r * r / 2) * std::pow(r, d - 1); },
                                     0.0, 40.0);
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    }
}
