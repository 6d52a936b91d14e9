#pragma once

#include "cknlab/numerics.hpp"
#include "cknlab/params.hpp"

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace cknlab {

enum class MeasureKind { sphere_zonal, radial, flat };

struct Measure {
    MeasureKind kind = MeasureKind::flat;
    int dim = 0;           // sphere dimension for sphere_zonal
    double n = 0;          // radial weight r^{n-1}
    bool periodic = false; // flat only
};

struct GridFunction1D {
    std::vector<double> nodes;
    std::vector<double> values;
    Measure weight;
    bool probability = true;  // sphere_zonal integrals use the probability measure
    std::shared_ptr<const ZonalBasis> basis;  // set for sphere_zonal

    Eigen::VectorXd vec() const {
        return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    }
};

GridFunction1D zonal_function(std::shared_ptr<const ZonalBasis> basis,
                              const std::function<double(double)>& f);
GridFunction1D zonal_function(std::shared_ptr<const ZonalBasis> basis, const Eigen::VectorXd& v);
// uniform flat grid with n nodes on [-L, L] (periodic: n nodes on [-L, L) )
GridFunction1D flat_function(double L, int n, const std::function<double(double)>& f,
                             bool periodic = false);

double integrate(const GridFunction1D& f);

// ---- explicit profiles

enum class ProfileKind { phi_star_cylinder, v_star_critical, w_star_critical_n, w_star_subcritical,
                         gaussian };

struct ProfileSpec {
    ProfileKind kind;
    CKNParams params;
    double Lambda = 0;  // phi_star_cylinder only; defaults to params.Lambda
};

// point = s for the cylinder profile, |x| otherwise
double eval_profile(const ProfileSpec& spec, double point);

// ---- sphere functionals, probability measure on S^d

double sphere_entropy(const GridFunction1D& rho, double p);
double sphere_fisher(const GridFunction1D& rho, double p);
double sphere_deficit(const GridFunction1D& rho, double p);

// ---- radial x zonal tensor grids on R^d (or weighted space of dimension n)

struct RadialGrid {
    double r_lo = 1e-4, r_hi = 1e4;
    double dt = 0;          // spacing in t = log r
    std::vector<double> r;
};

struct TensorGrid {
    int d = 0;
    RadialGrid radial;
    std::shared_ptr<const ZonalBasis> zonal;  // S^{d-1}
};

std::shared_ptr<const TensorGrid> make_tensor_grid(int d, int nr, int nz, double r_lo = 1e-4,
                                                   double r_hi = 1e4);

// values(i, j) = f(r_i, z_j)
struct TensorField {
    std::shared_ptr<const TensorGrid> grid;
    Eigen::MatrixXd values;
};

TensorField sample(std::shared_ptr<const TensorGrid> g,
                   const std::function<double(double, double)>& f);

// integral of f against r^{n-1} dr x zonal probability measure
double integrate(const TensorField& f, double n);

struct PressureField {
    std::shared_ptr<const TensorGrid> grid;
    Eigen::MatrixXd values;
    double m = 0, n = 0, alpha = 0;
};

PressureField pressure_from_density(const TensorField& u, double m);
PressureField pressure_from_density(const TensorField& u, const CKNParams& prm);
TensorField density_from_pressure(const PressureField& pf);

// derivative data of a tensor field
struct TensorDerivs {
    Eigen::MatrixXd f_r, f_rr, f_z, f_zz, f_rz, lap_omega;
};
TensorDerivs tensor_derivs(const TensorField& f);

double weighted_fisher(const TensorField& u, const CKNParams& prm);

struct KResult {
    TensorField field;
    double integral = 0;  // against u^m dmu
};
KResult k_functional(const PressureField& pf, const CKNParams& prm, double zeta_star = 1.0);

enum class HWeighting {
    as_printed,  // outer weight dmu, mean = int u|Dp|^2 u^m / int u^m
    variance,    // outer weight u^m dmu, mean = int u|Dp|^2 / int u^m
    centered     // (m - m1) int |Lp - mean|^2 u^m + int K u^m, vanishes on quadratic pressures
};
double h_functional(const TensorField& u, const CKNParams& prm, HWeighting w,
                    double zeta_star = 1.0);

struct RenyiPower {
    double F = 0;
    double sigma = 0;
};
RenyiPower renyi_power(const TensorField& u, const CKNParams& prm);

// ---- cylinder quotient for s-only profiles (probability measure on the sphere)

struct QuotientResult {
    double mu = 0;
    double t = 0;
};
// discrete Dirichlet form <phi, -D2 phi> with the 4th-order stencil, zero ghosts
// outside the grid (or periodic wrap)
QuotientResult cylinder_quotient(const GridFunction1D& phi, double Lambda, double p,
                                 double theta);

double gaussian_h(int d, double p);

}  // namespace cknlab
