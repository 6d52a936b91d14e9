#pragma once

#include "cknlab/functionals.hpp"
#include "cknlab/numerics.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <vector>

namespace cknlab {

using SpMat = Eigen::SparseMatrix<double>;

// Truncated cylinder [-L, L] x S^{d-1}.  Fields are stored on the half line
// s_i = i h (i < ns) and extended evenly; they vanish for |s| >= ns h.
// Zonal dependence on S^{d-1} through z = cos(polar angle), probability measure.
class CylinderGrid {
public:
    CylinderGrid(int d, double L, double h, int nz);

    int d() const { return d_; }
    double L() const { return L_; }
    double h() const { return h_; }
    int ns() const { return ns_; }
    int nz() const { return zonal_->size(); }
    int size() const { return ns_ * nz(); }
    const ZonalBasis& zonal() const { return *zonal_; }
    std::shared_ptr<const ZonalBasis> zonal_ptr() const { return zonal_; }
    double s(int i) const { return i * h_; }

    // -d^2/ds^2 on even functions of the half line (not symmetric; W-symmetric)
    const SpMat& neg_d2_half() const { return nd2h_; }
    // full-line -d^2/ds^2 on nodes -(ns-1)h..(ns-1)h, symmetric
    SpMat neg_d2_full() const;
    // -d^2/ds^2 - Lz on the tensor grid, index i*nz + j
    const SpMat& A() const { return A_; }
    // quadrature weights: ws for the full line restricted to even functions
    const Eigen::VectorXd& ws() const { return ws_; }
    const Eigen::VectorXd& M() const { return M_; }  // ws (x) zonal weights

private:
    int d_, ns_;
    double L_, h_;
    std::shared_ptr<const ZonalBasis> zonal_;
    SpMat nd2h_, A_;
    Eigen::VectorXd ws_, M_;
};

std::shared_ptr<const CylinderGrid> make_cylinder_grid(int d, double L, double h, int nz);

struct CylinderField {
    std::shared_ptr<const CylinderGrid> grid;
    Eigen::VectorXd values;  // index i*nz + j, half line
    double p = 0, Lambda = 0;

    double at(int i, int j) const { return values(i * grid->nz() + j); }
    // s-profile of a z-independent field (column j = 0)
    Eigen::VectorXd s_profile() const;
    // even extension to all nodes of [-L, L]
    std::vector<double> full_s() const;
    Eigen::MatrixXd full_values() const;  // (2 ns - 1) x nz
};

CylinderField constant_in_z(std::shared_ptr<const CylinderGrid> g, const Eigen::VectorXd& prof,
                            double p, double Lambda);

struct CylinderEnergies {
    double grad2 = 0, l2sq = 0, lpp = 0, angular = 0;  // angular = ||grad_omega phi||^2
};
CylinderEnergies energies(const CylinderField& phi);

QuotientResult cylinder_quotient(const CylinderField& phi, double Lambda, double p, double theta);

// max-norm residual of -phi_ss - Lz phi + Lambda phi - phi_+^{p-1}
double residual_norm(const CylinderField& phi, double Lambda);

// Lowest eigenpairs of a symmetric sparse matrix bounded below by sigma.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};
EigenPairs lowest_eigenpairs(const SpMat& S, double sigma, int count);

// symmetric polished profile on the half line (even), 1D Newton
Eigen::VectorXd symmetric_profile(const CylinderGrid& g, double p, double Lambda,
                                  int* iterations = nullptr);

CylinderField solve_symmetric(int d, double p, double Lambda,
                              std::shared_ptr<const CylinderGrid> grid);

struct Spectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  // columns on the full s-grid
    std::vector<double> s;
};
Spectrum linearized_spectrum(const CylinderField& phi, double Lambda, int k, int count);

// lowest k-sector eigenvalue restricted to even functions of s, half grid
double even_sector_eigenvalue(const CylinderGrid& g, const Eigen::VectorXd& prof, double p,
                              double Lambda, int k, Eigen::VectorXd* vec = nullptr);

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 30;
    // deflate the symmetric solution when the initial guess depends on z
    bool deflate_auto = true;
};

struct NewtonResult {
    CylinderField field;
    int iterations = 0;
    double residual = 0;
    bool trivial = false;
    bool deflated = false;
};

NewtonResult newton_solve(const CylinderField& init, double Lambda, const NewtonOptions& opt = {});

struct ContinuationConfig {
    double lambda_max = 12;
    double h = 0.025;
    double L = 0;  // 0: 20 / sqrt(Lambda_FS)
    int nz = 16;
    double ds_first = 0.01;
    int n_small = 5;
    double ds_max = 0.5;
    double ds_min = 1e-7;
    double growth = 1.3;
    int max_points = 400;
    double tol = 1e-10;
    int newton_max_iter = 10;
    bool compute_eigs = true;
};

struct BranchPoint {
    double lambda = 0;
    double Lambda = 0;  // = lambda for the theta = 1 problem
    double mu = 0;
    double mu_star = 0;       // symmetric value from the closed-form scaling
    double mu_star_grid = 0;  // symmetric solution on the same grid
    double t_phi = 0;
    double grad2 = 0, l2sq = 0, lpp = 0;
    double angular_norm = 0;
    double lowest_eig = 0;
    int newton_iters = 0;
    double residual = 0;
    double arclength = 0;  // step used to reach this point
    std::shared_ptr<const CylinderField> field;
};

struct Branch {
    int d = 0;
    double p = 0;
    std::vector<BranchPoint> points;
    double lambda_fs_exact = 0;
    double lambda_fs_grid = 0;
    double branch_eps = 0;
    double mu_at_bifurcation = 0;
    double t_at_bifurcation = 0;
    std::shared_ptr<const CylinderGrid> grid;
};

Branch continue_branch(int d, double p, const ContinuationConfig& cfg = {});

}  // namespace cknlab
