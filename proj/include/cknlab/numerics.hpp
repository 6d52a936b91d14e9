#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace cknlab {

// |S^{d-1}|, the area of the unit sphere in R^d.
double sphere_surface(int d);

// Zonal spectral basis on S^q: functions of z = cos(polar angle), measure
// proportional to (1-z^2)^{(q-2)/2} dz normalized to a probability measure.
// Nodes are Gauss-Gegenbauer points.
class ZonalBasis {
public:
    ZonalBasis(int q, int n);

    int dim() const { return q_; }
    int size() const { return n_; }
    const Eigen::VectorXd& nodes() const { return z_; }
    const Eigen::VectorXd& weights() const { return w_; }
    // k(k+q-1), eigenvalues of -Laplace-Beltrami on zonal harmonics.
    const Eigen::VectorXd& eigenvalues() const { return ev_; }
    // column k = orthonormal polynomial of degree k sampled at the nodes
    const Eigen::MatrixXd& poly() const { return P_; }
    const Eigen::MatrixXd& diff() const { return D_; }
    const Eigen::MatrixXd& laplacian() const { return L_; }

    double integrate(const Eigen::VectorXd& f) const { return w_.dot(f); }
    Eigen::VectorXd to_modal(const Eigen::VectorXd& f) const;
    Eigen::VectorXd from_modal(const Eigen::VectorXd& c) const { return P_ * c; }

private:
    int q_, n_;
    Eigen::VectorXd z_, w_, ev_;
    Eigen::MatrixXd P_, D_, L_;
};

// Fourth-order finite differences on a uniform grid, one-sided near the ends.
std::vector<double> fd_d1(const std::vector<double>& f, double h);
std::vector<double> fd_d2(const std::vector<double>& f, double h);

// log(cosh(x)) without overflow
double logcosh(double x);

// Bisection on a sign change of f over [lo, hi]; throws if no sign change.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol = 1e-14, int max_iter = 200);

}  // namespace cknlab
