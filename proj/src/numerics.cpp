#include "cknlab/numerics.hpp"

#include "cknlab/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace cknlab {

double sphere_surface(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

ZonalBasis::ZonalBasis(int q, int n) : q_(q), n_(n) {
    if (q < 1) throw DomainError("zonal basis needs sphere dimension >= 1");
    if (n < 2) throw DomainError("zonal basis needs at least 2 nodes");
    const double a = 0.5 * (q - 2);

    // Golub-Welsch on the symmetric Jacobi matrix of the Gegenbauer weight.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b2 = (k == 1) ? 1.0 / (2 * a + 3)
                             : k * (k + 2 * a) / ((2 * k + 2 * a + 1) * (2 * k + 2 * a - 1));
        J(k, k - 1) = J(k - 1, k) = std::sqrt(b2);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    z_ = es.eigenvalues();
    Eigen::MatrixXd V = es.eigenvectors();
    w_.resize(n);
    P_.resize(n, n);
    for (int j = 0; j < n; ++j) {
        double v0 = V(0, j);
        if (v0 < 0) V.col(j) *= -1, v0 = -v0;
        w_(j) = v0 * v0;
        for (int k = 0; k < n; ++k) P_(j, k) = V(k, j) / v0;
    }
    ev_.resize(n);
    for (int k = 0; k < n; ++k) ev_(k) = double(k) * (k + q - 1);

    // barycentric differentiation, weights kept in log form
    std::vector<double> logl(n, 0.0), sgn(n, 1.0);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (k != j) {
                double dz = z_(j) - z_(k);
                logl[j] -= std::log(std::abs(dz));
                if (dz < 0) sgn[j] = -sgn[j];
            }
    D_ = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double diag = 0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double r = sgn[j] * sgn[i] * std::exp(logl[j] - logl[i]) / (z_(i) - z_(j));
            D_(i, j) = r;
            diag -= r;
        }
        D_(i, i) = diag;
    }

    L_ = P_ * (-ev_).asDiagonal() * P_.transpose() * w_.asDiagonal();
}

Eigen::VectorXd ZonalBasis::to_modal(const Eigen::VectorXd& f) const {
    return P_.transpose() * w_.cwiseProduct(f);
}

std::vector<double> fd_d1(const std::vector<double>& f, double h) {
    const int n = int(f.size());
    if (n < 5) throw DomainError("fd_d1 needs at least 5 points");
    std::vector<double> g(n);
    const double c = 1.0 / (12 * h);
    for (int i = 2; i < n - 2; ++i)
        g[i] = c * (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]);
    g[0] = c * (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]);
    g[1] = c * (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]);
    g[n - 1] = -c * (-25 * f[n - 1] + 48 * f[n - 2] - 36 * f[n - 3] + 16 * f[n - 4] - 3 * f[n - 5]);
    g[n - 2] = -c * (-3 * f[n - 1] - 10 * f[n - 2] + 18 * f[n - 3] - 6 * f[n - 4] + f[n - 5]);
    return g;
}

std::vector<double> fd_d2(const std::vector<double>& f, double h) {
    const int n = int(f.size());
    if (n < 6) throw DomainError("fd_d2 needs at least 6 points");
    std::vector<double> g(n);
    const double c = 1.0 / (12 * h * h);
    for (int i = 2; i < n - 2; ++i)
        g[i] = c * (-f[i - 2] + 16 * f[i - 1] - 30 * f[i] + 16 * f[i + 1] - f[i + 2]);
    g[0] = c * (45 * f[0] - 154 * f[1] + 214 * f[2] - 156 * f[3] + 61 * f[4] - 10 * f[5]);
    g[1] = c * (10 * f[0] - 15 * f[1] - 4 * f[2] + 14 * f[3] - 6 * f[4] + f[5]);
    g[n - 1] = c * (45 * f[n - 1] - 154 * f[n - 2] + 214 * f[n - 3] - 156 * f[n - 4] +
                    61 * f[n - 5] - 10 * f[n - 6]);
    g[n - 2] = c * (10 * f[n - 1] - 15 * f[n - 2] - 4 * f[n - 3] + 14 * f[n - 4] -
                    6 * f[n - 5] + f[n - 6]);
    return g;
}

double logcosh(double x) {
    x = std::abs(x);
    return x + std::log1p(std::exp(-2 * x)) - std::numbers::ln2;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol,
              int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0) return lo;
    if (fhi == 0) return hi;
    if ((flo > 0) == (fhi > 0)) throw DomainError("bisect: no sign change in bracket");
    for (int it = 0; it < max_iter && hi - lo > xtol * std::max(1.0, std::abs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0) return mid;
        if ((fm > 0) == (flo > 0)) lo = mid, flo = fm;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace cknlab
