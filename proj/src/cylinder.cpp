#include "cknlab/cylinder.hpp"

#include "cknlab/errors.hpp"
#include "cknlab/params.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <random>

namespace cknlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<double>;

namespace {
const double kStencil[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
}

CylinderGrid::CylinderGrid(int d, double L, double h, int nz) : d_(d), L_(L), h_(h) {
    if (d < 2) throw DomainError("cylinder grid needs d >= 2");
    if (!(L > 0 && h > 0 && L / h >= 8)) throw DomainError("cylinder grid needs L >= 8h > 0");
    ns_ = int(std::lround(L / h));
    L_ = ns_ * h;
    zonal_ = std::make_shared<ZonalBasis>(d - 1, nz);

    const double c = -1.0 / (12 * h * h);
    std::vector<Trip> t;
    for (int i = 0; i < ns_; ++i)
        for (int o = -2; o <= 2; ++o) {
            int j = i + o;
            if (j < 0) j = -j;
            if (j >= ns_) continue;
            t.emplace_back(i, j, c * kStencil[o + 2]);
        }
    nd2h_.resize(ns_, ns_);
    nd2h_.setFromTriplets(t.begin(), t.end());

    ws_ = VectorXd::Constant(ns_, 2 * h);
    ws_(0) = h;

    const int nzz = zonal_->size();
    const MatrixXd& Lz = zonal_->laplacian();
    std::vector<Trip> ta;
    for (int k = 0; k < nd2h_.outerSize(); ++k)
        for (SpMat::InnerIterator it(nd2h_, k); it; ++it)
            for (int j = 0; j < nzz; ++j)
                ta.emplace_back(it.row() * nzz + j, it.col() * nzz + j, it.value());
    for (int i = 0; i < ns_; ++i)
        for (int j = 0; j < nzz; ++j)
            for (int l = 0; l < nzz; ++l)
                if (Lz(j, l) != 0) ta.emplace_back(i * nzz + j, i * nzz + l, -Lz(j, l));
    A_.resize(ns_ * nzz, ns_ * nzz);
    A_.setFromTriplets(ta.begin(), ta.end());
    M_.resize(ns_ * nzz);
    for (int i = 0; i < ns_; ++i)
        for (int j = 0; j < nzz; ++j) M_(i * nzz + j) = ws_(i) * zonal_->weights()(j);
}

SpMat CylinderGrid::neg_d2_full() const {
    const int n = 2 * ns_ - 1;
    const double c = -1.0 / (12 * h_ * h_);
    std::vector<Trip> t;
    for (int i = 0; i < n; ++i)
        for (int o = -2; o <= 2; ++o) {
            int j = i + o;
            if (j < 0 || j >= n) continue;
            t.emplace_back(i, j, c * kStencil[o + 2]);
        }
    SpMat D(n, n);
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

std::shared_ptr<const CylinderGrid> make_cylinder_grid(int d, double L, double h, int nz) {
    return std::make_shared<CylinderGrid>(d, L, h, nz);
}

VectorXd CylinderField::s_profile() const {
    VectorXd v(grid->ns());
    for (int i = 0; i < grid->ns(); ++i) v(i) = at(i, 0);
    return v;
}

std::vector<double> CylinderField::full_s() const {
    std::vector<double> s;
    for (int i = -(grid->ns() - 1); i < grid->ns(); ++i) s.push_back(i * grid->h());
    return s;
}

MatrixXd CylinderField::full_values() const {
    const int ns = grid->ns(), nz = grid->nz();
    MatrixXd F(2 * ns - 1, nz);
    for (int i = -(ns - 1); i < ns; ++i)
        for (int j = 0; j < nz; ++j) F(i + ns - 1, j) = at(std::abs(i), j);
    return F;
}

CylinderField constant_in_z(std::shared_ptr<const CylinderGrid> g, const VectorXd& prof,
                            double p, double Lambda) {
    CylinderField f;
    const int nz = g->nz();
    f.values.resize(g->size());
    for (int i = 0; i < g->ns(); ++i)
        for (int j = 0; j < nz; ++j) f.values(i * nz + j) = prof(i);
    f.grid = std::move(g);
    f.p = p;
    f.Lambda = Lambda;
    return f;
}

namespace {

VectorXd angular_part(const CylinderGrid& g, const VectorXd& u) {
    const int ns = g.ns(), nz = g.nz();
    Eigen::Map<const MatrixXd> U(u.data(), nz, ns);  // column i = z-vector at s_i
    MatrixXd out = -g.zonal().laplacian() * U;
    return Eigen::Map<VectorXd>(out.data(), out.size());
}

VectorXd residual_vec(const CylinderGrid& g, const VectorXd& u, double Lambda, double p) {
    VectorXd up = u.cwiseMax(0.0);
    return g.A() * u + Lambda * u - VectorXd(up.array().pow(p - 1));
}

SpMat jacobian(const CylinderGrid& g, const VectorXd& u, double Lambda, double p) {
    VectorXd up = u.cwiseMax(0.0);
    VectorXd diag = Lambda - (p - 1) * up.array().pow(p - 2);
    SpMat J = g.A();
    for (int k = 0; k < J.rows(); ++k) J.coeffRef(k, k) += diag(k);
    return J;
}

double mdot(const VectorXd& M, const VectorXd& a, const VectorXd& b) {
    return (M.array() * a.array() * b.array()).sum();
}

}  // namespace

CylinderEnergies energies(const CylinderField& phi) {
    const CylinderGrid& g = *phi.grid;
    const VectorXd& u = phi.values;
    CylinderEnergies e;
    e.grad2 = mdot(g.M(), u, g.A() * u);
    e.l2sq = mdot(g.M(), u, u);
    e.lpp = (g.M().array() * u.array().abs().pow(phi.p)).sum();
    e.angular = mdot(g.M(), u, angular_part(g, u));
    return e;
}

QuotientResult cylinder_quotient(const CylinderField& phi, double Lambda, double p, double theta) {
    CylinderField f = phi;
    f.p = p;
    CylinderEnergies e = energies(f);
    if (!(e.l2sq > 0)) throw DegenerateInput("zero field");
    QuotientResult q;
    q.t = e.grad2 / e.l2sq;
    q.mu = theta_quotient(e.grad2, e.l2sq, e.lpp, Lambda, theta, p);
    return q;
}

double residual_norm(const CylinderField& phi, double Lambda) {
    return residual_vec(*phi.grid, phi.values, Lambda, phi.p).cwiseAbs().maxCoeff();
}

EigenPairs lowest_eigenpairs(const SpMat& S, double sigma, int count) {
    const int n = int(S.rows());
    const int b = std::min(n, count + 4);
    SpMat Sh = S;
    for (int k = 0; k < n; ++k) Sh.coeffRef(k, k) -= sigma;
    Eigen::SimplicialLDLT<SpMat> ldlt(Sh);
    if (ldlt.info() != Eigen::Success) throw EigFailed("factorization failed");
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    MatrixXd X(n, b);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < b; ++j) X(i, j) = nd(rng);
    VectorXd prev = VectorXd::Constant(count, std::numeric_limits<double>::infinity());
    for (int it = 0; it < 2000; ++it) {
        MatrixXd Y = ldlt.solve(X);
        Eigen::HouseholderQR<MatrixXd> qr(Y);
        MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, b);
        MatrixXd T = Q.transpose() * (S * Q);
        T = 0.5 * (T + T.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
        X = Q * es.eigenvectors();
        VectorXd th = es.eigenvalues().head(count);
        bool done = true;
        for (int k = 0; k < count; ++k) {
            double r = (S * X.col(k) - th(k) * X.col(k)).norm();
            if (r > 1e-10 * std::max(1.0, std::abs(th(k))) ||
                std::abs(th(k) - prev(k)) > 1e-13 * std::max(1.0, std::abs(th(k))))
                done = false;
        }
        prev = th;
        if (done) return {th, X.leftCols(count)};
    }
    throw EigFailed("subspace iteration did not converge");
}

VectorXd symmetric_profile(const CylinderGrid& g, double p, double Lambda, int* iterations) {
    if (!(Lambda > 0)) throw DomainError("Lambda must be positive");
    if (!(p > 2)) throw DomainError("p must exceed 2");
    const int ns = g.ns();
    const double k = (p - 2) * std::sqrt(Lambda) / 2;
    VectorXd u(ns);
    for (int i = 0; i < ns; ++i)
        u(i) = std::exp(std::log(p * Lambda / 2) / (p - 2) - 2 / (p - 2) * logcosh(k * g.s(i)));
    const SpMat& D = g.neg_d2_half();
    Eigen::SparseLU<SpMat> lu;
    double r = 0;
    for (int it = 0; it <= 40; ++it) {
        VectorXd up = u.cwiseMax(0.0);
        VectorXd F = D * u + Lambda * u - VectorXd(up.array().pow(p - 1));
        r = F.cwiseAbs().maxCoeff();
        if (r <= 1e-13 * std::max(1.0, u.cwiseAbs().maxCoeff()) || (it > 0 && r <= 1e-12)) {
            if (iterations) *iterations = it;
            return u;
        }
        SpMat J = D;
        for (int i = 0; i < ns; ++i) J.coeffRef(i, i) += Lambda - (p - 1) * std::pow(up(i), p - 2);
        lu.compute(J);
        if (lu.info() != Eigen::Success) throw NewtonDiverged("singular symmetric Jacobian");
        u -= lu.solve(F);
    }
    if (r <= 1e-10) {
        if (iterations) *iterations = 40;
        return u;
    }
    throw NewtonDiverged("symmetric profile polish did not converge");
}

CylinderField solve_symmetric(int d, double p, double Lambda,
                              std::shared_ptr<const CylinderGrid> grid) {
    if (!(p > 2 && p < critical_exponent(d))) throw DomainError("need p in (2, 2*)");
    if (grid->d() != d) throw DomainError("grid dimension mismatch");
    VectorXd prof = symmetric_profile(*grid, p, Lambda);
    return constant_in_z(std::move(grid), prof, p, Lambda);
}

double even_sector_eigenvalue(const CylinderGrid& g, const VectorXd& prof, double p,
                              double Lambda, int k, VectorXd* vec) {
    const int ns = g.ns();
    const double dk = double(k) * (k + g.d() - 2);
    VectorXd sq = g.ws().cwiseSqrt(), isq = sq.cwiseInverse();
    SpMat S = sq.asDiagonal() * g.neg_d2_half() * isq.asDiagonal();
    SpMat St = S.transpose();
    S = 0.5 * (S + St);
    double vmax = 0;
    for (int i = 0; i < ns; ++i) {
        double v = (p - 1) * std::pow(std::max(prof(i), 0.0), p - 2);
        vmax = std::max(vmax, v);
        S.coeffRef(i, i) += Lambda + dk - v;
    }
    EigenPairs ep = lowest_eigenpairs(S, Lambda + dk - vmax - 1, 1);
    if (vec) {
        VectorXd y = isq.cwiseProduct(ep.vectors.col(0));
        double nrm = std::sqrt(mdot(g.ws(), y, y));
        y /= nrm;
        if (y(0) < 0) y = -y;
        *vec = y;
    }
    return ep.values(0);
}

Spectrum linearized_spectrum(const CylinderField& phi, double Lambda, int k, int count) {
    if (k < 0 || count < 1) throw DomainError("bad sector or count");
    const CylinderGrid& g = *phi.grid;
    CylinderEnergies e = energies(phi);
    if (e.angular > 1e-12 * std::max(1.0, e.l2sq))
        throw DomainError("linearized_spectrum expects a z-independent field");
    VectorXd half = phi.s_profile();
    const int ns = g.ns(), n = 2 * ns - 1;
    SpMat H = g.neg_d2_full();
    const double dk = double(k) * (k + g.d() - 2);
    double vmax = 0;
    for (int i = 0; i < n; ++i) {
        double u = std::max(half(std::abs(i - (ns - 1))), 0.0);
        double v = (phi.p - 1) * std::pow(u, phi.p - 2);
        vmax = std::max(vmax, v);
        H.coeffRef(i, i) += Lambda + dk - v;
    }
    EigenPairs ep = lowest_eigenpairs(H, Lambda + dk - vmax - 1, count);
    Spectrum sp;
    sp.eigenvalues = ep.values;
    sp.eigenvectors = ep.vectors;
    sp.s = phi.full_s();
    return sp;
}

NewtonResult newton_solve(const CylinderField& init, double Lambda, const NewtonOptions& opt) {
    const CylinderGrid& g = *init.grid;
    const double p = init.p;
    NewtonResult res;
    res.field = init;
    res.field.Lambda = Lambda;
    VectorXd& u = res.field.values;
    if (u.cwiseAbs().maxCoeff() == 0) {
        res.trivial = true;
        return res;
    }
    VectorXd us;
    if (opt.deflate_auto) {
        CylinderEnergies e = energies(init);
        if (e.angular > 1e-16 * e.l2sq) {
            us = constant_in_z(init.grid, symmetric_profile(g, p, Lambda), p, Lambda).values;
            res.deflated = true;
        }
    }
    Eigen::SparseLU<SpMat> lu;
    for (int it = 0; it <= opt.max_iter; ++it) {
        VectorXd F = residual_vec(g, u, Lambda, p);
        res.residual = F.cwiseAbs().maxCoeff();
        res.iterations = it;
        if (!std::isfinite(res.residual)) break;
        if (res.residual <= opt.tol * std::max(1.0, u.cwiseAbs().maxCoeff())) {
            double umax = u.maxCoeff();
            if (u.minCoeff() < -1e-8 * std::max(umax, 1.0))
                throw NegativeSolution("Newton converged to a sign-changing solution");
            if (umax <= 1e-12) res.trivial = true;
            return res;
        }
        if (it == opt.max_iter) break;
        lu.compute(jacobian(g, u, Lambda, p));
        if (lu.info() != Eigen::Success) throw NewtonDiverged("singular Jacobian");
        VectorXd y = lu.solve(F);
        double factor = 1.0;
        if (res.deflated) {
            VectorXd e = u - us;
            double E = mdot(g.M(), e, e);
            double eta = 1.0 / E + 1.0;
            double deta = -2.0 * mdot(g.M(), e, y) / (E * E);
            factor = eta / (eta + deta);
        }
        u -= factor * y;
    }
    throw NewtonDiverged("Newton did not converge (residual " + std::to_string(res.residual) + ")");
}

// ---------------------------------------------------------------- continuation

namespace {

struct Corrected {
    bool ok = false;
    VectorXd u;
    double lambda = 0;
    int iters = 0;
    double residual = 0;
};

// Solve F(u, lambda) = 0 with the linear constraint <a, u>_M + al * lambda = b.
Corrected correct(const CylinderGrid& g, double p, VectorXd u, double lambda, const VectorXd& a,
                  double al, double b, double tol, int max_iter) {
    const int n = g.size();
    const VectorXd& M = g.M();
    Corrected c;
    Eigen::SparseLU<SpMat> lu;
    double r0 = -1;
    for (int it = 0; it <= max_iter; ++it) {
        VectorXd F = residual_vec(g, u, lambda, p);
        double cres = mdot(M, a, u) + al * lambda - b;
        double r = F.cwiseAbs().maxCoeff();
        if (!std::isfinite(r)) return c;
        if (r0 < 0) r0 = r;
        if (r > 1e3 * std::max(r0, 1e-6)) return c;
        if (r <= tol * std::max(1.0, u.cwiseAbs().maxCoeff()) &&
            std::abs(cres) <= 1e-12 * std::max(1.0, std::abs(b))) {
            c.ok = true;
            c.u = u;
            c.lambda = lambda;
            c.iters = it;
            c.residual = r;
            return c;
        }
        if (it == max_iter) break;
        SpMat J = jacobian(g, u, lambda, p);
        std::vector<Trip> t;
        t.reserve(J.nonZeros() + 2 * n + 1);
        for (int k = 0; k < J.outerSize(); ++k)
            for (SpMat::InnerIterator itj(J, k); itj; ++itj)
                t.emplace_back(itj.row(), itj.col(), itj.value());
        for (int k = 0; k < n; ++k) {
            t.emplace_back(k, n, u(k));
            t.emplace_back(n, k, M(k) * a(k));
        }
        t.emplace_back(n, n, al);
        SpMat B(n + 1, n + 1);
        B.setFromTriplets(t.begin(), t.end());
        lu.compute(B);
        if (lu.info() != Eigen::Success) return c;
        VectorXd rhs(n + 1);
        rhs.head(n) = -F;
        rhs(n) = -cres;
        VectorXd dx = lu.solve(rhs);
        u += dx.head(n);
        lambda += dx(n);
    }
    return c;
}

double lowest_2d_eigenvalue(const CylinderGrid& g, const VectorXd& u, double Lambda, double p) {
    SpMat J = jacobian(g, u, Lambda, p);
    VectorXd sq = g.M().cwiseSqrt(), isq = sq.cwiseInverse();
    SpMat S = sq.asDiagonal() * J * isq.asDiagonal();
    SpMat St = S.transpose();
    S = 0.5 * (S + St);
    double vmax = (p - 1) * std::pow(std::max(u.maxCoeff(), 0.0), p - 2);
    return lowest_eigenpairs(S, Lambda - vmax - 1, 1).values(0);
}

}  // namespace

Branch continue_branch(int d, double p, const ContinuationConfig& cfg) {
    if (!(p > 2 && p < critical_exponent(d))) throw DomainError("need p in (2, 2*)");
    const double lfs = lambda_fs(d, p);
    const double L = cfg.L > 0 ? cfg.L : 20 / std::sqrt(lfs);
    auto grid = make_cylinder_grid(d, L, cfg.h, cfg.nz);
    const CylinderGrid& g = *grid;
    const VectorXd& M = g.M();

    Branch br;
    br.d = d;
    br.p = p;
    br.grid = grid;
    br.lambda_fs_exact = lfs;

    // k = 1 eigenvalue along the symmetric branch
    auto ev1 = [&](double lam) {
        return even_sector_eigenvalue(g, symmetric_profile(g, p, lam), p, lam, 1);
    };
    double lo = 0.9 * lfs, hi = 1.1 * lfs;
    double flo = ev1(lo), fhi = ev1(hi);
    for (int k = 0; k < 20 && !(flo > 0 && fhi < 0); ++k) {
        if (!(flo > 0)) lo *= 0.8, flo = ev1(lo);
        if (!(fhi < 0)) hi *= 1.25, fhi = ev1(hi);
    }
    if (!(flo > 0 && fhi < 0))
        throw ContinuationStalled("no sign change of the k = 1 eigenvalue near Lambda_FS");
    std::uintmax_t maxit = 100;
    auto bracket = boost::math::tools::toms748_solve(
        ev1, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(50), maxit);
    const double lbif = 0.5 * (bracket.first + bracket.second);
    br.lambda_fs_grid = lbif;

    VectorXd prof0 = symmetric_profile(g, p, lbif);
    VectorXd psi;
    even_sector_eigenvalue(g, prof0, p, lbif, 1, &psi);
    const int nz = g.nz();
    VectorXd v(g.size());
    const VectorXd P1 = g.zonal().poly().col(1);
    for (int i = 0; i < g.ns(); ++i)
        for (int j = 0; j < nz; ++j) v(i * nz + j) = psi(i) * P1(j);
    VectorXd u0 = constant_in_z(grid, prof0, p, lbif).values;
    {
        CylinderField f0 = constant_in_z(grid, prof0, p, lbif);
        CylinderEnergies e0 = energies(f0);
        br.mu_at_bifurcation = theta_quotient(e0.grad2, e0.l2sq, e0.lpp, lbif, 1.0, p);
        br.t_at_bifurcation = e0.grad2 / e0.l2sq;
    }

    const double mu1 = mu_star_one(p);
    auto make_point = [&](const Corrected& c, double ds) {
        BranchPoint bp;
        auto f = std::make_shared<CylinderField>();
        f->grid = grid;
        f->values = c.u;
        f->p = p;
        f->Lambda = c.lambda;
        CylinderEnergies e = energies(*f);
        bp.lambda = bp.Lambda = c.lambda;
        bp.grad2 = e.grad2;
        bp.l2sq = e.l2sq;
        bp.lpp = e.lpp;
        bp.angular_norm = std::sqrt(std::max(e.angular, 0.0));
        bp.mu = theta_quotient(e.grad2, e.l2sq, e.lpp, c.lambda, 1.0, p);
        bp.t_phi = e.grad2 / e.l2sq;
        bp.mu_star = mu1 * std::pow(c.lambda, (p + 2) / (2 * p));
        CylinderField fs = constant_in_z(grid, symmetric_profile(g, p, c.lambda), p, c.lambda);
        CylinderEnergies es = energies(fs);
        bp.mu_star_grid = theta_quotient(es.grad2, es.l2sq, es.lpp, c.lambda, 1.0, p);
        bp.lowest_eig = cfg.compute_eigs ? lowest_2d_eigenvalue(g, c.u, c.lambda, p)
                                         : std::numeric_limits<double>::quiet_NaN();
        bp.newton_iters = c.iters;
        bp.residual = c.residual;
        bp.arclength = ds;
        bp.field = f;
        return bp;
    };

    // branch switching along the null vector
    double eps = std::min(0.1 * std::sqrt(mdot(M, u0, u0)), cfg.ds_first);
    Corrected cur;
    for (;;) {
        VectorXd up = u0 + eps * v;
        cur = correct(g, p, up, lbif, v, 0.0, mdot(M, v, u0) + eps, cfg.tol, cfg.newton_max_iter);
        if (cur.ok && cur.u.minCoeff() >= -1e-8 * cur.u.maxCoeff()) break;
        eps *= 0.5;
        if (eps < cfg.ds_min) throw ContinuationStalled("branch switching failed");
    }
    br.branch_eps = eps;
    br.points.push_back(make_point(cur, eps));

    VectorXd prev_u = u0;
    double prev_l = lbif;
    double ds = cfg.ds_first;
    while (cur.lambda < cfg.lambda_max && int(br.points.size()) < cfg.max_points) {
        if (cur.lambda < 0.25 * lfs) break;
        VectorXd du = cur.u - prev_u;
        double dl = cur.lambda - prev_l;
        double nrm = std::sqrt(mdot(M, du, du) + dl * dl);
        VectorXd tu = du / nrm;
        double tl = dl / nrm;
        const bool small = int(br.points.size()) < cfg.n_small;
        double step = small ? std::min(ds, cfg.ds_first) : ds;
        Corrected next;
        for (;;) {
            VectorXd up = cur.u + step * tu;
            double lp = cur.lambda + step * tl;
            next = correct(g, p, up, lp, tu, tl, mdot(M, tu, up) + tl * lp, cfg.tol,
                           cfg.newton_max_iter);
            if (next.ok && next.u.minCoeff() >= -1e-8 * next.u.maxCoeff()) {
                // reject steps that fold back onto the previous segment
                VectorXd nu = next.u - cur.u;
                double nl = next.lambda - cur.lambda;
                if (mdot(M, nu, tu) + nl * tl > 0) break;
            }
            step *= 0.5;
            if (step < cfg.ds_min) throw ContinuationStalled("arclength step underflow");
        }
        br.points.push_back(make_point(next, step));
        prev_u = cur.u;
        prev_l = cur.lambda;
        cur = next;
        ds = next.iters < 4 ? std::min(step * cfg.growth, cfg.ds_max) : step;
    }
    return br;
}

}  // namespace cknlab
