#include "cknlab/verify.hpp"

#include "cknlab/branch_analysis.hpp"
#include "cknlab/errors.hpp"
#include "cknlab/functionals.hpp"
#include "cknlab/params.hpp"
#include "cknlab/sphere_flows.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace cknlab {

namespace {

std::string num(double x) {
    char b[64];
    std::snprintf(b, sizeof b, "%.3e", x);
    return b;
}

template <class F>
Check guarded(const std::string& name, F f) {
    Check c;
    c.name = name;
    try {
        f(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail = std::string("exception: ") + e.what();
    }
    return c;
}

}  // namespace

std::vector<Check> run_invariant_suite(bool quick) {
    std::vector<Check> out;

    out.push_back(guarded("parameter equivalence", [](Check& c) {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> U(0, 1);
        int bad = 0, n = 0;
        while (n < 300) {
            int d = 3 + int(U(rng) * 4);
            double ac = 0.5 * (d - 2);
            double a = ac - 0.05 - 4 * U(rng);
            double b = a + 0.02 + 0.96 * U(rng);
            ParamInputs in;
            in.a = a, in.b = b;
            CKNParams prm;
            try {
                prm = derive_params(d, in, Mode::critical);
            } catch (const AdmissibilityError&) {
                continue;
            }
            ++n;
            if (!check_equivalence(prm).agree()) ++bad;
        }
        c.ok = bad == 0;
        c.detail = std::to_string(bad) + " disagreements in " + std::to_string(n);
    }));

    out.push_back(guarded("Poschl-Teller k=1 eigenvalue", [](Check& c) {
        const int d = 5;
        const double p = 2.8, lfs = lambda_fs(d, p);
        auto g = make_cylinder_grid(d, 20 / std::sqrt(lfs), 0.02, 8);
        double worst = 0;
        for (double L : {2.0, 6.0}) {
            CylinderField phi = solve_symmetric(d, p, L, g);
            double ev = linearized_spectrum(phi, L, 1, 1).eigenvalues(0);
            double ex = -0.25 * (p * p - 4) * (L - lfs);
            worst = std::max(worst, std::abs(ev - ex) / std::abs(ex));
        }
        c.ok = worst <= 1e-3;
        c.detail = "max relative error " + num(worst);
    }));

    out.push_back(guarded("symmetric profile identity", [](Check& c) {
        auto g = make_cylinder_grid(5, 20, 0.02, 8);
        CylinderField phi = solve_symmetric(5, 2.8, 1.0, g);
        CylinderEnergies e = energies(phi);
        double res = residual_norm(phi, 1.0);
        double id = std::abs(e.grad2 + e.l2sq - e.lpp) / e.lpp;
        c.ok = res <= 1e-10 && id <= 1e-8;
        c.detail = "residual " + num(res) + ", identity " + num(id);
    }));

    out.push_back(guarded("mu_star scaling", [](Check& c) {
        CKNParams prm;
        prm.d = 5;
        prm.mode = Mode::cylinder;
        prm.p = 2.8;
        double worst = 0;
        for (double L : {0.5, 4.0}) {
            StarNorms n = star_norms(2.8, L);
            double q = theta_quotient(n.grad2, n.l2sq, n.lpp, L, 1.0, 2.8) / mu_star_one(2.8);
            worst = std::max(worst, std::abs(q / std::pow(L, 4.8 / 5.6) - 1));
        }
        c.ok = worst <= 1e-8;
        c.detail = "max relative deviation " + num(worst);
    }));

    out.push_back(guarded("Gaussian criterion below one", [](Check& c) {
        double h3 = gaussian_h(3, 2.01), h5 = gaussian_h(5, 2.01);
        c.ok = h3 < 1 && h5 < 1;
        c.detail = "h = " + num(h3) + ", " + num(h5);
    }));

    out.push_back(guarded("ground state shooting", [](Check& c) {
        GroundState gs = ground_state(5, 2.8);
        double q2 = gn_quotient_scaled(5, 2.8, 2.0, gs);
        double dev = std::abs(q2 / gs.c_gn_normalized - 1);
        c.ok = gs.residual <= 1e-8 && dev <= 1e-8;
        c.detail = "residual " + num(gs.residual) + ", scale deviation " + num(dev);
    }));

    out.push_back(guarded("heat flow mass and deficit", [](Check& c) {
        auto basis = std::make_shared<ZonalBasis>(3, 48);
        FlowSpec spec;
        spec.p = 3;
        spec.t_end = 0.5;
        Trajectory tr = integrate(make_state(ascent_density(basis, {0.4, 3, 0, 0})), spec, 1);
        double drift = 0, rise = 0;
        for (size_t i = 0; i < tr.samples.size(); ++i) {
            drift = std::max(drift, std::abs(tr.samples[i].mass - tr.samples[0].mass));
            if (i) rise = std::max(rise, tr.samples[i].deficit - tr.samples[i - 1].deficit);
            if (!(tr.samples[i].min_density > 0)) rise = INFINITY;
        }
        c.ok = drift <= 1e-9 && rise <= 1e-8;
        c.detail = "mass drift " + num(drift) + ", max deficit increase " + num(rise);
    }));

    if (!quick) {
        out.push_back(guarded("branch below symmetric energy", [](Check& c) {
            ContinuationConfig cfg;
            cfg.lambda_max = 6;
            cfg.compute_eigs = false;
            Branch br = continue_branch(5, 2.8, cfg);
            int bad = 0;
            for (auto& p : br.points)
                if (!(p.mu < p.mu_star_grid)) ++bad;
            CurveB cb = reparametrize(br, 0.718, false);
            BifurcationClass bc = classify_bifurcation(cb);
            c.ok = bad == 0 && bc.direction == Direction::left;
            c.detail = std::to_string(bad) + " points above the symmetric value; theta = 0.718 bifurcates " +
                       to_string(bc.direction);
        }));
    }
    return out;
}

}  // namespace cknlab
