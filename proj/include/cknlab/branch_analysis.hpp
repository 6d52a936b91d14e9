#pragma once

#include "cknlab/cylinder.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace cknlab {

struct CurveSample {
    double lambda = 0;
    double Lambda = 0;             // theta lambda - (1 - theta) t[phi_lambda]
    double mu = 0;                 // Q_theta[phi_lambda; Lambda], an upper bound for mu(theta, Lambda)
    double mu_star_theta = 0;      // symmetric value, closed form
    double mu_star_theta_grid = 0; // symmetric value on the branch grid
    double d_Lambda_d_lambda = 0;
    double t_phi = 0;
};

struct CurveB {
    int d = 0;
    double p = 0;
    double theta = 1;
    double lambda_bif = 0;  // grid bifurcation point of the source branch
    double Lambda_bif = 0;  // its image
    double mu_bif = 0;
    std::vector<CurveSample> samples;  // ordered as the source branch
    const Branch* source = nullptr;
};

// grid_comparator: also compute mu_star_theta_grid (one 1D solve per sample)
CurveB reparametrize(const Branch& branch, double theta, bool grid_comparator = true);

// Lambda = theta lambda' - (1 - theta) t_*(lambda') inverted explicitly, then Q_theta
// of the explicit profile; evaluated with Gamma functions.
double mu_star_theta_closed(double p, double Lambda, double theta);

enum class Direction { left, right };
const char* to_string(Direction d);

struct TurningPoint {
    double lambda = 0;
    double Lambda = 0;
    int index = 0;  // sample closest to the fold
};

struct BifurcationClass {
    Direction direction = Direction::right;
    double slope = 0;  // fitted dLambda/dlambda at the bifurcation
    std::vector<TurningPoint> turning_points;
};

BifurcationClass classify_bifurcation(const CurveB& curve);

struct GroundState {
    double c_gn = 0;             // quotient with Lebesgue measure on R^d
    double c_gn_normalized = 0;  // same with the probability measure on the sphere
    double shooting_c = 0;       // -Du + u = c u^{p-1}, u(0) = 1
    double residual = 0;         // max residual of the radial equation on the profile
    double cutoff = 0;           // radius where the shot profile is truncated
    std::vector<double> r, u, du;
};

GroundState ground_state(int d, double p);
double gn_constant(int d, double p);
// GN quotient of r -> u(c r) evaluated by a fresh integration at the points c r_k
double gn_quotient_scaled(int d, double p, double c, const GroundState& gs);

struct CriterionReport {
    int d = 0;
    double p = 0;
    double vartheta = 0;
    double c_gn = 0;  // normalized
    double mu_star_at_fs = 0;
    double lambda_fs_theta = 0;
    bool breaking_predicted = false;
    std::optional<std::pair<double, double>> lambda_s_bracket;
};

// curve, when given, must be the reparametrisation at theta = vartheta(p)
CriterionReport lemma_criterion(int d, double p, const CurveB* curve = nullptr);

struct ProbeRow {
    double theta = 0;
    Direction direction = Direction::right;
    double slope = 0;
    std::vector<TurningPoint> turning_points;
    bool monotone = false;  // Lambda and mu increase together along the curve
    bool breaking_predicted = false;
    // smallest sample Lambda where the curve undercuts the symmetric value on the grid
    std::optional<double> breaking_from;
};

struct ProbeReport {
    int d = 0;
    double p = 0;
    std::vector<ProbeRow> rows;
    std::optional<double> theta_flip;  // direction changes here
    std::optional<bool> monotone_at_vartheta;
    CriterionReport criterion;
};

ProbeReport conjecture_probe(const Branch& branch, const std::vector<double>& theta_grid);

}  // namespace cknlab
