#pragma once

#include <optional>
#include <string>

namespace cknlab {

enum class Mode { critical, subcritical, cylinder };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

// Generating set for derive_params; which fields are used depends on the mode.
struct ParamInputs {
    std::optional<double> a, b;
    std::optional<double> beta, gamma;
    std::optional<double> p;
    std::optional<double> Lambda;
    std::optional<double> theta;
};

struct CKNParams {
    int d = 0;
    Mode mode = Mode::critical;
    double p = 0;
    std::optional<double> a, b;          // critical / cylinder
    std::optional<double> beta, gamma;   // subcritical
    double theta = 1;
    std::optional<double> Lambda;        // (a - a_c)^2 when a is set
    double alpha = 0;
    double n = 0;
    double m = 0;

    double a_c() const { return 0.5 * (d - 2); }
};

// Sobolev exponent 2d/(d-2); +inf for d <= 2.
double critical_exponent(int d);

CKNParams derive_params(int d, const ParamInputs& in, Mode mode);

struct Thresholds {
    std::optional<double> lambda_fs, b_fs, beta_fs, alpha_fs, two_sharp, lambda_fs_theta,
        p_star, vartheta;
};

Thresholds thresholds(const CKNParams& prm);

// scalar closed forms
double lambda_fs(int d, double p);
double b_fs(int d, double a);
double beta_fs(int d, double gamma);
double alpha_fs(int d, double n);
double two_sharp(int d);
double vartheta(int d, double p);

struct Equivalence {
    bool lambda_cond = false;  // 0 < Lambda <= Lambda_FS
    bool b_cond = false;       // b_FS^{-1}(b) <= a < a_c
    bool alpha_cond = false;   // 0 < alpha <= alpha_FS
    bool agree() const { return lambda_cond == b_cond && b_cond == alpha_cond; }
};

Equivalence check_equivalence(const CKNParams& prm);

// Value of a where the line {b = a + d/p - a_c} meets the curve b = b_FS(a).
double a_fs(int d, double p);

double optimal_constant_star(const CKNParams& prm);

// Symmetric cylinder profile phi_{*,lambda}(s) = c cosh(k s)^{-2/(p-2)}.
// Norms use the probability measure on the sphere, so only p enters.
struct StarNorms {
    double grad2;  // ||phi'||_2^2
    double l2sq;   // ||phi||_2^2
    double lpp;    // ||phi||_p^p
};
StarNorms star_norms(double p, double lambda);
double t_star(double p, double lambda);
double mu_star_one(double p);

// Lambda = theta*lambda - (1-theta) t[phi_*,lambda] solved for lambda.
double lambda_star_theta(double p, double Lambda, double theta);

double mu_star(const CKNParams& prm, double Lambda, double theta);
double lambda_fs_theta(const CKNParams& prm, double theta);

// Q_theta(f) = (grad2 + Lambda l2sq)^theta l2sq^(1-theta) / lpp^(2/p)
double theta_quotient(double grad2, double l2sq, double lpp, double Lambda, double theta,
                      double p);

}  // namespace cknlab
