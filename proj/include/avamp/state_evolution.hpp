#pragma once
#include <Eigen/Dense>
#include <avamp/denoiser.hpp>
#include <avamp/model.hpp>
#include <avamp/quadrature.hpp>
#include <avamp/vamp.hpp>
#include <vector>

namespace avamp {

struct SeState {
    double tau1 = 0, tau2 = 0;
    double gamma1_bar = 0, gamma2_bar = 0;
    double eta1_bar = 0, eta2_bar = 0;
    double alpha1_bar = 0, alpha2_bar = 0;
    BgParams theta1_bar;
    double theta2_bar = 0;
    double mse1 = 0;          // E1 at this iteration's point
    double nmse_db = 0;       // 10 log10(E1 / E[(X0)^2])
    bool valid = true;        // alpha in (0,1) so far
    bool idealized_adaptation = false;
};

struct SeConfig {
    BgParams theta1_true;
    double theta2_true = 1.0;
    Eigen::VectorXd spectrum;     // singular values padded to length N
    int m_rows = 0;               // noise-carrying rows; 0 means all of spectrum
    AdaptationRule::Kind theta1_mode = AdaptationRule::Kind::Oracle;
    Theta2Mode theta2_mode = Theta2Mode::Oracle;
    std::vector<BgParams> grid_candidates;
    int quad_order = 40;
    int n_iters = 40;
    // initial limits
    // r10 = 0 breaks the independent-noise model at iteration 0: the
    // denoiser input is identically zero, so the first sweep is computed
    // from point evaluations at r = 0 rather than channel expectations.
    bool r10_zero = true;
    double tau10 = 1.0;
    double gamma1_bar0 = 1.0;
    BgParams theta1_bar0;
    double theta2_bar0 = 1.0;
};

// Expected suff-stat triple (E[pi], E[pi m], E[pi(m^2+v)]) under the
// scalar model R = X0 + N(0, tau1).
struct SeMu1 {
    double pi, pim, pim2v;
};

double error_fn_e1(double gamma1, double tau1, const BgParams& theta1_hat,
                   const BgParams& theta1_true, const GaussHermite& quad);
double sens_a1(double gamma1, double tau1, const BgParams& theta1_hat,
               const BgParams& theta1_true, const GaussHermite& quad);
SeMu1 se_mu1(double gamma1, double tau1, const BgParams& theta1_hat,
             const BgParams& theta1_true, const GaussHermite& quad);

double error_fn_e2(double gamma2, double tau2, double theta2_hat,
                   const Eigen::VectorXd& spectrum, double theta2_true);
double sens_a2(double gamma2, double theta2_hat, const Eigen::VectorXd& spectrum);
double se_mu2(double gamma2, double tau2, double theta2_hat,
              const Eigen::VectorXd& spectrum, double theta2_true);

std::vector<SeState> se_run(const SeConfig& cfg);

// Deterministic SE initial values matching the solver's data-driven
// initialization in expectation (r10 = 0, Appendix-G style theta inits).
SeConfig se_config_for(const InstanceConfig& icfg, AdaptationRule::Kind theta1_mode,
                       Theta2Mode theta2_mode, int n_iters);

} // namespace avamp
