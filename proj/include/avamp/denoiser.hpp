#pragma once
#include <Eigen/Dense>
#include <avamp/kernels.hpp>
#include <avamp/model.hpp>
#include <vector>

namespace avamp {

struct DenoiseOutput {
    Eigen::VectorXd xhat1;     // posterior means
    double deriv_mean = 0.0;   // <g1'>, clamped into (0,1)
    double eta1 = 0.0;         // gamma1 / deriv_mean
    double post_var_mean = 0.0;
    bool deriv_clamped = false;
};

// How theta1 is updated between iterations.
struct AdaptationRule {
    enum class Kind { Oracle, EmClosedForm, AutoTune, FiniteGrid };
    Kind kind = Kind::Oracle;
    std::vector<BgParams> candidates;  // FiniteGrid only
};

struct AutoTuneOptions {
    double log_gamma_tol = 1e-8;
    int max_iters = 50;
    double gamma_max = 1e11;
};

struct AutoTuneResult {
    double gamma1;
    BgParams theta1;
    int iters;
};

// Posterior stats of one component under the spike-and-slab belief.
kernels::BgMoments bg_posterior_stats(double r, double gamma1, const BgParams& theta1);

DenoiseOutput bg_denoise(const Eigen::VectorXd& r, double gamma1, const BgParams& theta1);

// Closed-form BG M-step from posterior stats at the old parameters.
BgParams em_update_theta1(const Eigen::VectorXd& r, double gamma1, const BgParams& theta1_old);
BgParams em_update_from_stats(double mean_pi, double mean_pim, double mean_pim2v,
                              const BgParams& theta1_old);

// Joint ML approximation of (1/tau1, theta1) by inner EM.
AutoTuneResult auto_tune_theta1(const Eigen::VectorXd& r, double gamma_init,
                                const BgParams& theta1_init, const AutoTuneOptions& opts = {});

// Expected complete-data log prior of each candidate under the current
// belief; argmax wins, ties broken by lowest index.
BgParams grid_select_theta1(const Eigen::VectorXd& r, double gamma1,
                            const BgParams& theta1_hat,
                            const std::vector<BgParams>& candidates);

} // namespace avamp
