#pragma once
#include <Eigen/Dense>
#include <avamp/denoiser.hpp>
#include <avamp/model.hpp>
#include <avamp/output_estimator.hpp>
#include <vector>

namespace avamp {

enum class Theta2Mode { Oracle, EmLine18, MlBinned };

struct VampConfig {
    int n_iters = 40;
    AdaptationRule theta1_rule;
    Theta2Mode theta2_mode = Theta2Mode::Oracle;
    double damping_rho = 1.0;     // 1 = undamped
    double gamma_min = 1e-11;
    double gamma_max = 1e11;
    // init: gamma10 <= 0 means kGamma10Rel / E[x^2] under the initial
    // theta1.  r10 = 0 carries no information, so the default starts the
    // first sweep from a vanishing precision: the denoiser returns the
    // prior mean and the first LMMSE pass is regularized by the prior
    // second moment, instead of the overconfident spike a unit-scale
    // gamma10 produces.
    static constexpr double kGamma10Rel = 1e-8;
    double gamma10 = -1.0;
    bool record_se_inputs = false;
    int ml_bins = 8;
    AutoTuneOptions autotune;

    void validate() const;
};

struct VampState {
    Eigen::VectorXd r1, r2, xhat1, xhat2;
    double gamma1 = 0, gamma2 = 0, eta1 = 0, eta2 = 0;
    BgParams theta1_hat;
    double theta2_hat = 0;
    int iter = 0;
};

struct TraceRecord {
    int iter = 0;
    double gamma1 = 0, eta1 = 0, gamma2 = 0, eta2 = 0;
    BgParams theta1_hat;
    double theta2_hat = 0;
    double nmse1_db = 0, nmse2_db = 0;
    double q2_mean = 0;   // <(V^T(r2-x0))^2>, only when record_se_inputs
    double p2_mean = 0;   // <(r1-x0)^2>
    bool clamped = false;
    bool deriv_clamped = false;
    bool failed = false;
};

struct RunResult {
    std::vector<TraceRecord> trace;
    VampState final_state;
    bool failed = false;
};

double nmse_db(const Eigen::VectorXd& xhat, const Eigen::VectorXd& x0);

VampState init_state(const ProblemInstance& inst, const VampConfig& cfg);

// One full Algorithm-1 sweep (denoise / r2 / theta1 / LMMSE / r1 / theta2).
TraceRecord step(VampState& state, const ProblemInstance& inst, const VampConfig& cfg,
                 const Eigen::VectorXd& uty);

RunResult run(const ProblemInstance& inst, const VampConfig& cfg);

} // namespace avamp
