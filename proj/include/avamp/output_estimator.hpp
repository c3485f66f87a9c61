#pragma once
#include <Eigen/Dense>
#include <avamp/model.hpp>

namespace avamp {

struct OutputEstimate {
    Eigen::VectorXd xhat2;
    double eta2 = 0.0;   // inverse of (1/N) Tr(Q^-1)
    double alpha2 = 0.0; // gamma2 / eta2
};

// Transformed residual/noise quantities in the SVD basis.  q and xi need
// the truth and are test-harness material; z is computable from data.
struct TransformedResidual {
    Eigen::VectorXd q;   // V^T (r2 - x0), length N
    Eigen::VectorXd xi;  // U^T w zero-padded to length N
    Eigen::VectorXd z;   // S V^T r2 - U^T y, length M
};

struct BinnedSpectrumStats {
    Eigen::VectorXd bin_values; // a_l: within-bin mean of s^2
    Eigen::VectorXd mu0;        // bin masses, sum to 1
    Eigen::VectorXd mu1;        // mean of z^2 * indicator per bin
    int bins = 0;
};

struct MlTau2Theta2 {
    double tau2 = 0.0;
    double theta2 = 0.0;
    bool boundary_tau2 = false; // solution pinned at tau2 = 0
};

// LMMSE stage, diagonal in the V basis.  uty = U^T y (length M) may be
// cached by the caller; the convenience overload computes it.
OutputEstimate lmmse_estimate(const Eigen::VectorXd& uty, const Eigen::VectorXd& r2,
                              double gamma2, double theta2_hat, const SvdOperator& op);
OutputEstimate lmmse_estimate_y(const Eigen::VectorXd& y, const Eigen::VectorXd& r2,
                                double gamma2, double theta2_hat, const SvdOperator& op);

// EM noise-precision update: N / (||y - A xhat2||^2 + sum s^2/(theta2 s^2 + gamma2)).
double theta2_em_update(const Eigen::VectorXd& y, const Eigen::VectorXd& xhat2,
                        const SvdOperator& op, double gamma2, double theta2_hat);

double phi2(double q, double xi, double s, double gamma2, double theta2_hat);

// 1 / <phi2>, the statistic form of the EM update (truth-side vectors).
double theta2_update_via_phi2(const Eigen::VectorXd& q, const Eigen::VectorXd& xi,
                              const Eigen::VectorXd& s, double gamma2, double theta2_hat);

TransformedResidual transformed_residual(const Eigen::VectorXd& r2, const ProblemInstance& inst);

// z_n = s_n (V^T r2)_n - (U^T y)_n for the first M rows.
Eigen::VectorXd compute_z(const Eigen::VectorXd& r2, const Eigen::VectorXd& y,
                          const SvdOperator& op);

BinnedSpectrumStats bin_spectrum_stats(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                       int bins);

// ML estimate of (tau2, 1/theta2) from the binned objective
//   J = sum_l [ mu1_l/(a_l tau2 + 1/theta2) + mu0_l ln(a_l tau2 + 1/theta2) ].
MlTau2Theta2 ml_estimate_tau2_theta2(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                     int bins = 8);
MlTau2Theta2 ml_estimate_from_stats(const BinnedSpectrumStats& stats);

double ml_objective(const BinnedSpectrumStats& stats, double tau2, double noise_var);

} // namespace avamp
