#pragma once
#include <Eigen/Dense>
#include <avamp/rng.hpp>

namespace avamp {

// Bernoulli-Gaussian prior: (1-beta)*delta(x) + beta*N(x; mu, tau).
struct BgParams {
    double beta = 0.1;  // sparsity rate, in (0,1]
    double mu = 0.0;    // active mean
    double tau = 1.0;   // active variance, > 0

    // second moment E[x^2] = beta*(mu^2 + tau)
    double second_moment() const { return beta * (mu * mu + tau); }
    void validate() const;
};

// Singular values of A, descending, normalized so that sum s^2 = N.
struct SingularSpectrum {
    Eigen::VectorXd values;  // length min(M,N), descending positive
    double kappa = 1.0;      // values[0] / values[last]
    double frobenius_sq = 0; // sum of squares
};

// A = U * Diag(s) * V^T held in factored form.  A is M x N with M <= N;
// U is the M x M orthogonal block (rows beyond M never carry measurements),
// V is N x N, and s is zero-padded to length N so that Q_k is diagonal in
// the V basis.
struct SvdOperator {
    Eigen::MatrixXd u;  // M x M orthogonal
    Eigen::MatrixXd v;  // N x N orthogonal
    Eigen::VectorXd s;  // length N, s[n] = 0 for n >= min(M,N)
    int m_rows = 0;

    int rows() const { return m_rows; }
    int cols() const { return static_cast<int>(v.rows()); }

    // y = A x, length M
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    // A^T y, length N
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const;
    // U^T y, length M
    Eigen::VectorXd ut(const Eigen::VectorXd& y) const { return u.transpose() * y; }
    // V^T x, length N
    Eigen::VectorXd vt(const Eigen::VectorXd& x) const { return v.transpose() * x; }

    // dense M x N matrix (test/oracle use)
    Eigen::MatrixXd dense() const;
};

// Full synthetic truth for one trial.
struct ProblemInstance {
    SvdOperator op;
    Eigen::VectorXd x0;       // length N
    Eigen::VectorXd w;        // length M
    Eigen::VectorXd y;        // length M, y = A x0 + w by construction
    BgParams theta1_true;
    double theta2_true = 0;   // noise precision
};

struct InstanceConfig {
    int m = 512;
    int n = 1024;
    double kappa = 100.0;
    double snr_db = 40.0;
    BgParams theta1;
    bool noiseless = false;
};

// Q from QR of an i.i.d. standard Gaussian matrix, columns sign-corrected
// by the diagonal of R so the law is exactly Haar.
Eigen::MatrixXd haar_orthogonal(int n, Rng& rng);

// s_i = s_1 * alpha^(i-1) with alpha = kappa^(-1/(m-1)) and s_1 set so
// that sum s_i^2 = n.
SingularSpectrum geometric_spectrum(int m, int n, double kappa);

SvdOperator assemble_operator(Eigen::MatrixXd u, const SingularSpectrum& spectrum,
                              Eigen::MatrixXd v);

Eigen::VectorXd sample_bg_signal(const BgParams& theta1, int n, Rng& rng);

// theta2 = 10^(snr_db/10) * M / E||A x0||^2 with E||A x0||^2 = E[x^2] * sum s^2.
double snr_to_noise_precision(const SvdOperator& op, const BgParams& theta1,
                              double snr_db);
double snr_to_noise_precision(double spectrum_sum_sq, int m_rows,
                              const BgParams& theta1, double snr_db);

ProblemInstance synthesize_instance(const InstanceConfig& cfg, Rng& rng);

} // namespace avamp
