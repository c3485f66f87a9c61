#include <avamp/model.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace avamp {

void BgParams::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::invalid_argument("BgParams: beta must lie in [0,1]");
    if (!(tau > 0.0))
        throw std::invalid_argument("BgParams: tau must be positive");
    if (!std::isfinite(mu))
        throw std::invalid_argument("BgParams: mu must be finite");
}

Eigen::MatrixXd haar_orthogonal(int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("haar_orthogonal: n must be >= 1");
    Eigen::MatrixXd g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            g(i, j) = rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd& r = qr.matrixQR();
    for (int j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

SingularSpectrum geometric_spectrum(int m, int n, double kappa) {
    if (m < 1 || m > n) throw std::invalid_argument("geometric_spectrum: need 1 <= m <= n");
    if (kappa < 1.0) throw std::invalid_argument("geometric_spectrum: kappa must be >= 1");

    SingularSpectrum spec;
    spec.values.resize(m);
    if (m == 1) {
        if (kappa != 1.0)
            throw std::invalid_argument("geometric_spectrum: m=1 requires kappa=1");
        spec.values(0) = std::sqrt(static_cast<double>(n));
    } else {
        const double alpha = std::pow(kappa, -1.0 / (m - 1));
        double sum_sq = 0.0;
        for (int i = 0; i < m; ++i) sum_sq += std::pow(alpha, 2.0 * i);
        const double s1 = std::sqrt(n / sum_sq);
        for (int i = 0; i < m; ++i) spec.values(i) = s1 * std::pow(alpha, i);
    }
    spec.kappa = spec.values(0) / spec.values(m - 1);
    spec.frobenius_sq = spec.values.squaredNorm();
    return spec;
}

SvdOperator assemble_operator(Eigen::MatrixXd u, const SingularSpectrum& spectrum,
                              Eigen::MatrixXd v) {
    const int m = static_cast<int>(u.rows());
    const int n = static_cast<int>(v.rows());
    if (u.cols() != m || v.cols() != n)
        throw std::invalid_argument("assemble_operator: U and V must be square");
    if (spectrum.values.size() > std::min(m, n))
        throw std::invalid_argument("assemble_operator: spectrum longer than min(M,N)");

    SvdOperator op;
    op.u = std::move(u);
    op.v = std::move(v);
    op.m_rows = m;
    op.s = Eigen::VectorXd::Zero(n);
    op.s.head(spectrum.values.size()) = spectrum.values;
    return op;
}

Eigen::VectorXd SvdOperator::apply(const Eigen::VectorXd& x) const {
    if (x.size() != cols()) throw std::invalid_argument("SvdOperator::apply: bad dimension");
    Eigen::VectorXd vtx = v.transpose() * x;
    Eigen::VectorXd svx = s.head(m_rows).cwiseProduct(vtx.head(m_rows));
    return u * svx;
}

Eigen::VectorXd SvdOperator::apply_adjoint(const Eigen::VectorXd& y) const {
    if (y.size() != rows()) throw std::invalid_argument("SvdOperator::apply_adjoint: bad dimension");
    Eigen::VectorXd uty = u.transpose() * y;
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(cols());
    padded.head(m_rows) = s.head(m_rows).cwiseProduct(uty);
    return v * padded;
}

Eigen::MatrixXd SvdOperator::dense() const {
    return u * (s.head(m_rows).asDiagonal() * v.leftCols(m_rows).transpose());
}

Eigen::VectorXd sample_bg_signal(const BgParams& theta1, int n, Rng& rng) {
    theta1.validate();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const double sd = std::sqrt(theta1.tau);
    for (int i = 0; i < n; ++i) {
        if (rng.uniform() < theta1.beta)
            x(i) = theta1.mu + sd * rng.gaussian();
    }
    return x;
}

double snr_to_noise_precision(double spectrum_sum_sq, int m_rows,
                              const BgParams& theta1, double snr_db) {
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("snr_to_noise_precision: snr_db must be finite");
    const double signal_power = theta1.second_moment() * spectrum_sum_sq;
    return std::pow(10.0, snr_db / 10.0) * m_rows / signal_power;
}

double snr_to_noise_precision(const SvdOperator& op, const BgParams& theta1,
                              double snr_db) {
    return snr_to_noise_precision(op.s.squaredNorm(), op.rows(), theta1, snr_db);
}

ProblemInstance synthesize_instance(const InstanceConfig& cfg, Rng& rng) {
    cfg.theta1.validate();
    ProblemInstance inst;
    Eigen::MatrixXd u = haar_orthogonal(cfg.m, rng);
    Eigen::MatrixXd v = haar_orthogonal(cfg.n, rng);
    SingularSpectrum spec = geometric_spectrum(cfg.m, cfg.n, cfg.kappa);
    inst.op = assemble_operator(std::move(u), spec, std::move(v));
    inst.theta1_true = cfg.theta1;
    inst.x0 = sample_bg_signal(cfg.theta1, cfg.n, rng);

    if (cfg.noiseless) {
        inst.theta2_true = std::numeric_limits<double>::infinity();
        inst.w = Eigen::VectorXd::Zero(cfg.m);
    } else {
        inst.theta2_true = snr_to_noise_precision(inst.op, cfg.theta1, cfg.snr_db);
        const double sd = 1.0 / std::sqrt(inst.theta2_true);
        inst.w.resize(cfg.m);
        for (int i = 0; i < cfg.m; ++i) inst.w(i) = sd * rng.gaussian();
    }
    inst.y = inst.op.apply(inst.x0) + inst.w;
    return inst;
}

} // namespace avamp
