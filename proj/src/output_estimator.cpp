#include <avamp/output_estimator.hpp>

#include <avamp/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace avamp {

OutputEstimate lmmse_estimate(const Eigen::VectorXd& uty, const Eigen::VectorXd& r2,
                              double gamma2, double theta2_hat, const SvdOperator& op) {
    if (!(gamma2 > 0.0) || !(theta2_hat > 0.0))
        throw std::invalid_argument("lmmse_estimate: gamma2 and theta2_hat must be positive");
    const int n = op.cols();
    const int m = op.rows();
    if (uty.size() != m || r2.size() != n)
        throw std::invalid_argument("lmmse_estimate: bad dimensions");

    Eigen::VectorXd vtr2 = op.vt(r2);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b.head(m) = uty;
    Eigen::VectorXd xv(n);
    const double inv_sum = kernels::lmmse_combine_pass(b.data(), vtr2.data(), op.s.data(),
                                                       xv.data(), n, gamma2, theta2_hat);
    OutputEstimate out;
    out.xhat2 = op.v * xv;
    out.eta2 = n / inv_sum;
    out.alpha2 = gamma2 * inv_sum / n;
    return out;
}

OutputEstimate lmmse_estimate_y(const Eigen::VectorXd& y, const Eigen::VectorXd& r2,
                                double gamma2, double theta2_hat, const SvdOperator& op) {
    return lmmse_estimate(op.ut(y), r2, gamma2, theta2_hat, op);
}

double theta2_em_update(const Eigen::VectorXd& y, const Eigen::VectorXd& xhat2,
                        const SvdOperator& op, double gamma2, double theta2_hat) {
    const int n = op.cols();
    // normalized by the number of rows actually carrying noise: with
    // M < N the padded rows contribute nothing to the residual, and an
    // N-normalization would leave the estimate inconsistent
    const double resid = (y - op.apply(xhat2)).squaredNorm();
    double trace = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s2 = op.s(i) * op.s(i);
        trace += s2 / (theta2_hat * s2 + gamma2);
    }
    const double theta_new = op.rows() / (resid + trace);
    if (!std::isfinite(theta_new))
        throw std::runtime_error("theta2_em_update: non-finite update");
    return theta_new;
}

double phi2(double q, double xi, double s, double gamma2, double theta2_hat) {
    const double d = s * s * theta2_hat + gamma2;
    const double e = s * q - xi;
    return gamma2 * gamma2 * e * e / (d * d) + s * s / d;
}

double theta2_update_via_phi2(const Eigen::VectorXd& q, const Eigen::VectorXd& xi,
                              const Eigen::VectorXd& s, double gamma2, double theta2_hat) {
    const int n = static_cast<int>(q.size());
    if (xi.size() != n || s.size() != n)
        throw std::invalid_argument("theta2_update_via_phi2: length mismatch");
    const double mean = kernels::phi2_mean_pass(q.data(), xi.data(), s.data(), n,
                                                gamma2, theta2_hat);
    return 1.0 / mean;
}

TransformedResidual transformed_residual(const Eigen::VectorXd& r2, const ProblemInstance& inst) {
    TransformedResidual t;
    t.q = inst.op.vt(r2 - inst.x0);
    t.xi = Eigen::VectorXd::Zero(inst.op.cols());
    t.xi.head(inst.op.rows()) = inst.op.ut(inst.w);
    t.z = compute_z(r2, inst.y, inst.op);
    return t;
}

Eigen::VectorXd compute_z(const Eigen::VectorXd& r2, const Eigen::VectorXd& y,
                          const SvdOperator& op) {
    const int m = op.rows();
    Eigen::VectorXd vtr2 = op.vt(r2);
    Eigen::VectorXd uty = op.ut(y);
    return op.s.head(m).cwiseProduct(vtr2.head(m)) - uty;
}

BinnedSpectrumStats bin_spectrum_stats(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                       int bins) {
    const int n = static_cast<int>(z.size());
    if (s.size() != n) throw std::invalid_argument("bin_spectrum_stats: length mismatch");
    if (bins < 1) throw std::invalid_argument("bin_spectrum_stats: bins must be >= 1");
    bins = std::min(bins, n);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return s(a) * s(a) < s(b) * s(b); });

    struct Bin { double a_sum = 0, z2_sum = 0; int count = 0; };
    std::vector<Bin> raw(bins);
    for (int rank = 0; rank < n; ++rank) {
        const int b = static_cast<int>(static_cast<long long>(rank) * bins / n);
        const int i = order[rank];
        raw[b].a_sum += s(i) * s(i);
        raw[b].z2_sum += z(i) * z(i);
        raw[b].count += 1;
    }
    // merge adjacent bins with (numerically) equal a, e.g. a constant spectrum
    std::vector<Bin> merged;
    for (const Bin& b : raw) {
        if (b.count == 0) continue;
        if (!merged.empty()) {
            const double a_prev = merged.back().a_sum / merged.back().count;
            const double a_cur = b.a_sum / b.count;
            if (std::fabs(a_cur - a_prev) <= 1e-12 * std::max(1.0, std::fabs(a_prev))) {
                merged.back().a_sum += b.a_sum;
                merged.back().z2_sum += b.z2_sum;
                merged.back().count += b.count;
                continue;
            }
        }
        merged.push_back(b);
    }

    BinnedSpectrumStats out;
    out.bins = static_cast<int>(merged.size());
    out.bin_values.resize(out.bins);
    out.mu0.resize(out.bins);
    out.mu1.resize(out.bins);
    for (int b = 0; b < out.bins; ++b) {
        out.bin_values(b) = merged[b].a_sum / merged[b].count;
        out.mu0(b) = static_cast<double>(merged[b].count) / n;
        out.mu1(b) = merged[b].z2_sum / n;
    }
    return out;
}

double ml_objective(const BinnedSpectrumStats& stats, double tau2, double noise_var) {
    double j = 0.0;
    for (int b = 0; b < stats.bins; ++b) {
        const double d = stats.bin_values(b) * tau2 + noise_var;
        j += stats.mu1(b) / d + stats.mu0(b) * std::log(d);
    }
    return j;
}

namespace {

struct Deriv {
    double g_tau, g_v;
    double h_tt, h_tv, h_vv;
};

Deriv ml_derivs(const BinnedSpectrumStats& st, double tau, double v) {
    Deriv d{0, 0, 0, 0, 0};
    for (int b = 0; b < st.bins; ++b) {
        const double a = st.bin_values(b);
        const double mu0 = st.mu0(b);
        const double mu1 = st.mu1(b);
        const double dd = a * tau + v;
        const double g = (mu0 * dd - mu1) / (dd * dd);
        const double h = (2.0 * mu1 - mu0 * dd) / (dd * dd * dd);
        d.g_tau += a * g;
        d.g_v += g;
        d.h_tt += a * a * h;
        d.h_tv += a * h;
        d.h_vv += h;
    }
    return d;
}

} // namespace

MlTau2Theta2 ml_estimate_from_stats(const BinnedSpectrumStats& stats) {
    if (stats.bins < 2)
        throw std::runtime_error(
            "ml_estimate_tau2_theta2: squared singular values are constant, "
            "(tau2, theta2) not identifiable");

    const int lo = 0;                // smallest a
    const int hi = stats.bins - 1;   // largest a
    const double a_lo = stats.bin_values(lo), a_hi = stats.bin_values(hi);
    const double c_lo = stats.mu1(lo) / stats.mu0(lo);
    const double c_hi = stats.mu1(hi) / stats.mu0(hi);

    // moment-matched start from the extreme bins
    constexpr double kFloor = 1e-14;
    double tau = std::max((c_hi - c_lo) / (a_hi - a_lo), kFloor);
    double v = std::max(c_lo - a_lo * tau, kFloor);

    // damped Newton on (log tau2, log 1/theta2)
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const Deriv d = ml_derivs(stats, tau, v);
        const double gu = tau * d.g_tau;
        const double gw = v * d.g_v;
        if (std::sqrt(gu * gu + gw * gw) < 1e-13) { converged = true; break; }

        double huu = tau * tau * d.h_tt + gu;
        double huw = tau * v * d.h_tv;
        double hww = v * v * d.h_vv + gw;
        double du, dw;
        const double det = huu * hww - huw * huw;
        if (det > 0.0 && huu > 0.0) {
            du = -(hww * gu - huw * gw) / det;
            dw = -(huu * gw - huw * gu) / det;
        } else {
            du = -gu;
            dw = -gw;
        }
        const double j0 = ml_objective(stats, tau, v);
        double step = 1.0;
        bool improved = false;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
            const double t_try = tau * std::exp(step * du);
            const double v_try = v * std::exp(step * dw);
            if (ml_objective(stats, t_try, v_try) < j0) {
                tau = t_try;
                v = v_try;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    if (!converged) {
        // log-grid fallback around the moment start, then re-polish
        const double t0 = std::max((c_hi - c_lo) / (a_hi - a_lo), kFloor);
        const double v0 = std::max(c_lo - a_lo * t0, kFloor);
        double best_j = ml_objective(stats, tau, v);
        for (int i = 0; i < 64; ++i) {
            for (int j = 0; j < 64; ++j) {
                const double t_try = t0 * std::pow(10.0, -6.0 + 12.0 * i / 63.0);
                const double v_try = v0 * std::pow(10.0, -6.0 + 12.0 * j / 63.0);
                const double jj = ml_objective(stats, t_try, v_try);
                if (jj < best_j) { best_j = jj; tau = t_try; v = v_try; }
            }
        }
        for (int it = 0; it < 100; ++it) {
            const Deriv d = ml_derivs(stats, tau, v);
            const double gu = tau * d.g_tau, gw = v * d.g_v;
            if (std::sqrt(gu * gu + gw * gw) < 1e-13) break;
            const double j0 = ml_objective(stats, tau, v);
            double step = 1.0;
            bool improved = false;
            for (int h = 0; h < 40; ++h, step *= 0.5) {
                const double t_try = tau * std::exp(-step * gu);
                const double v_try = v * std::exp(-step * gw);
                if (ml_objective(stats, t_try, v_try) < j0) {
                    tau = t_try; v = v_try; improved = true; break;
                }
            }
            if (!improved) break;
        }
    }

    MlTau2Theta2 out;
    // tau2 = 0 boundary: J(0, v) is minimized at v = sum mu1
    const double v_boundary = stats.mu1.sum() / stats.mu0.sum();
    const double j_int = ml_objective(stats, tau, v);
    if (ml_objective(stats, 0.0, v_boundary) <= j_int + 1e-9 * std::fabs(j_int)) {
        out.tau2 = 0.0;
        out.theta2 = 1.0 / v_boundary;
        out.boundary_tau2 = true;
    } else {
        out.tau2 = tau;
        out.theta2 = 1.0 / v;
    }
    return out;
}

MlTau2Theta2 ml_estimate_tau2_theta2(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                     int bins) {
    return ml_estimate_from_stats(bin_spectrum_stats(z, s, bins));
}

} // namespace avamp
