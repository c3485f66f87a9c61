#include <avamp/denoiser.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace avamp {

namespace {
constexpr double kDerivFloor = 1e-11;
constexpr double kBetaFloor = 1e-12;
} // namespace

kernels::BgMoments bg_posterior_stats(double r, double gamma1, const BgParams& theta1) {
    if (!(gamma1 > 0.0)) throw std::invalid_argument("bg_posterior_stats: gamma1 must be positive");
    theta1.validate();
    return kernels::bg_component(r, gamma1, theta1);
}

DenoiseOutput bg_denoise(const Eigen::VectorXd& r, double gamma1, const BgParams& theta1) {
    if (!(gamma1 > 0.0)) throw std::invalid_argument("bg_denoise: gamma1 must be positive");
    const int n = static_cast<int>(r.size());
    DenoiseOutput out;
    out.xhat1.resize(n);
    const double postvar_sum =
        kernels::bg_denoise_pass(r.data(), out.xhat1.data(), n, gamma1, theta1);
    double deriv = gamma1 * postvar_sum / n;
    if (deriv <= kDerivFloor || deriv >= 1.0 - kDerivFloor) {
        out.deriv_clamped = true;
        deriv = std::clamp(deriv, kDerivFloor, 1.0 - kDerivFloor);
    }
    out.deriv_mean = deriv;
    out.eta1 = gamma1 / deriv;
    out.post_var_mean = deriv / gamma1;
    return out;
}

BgParams em_update_from_stats(double mean_pi, double mean_pim, double mean_pim2v,
                              const BgParams& theta1_old) {
    BgParams next = theta1_old;
    if (mean_pi < kBetaFloor) {
        // degenerate posterior: no active mass, keep (mu, tau)
        next.beta = kBetaFloor;
        return next;
    }
    next.beta = std::min(mean_pi, 1.0);
    next.mu = mean_pim / mean_pi;
    const double tau = (mean_pim2v - 2.0 * next.mu * mean_pim + next.mu * next.mu * mean_pi) / mean_pi;
    next.tau = std::max(tau, 1e-14);
    return next;
}

BgParams em_update_theta1(const Eigen::VectorXd& r, double gamma1, const BgParams& theta1_old) {
    if (!(gamma1 > 0.0)) throw std::invalid_argument("em_update_theta1: gamma1 must be positive");
    const int n = static_cast<int>(r.size());
    const kernels::BgSuffSums s = kernels::bg_suff_pass(r.data(), n, gamma1, theta1_old);
    return em_update_from_stats(s.pi / n, s.pim / n, s.pim2v / n, theta1_old);
}

AutoTuneResult auto_tune_theta1(const Eigen::VectorXd& r, double gamma_init,
                                const BgParams& theta1_init, const AutoTuneOptions& opts) {
    if (!(gamma_init > 0.0)) throw std::invalid_argument("auto_tune_theta1: gamma_init must be positive");
    const int n = static_cast<int>(r.size());
    double gamma = gamma_init;
    BgParams theta = theta1_init;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const DenoiseOutput d = bg_denoise(r, gamma, theta);
        const double resid = (d.xhat1 - r).squaredNorm() / n;
        double gamma_new = 1.0 / (resid + d.post_var_mean);
        if (!std::isfinite(gamma_new))
            throw std::runtime_error("auto_tune_theta1: non-finite gamma estimate");
        gamma_new = std::min(gamma_new, opts.gamma_max);
        theta = em_update_theta1(r, gamma, theta);
        const double delta = std::fabs(std::log(gamma_new) - std::log(gamma));
        gamma = gamma_new;
        if (delta < opts.log_gamma_tol) { ++it; break; }
    }
    return {gamma, theta, it};
}

BgParams grid_select_theta1(const Eigen::VectorXd& r, double gamma1,
                            const BgParams& theta1_hat,
                            const std::vector<BgParams>& candidates) {
    if (candidates.empty())
        throw std::invalid_argument("grid_select_theta1: empty candidate list");
    if (!(gamma1 > 0.0)) throw std::invalid_argument("grid_select_theta1: gamma1 must be positive");
    const int n = static_cast<int>(r.size());

    // Belief stats at the current estimate are shared between candidates.
    std::vector<kernels::BgMoments> stats(n);
    for (int i = 0; i < n; ++i) stats[i] = kernels::bg_component(r(i), gamma1, theta1_hat);

    // Expected complete-data log prior of candidate L:
    //   (1-pi) ln(1-beta_L) + pi [ln beta_L - 0.5 ln(2 pi tau_L)
    //                             - ((m-mu_L)^2 + v)/(2 tau_L)]
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const BgParams& cand = candidates[c];
        cand.validate();
        const double log_beta = std::log(std::max(cand.beta, kBetaFloor));
        const double log_one_minus = std::log(std::max(1.0 - cand.beta, kBetaFloor));
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const kernels::BgMoments& st = stats[i];
            const double d = st.m - cand.mu;
            acc += (1.0 - st.pi) * log_one_minus
                 + st.pi * (log_beta - 0.5 * std::log(2.0 * M_PI * cand.tau)
                            - (d * d + st.v) / (2.0 * cand.tau));
        }
        const double score = acc / n;
        if (score > best) {
            best = score;
            best_idx = c;
        }
    }
    return candidates[best_idx];
}

} // namespace avamp
