#include <avamp/vamp.hpp>

#include <cmath>
#include <stdexcept>

namespace avamp {

void VampConfig::validate() const {
    if (n_iters < 1) throw std::invalid_argument("VampConfig: n_iters must be >= 1");
    if (!(damping_rho > 0.0 && damping_rho <= 1.0))
        throw std::invalid_argument("VampConfig: damping_rho must lie in (0,1]");
    if (!(gamma_min > 0.0 && gamma_min < gamma_max))
        throw std::invalid_argument("VampConfig: need 0 < gamma_min < gamma_max");
    if (theta1_rule.kind == AdaptationRule::Kind::FiniteGrid && theta1_rule.candidates.empty())
        throw std::invalid_argument("VampConfig: FiniteGrid needs candidates");
}

double nmse_db(const Eigen::VectorXd& xhat, const Eigen::VectorXd& x0) {
    const double denom = x0.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("nmse_db: zero reference signal");
    const double ratio = (xhat - x0).squaredNorm() / denom;
    if (ratio <= 0.0) return -320.0;
    return std::max(10.0 * std::log10(ratio), -320.0);
}

VampState init_state(const ProblemInstance& inst, const VampConfig& cfg) {
    cfg.validate();
    const int n = inst.op.cols();
    const int m = inst.op.rows();
    VampState st;
    st.r1 = Eigen::VectorXd::Zero(n);
    st.r2 = Eigen::VectorXd::Zero(n);
    st.xhat1 = Eigen::VectorXd::Zero(n);
    st.xhat2 = Eigen::VectorXd::Zero(n);

    const bool oracle1 = cfg.theta1_rule.kind == AdaptationRule::Kind::Oracle;
    if (oracle1) {
        st.theta1_hat = inst.theta1_true;
    } else if (cfg.theta1_rule.kind == AdaptationRule::Kind::FiniteGrid) {
        st.theta1_hat = cfg.theta1_rule.candidates.front();
    } else {
        // beta = (M/2)/N, tau = ||y||^2 / (||A||_F^2 beta), mu = 0
        st.theta1_hat.beta = 0.5 * m / n;
        st.theta1_hat.mu = 0.0;
        st.theta1_hat.tau = inst.y.squaredNorm() / (inst.op.s.squaredNorm() * st.theta1_hat.beta);
    }
    if (cfg.theta2_mode == Theta2Mode::Oracle) {
        st.theta2_hat = inst.theta2_true;
    } else {
        st.theta2_hat = m / inst.y.squaredNorm();
    }
    st.gamma1 = cfg.gamma10 > 0.0
                    ? cfg.gamma10
                    : VampConfig::kGamma10Rel / st.theta1_hat.second_moment();
    st.gamma1 = std::clamp(st.gamma1, cfg.gamma_min, cfg.gamma_max);
    st.gamma2 = 0.0;
    st.iter = 0;
    return st;
}

namespace {

double damp_log(double fresh, double prev, double rho) {
    if (rho >= 1.0) return fresh;
    return std::exp(rho * std::log(fresh) + (1.0 - rho) * std::log(prev));
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

} // namespace

TraceRecord step(VampState& state, const ProblemInstance& inst, const VampConfig& cfg,
                 const Eigen::VectorXd& uty) {
    TraceRecord rec;
    rec.iter = state.iter;
    const bool have_prev = state.iter > 0;
    const double rho = cfg.damping_rho;
    const Eigen::VectorXd r1_in = state.r1;
    const double gamma1_in = state.gamma1;
    double gamma1_used = state.gamma1;

    try {
        // Auto-tuning replaces the predicted gamma1 and the line-9 update.
        // Skipped on the first sweep: r1 = 0 carries no data yet and the
        // scalar-channel fit would send gamma1 to the clamp.
        if (cfg.theta1_rule.kind == AdaptationRule::Kind::AutoTune && state.iter > 0) {
            const AutoTuneResult at =
                auto_tune_theta1(state.r1, state.gamma1, state.theta1_hat, cfg.autotune);
            state.gamma1 = std::clamp(at.gamma1, cfg.gamma_min, cfg.gamma_max);
            state.theta1_hat = at.theta1;
        }
        gamma1_used = state.gamma1;

        // input denoising
        const DenoiseOutput den = bg_denoise(state.r1, state.gamma1, state.theta1_hat);
        state.xhat1 = den.xhat1;
        state.eta1 = den.eta1;
        rec.deriv_clamped = den.deriv_clamped;

        double gamma2_new = state.eta1 - state.gamma1;
        if (gamma2_new < cfg.gamma_min) {
            gamma2_new = cfg.gamma_min;
            rec.clamped = true;
        }
        Eigen::VectorXd r2_new = (state.eta1 * state.xhat1 - state.gamma1 * state.r1) / gamma2_new;
        if (have_prev && rho < 1.0) {
            gamma2_new = damp_log(gamma2_new, state.gamma2, rho);
            r2_new = rho * r2_new + (1.0 - rho) * state.r2;
        }
        state.gamma2 = std::clamp(gamma2_new, cfg.gamma_min, cfg.gamma_max);
        state.r2 = std::move(r2_new);

        // input parameter update
        switch (cfg.theta1_rule.kind) {
        case AdaptationRule::Kind::EmClosedForm:
            state.theta1_hat = em_update_theta1(state.r1, state.gamma1, state.theta1_hat);
            break;
        case AdaptationRule::Kind::FiniteGrid:
            // discrete selection latches if scored on the empty first sweep
            if (state.iter > 0)
                state.theta1_hat = grid_select_theta1(state.r1, state.gamma1,
                                                      state.theta1_hat,
                                                      cfg.theta1_rule.candidates);
            break;
        default:
            break; // Oracle keeps truth, AutoTune already updated
        }

        // ML-binned output adaptation supplies both theta2 and the precision
        // used by the LMMSE stage
        if (cfg.theta2_mode == Theta2Mode::MlBinned) {
            const int m = inst.op.rows();
            const Eigen::VectorXd z = compute_z(state.r2, inst.y, inst.op);
            const MlTau2Theta2 est = ml_estimate_tau2_theta2(z, inst.op.s.head(m), cfg.ml_bins);
            state.theta2_hat = est.theta2;
            const double g2 = est.tau2 > 0.0 ? 1.0 / est.tau2 : cfg.gamma_max;
            state.gamma2 = std::clamp(g2, cfg.gamma_min, cfg.gamma_max);
        }

        // output estimation
        const OutputEstimate oe =
            lmmse_estimate(uty, state.r2, state.gamma2, state.theta2_hat, inst.op);
        state.xhat2 = oe.xhat2;
        state.eta2 = oe.eta2;

        double gamma1_new = state.eta2 - state.gamma2;
        if (gamma1_new < cfg.gamma_min) {
            gamma1_new = cfg.gamma_min;
            rec.clamped = true;
        }
        Eigen::VectorXd r1_new = (state.eta2 * state.xhat2 - state.gamma2 * state.r2) / gamma1_new;
        if (have_prev && rho < 1.0) {
            gamma1_new = damp_log(gamma1_new, gamma1_in, rho);
            r1_new = rho * r1_new + (1.0 - rho) * r1_in;
        }
        state.gamma1 = std::clamp(gamma1_new, cfg.gamma_min, cfg.gamma_max);
        state.r1 = std::move(r1_new);

        // output parameter update
        if (cfg.theta2_mode == Theta2Mode::EmLine18) {
            state.theta2_hat =
                theta2_em_update(inst.y, state.xhat2, inst.op, state.gamma2, state.theta2_hat);
        }

        if (!all_finite(state.r1) || !all_finite(state.r2) || !std::isfinite(state.gamma1) ||
            !std::isfinite(state.gamma2) || !std::isfinite(state.theta2_hat)) {
            rec.failed = true;
        }
    } catch (const std::runtime_error&) {
        rec.failed = true;
    }

    rec.gamma1 = gamma1_used;
    rec.eta1 = state.eta1;
    rec.gamma2 = state.gamma2;
    rec.eta2 = state.eta2;
    rec.theta1_hat = state.theta1_hat;
    rec.theta2_hat = state.theta2_hat;
    if (!rec.failed) {
        rec.nmse1_db = nmse_db(state.xhat1, inst.x0);
        rec.nmse2_db = nmse_db(state.xhat2, inst.x0);
        if (cfg.record_se_inputs) {
            rec.q2_mean = inst.op.vt(state.r2 - inst.x0).squaredNorm() / inst.op.cols();
            rec.p2_mean = (r1_in - inst.x0).squaredNorm() / inst.op.cols();
        }
    }
    ++state.iter;
    return rec;
}

RunResult run(const ProblemInstance& inst, const VampConfig& cfg) {
    cfg.validate();
    RunResult res;
    VampState st = init_state(inst, cfg);
    const Eigen::VectorXd uty = inst.op.ut(inst.y);
    res.trace.reserve(cfg.n_iters);
    for (int k = 0; k < cfg.n_iters; ++k) {
        TraceRecord rec = step(st, inst, cfg, uty);
        const bool failed = rec.failed;
        res.trace.push_back(std::move(rec));
        if (failed) {
            res.failed = true;
            break;
        }
    }
    res.final_state = std::move(st);
    return res;
}

} // namespace avamp
