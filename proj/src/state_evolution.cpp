#include <avamp/state_evolution.hpp>

#include <avamp/kernels.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace avamp {

namespace {

constexpr double kGlNode[8] = {
    -0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498,  0.1834346424956498,  0.5255324099163290,
     0.7966664774136267,  0.9602898564975362};
constexpr double kGlWeight[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

// Locally refined region around a sharp feature of the integrand.
struct Zone {
    double center;
    double width;
};

// Roots of the responsibility log odds (a quadratic in r), with the
// local transition widths 1 / |dL/dr|.  In the transient, gamma1 can be
// far larger than 1/tau1 and these transitions are much narrower than
// the spread of the pseudo-data, so a fixed-order Gauss rule misses
// them; the composite rule below refines its panels around them.
std::vector<Zone> pi_transition_zones(double gamma1, const BgParams& t) {
    std::vector<Zone> zones;
    if (t.beta <= 0.0 || t.beta >= 1.0) return zones;
    const double vt = t.tau + 1.0 / gamma1;
    const double a = 0.5 * gamma1 * gamma1 * t.tau / (1.0 + gamma1 * t.tau);
    const double b = t.mu / vt;
    const double c = std::log(t.beta) - std::log1p(-t.beta)
        - 0.5 * std::log1p(gamma1 * t.tau) - 0.5 * t.mu * t.mu / vt;
    const double disc = b * b - 4.0 * a * c;
    if (!(disc > 0.0) || !(a > 0.0)) return zones;
    const double sq = std::sqrt(disc);
    for (const double root : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        const double slope = std::fabs(2.0 * a * root + b);
        if (slope > 0.0) zones.push_back({root, 1.0 / slope});
    }
    return zones;
}

using Arr5 = std::array<double, 5>;

// Integral of f(t) N(t; mean, sd^2) dt by composite 8-point
// Gauss-Legendre: coarse panels of about one sd, refined to the zone
// width inside each zone.  `scale` shrinks all panels (refinement
// control); panel counts are capped per segment.
template <class F>
Arr5 gauss_expect5(double mean, double sd, const std::vector<Zone>& zones,
                   double scale, F&& f) {
    const double lo0 = mean - 8.5 * sd;
    const double hi0 = mean + 8.5 * sd;
    const double var = sd * sd;
    std::vector<double> bp{lo0, hi0};
    for (const Zone& z : zones) {
        bp.push_back(std::clamp(z.center - 8.0 * z.width, lo0, hi0));
        bp.push_back(std::clamp(z.center + 8.0 * z.width, lo0, hi0));
    }
    std::sort(bp.begin(), bp.end());

    Arr5 acc{};
    const double coarse = sd * scale;
    for (std::size_t seg = 0; seg + 1 < bp.size(); ++seg) {
        const double a = bp[seg], b = bp[seg + 1];
        if (!(b > a)) continue;
        double step = coarse;
        const double mid = 0.5 * (a + b);
        for (const Zone& z : zones)
            if (std::fabs(mid - z.center) < 8.0 * z.width)
                step = std::min(step, z.width * scale);
        step = std::max(step, (b - a) / 4096.0);
        const int npanel = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
        const double h = (b - a) / npanel;
        for (int p = 0; p < npanel; ++p) {
            const double pa = a + p * h;
            for (int i = 0; i < 8; ++i) {
                const double t = pa + 0.5 * h * (1.0 + kGlNode[i]);
                const double w =
                    0.5 * h * kGlWeight[i] * std::exp(kernels::log_normal_pdf(t, mean, var));
                const Arr5 v = f(t);
                for (int j = 0; j < 5; ++j) acc[j] += w * v[j];
            }
        }
    }
    return acc;
}

// (e1, a1, pi, pim, pim2v) contributions at one (x0, r) point.
inline Arr5 input_point(double x0, double r, double gamma1, const BgParams& hat) {
    const kernels::BgMoments c = kernels::bg_component(r, gamma1, hat);
    const double g = c.pi * c.m;
    const double e = g - x0;
    return {e * e, gamma1 * kernels::bg_posterior_variance(c), c.pi, g,
            c.pi * (c.m * c.m + c.v)};
}

struct InputStats {
    double e1, a1, pi, pim, pim2v;
};

// E[pointf(X0, R)] under R = X0 + N(0, tau1), X0 ~ BG(theta1_true),
// with panel refinement driven by the belief's transition zones.
template <class PF>
Arr5 expect_model5(double gamma1, double tau1, const BgParams& hat, const BgParams& tt,
                   int order, PF&& pointf) {
    if (!(gamma1 > 0.0) || tau1 < 0.0)
        throw std::invalid_argument("expect_model5: need gamma1 > 0 and tau1 >= 0");
    const double scale = 40.0 / std::max(order, 2);
    const std::vector<Zone> rzones = pi_transition_zones(gamma1, hat);
    const double sd_p = tau1 > 0.0 ? std::sqrt(tau1) : 0.0;

    auto inner = [&](double x) -> Arr5 {
        if (sd_p == 0.0) return pointf(x, x);
        return gauss_expect5(x, sd_p, rzones, scale,
                             [&](double r) { return pointf(x, r); });
    };

    Arr5 acc{};
    if (tt.beta < 1.0) {
        const Arr5 sp = inner(0.0);
        for (int j = 0; j < 5; ++j) acc[j] += (1.0 - tt.beta) * sp[j];
    }
    if (tt.beta > 0.0) {
        // the inner average smooths features to width max(sd_p, zone width)
        std::vector<Zone> xzones;
        for (const Zone& z : rzones)
            xzones.push_back({z.center, std::max(z.width, sd_p)});
        const Arr5 act = gauss_expect5(tt.mu, std::sqrt(tt.tau), xzones, scale, inner);
        for (int j = 0; j < 5; ++j) acc[j] += tt.beta * act[j];
    }
    return acc;
}

// Joint (E1, A1, mu1) with the denoiser belief (gamma1, theta1_hat).
InputStats input_stats(double gamma1, double tau1, const BgParams& hat,
                       const BgParams& tt, int order) {
    const Arr5 acc = expect_model5(gamma1, tau1, hat, tt, order, [&](double x0, double r) {
        return input_point(x0, r, gamma1, hat);
    });
    return {acc[0], acc[1], acc[2], acc[3], acc[4]};
}

} // namespace

double error_fn_e1(double gamma1, double tau1, const BgParams& theta1_hat,
                   const BgParams& theta1_true, const GaussHermite& quad) {
    return input_stats(gamma1, tau1, theta1_hat, theta1_true,
                       static_cast<int>(quad.nodes.size())).e1;
}

double sens_a1(double gamma1, double tau1, const BgParams& theta1_hat,
               const BgParams& theta1_true, const GaussHermite& quad) {
    return input_stats(gamma1, tau1, theta1_hat, theta1_true,
                       static_cast<int>(quad.nodes.size())).a1;
}

SeMu1 se_mu1(double gamma1, double tau1, const BgParams& theta1_hat,
             const BgParams& theta1_true, const GaussHermite& quad) {
    const InputStats st = input_stats(gamma1, tau1, theta1_hat, theta1_true,
                                      static_cast<int>(quad.nodes.size()));
    return SeMu1{st.pi, st.pim, st.pim2v};
}

double error_fn_e2(double gamma2, double tau2, double theta2_hat,
                   const Eigen::VectorXd& spectrum, double theta2_true) {
    double acc = 0.0;
    const int n = static_cast<int>(spectrum.size());
    for (int i = 0; i < n; ++i) {
        const double s2 = spectrum(i) * spectrum(i);
        const double d = theta2_hat * s2 + gamma2;
        acc += (theta2_hat * theta2_hat * s2 / theta2_true + gamma2 * gamma2 * tau2) / (d * d);
    }
    return acc / n;
}

double sens_a2(double gamma2, double theta2_hat, const Eigen::VectorXd& spectrum) {
    double acc = 0.0;
    const int n = static_cast<int>(spectrum.size());
    for (int i = 0; i < n; ++i) {
        const double s2 = spectrum(i) * spectrum(i);
        acc += gamma2 / (theta2_hat * s2 + gamma2);
    }
    return acc / n;
}

double se_mu2(double gamma2, double tau2, double theta2_hat,
              const Eigen::VectorXd& spectrum, double theta2_true) {
    double acc = 0.0;
    const int n = static_cast<int>(spectrum.size());
    for (int i = 0; i < n; ++i) {
        const double s2 = spectrum(i) * spectrum(i);
        const double d = theta2_hat * s2 + gamma2;
        acc += gamma2 * gamma2 * (s2 * tau2 + 1.0 / theta2_true) / (d * d) + s2 / d;
    }
    return acc / n;
}

namespace {

BgParams se_grid_select(double gamma1, double tau1, const BgParams& theta1_hat,
                        const BgParams& theta1_true, int order,
                        const std::vector<BgParams>& candidates) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const BgParams& cand = candidates[c];
        const double log_beta = std::log(std::max(cand.beta, 1e-12));
        const double log_one_minus = std::log(std::max(1.0 - cand.beta, 1e-12));
        const Arr5 acc = expect_model5(
            gamma1, tau1, theta1_hat, theta1_true, order, [&](double, double r) {
                const kernels::BgMoments st = kernels::bg_component(r, gamma1, theta1_hat);
                const double d = st.m - cand.mu;
                const double v = (1.0 - st.pi) * log_one_minus
                    + st.pi * (log_beta - 0.5 * std::log(2.0 * M_PI * cand.tau)
                               - (d * d + st.v) / (2.0 * cand.tau));
                return Arr5{v, 0.0, 0.0, 0.0, 0.0};
            });
        if (acc[0] > best) {
            best = acc[0];
            best_idx = c;
        }
    }
    return candidates[best_idx];
}

} // namespace

std::vector<SeState> se_run(const SeConfig& cfg) {
    if (cfg.n_iters < 1) throw std::invalid_argument("se_run: n_iters must be >= 1");
    if (cfg.tau10 < 0.0) throw std::invalid_argument("se_run: tau10 must be >= 0");
    const int order = cfg.quad_order;
    const double ex2 = cfg.theta1_true.second_moment();

    std::vector<SeState> traj;
    traj.reserve(cfg.n_iters);

    double tau1 = cfg.tau10;
    double gamma1_bar = cfg.gamma1_bar0;
    BgParams theta1_bar = cfg.theta1_bar0;
    double theta2_bar = cfg.theta2_bar0;

    for (int k = 0; k < cfg.n_iters; ++k) {
        SeState st;
        // With r10 = 0 the solver skips tuning on the first sweep, and the
        // denoiser sees a deterministic zero input.
        const bool degenerate0 = k == 0 && cfg.r10_zero;
        if (cfg.theta1_mode == AdaptationRule::Kind::AutoTune && !degenerate0) {
            // Consistent-limit idealization: the tuner recovers the true
            // theta1 and the exact input error variance.
            gamma1_bar = tau1 > 0.0 ? 1.0 / tau1 : 1e11;
            theta1_bar = cfg.theta1_true;
            st.idealized_adaptation = true;
        }
        st.tau1 = tau1;
        st.gamma1_bar = gamma1_bar;
        st.theta1_bar = theta1_bar;

        const double ex1 = cfg.theta1_true.beta * cfg.theta1_true.mu;
        InputStats in{};
        double g0 = 0.0;
        if (degenerate0) {
            const kernels::BgMoments c = kernels::bg_component(0.0, gamma1_bar, theta1_bar);
            g0 = c.pi * c.m;
            in.a1 = gamma1_bar * kernels::bg_posterior_variance(c);
            in.e1 = g0 * g0 - 2.0 * g0 * ex1 + ex2;
            in.pi = c.pi;
            in.pim = g0;
            in.pim2v = c.pi * (c.m * c.m + c.v);
        } else {
            in = input_stats(gamma1_bar, tau1, theta1_bar, cfg.theta1_true, order);
        }
        const double alpha1 = in.a1;
        st.alpha1_bar = alpha1;
        if (!(alpha1 > 0.0 && alpha1 < 1.0)) {
            st.valid = false;
            traj.push_back(st);
            break;
        }
        st.eta1_bar = gamma1_bar / alpha1;
        st.gamma2_bar = st.eta1_bar - gamma1_bar;

        const double e1 = in.e1;
        st.mse1 = e1;
        st.nmse_db = 10.0 * std::log10(e1 / ex2);

        BgParams theta1_next = theta1_bar;
        if (cfg.theta1_mode == AdaptationRule::Kind::EmClosedForm) {
            theta1_next = em_update_from_stats(in.pi, in.pim, in.pim2v, theta1_bar);
        } else if (cfg.theta1_mode == AdaptationRule::Kind::FiniteGrid) {
            // the solver also skips discrete selection on the empty first sweep
            if (!degenerate0)
                theta1_next = se_grid_select(gamma1_bar, tau1, theta1_bar, cfg.theta1_true,
                                             order, cfg.grid_candidates);
        } else if (cfg.theta1_mode == AdaptationRule::Kind::Oracle) {
            theta1_next = cfg.theta1_true;
        }

        double tau2;
        if (degenerate0) {
            // r2 is the constant vector g0 / (1 - alpha1)
            const double c = g0 / (1.0 - alpha1);
            tau2 = c * c - 2.0 * c * ex1 + ex2;
        } else {
            tau2 = (e1 - alpha1 * alpha1 * tau1) / ((1.0 - alpha1) * (1.0 - alpha1));
        }
        st.tau2 = tau2;
        if (!(tau2 >= 0.0) || !std::isfinite(tau2)) {
            st.valid = false;
            traj.push_back(st);
            break;
        }

        if (cfg.theta2_mode == Theta2Mode::MlBinned) {
            st.gamma2_bar = tau2 > 0.0 ? 1.0 / tau2 : 1e11;
            theta2_bar = cfg.theta2_true;
            st.idealized_adaptation = true;
        }
        st.theta2_bar = theta2_bar;

        const double alpha2 = sens_a2(st.gamma2_bar, theta2_bar, cfg.spectrum);
        st.alpha2_bar = alpha2;
        if (!(alpha2 > 0.0 && alpha2 < 1.0)) {
            st.valid = false;
            traj.push_back(st);
            break;
        }
        st.eta2_bar = st.gamma2_bar / alpha2;
        const double gamma1_next = st.eta2_bar - st.gamma2_bar;

        const double e2 = error_fn_e2(st.gamma2_bar, tau2, theta2_bar, cfg.spectrum,
                                      cfg.theta2_true);

        double theta2_next = theta2_bar;
        if (cfg.theta2_mode == Theta2Mode::EmLine18) {
            // averaged over the noise-carrying rows, mirroring the
            // row-normalized line-18 update
            const Eigen::VectorXd data_spec =
                cfg.m_rows > 0 ? cfg.spectrum.head(cfg.m_rows).eval() : cfg.spectrum;
            theta2_next = 1.0 / se_mu2(st.gamma2_bar, tau2, theta2_bar, data_spec,
                                       cfg.theta2_true);
        } else if (cfg.theta2_mode == Theta2Mode::Oracle) {
            theta2_next = cfg.theta2_true;
        }

        const double tau1_next =
            (e2 - alpha2 * alpha2 * tau2) / ((1.0 - alpha2) * (1.0 - alpha2));
        traj.push_back(st);
        if (!(tau1_next >= 0.0) || !std::isfinite(tau1_next)) {
            traj.back().valid = false;
            break;
        }

        tau1 = tau1_next;
        gamma1_bar = gamma1_next;
        theta1_bar = theta1_next;
        theta2_bar = theta2_next;
    }
    return traj;
}

SeConfig se_config_for(const InstanceConfig& icfg, AdaptationRule::Kind theta1_mode,
                       Theta2Mode theta2_mode, int n_iters) {
    SeConfig cfg;
    cfg.theta1_true = icfg.theta1;
    SingularSpectrum spec = geometric_spectrum(icfg.m, icfg.n, icfg.kappa);
    cfg.spectrum = Eigen::VectorXd::Zero(icfg.n);
    cfg.spectrum.head(spec.values.size()) = spec.values;
    cfg.m_rows = icfg.m;
    cfg.theta2_true = snr_to_noise_precision(spec.frobenius_sq, icfg.m, icfg.theta1,
                                             icfg.snr_db);
    cfg.theta1_mode = theta1_mode;
    cfg.theta2_mode = theta2_mode;
    cfg.n_iters = n_iters;
    cfg.tau10 = icfg.theta1.second_moment(); // r10 = 0

    const bool oracle1 = theta1_mode == AdaptationRule::Kind::Oracle;
    if (oracle1) {
        cfg.theta1_bar0 = icfg.theta1;
    } else {
        // expected Appendix-G style data-driven initialization
        const double ey2 =
            icfg.theta1.second_moment() * spec.frobenius_sq + icfg.m / cfg.theta2_true;
        cfg.theta1_bar0.beta = 0.5 * icfg.m / icfg.n;
        cfg.theta1_bar0.mu = 0.0;
        cfg.theta1_bar0.tau = ey2 / (spec.frobenius_sq * cfg.theta1_bar0.beta);
    }
    if (theta2_mode == Theta2Mode::Oracle) {
        cfg.theta2_bar0 = cfg.theta2_true;
    } else {
        const double ey2 =
            icfg.theta1.second_moment() * spec.frobenius_sq + icfg.m / cfg.theta2_true;
        cfg.theta2_bar0 = icfg.m / ey2;
    }
    cfg.gamma1_bar0 = VampConfig::kGamma10Rel / cfg.theta1_bar0.second_moment();
    return cfg;
}

} // namespace avamp
