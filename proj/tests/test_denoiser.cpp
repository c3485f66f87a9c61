#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <avamp/denoiser.hpp>
#include <avamp/rng.hpp>

#include <cmath>
#include <vector>

using namespace avamp;

namespace {

// brute-force posterior moments by trapezoid integration over the slab
struct NumericPosterior {
    double pi, mean, var;
};

double normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

NumericPosterior numeric_posterior(double r, double gamma1, const BgParams& t) {
    const double span = 10.0 * std::sqrt(t.tau + 1.0 / gamma1) + std::fabs(r - t.mu);
    const int pts = 40001;
    const double lo = t.mu - span, hi = t.mu + span;
    const double h = (hi - lo) / (pts - 1);
    double z = 0, m1 = 0, m2 = 0;
    for (int i = 0; i < pts; ++i) {
        const double x = lo + i * h;
        const double wgt = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
        const double f = wgt * normal_pdf(x, t.mu, t.tau) * normal_pdf(r, x, 1.0 / gamma1);
        z += f;
        m1 += f * x;
        m2 += f * x * x;
    }
    z *= h;
    m1 *= h;
    m2 *= h;
    const double z0 = normal_pdf(r, 0.0, 1.0 / gamma1);
    const double total = (1.0 - t.beta) * z0 + t.beta * z;
    NumericPosterior out;
    out.pi = t.beta * z / total;
    out.mean = t.beta * m1 / total;
    out.var = t.beta * m2 / total - out.mean * out.mean;
    return out;
}

double posterior_mean(double r, double gamma1, const BgParams& t) {
    const kernels::BgMoments c = bg_posterior_stats(r, gamma1, t);
    return c.pi * c.m;
}

} // namespace

TEST_CASE("posterior stats match numerical integration") {
    const double rs[] = {-3.0, -0.8, 0.0, 0.3, 1.7, 4.0};
    const double gammas[] = {0.3, 2.0, 25.0};
    const BgParams thetas[] = {{0.1, 0.0, 1.0}, {0.4, 0.8, 0.5}, {0.9, -1.0, 2.0}};
    for (const BgParams& t : thetas) {
        for (double g : gammas) {
            for (double r : rs) {
                const NumericPosterior ref = numeric_posterior(r, g, t);
                const kernels::BgMoments c = bg_posterior_stats(r, g, t);
                CHECK(c.pi == doctest::Approx(ref.pi).epsilon(1e-7));
                CHECK(c.pi * c.m == doctest::Approx(ref.mean).scale(1.0).epsilon(1e-7));
                CHECK(kernels::bg_posterior_variance(c) ==
                      doctest::Approx(ref.var).scale(1.0).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("denoiser derivative equals gamma1 times posterior variance") {
    const BgParams t{0.2, 0.4, 1.5};
    const double gamma1 = 3.0;
    const double h = 1e-6;
    for (double r : {-2.0, -0.5, 0.0, 0.9, 2.5}) {
        const double fd =
            (posterior_mean(r + h, gamma1, t) - posterior_mean(r - h, gamma1, t)) / (2 * h);
        const kernels::BgMoments c = bg_posterior_stats(r, gamma1, t);
        const double analytic = gamma1 * kernels::bg_posterior_variance(c);
        CHECK(analytic == doctest::Approx(fd).scale(1.0).epsilon(1e-6));
    }
}

TEST_CASE("bg_denoise vector bookkeeping") {
    Rng rng(2);
    const int n = 2000;
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = 2.0 * rng.gaussian();
    const BgParams t{0.1, 0.0, 1.0};
    const double gamma1 = 4.0;
    const DenoiseOutput out = bg_denoise(r, gamma1, t);
    CHECK(out.xhat1.size() == n);
    double pv = 0.0;
    for (int i = 0; i < n; ++i) {
        const kernels::BgMoments c = bg_posterior_stats(r(i), gamma1, t);
        CHECK(out.xhat1(i) == doctest::Approx(c.pi * c.m).scale(1.0).epsilon(1e-13));
        pv += kernels::bg_posterior_variance(c);
    }
    pv /= n;
    CHECK(out.post_var_mean == doctest::Approx(pv).epsilon(1e-12));
    CHECK(out.deriv_mean == doctest::Approx(gamma1 * pv).epsilon(1e-12));
    CHECK(out.eta1 == doctest::Approx(gamma1 / out.deriv_mean).epsilon(1e-12));
    CHECK(out.deriv_mean > 0.0);
    CHECK(out.deriv_mean < 1.0);
}

TEST_CASE("pure Gaussian prior gives the ridge shrinkage") {
    const BgParams t{1.0, 0.7, 2.0};
    const double gamma1 = 3.0;
    Eigen::VectorXd r(4);
    r << -1.0, 0.0, 0.5, 2.0;
    const DenoiseOutput out = bg_denoise(r, gamma1, t);
    const double v = 1.0 / (gamma1 + 1.0 / t.tau);
    for (int i = 0; i < 4; ++i)
        CHECK(out.xhat1(i) ==
              doctest::Approx(v * (gamma1 * r(i) + t.mu / t.tau)).epsilon(1e-13));
    CHECK(out.eta1 == doctest::Approx(gamma1 + 1.0 / t.tau).epsilon(1e-12));
}

TEST_CASE("em_update_from_stats closed form") {
    const BgParams old{0.3, 0.1, 1.0};
    const double pi = 0.25, pim = 0.1, pim2v = 0.3;
    const BgParams up = em_update_from_stats(pi, pim, pim2v, old);
    CHECK(up.beta == doctest::Approx(0.25));
    CHECK(up.mu == doctest::Approx(0.1 / 0.25));
    CHECK(up.tau ==
          doctest::Approx((pim2v - 2 * up.mu * pim + up.mu * up.mu * pi) / pi));

    // vanishing responsibilities keep the old shape parameters
    const BgParams deg = em_update_from_stats(0.0, 0.0, 0.0, old);
    CHECK(deg.mu == old.mu);
    CHECK(deg.tau == old.tau);
    CHECK(deg.beta <= 1e-12);
}

TEST_CASE("EM step is a near fixed point at the truth") {
    const BgParams truth{0.15, 0.5, 1.2};
    const double tau_noise = 0.05;
    Rng rng(17);
    const int n = 1 << 18;
    Eigen::VectorXd r = sample_bg_signal(truth, n, rng);
    for (int i = 0; i < n; ++i) r(i) += std::sqrt(tau_noise) * rng.gaussian();
    const BgParams up = em_update_theta1(r, 1.0 / tau_noise, truth);
    CHECK(up.beta == doctest::Approx(truth.beta).epsilon(0.03));
    CHECK(up.mu == doctest::Approx(truth.mu).epsilon(0.03));
    CHECK(up.tau == doctest::Approx(truth.tau).epsilon(0.03));
}

TEST_CASE("auto-tune recovers the noise level and prior") {
    const BgParams truth{0.1, 0.0, 1.0};
    const double tau1 = 0.02;
    Rng rng(23);
    const int n = 1 << 16;
    Eigen::VectorXd r = sample_bg_signal(truth, n, rng);
    for (int i = 0; i < n; ++i) r(i) += std::sqrt(tau1) * rng.gaussian();

    BgParams init{0.25, 0.0, r.squaredNorm() / n / 0.25};
    const AutoTuneResult at = auto_tune_theta1(r, 1.0 / (r.squaredNorm() / n), init);
    CHECK(1.0 / at.gamma1 == doctest::Approx(tau1).epsilon(0.10));
    CHECK(at.theta1.beta == doctest::Approx(truth.beta).epsilon(0.10));
    CHECK(at.theta1.tau == doctest::Approx(truth.tau).epsilon(0.10));
    CHECK(at.iters >= 1);
}

TEST_CASE("auto-tune iterates are deterministic") {
    Rng rng(31);
    Eigen::VectorXd r(5000);
    for (int i = 0; i < r.size(); ++i) r(i) = rng.gaussian();
    const BgParams init{0.2, 0.0, 1.0};
    const AutoTuneResult a = auto_tune_theta1(r, 1.0, init);
    const AutoTuneResult b = auto_tune_theta1(r, 1.0, init);
    CHECK(a.gamma1 == b.gamma1);
    CHECK(a.theta1.beta == b.theta1.beta);
    CHECK(a.iters == b.iters);
}

TEST_CASE("grid selection picks the generating parameters") {
    const BgParams truth{0.1, 0.0, 1.0};
    const double tau1 = 0.05;
    Rng rng(41);
    const int n = 1 << 15;
    Eigen::VectorXd r = sample_bg_signal(truth, n, rng);
    for (int i = 0; i < n; ++i) r(i) += std::sqrt(tau1) * rng.gaussian();

    std::vector<BgParams> cands = {{0.5, 0.0, 0.2}, truth, {0.02, 0.0, 5.0}, {0.1, 2.0, 1.0}};
    const BgParams pick = grid_select_theta1(r, 1.0 / tau1, truth, cands);
    CHECK(pick.beta == truth.beta);
    CHECK(pick.mu == truth.mu);
    CHECK(pick.tau == truth.tau);

    // duplicate winner: lowest index returned
    std::vector<BgParams> dup = {truth, truth};
    const BgParams first = grid_select_theta1(r, 1.0 / tau1, truth, dup);
    CHECK(first.beta == truth.beta);
}
