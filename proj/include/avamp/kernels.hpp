#pragma once
#include <avamp/model.hpp>
#include <cmath>

// Data-parallel inner loops.  Each kernel has a serial reference and an
// OpenMP variant; the *_omp versions must produce the same reductions as
// the serial ones up to floating-point reassociation, and the unit tests
// compare the two.  Dispatch helpers pick the variant from the runtime
// switch set by the harness.
namespace avamp::kernels {

void set_parallel(bool enabled);
bool parallel_enabled();
void set_threads(int n);

inline double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Scalar posterior moments of the spike-and-slab belief at pseudo-data
// r = x + N(0, 1/gamma1): responsibility pi, active-branch mean m and
// variance v.  Log-domain throughout.
struct BgMoments {
    double pi;
    double m;
    double v;
};

inline BgMoments bg_component(double r, double gamma1, const BgParams& t) {
    BgMoments out;
    out.v = 1.0 / (gamma1 + 1.0 / t.tau);
    out.m = out.v * (gamma1 * r + t.mu / t.tau);
    if (t.beta >= 1.0) {
        out.pi = 1.0;
    } else if (t.beta <= 0.0) {
        out.pi = 0.0;
    } else {
        const double lodds = std::log(t.beta) - std::log1p(-t.beta)
            + log_normal_pdf(r, t.mu, t.tau + 1.0 / gamma1)
            - log_normal_pdf(r, 0.0, 1.0 / gamma1);
        out.pi = sigmoid(lodds);
    }
    return out;
}

inline double bg_posterior_variance(const BgMoments& c) {
    const double mean = c.pi * c.m;
    return c.pi * (c.v + c.m * c.m) - mean * mean;
}

// Denoise pass: xhat[i] = pi*m, returns sum of per-component posterior
// variances.
double bg_denoise_serial(const double* r, double* xhat, int n, double gamma1,
                         const BgParams& t);
double bg_denoise_omp(const double* r, double* xhat, int n, double gamma1,
                      const BgParams& t);
double bg_denoise_pass(const double* r, double* xhat, int n, double gamma1,
                       const BgParams& t);

// Sufficient-statistic accumulation for the BG M-step:
// sums of pi, pi*m and pi*(m^2+v).
struct BgSuffSums {
    double pi = 0.0;
    double pim = 0.0;
    double pim2v = 0.0;
};
BgSuffSums bg_suff_serial(const double* r, int n, double gamma1, const BgParams& t);
BgSuffSums bg_suff_omp(const double* r, int n, double gamma1, const BgParams& t);
BgSuffSums bg_suff_pass(const double* r, int n, double gamma1, const BgParams& t);

// Mean of phi2 over components.
double phi2_mean_serial(const double* q, const double* xi, const double* s, int n,
                        double gamma2, double theta2);
double phi2_mean_omp(const double* q, const double* xi, const double* s, int n,
                     double gamma2, double theta2);
double phi2_mean_pass(const double* q, const double* xi, const double* s, int n,
                      double gamma2, double theta2);

// Diagonal LMMSE combine in the V basis:
// out[i] = (theta2*s[i]*b[i] + gamma2*vtr2[i]) / (theta2*s[i]^2 + gamma2),
// with b the zero-padded U^T y; returns sum of 1/(theta2*s[i]^2 + gamma2).
double lmmse_combine_serial(const double* b, const double* vtr2, const double* s,
                            double* out, int n, double gamma2, double theta2);
double lmmse_combine_omp(const double* b, const double* vtr2, const double* s,
                         double* out, int n, double gamma2, double theta2);
double lmmse_combine_pass(const double* b, const double* vtr2, const double* s,
                          double* out, int n, double gamma2, double theta2);

} // namespace avamp::kernels
