#include <avamp/kernels.hpp>

#include <omp.h>
#include <vector>

namespace avamp::kernels {

namespace {
bool g_parallel = true;
// Reductions accumulate per fixed-size block and then sum blocks in
// order, so results do not depend on the thread count.
constexpr int kBlock = 4096;
} // namespace

void set_parallel(bool enabled) { g_parallel = enabled; }
bool parallel_enabled() { return g_parallel; }
void set_threads(int n) { if (n > 0) omp_set_num_threads(n); }

double bg_denoise_serial(const double* r, double* xhat, int n, double gamma1,
                         const BgParams& t) {
    double postvar_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const BgMoments c = bg_component(r[i], gamma1, t);
        xhat[i] = c.pi * c.m;
        postvar_sum += bg_posterior_variance(c);
    }
    return postvar_sum;
}

double bg_denoise_omp(const double* r, double* xhat, int n, double gamma1,
                      const BgParams& t) {
    const int nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        const int lo = b * kBlock;
        const int hi = std::min(n, lo + kBlock);
        partial[b] = bg_denoise_serial(r + lo, xhat + lo, hi - lo, gamma1, t);
    }
    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum;
}

double bg_denoise_pass(const double* r, double* xhat, int n, double gamma1,
                       const BgParams& t) {
    return g_parallel ? bg_denoise_omp(r, xhat, n, gamma1, t)
                      : bg_denoise_serial(r, xhat, n, gamma1, t);
}

BgSuffSums bg_suff_serial(const double* r, int n, double gamma1, const BgParams& t) {
    BgSuffSums s;
    for (int i = 0; i < n; ++i) {
        const BgMoments c = bg_component(r[i], gamma1, t);
        s.pi += c.pi;
        s.pim += c.pi * c.m;
        s.pim2v += c.pi * (c.m * c.m + c.v);
    }
    return s;
}

BgSuffSums bg_suff_omp(const double* r, int n, double gamma1, const BgParams& t) {
    const int nblocks = (n + kBlock - 1) / kBlock;
    std::vector<BgSuffSums> partial(nblocks);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        const int lo = b * kBlock;
        const int hi = std::min(n, lo + kBlock);
        partial[b] = bg_suff_serial(r + lo, hi - lo, gamma1, t);
    }
    BgSuffSums s;
    for (const auto& p : partial) {
        s.pi += p.pi;
        s.pim += p.pim;
        s.pim2v += p.pim2v;
    }
    return s;
}

BgSuffSums bg_suff_pass(const double* r, int n, double gamma1, const BgParams& t) {
    return g_parallel ? bg_suff_omp(r, n, gamma1, t) : bg_suff_serial(r, n, gamma1, t);
}

namespace {
inline double phi2_scalar(double q, double xi, double s, double gamma2, double theta2) {
    const double d = s * s * theta2 + gamma2;
    // residual sign: U^T(y - A xhat2) = diag(gamma2/d) (xi - S q)
    const double e = s * q - xi;
    return gamma2 * gamma2 * e * e / (d * d) + s * s / d;
}
} // namespace

double phi2_mean_serial(const double* q, const double* xi, const double* s, int n,
                        double gamma2, double theta2) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += phi2_scalar(q[i], xi[i], s[i], gamma2, theta2);
    return sum / n;
}

double phi2_mean_omp(const double* q, const double* xi, const double* s, int n,
                     double gamma2, double theta2) {
    const int nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        const int lo = b * kBlock;
        const int hi = std::min(n, lo + kBlock);
        double sum = 0.0;
        for (int i = lo; i < hi; ++i)
            sum += phi2_scalar(q[i], xi[i], s[i], gamma2, theta2);
        partial[b] = sum;
    }
    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum / n;
}

double phi2_mean_pass(const double* q, const double* xi, const double* s, int n,
                      double gamma2, double theta2) {
    return g_parallel ? phi2_mean_omp(q, xi, s, n, gamma2, theta2)
                      : phi2_mean_serial(q, xi, s, n, gamma2, theta2);
}

double lmmse_combine_serial(const double* b, const double* vtr2, const double* s,
                            double* out, int n, double gamma2, double theta2) {
    double inv_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = theta2 * s[i] * s[i] + gamma2;
        out[i] = (theta2 * s[i] * b[i] + gamma2 * vtr2[i]) / d;
        inv_sum += 1.0 / d;
    }
    return inv_sum;
}

double lmmse_combine_omp(const double* b, const double* vtr2, const double* s,
                         double* out, int n, double gamma2, double theta2) {
    const int nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < nblocks; ++blk) {
        const int lo = blk * kBlock;
        const int hi = std::min(n, lo + kBlock);
        partial[blk] = lmmse_combine_serial(b + lo, vtr2 + lo, s + lo, out + lo,
                                            hi - lo, gamma2, theta2);
    }
    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum;
}

double lmmse_combine_pass(const double* b, const double* vtr2, const double* s,
                          double* out, int n, double gamma2, double theta2) {
    return g_parallel ? lmmse_combine_omp(b, vtr2, s, out, n, gamma2, theta2)
                      : lmmse_combine_serial(b, vtr2, s, out, n, gamma2, theta2);
}

} // namespace avamp::kernels
