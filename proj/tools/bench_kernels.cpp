#include <avamp/kernels.hpp>
#include <avamp/rng.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

using namespace avamp;

namespace {

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class F>
double time_best(int reps, F&& f) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now();
        f();
        best = std::min(best, now() - t0);
    }
    return best;
}

void report(const char* name, double serial_s, double omp_s, double rel_dev) {
    std::printf("%-16s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   |dev| %.3e\n",
                name, serial_s * 1e3, omp_s * 1e3, serial_s / omp_s, rel_dev);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP kernel timings"};
    int n = 1 << 22;
    int reps = 5;
    int threads = 0;
    app.add_option("--n", n, "vector length");
    app.add_option("--reps", reps, "repetitions (best-of)");
    app.add_option("--threads", threads, "OpenMP thread count");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) kernels::set_threads(threads);

    Rng rng(7);
    std::vector<double> r(n), xhat_a(n), xhat_b(n), q(n), xi(n), s(n), b(n), vtr2(n),
        out_a(n), out_b(n);
    for (int i = 0; i < n; ++i) {
        r[i] = rng.gaussian();
        q[i] = rng.gaussian();
        xi[i] = 0.1 * rng.gaussian();
        s[i] = std::exp(0.5 * rng.gaussian());
        b[i] = rng.gaussian();
        vtr2[i] = rng.gaussian();
    }
    const BgParams t{0.1, 0.0, 1.0};
    const double gamma1 = 3.0, gamma2 = 2.0, theta2 = 50.0;

    double sa = 0, sb = 0;
    double ts = time_best(reps, [&] { sa = kernels::bg_denoise_serial(r.data(), xhat_a.data(), n, gamma1, t); });
    double tp = time_best(reps, [&] { sb = kernels::bg_denoise_omp(r.data(), xhat_b.data(), n, gamma1, t); });
    report("bg_denoise", ts, tp, std::fabs(sa - sb) / std::fabs(sa));

    kernels::BgSuffSums ka, kb;
    ts = time_best(reps, [&] { ka = kernels::bg_suff_serial(r.data(), n, gamma1, t); });
    tp = time_best(reps, [&] { kb = kernels::bg_suff_omp(r.data(), n, gamma1, t); });
    report("bg_suff", ts, tp, std::fabs(ka.pim2v - kb.pim2v) / std::fabs(ka.pim2v));

    ts = time_best(reps, [&] { sa = kernels::phi2_mean_serial(q.data(), xi.data(), s.data(), n, gamma2, theta2); });
    tp = time_best(reps, [&] { sb = kernels::phi2_mean_omp(q.data(), xi.data(), s.data(), n, gamma2, theta2); });
    report("phi2_mean", ts, tp, std::fabs(sa - sb) / std::fabs(sa));

    ts = time_best(reps, [&] { sa = kernels::lmmse_combine_serial(b.data(), vtr2.data(), s.data(), out_a.data(), n, gamma2, theta2); });
    tp = time_best(reps, [&] { sb = kernels::lmmse_combine_omp(b.data(), vtr2.data(), s.data(), out_b.data(), n, gamma2, theta2); });
    report("lmmse_combine", ts, tp, std::fabs(sa - sb) / std::fabs(sa));
    return 0;
}
