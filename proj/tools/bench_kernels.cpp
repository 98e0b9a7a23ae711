// Micro-benchmark: OpenMP kernels vs their serial reference twins.
// Checks agreement bitwise, then reports timings and speedup.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "waveblur/operators.hpp"
#include "waveblur/rng.hpp"
#include "waveblur/theta.hpp"
#include "waveblur/wavelet.hpp"

using namespace waveblur;
using clk = std::chrono::steady_clock;

namespace {

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clk::now();
        f();
        best = std::min(best, std::chrono::duration<double>(clk::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-22s serial %8.4f ms   parallel %8.4f ms   speedup %5.2fx   %s\n", name,
                serial * 1e3, parallel * 1e3, serial / parallel,
                identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif

    const std::size_t side = 512;
    auto basis = make_basis(FilterFamily::Symmlet, 6, {side, side}, 4);
    Image u({side, side});
    CounterRng rng(7);
    for (auto& x : u.v) x = rng.next_uniform();

    WaveletCoeffs xs, xp;
    double t_as = time_best_of(5, [&] { xs = ref::analyze(u, basis); });
    double t_ap = time_best_of(5, [&] { xp = analyze(u, basis); });
    report("analyze 512x512", t_as, t_ap, xs.values == xp.values);

    Image us, up;
    double t_ss = time_best_of(5, [&] { us = ref::synthesize(xs, basis); });
    double t_sp = time_best_of(5, [&] { up = synthesize(xs, basis); });
    report("synthesize 512x512", t_ss, t_sp, us.v == up.v);

    auto sbasis = make_basis(FilterFamily::Symmlet, 6, {256, 256}, 4);
    Psf psf = generate_psf(GaussianSpec{5.0}, {256, 256});
    SparseOperator op = threshold_weighted(build_theta_conv(psf, sbasis), 8 * 256 * 256,
                                           dyadic_weights(sbasis.layout));
    std::vector<double> x(op.n);
    for (auto& v : x) v = rng.next_normal();

    std::vector<double> ys, yp;
    double t_ms = time_best_of(5, [&] { ys = ref::spmv(op, x); });
    double t_mp = time_best_of(5, [&] { yp = spmv(op, x); });
    report("spmv 256x256 K=8N", t_ms, t_mp, ys == yp);

    double t_ts = time_best_of(5, [&] { ys = ref::spmv_t(op, x); });
    double t_tp = time_best_of(5, [&] { yp = spmv_t(op, x); });
    report("spmv_t 256x256 K=8N", t_ts, t_tp, ys == yp);

    return 0;
}
