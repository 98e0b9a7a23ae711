#include "waveblur/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "waveblur/rng.hpp"

namespace waveblur {

std::vector<double> SparseThetaOp::apply(const std::vector<double>& x) const {
    return waveblur::spmv(op_, x);
}

std::vector<double> SparseThetaOp::apply_adjoint(const std::vector<double>& x) const {
    return waveblur::spmv(tr_, x);
}

double SparseThetaOp::ops_per_pixel() const { return waveblur::ops_per_pixel(op_); }

std::vector<double> ExactThetaOp::apply(const std::vector<double>& x) const {
    WaveletCoeffs c{&basis_->layout, x};
    return analyze(convolve(synthesize(c, *basis_), psf_), *basis_).values;
}

std::vector<double> ExactThetaOp::apply_adjoint(const std::vector<double>& x) const {
    WaveletCoeffs c{&basis_->layout, x};
    return analyze(waveblur::apply_adjoint(synthesize(c, *basis_), psf_), *basis_).values;
}

double ExactThetaOp::ops_per_pixel() const { return exact_ops_per_pixel(*basis_); }

std::vector<double> scale_weights(const SubbandLayout& layout) {
    std::vector<double> w(layout.total());
    for (const auto& b : layout.bands) {
        double val = b.orientation == 0 ? static_cast<double>(layout.J)
                                        : static_cast<double>(b.level);
        std::fill(w.begin() + static_cast<long>(b.offset),
                  w.begin() + static_cast<long>(b.offset + b.count()), val);
    }
    return w;
}

double energy(const std::vector<double>& x, const DeblurProblem& problem) {
    if (x.size() != problem.x0.size()) throw ShapeMismatch("energy: vector length mismatch");
    std::vector<double> r = problem.op->apply(x);
    double quad = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        double d = r[i] - problem.x0[i];
        quad += d * d;
    }
    double reg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) reg += problem.weights[i] * std::abs(x[i]);
    return 0.5 * quad + problem.lambda * reg;
}

std::vector<double> prox_weighted_l1_P(const std::vector<double>& z0, double tau,
                                       const std::vector<double>& weights, double lambda,
                                       const DiagonalPreconditioner& P) {
    std::vector<double> z(z0.size());
    for (std::size_t i = 0; i < z0.size(); ++i) {
        double thr = tau * lambda * weights[i] / P.p[i];
        double a = std::abs(z0[i]) - thr;
        z[i] = a > 0.0 ? (z0[i] > 0.0 ? a : -a) : 0.0;
    }
    return z;
}

double estimate_step(const ThetaOp& op, const DiagonalPreconditioner& P, double step_safety) {
    const std::size_t n = op.dim();
    std::vector<double> inv_sqrt_p(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt_p[i] = 1.0 / std::sqrt(P.p[i]);

    CounterRng rng(0x5eedULL);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.next_normal();
    double nv = norm2(v);
    for (double& x : v) x /= nv;

    double lambda_prev = 0.0;
    for (int it = 0; it < 200; ++it) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = inv_sqrt_p[i] * v[i];
        w = op.apply(w);
        w = op.apply_adjoint(w);
        for (std::size_t i = 0; i < n; ++i) w[i] *= inv_sqrt_p[i];
        double lambda = dot(v, w);
        double nw = norm2(w);
        if (nw == 0.0) return 1.0;  // zero operator sentinel
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        if (it > 0 && std::abs(lambda - lambda_prev) <= 1e-6 * std::abs(lambda)) {
            lambda_prev = lambda;
            break;
        }
        lambda_prev = lambda;
    }
    if (lambda_prev <= 0.0) return 1.0;
    return 1.0 / (lambda_prev * step_safety);
}

namespace {

SolveReport run_pgd(const DeblurProblem& problem, const DiagonalPreconditioner& P,
                    const SolverConfig& config, bool accelerate) {
    const std::size_t n = problem.op->dim();
    if (problem.x0.size() != n || problem.weights.size() != n || P.p.size() != n)
        throw ShapeMismatch("solver: inconsistent problem dimensions");

    const auto t_start = std::chrono::steady_clock::now();
    const double tau = estimate_step(*problem.op, P, config.step_safety);

    SolveReport report;
    report.ops_per_pixel_per_iter = problem.op->ops_per_pixel();

    std::vector<double> x = problem.x0;  // warm start at the observed coefficients
    std::vector<double> x_prev = x;
    std::vector<double> y = x;
    report.initial_energy = energy(x, problem);
    const double stop_gap = config.rel_energy_tol * report.initial_energy;

    for (std::size_t k = 1; k <= config.max_iters; ++k) {
        std::vector<double> r = problem.op->apply(y);
        for (std::size_t i = 0; i < n; ++i) r[i] -= problem.x0[i];
        std::vector<double> grad = problem.op->apply_adjoint(r);
        std::vector<double> z0(n);
        for (std::size_t i = 0; i < n; ++i) z0[i] = y[i] - tau * grad[i] / P.p[i];
        std::vector<double> x_new =
            prox_weighted_l1_P(z0, tau, problem.weights, problem.lambda, P);

        double e = energy(x_new, problem);
        if (!std::isfinite(e))
            throw NonFiniteEnergy("solver diverged at iteration " + std::to_string(k) +
                                  " (tau=" + std::to_string(tau) + ")");
        report.energies.push_back(e);
        if (config.track_support) {
            std::size_t s = 0;
            for (double xi : x_new)
                if (xi != 0.0) ++s;
            report.support_sizes.push_back(s);
        }

        double beta = 0.0;
        if (accelerate && !config.zero_momentum)
            beta = (static_cast<double>(k) - 1.0) / (static_cast<double>(k) + 2.0);
        for (std::size_t i = 0; i < n; ++i) y[i] = x_new[i] + beta * (x_new[i] - x_prev[i]);
        x_prev = x_new;
        x = std::move(x_new);
        report.iters_used = k;

        if (std::isfinite(config.ref_energy) && e - config.ref_energy <= stop_gap) break;
    }

    report.x_final = std::move(x);
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace

SolveReport ista(const DeblurProblem& problem, const DiagonalPreconditioner& P,
                 const SolverConfig& config) {
    return run_pgd(problem, P, config, false);
}

SolveReport fista(const DeblurProblem& problem, const DiagonalPreconditioner& P,
                  const SolverConfig& config) {
    return run_pgd(problem, P, config, true);
}

}  // namespace waveblur
