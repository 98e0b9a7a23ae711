#include "doctest.h"

#include <cmath>
#include <vector>

#include "waveblur/operators.hpp"
#include "waveblur/precond.hpp"
#include "waveblur/rng.hpp"
#include "waveblur/solver.hpp"
#include "waveblur/theta.hpp"

using namespace waveblur;

namespace {

SparseOperator sparse_from_dense(const std::vector<std::vector<double>>& d) {
    const std::size_t n = d.size();
    SparseOperator op;
    op.n = n;
    op.layout = make_layout({n}, 1);
    op.row_offsets.assign(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c)
            if (d[r][c] != 0.0) {
                op.col_indices.push_back(static_cast<std::uint32_t>(c));
                op.values.push_back(d[r][c]);
            }
        op.row_offsets[r + 1] = op.col_indices.size();
    }
    return op;
}

SparseOperator identity_op(std::size_t n) {
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 1.0;
    return sparse_from_dense(d);
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    CounterRng rng(seed);
    for (auto& x : v) x = rng.next_normal();
    return v;
}

}  // namespace

TEST_CASE("energy closed forms and dense recomputation") {
    SparseThetaOp op(identity_op(8));
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = random_vec(8, 1);
    prob.weights.assign(8, 1.0);
    prob.lambda = 0.1;

    std::vector<double> zero(8, 0.0);
    CHECK(energy(zero, prob) ==
          doctest::Approx(0.5 * norm2(prob.x0) * norm2(prob.x0)).epsilon(1e-14));

    DeblurProblem noreg = prob;
    noreg.lambda = 0.0;
    CHECK(energy(prob.x0, noreg) == doctest::Approx(0.0).epsilon(1e-14));

    auto x = random_vec(8, 2);
    double expect = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        double d = x[i] - prob.x0[i];
        expect += 0.5 * d * d + prob.lambda * std::abs(x[i]);
    }
    CHECK(energy(x, prob) == doctest::Approx(expect).epsilon(1e-12));

    std::vector<double> wrong(4, 0.0);
    CHECK_THROWS_AS(energy(wrong, prob), ShapeMismatch);
}

TEST_CASE("prox closed forms") {
    DiagonalPreconditioner I = identity_precond(2);
    std::vector<double> z0 = {3.0, -0.5};
    std::vector<double> w = {1.0, 1.0};

    // weights 0 -> identity
    auto id = prox_weighted_l1_P(z0, 1.0, {0.0, 0.0}, 1.0, I);
    CHECK(id[0] == 3.0);
    CHECK(id[1] == -0.5);

    auto soft = prox_weighted_l1_P(z0, 1.0, w, 1.0, I);
    CHECK(soft[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(soft[1] == 0.0);

    DiagonalPreconditioner P{{2.0, 1.0}, PrecondKind::Jacobi};
    auto prec = prox_weighted_l1_P(z0, 1.0, w, 1.0, P);
    CHECK(prec[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(prec[1] == 0.0);
}

TEST_CASE("prox satisfies the subgradient optimality condition") {
    const std::size_t n = 64;
    auto z0 = random_vec(n, 11);
    std::vector<double> w(n), p(n);
    CounterRng rng(12);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = rng.next_uniform() * 2.0;
        p[i] = 0.5 + rng.next_uniform();
    }
    DiagonalPreconditioner P{p, PrecondKind::Jacobi};
    const double tau = 0.3, lambda = 0.7;
    auto z = prox_weighted_l1_P(z0, tau, w, lambda, P);
    for (std::size_t i = 0; i < n; ++i) {
        double resid = p[i] * (z[i] - z0[i]);
        if (z[i] != 0.0) {
            double s = z[i] > 0.0 ? 1.0 : -1.0;
            CHECK(std::abs(resid + tau * lambda * w[i] * s) < 1e-10);
        } else {
            CHECK(std::abs(resid) <= tau * lambda * w[i] + 1e-10);
        }
    }
}

TEST_CASE("step estimate on diagonal operators") {
    SparseThetaOp eye(identity_op(8));
    DiagonalPreconditioner I = identity_precond(8);
    CHECK(estimate_step(eye, I, 1.0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(estimate_step(eye, I, 1.25) == doctest::Approx(0.8).epsilon(1e-5));

    std::vector<std::vector<double>> d(8, std::vector<double>(8, 0.0));
    for (std::size_t i = 0; i < 8; ++i) d[i][i] = 1.0;
    d[3][3] = 2.0;  // largest singular value 2 -> L = 4
    SparseThetaOp diag(sparse_from_dense(d));
    CHECK(estimate_step(diag, I, 1.0) == doctest::Approx(0.25).epsilon(1e-5));
}

TEST_CASE("step estimate matches a dense spectral oracle") {
    auto basis = make_basis(FilterFamily::Symmlet, 4, {32}, 2);
    Psf psf = generate_psf(GaussianSpec{2.0}, {32});
    SparseOperator sp = threshold_naive(build_theta_conv(psf, basis), 400);
    SparseThetaOp op(sp);
    DiagonalPreconditioner P = spai(sp);

    // dense power iteration on P^-1/2 M P^-1/2 with many iterations
    const std::size_t n = 32;
    std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
    for (std::size_t r = 0; r < n; ++r)
        for (std::uint64_t k = sp.row_offsets[r]; k < sp.row_offsets[r + 1]; ++k)
            dense[r][sp.col_indices[k]] = sp.values[k];
    auto v = random_vec(n, 99);
    double L = 0.0;
    for (int it = 0; it < 5000; ++it) {
        std::vector<double> w(n, 0.0), t(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] /= std::sqrt(P.p[i]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w[i] += dense[i][j] * v[j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) t[i] += dense[j][i] * w[j];
        for (std::size_t i = 0; i < n; ++i) t[i] /= std::sqrt(P.p[i]);
        double nt = norm2(t);
        L = nt;
        for (std::size_t i = 0; i < n; ++i) v[i] = t[i] / nt;
    }
    CHECK(estimate_step(op, P, 1.0) == doctest::Approx(1.0 / L).epsilon(1e-4));
}

TEST_CASE("ista with identity operator and no regularization converges at once") {
    SparseThetaOp op(identity_op(16));
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = random_vec(16, 5);
    prob.weights.assign(16, 0.0);
    prob.lambda = 0.0;
    SolverConfig cfg;
    cfg.max_iters = 3;
    SolveReport rep = ista(prob, identity_precond(16), cfg);
    for (std::size_t i = 0; i < 16; ++i)
        CHECK(rep.x_final[i] == doctest::Approx(prob.x0[i]).epsilon(1e-6));
}

TEST_CASE("ista energies are nonincreasing; runs are bitwise deterministic") {
    auto basis = make_basis(FilterFamily::Symmlet, 6, {64, 64}, 3);
    Psf psf = generate_psf(GaussianSpec{3.0}, {64, 64});
    SparseOperator sp = threshold_weighted(build_theta_conv(psf, basis), 40000,
                                           dyadic_weights(basis.layout));
    SparseThetaOp op(sp);

    Image u = synthetic_scene({64, 64});
    Image u0 = add_noise(convolve(u, psf), 5e-3, 1);
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = analyze(u0, basis).values;
    prob.weights = scale_weights(basis.layout);
    prob.lambda = 1e-4;

    SolverConfig cfg;
    cfg.max_iters = 40;
    SolveReport a = ista(prob, identity_precond(op.dim()), cfg);
    for (std::size_t k = 1; k < a.energies.size(); ++k)
        CHECK(a.energies[k] <= a.energies[k - 1] + 1e-12);

    SolveReport b = ista(prob, identity_precond(op.dim()), cfg);
    REQUIRE(a.x_final.size() == b.x_final.size());
    for (std::size_t i = 0; i < a.x_final.size(); ++i) CHECK(a.x_final[i] == b.x_final[i]);
    CHECK(a.energies == b.energies);
}

TEST_CASE("fista solves a small least-squares problem without regularization") {
    // well-conditioned invertible operator
    std::vector<std::vector<double>> d(8, std::vector<double>(8, 0.0));
    CounterRng rng(77);
    for (std::size_t i = 0; i < 8; ++i) {
        d[i][i] = 2.0 + rng.next_uniform();
        d[i][(i + 1) % 8] = 0.3 * rng.next_normal();
    }
    SparseThetaOp op(sparse_from_dense(d));
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = random_vec(8, 78);
    prob.weights.assign(8, 0.0);
    prob.lambda = 0.0;
    SolverConfig cfg;
    cfg.max_iters = 500;
    SolveReport rep = fista(prob, identity_precond(8), cfg);

    // Gaussian elimination for the reference solution of D x = x0
    auto a = d;
    auto rhs = prob.x0;
    for (std::size_t c = 0; c < 8; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < 8; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(rhs[c], rhs[piv]);
        for (std::size_t r = 0; r < 8; ++r) {
            if (r == c) continue;
            double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < 8; ++k) a[r][k] -= f * a[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(rep.x_final[i] == doctest::Approx(rhs[i] / a[i][i]).epsilon(1e-8));
}

TEST_CASE("fista with zero momentum reproduces ista bitwise") {
    auto basis = make_basis(FilterFamily::Symmlet, 4, {32, 32}, 2);
    Psf psf = generate_psf(GaussianSpec{2.0}, {32, 32});
    SparseOperator sp = threshold_naive(build_theta_conv(psf, basis), 20000);
    SparseThetaOp op(sp);
    Image u0 = convolve(synthetic_scene({32, 32}), psf);
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = analyze(u0, basis).values;
    prob.weights = scale_weights(basis.layout);
    prob.lambda = 1e-4;

    SolverConfig cfg;
    cfg.max_iters = 25;
    SolverConfig cfg0 = cfg;
    cfg0.zero_momentum = true;
    SolveReport a = ista(prob, identity_precond(op.dim()), cfg);
    SolveReport b = fista(prob, identity_precond(op.dim()), cfg0);
    for (std::size_t i = 0; i < a.x_final.size(); ++i) CHECK(a.x_final[i] == b.x_final[i]);
    CHECK(a.energies == b.energies);
}

TEST_CASE("fista needs fewer iterations than ista to hit the energy criterion") {
    auto basis = make_basis(FilterFamily::Symmlet, 6, {64, 64}, 3);
    Psf psf = generate_psf(GaussianSpec{3.0}, {64, 64});
    SparseOperator sp = threshold_weighted(build_theta_conv(psf, basis), 60000,
                                           dyadic_weights(basis.layout));
    SparseThetaOp op(sp);
    Image u0 = add_noise(convolve(synthetic_scene({64, 64}), psf), 5e-3, 3);
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = analyze(u0, basis).values;
    prob.weights = scale_weights(basis.layout);
    prob.lambda = 1e-4;

    // long reference run for E*
    SolverConfig ref_cfg;
    ref_cfg.max_iters = 2000;
    SolveReport ref = fista(prob, spai(sp), ref_cfg);
    double estar = ref.energies.back();

    SolverConfig cfg;
    cfg.max_iters = 2000;
    cfg.ref_energy = estar;
    SolveReport fi = fista(prob, identity_precond(op.dim()), cfg);
    SolveReport is = ista(prob, identity_precond(op.dim()), cfg);
    CHECK(fi.iters_used < is.iters_used);
    CHECK(fi.iters_used < cfg.max_iters);  // criterion was actually reached
}

TEST_CASE("a prox fixed point is stationary") {
    auto basis = make_basis(FilterFamily::Symmlet, 4, {32}, 2);
    Psf psf = generate_psf(GaussianSpec{2.0}, {32});
    SparseOperator sp = threshold_naive(build_theta_conv(psf, basis), 1024);
    SparseThetaOp op(sp);
    DeblurProblem prob;
    prob.op = &op;
    prob.x0 = analyze(convolve(synthetic_scene({32}), psf), basis).values;
    prob.weights = scale_weights(basis.layout);
    prob.lambda = 1e-3;

    // converge hard, then restart from the solution: iterates must not move
    SolverConfig cfg;
    cfg.max_iters = 4000;
    SolveReport rep = fista(prob, identity_precond(op.dim()), cfg);
    // hand-roll one prox-gradient step from the converged point
    DiagonalPreconditioner I = identity_precond(op.dim());
    double tau = estimate_step(op, I, cfg.step_safety);
    auto r = op.apply(rep.x_final);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= prob.x0[i];
    auto grad = op.apply_adjoint(r);
    auto z0 = rep.x_final;
    for (std::size_t i = 0; i < z0.size(); ++i) z0[i] -= tau * grad[i];
    auto next = prox_weighted_l1_P(z0, tau, prob.weights, prob.lambda, I);
    double m = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
        m = std::max(m, std::abs(next[i] - rep.x_final[i]));
    CHECK(m < 1e-6);
}

TEST_CASE("scale weights follow the subband levels") {
    auto layout = make_layout({32, 32}, 3);
    auto w = scale_weights(layout);
    for (const auto& b : layout.bands) {
        double expect = b.orientation == 0 ? 3.0 : static_cast<double>(b.level);
        for (std::size_t i = 0; i < b.count(); ++i) CHECK(w[b.offset + i] == expect);
    }
}

TEST_CASE("exact operator handle agrees with the untruncated sparse operator") {
    auto basis = make_basis(FilterFamily::Daubechies, 4, {32, 32}, 2);
    Psf psf = generate_psf(GaussianSpec{2.0}, {32, 32});
    const std::size_t n = 32 * 32;
    SparseThetaOp sparse(threshold_naive(build_theta_conv(psf, basis), n * n));
    ExactThetaOp exact(psf, basis);
    auto x = random_vec(n, 404);
    auto ys = sparse.apply(x), ye = exact.apply(x);
    auto zs = sparse.apply_adjoint(x), ze = exact.apply_adjoint(x);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(ys[i] - ye[i]) < 1e-8);
        CHECK(std::abs(zs[i] - ze[i]) < 1e-8);
    }
}
