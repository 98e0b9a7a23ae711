#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "waveblur/operators.hpp"
#include "waveblur/precond.hpp"
#include "waveblur/theta.hpp"

namespace waveblur {

/// Wavelet-domain forward operator: either the sparse Theta_K or the exact
/// Psi^* H Psi route. apply/apply_adjoint must be adjoint to each other.
class ThetaOp {
public:
    virtual ~ThetaOp() = default;
    virtual std::vector<double> apply(const std::vector<double>& x) const = 0;
    virtual std::vector<double> apply_adjoint(const std::vector<double>& x) const = 0;
    virtual std::size_t dim() const = 0;
    virtual double ops_per_pixel() const = 0;
};

class SparseThetaOp final : public ThetaOp {
public:
    explicit SparseThetaOp(SparseOperator op)
        : op_(std::move(op)), tr_(waveblur::transpose(op_)) {}
    std::vector<double> apply(const std::vector<double>& x) const override;
    std::vector<double> apply_adjoint(const std::vector<double>& x) const override;
    std::size_t dim() const override { return op_.n; }
    double ops_per_pixel() const override;
    const SparseOperator& sparse() const { return op_; }

private:
    SparseOperator op_;
    SparseOperator tr_;  // cached transpose for adjoint products
};

/// Theta x = Psi^* H Psi x computed with FFTs and fast wavelet transforms.
class ExactThetaOp final : public ThetaOp {
public:
    ExactThetaOp(Psf psf, const WaveletBasis& basis) : psf_(std::move(psf)), basis_(&basis) {}
    std::vector<double> apply(const std::vector<double>& x) const override;
    std::vector<double> apply_adjoint(const std::vector<double>& x) const override;
    std::size_t dim() const override { return basis_->layout.total(); }
    double ops_per_pixel() const override;

private:
    Psf psf_;
    const WaveletBasis* basis_;
};

/// min 1/2 ||Theta x - x0||^2 + lambda sum w[i] |x[i]|
struct DeblurProblem {
    const ThetaOp* op = nullptr;
    std::vector<double> x0;       // observed coefficients Psi^* u0
    std::vector<double> weights;  // nonneg, constant per band
    double lambda = 1e-4;
};

/// Default regularization weights: w = level t on detail bands, J on the
/// approximation band.
std::vector<double> scale_weights(const SubbandLayout& layout);

struct SolverConfig {
    std::size_t max_iters = 500;
    double rel_energy_tol = 1e-3;
    double step_safety = 1.01;
    bool track_support = false;
    // Stop when E(x_k) - ref_energy <= rel_energy_tol * E(x_0); NaN disables.
    double ref_energy = std::numeric_limits<double>::quiet_NaN();
    bool zero_momentum = false;  // test hook: forces the FISTA momentum to 0
};

struct SolveReport {
    std::vector<double> x_final;
    std::vector<double> energies;  // E(x^(k)), k = 1..iters_used
    std::size_t iters_used = 0;
    std::vector<std::size_t> support_sizes;
    double wall_time_s = 0.0;
    double ops_per_pixel_per_iter = 0.0;
    double initial_energy = 0.0;
};

double energy(const std::vector<double>& x, const DeblurProblem& problem);

/// Soft threshold in the P-metric:
/// z[i] = sign(z0[i]) max(|z0[i]| - tau lambda w[i] / p[i], 0).
std::vector<double> prox_weighted_l1_P(const std::vector<double>& z0, double tau,
                                       const std::vector<double>& weights, double lambda,
                                       const DiagonalPreconditioner& P);

/// tau = 1 / (step_safety * ||Theta^* Theta P^-1||_2), largest eigenvalue by
/// power iteration on P^-1/2 Theta^T Theta P^-1/2 (tol 1e-6, <= 200 iters).
double estimate_step(const ThetaOp& op, const DiagonalPreconditioner& P,
                     double step_safety = 1.0);

SolveReport ista(const DeblurProblem& problem, const DiagonalPreconditioner& P,
                 const SolverConfig& config);

/// Preconditioned accelerated proximal gradient; P = Identity recovers the
/// plain method. Momentum (k-1)/(k+2).
SolveReport fista(const DeblurProblem& problem, const DiagonalPreconditioner& P,
                  const SolverConfig& config);

}  // namespace waveblur
