#pragma once

#include <vector>

#include "waveblur/theta.hpp"

namespace waveblur {

enum class PrecondKind { Identity, Jacobi, Spai };

struct DiagonalPreconditioner {
    std::vector<double> p;  // strictly positive
    PrecondKind kind = PrecondKind::Identity;
};

DiagonalPreconditioner identity_precond(std::size_t n);

/// diagM[i]  = (Theta_K^T Theta_K)[i,i] = ||column i of Theta_K||^2
/// diagM2[i] = (M^2)[i,i] = ||column i of M||^2, from the explicit sparse
/// product M = Theta_K^T Theta_K. Throws MemoryGuard past nnz_cap_factor
/// times nnz(Theta_K).
struct GramDiagonals {
    std::vector<double> diagM;
    std::vector<double> diagM2;
};
GramDiagonals gram_diagonals(const SparseOperator& op, std::size_t nnz_cap_factor = 50);

/// p[i] = max(diagM[i], eps). eps is relative in the CLI (scaled by
/// max diagM there); here it is taken as given. Throws BadEpsilon if <= 0.
DiagonalPreconditioner jacobi(const SparseOperator& op, double eps);

/// Closed-form minimizer of ||I - P^-1 M||_F over positive diagonals:
/// p[i] = M2[i,i]/M[i,i] where M[i,i] > 0, else 1.
DiagonalPreconditioner spai(const SparseOperator& op);

}  // namespace waveblur
