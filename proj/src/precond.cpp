#include "waveblur/precond.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waveblur {

DiagonalPreconditioner identity_precond(std::size_t n) {
    return DiagonalPreconditioner{std::vector<double>(n, 1.0), PrecondKind::Identity};
}

GramDiagonals gram_diagonals(const SparseOperator& op, std::size_t nnz_cap_factor) {
    const std::size_t n = op.n;
    SparseOperator at = transpose(op);  // rows of A^T = columns of A

    GramDiagonals g;
    g.diagM.assign(n, 0.0);
    g.diagM2.assign(n, 0.0);

    // diagM[i] = ||A[:,i]||^2
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::uint64_t k = at.row_offsets[i]; k < at.row_offsets[i + 1]; ++k)
            s += at.values[k] * at.values[k];
        g.diagM[i] = s;
    }

    // Row i of M = A^T A is sum over k in col i of A of A[k,i] * A[k,:].
    // diagM2[i] = ||M[i,:]||^2 (M symmetric, so row norm = column norm).
    const std::uint64_t cap =
        static_cast<std::uint64_t>(nnz_cap_factor) * std::max<std::uint64_t>(op.nnz(), 1);
    std::uint64_t m_nnz = 0;
    bool overflow = false;
#pragma omp parallel
    {
        std::vector<double> acc(n, 0.0);
        std::vector<std::uint32_t> touched;
#pragma omp for schedule(dynamic, 64) reduction(+ : m_nnz) reduction(|| : overflow)
        for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            touched.clear();
            for (std::uint64_t k = at.row_offsets[i]; k < at.row_offsets[i + 1]; ++k) {
                const std::uint32_t row = at.col_indices[k];
                const double a = at.values[k];
                for (std::uint64_t j = op.row_offsets[row]; j < op.row_offsets[row + 1]; ++j) {
                    const std::uint32_t col = op.col_indices[j];
                    if (acc[col] == 0.0) touched.push_back(col);
                    acc[col] += a * op.values[j];
                }
            }
            double s = 0.0;
            for (auto c : touched) {
                s += acc[c] * acc[c];
                acc[c] = 0.0;
            }
            g.diagM2[i] = s;
            m_nnz += touched.size();
            if (m_nnz > cap) overflow = true;
        }
    }
    if (overflow) throw MemoryGuard("gram_diagonals: nnz(M) exceeds the configured cap");
    return g;
}

DiagonalPreconditioner jacobi(const SparseOperator& op, double eps) {
    if (eps <= 0.0) throw BadEpsilon("jacobi: epsilon must be positive");
    GramDiagonals g = gram_diagonals(op);
    DiagonalPreconditioner p;
    p.kind = PrecondKind::Jacobi;
    p.p.resize(op.n);
    for (std::size_t i = 0; i < op.n; ++i) p.p[i] = std::max(g.diagM[i], eps);
    return p;
}

DiagonalPreconditioner spai(const SparseOperator& op) {
    GramDiagonals g = gram_diagonals(op);
    DiagonalPreconditioner p;
    p.kind = PrecondKind::Spai;
    p.p.resize(op.n);
    for (std::size_t i = 0; i < op.n; ++i)
        p.p[i] = g.diagM[i] > 0.0 ? g.diagM2[i] / g.diagM[i] : 1.0;
    return p;
}

}  // namespace waveblur
