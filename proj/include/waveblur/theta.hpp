#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "waveblur/operators.hpp"
#include "waveblur/wavelet.hpp"

namespace waveblur {

/// One subband block of Theta = Psi^* H Psi for a convolution H. The block
/// between input band (grid 2^a per dim) and output band (grid 2^b) is a
/// rectangular circulant held by a single generator over the larger grid:
///   a >= b: Theta[n,m] = g[m - 2^(a-b) n],  g[m] = <H psi_(in,m), psi_(out,0)>
///   a <  b: Theta[n,m] = g[n - 2^(b-a) m],  g[n] = <H psi_(in,0), psi_(out,n)>
/// (index arithmetic per dimension, modulo the generator grid).
struct ThetaBlock {
    unsigned in_band;   // index into layout.bands
    unsigned out_band;  // index into layout.bands
    std::vector<std::size_t> gen_shape;
    std::vector<double> generator;
};

struct CirculantTheta {
    const WaveletBasis* basis = nullptr;
    std::vector<ThetaBlock> blocks;  // ordered (out_band, in_band), row-major

    const ThetaBlock& block(unsigned in_band, unsigned out_band) const;
};

/// Wavelet representation of a convolution operator; O((2^d-1) J N) via the
/// circulant structure of the subband blocks.
CirculantTheta build_theta_conv(const Psf& psf, const WaveletBasis& basis);

/// Dense Theta = Psi^* H Psi by applying H to every discrete wavelet.
/// O(N^3)-style oracle, guarded at N <= 4096. Row index = output coefficient.
std::vector<std::vector<double>> brute_force_theta(
    const std::function<Image(const Image&)>& apply_h, const WaveletBasis& basis,
    std::size_t guard = 4096);

/// Materialize one rectangular circulant block (test helper).
std::vector<std::vector<double>> expand_block(const CirculantTheta& theta,
                                              unsigned in_band, unsigned out_band);

std::vector<std::vector<double>> expand_full(const CirculantTheta& theta);

/// K-sparse compressed-row operator with subband metadata.
struct SparseOperator {
    std::size_t n = 0;
    std::vector<std::uint64_t> row_offsets;  // length n+1
    std::vector<std::uint32_t> col_indices;  // strictly increasing per row
    std::vector<double> values;
    SubbandLayout layout;
    FilterFamily family = FilterFamily::Haar;
    unsigned order = 1;

    std::size_t nnz() const { return values.size(); }
};

/// Per-coefficient weights, constant within each band of the layout.
struct WeightVector {
    std::vector<double> sigma;
};

WeightVector uniform_weights(const SubbandLayout& layout);
/// sigma = 2^(-k) with k the dyadic grid exponent of the coefficient's band
/// (equivalently 2^(t-J) for decomposition level t): coarser bands weigh more.
WeightVector dyadic_weights(const SubbandLayout& layout);

/// Keep the K largest-magnitude entries of the virtually expanded Theta.
/// Selection runs on (generator entry, multiplicity) pairs; ties break by
/// (block order, generator index) ascending so operators are reproducible.
SparseOperator threshold_naive(const CirculantTheta& theta, std::size_t K);

/// Keep entries ranked by |sigma_col * Theta[row,col]|; stored values stay
/// unweighted.
SparseOperator threshold_weighted(const CirculantTheta& theta, std::size_t K,
                                  const WeightVector& sigma);

/// y = Theta_K x (row-parallel, fixed in-row order, bitwise deterministic).
std::vector<double> spmv(const SparseOperator& op, const std::vector<double>& x);
/// y = Theta_K^T x.
std::vector<double> spmv_t(const SparseOperator& op, const std::vector<double>& x);

/// Theta_K^T (Theta_K x - x0); costs 2 nnz/N operations per pixel.
std::vector<double> approx_gradient(const SparseOperator& op, const std::vector<double>& x,
                                    const std::vector<double>& x0);

double ops_per_pixel(const SparseOperator& op);

/// Theta_K^T as CSR (layout metadata carried over). Lets hot loops avoid
/// rebuilding the transpose on every adjoint product.
SparseOperator transpose(const SparseOperator& op);

// Bit-exact operator file format "WTHETA01" (little-endian).
void write_operator(const SparseOperator& op, const std::string& path);
SparseOperator read_operator(const std::string& path);

namespace ref {
// Serial SpMV references; must match the parallel kernels bitwise.
std::vector<double> spmv(const SparseOperator& op, const std::vector<double>& x);
std::vector<double> spmv_t(const SparseOperator& op, const std::vector<double>& x);
}  // namespace ref

}  // namespace waveblur
