#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "waveblur/image.hpp"

namespace waveblur {

enum class FilterFamily : std::uint32_t { Haar = 0, Daubechies = 1, Symmlet = 2 };

std::string family_name(FilterFamily f);

/// Orthogonal conjugate-quadrature filter pair. Lowpass taps come from
/// standard published tables; highpass is the quadrature mirror
/// g[i] = (-1)^i h[l-1-i]. Orthonormality is verified at construction.
struct FilterPair {
    FilterFamily family;
    unsigned order;  // vanishing moments M
    std::vector<double> lowpass;
    std::vector<double> highpass;

    std::size_t length() const { return lowpass.size(); }
};

/// Supported set: Haar; Daubechies 2-10; Symmlet 4-8.
/// Throws UnsupportedFilter otherwise.
FilterPair make_filters(FilterFamily family, unsigned order);

/// Parse names like "haar", "db4", "symmlet6"/"sym6".
FilterPair make_filters(const std::string& name);

/// One subband: all coefficients sharing (decomposition level, orientation).
/// level t runs 1 (finest) .. J (coarsest); orientation is a bitmask over
/// dimensions (bit set = highpass along that dimension, dim 0 = high bit),
/// 0 = approximation and appears only at t = J.
struct Band {
    unsigned level;
    unsigned orientation;
    std::vector<std::size_t> shape;  // dims / 2^level per dimension
    std::size_t offset;              // flat offset into the coefficient vector

    std::size_t count() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
};

/// Fixed bijection between flat coefficient indices and (level, translation,
/// orientation): approximation band first, then detail bands coarse-to-fine,
/// orientations in lexicographic order of e; row-major translations within
/// a band.
struct SubbandLayout {
    std::vector<std::size_t> dims;
    unsigned J = 0;
    std::vector<Band> bands;

    std::size_t total() const;
    const Band& find(unsigned level, unsigned orientation) const;
    int band_of_flat(std::size_t flat) const;  // index into bands
};

SubbandLayout make_layout(const std::vector<std::size_t>& dims, unsigned J);

struct WaveletBasis {
    FilterPair filters;
    SubbandLayout layout;

    const std::vector<std::size_t>& dims() const { return layout.dims; }
    unsigned levels() const { return layout.J; }
};

WaveletBasis make_basis(FilterFamily family, unsigned order,
                        const std::vector<std::size_t>& dims, unsigned J);
WaveletBasis make_basis(const std::string& filter_name,
                        const std::vector<std::size_t>& dims, unsigned J);

struct WaveletCoeffs {
    const SubbandLayout* layout = nullptr;
    std::vector<double> values;
};

/// x = Psi^* u. Periodic (circular) filter bank, downsampling phase fixed so
/// that analyze([1,1,1,1], Haar, J=2) = [2,0,0,0].
WaveletCoeffs analyze(const Image& signal, const WaveletBasis& basis);

/// u = Psi x, exact inverse (and adjoint) of analyze.
Image synthesize(const WaveletCoeffs& coeffs, const WaveletBasis& basis);

/// Psi applied to the indicator coefficient at translation 0 of one band.
Image single_wavelet(const WaveletBasis& basis, unsigned level, unsigned orientation);

namespace ref {
// Serial reference transforms, same summation order as the OpenMP path;
// results must match bitwise.
WaveletCoeffs analyze(const Image& signal, const WaveletBasis& basis);
Image synthesize(const WaveletCoeffs& coeffs, const WaveletBasis& basis);
}  // namespace ref

}  // namespace waveblur
