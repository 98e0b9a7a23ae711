#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "waveblur/image.hpp"
#include "waveblur/wavelet.hpp"

namespace waveblur {

// PSF specifications. Sizes are in pixels; Motion draws its control points
// from a seeded generator so the kernel is a pure function of the spec.
struct GaussianSpec {
    double sigma;
};
struct SkewedGaussianSpec {
    double sigma;
};
struct MotionSpec {
    unsigned points = 5;
    double sigma1 = 8.0;  // std-dev of the control point cloud
    double sigma2 = 1.0;  // post-smoothing Gaussian
    std::uint64_t seed = 0;
};
struct AirySpec {
    double scale;  // first zero of the pattern at r = 1.22 * scale
};
struct DefocusSpec {
    double radius;
};

using PsfSpec = std::variant<GaussianSpec, SkewedGaussianSpec, MotionSpec, AirySpec, DefocusSpec>;

std::string psf_spec_string(const PsfSpec& spec);

/// Kernel on the full grid, centered at index 0 with wrap-around, sum 1.
struct Psf {
    Image kernel;
    PsfSpec spec;
};

Psf generate_psf(const PsfSpec& spec, const std::vector<std::size_t>& dims);

/// Circular convolution via FFT.
Image convolve(const Image& u, const Psf& psf);

/// H* u = h~ * u with h~[i] = h[-i] mod dims.
Image apply_adjoint(const Image& u, const Psf& psf);

/// Psi^* H^* (H Psi x - u0), the exact Fourier-path gradient of
/// F(x) = 1/2 || H Psi x - u0 ||^2.
WaveletCoeffs exact_gradient(const WaveletCoeffs& x, const Psf& psf,
                             const WaveletBasis& basis, const Image& u0);

/// FFT + wavelet path cost: 2 log2(N) + 2l + 1 operations per pixel.
double exact_ops_per_pixel(const WaveletBasis& basis);

/// u + b, b iid N(0, sigma^2) from a counter-based seeded generator.
Image add_noise(const Image& u, double sigma, std::uint64_t seed);

/// 10 log10(1 / MSE), peak 1 for [0,1]-scaled images. Equal images return
/// the +inf sentinel.
double psnr(const Image& u, const Image& v);

/// 1D spatially varying Gaussian blur matrix, sigma_j = 4 + 10 j/N pixels,
/// circular distance, columns not renormalized.
std::vector<std::vector<double>> varying_blur_matrix(std::size_t n);

struct DegradationModel {
    Psf psf;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

Image degrade(const Image& u, const DegradationModel& model);

}  // namespace waveblur
