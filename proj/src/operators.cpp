#include "waveblur/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>

#include <fftw3.h>

#include "waveblur/rng.hpp"

namespace waveblur {

namespace {

std::mutex fftw_mutex;  // FFTW planner is not thread-safe

// r2c spectrum size: dims[0] x (dims[1]/2+1) in 2D, n/2+1 in 1D
std::vector<std::complex<double>> fft_forward(const Image& u) {
    const auto& dims = u.dims;
    std::vector<double> in = u.v;
    std::size_t spec = dims.size() == 1 ? dims[0] / 2 + 1 : dims[0] * (dims[1] / 2 + 1);
    std::vector<std::complex<double>> out(spec);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        if (dims.size() == 1) {
            plan = fftw_plan_dft_r2c_1d(static_cast<int>(dims[0]), in.data(),
                                        reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE);
        } else {
            plan = fftw_plan_dft_r2c_2d(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                                        in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE);
        }
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(plan);
    return out;
}

Image fft_inverse(std::vector<std::complex<double>> spectrum,
                  const std::vector<std::size_t>& dims) {
    Image out(dims);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        if (dims.size() == 1) {
            plan = fftw_plan_dft_c2r_1d(static_cast<int>(dims[0]),
                                        reinterpret_cast<fftw_complex*>(spectrum.data()),
                                        out.v.data(), FFTW_ESTIMATE);
        } else {
            plan = fftw_plan_dft_c2r_2d(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                                        reinterpret_cast<fftw_complex*>(spectrum.data()),
                                        out.v.data(), FFTW_ESTIMATE);
        }
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(out.size());
    for (double& x : out.v) x *= scale;
    return out;
}

Image convolve_spectral(const Image& u, const Image& kernel, bool conjugate_kernel) {
    if (u.dims != kernel.dims) throw ShapeMismatch("convolve: image/kernel dims differ");
    auto su = fft_forward(u);
    auto sk = fft_forward(kernel);
    for (std::size_t i = 0; i < su.size(); ++i)
        su[i] *= conjugate_kernel ? std::conj(sk[i]) : sk[i];
    return fft_inverse(std::move(su), u.dims);
}

// signed wrapped coordinate of index i on an axis of length n, in [-n/2, n/2)
double wrapped_coord(std::size_t i, std::size_t n) {
    return i < n / 2 ? static_cast<double>(i)
                     : static_cast<double>(i) - static_cast<double>(n);
}

void normalize_sum(Image& k) {
    double s = 0.0;
    for (double x : k.v) s += x;
    if (s <= 0.0) throw BadSpec("PSF has nonpositive mass");
    for (double& x : k.v) x /= s;
}

Image delta_kernel(const std::vector<std::size_t>& dims) {
    Image k(dims);
    k[0] = 1.0;
    return k;
}

Image gaussian_kernel(const std::vector<std::size_t>& dims, double sigma) {
    if (sigma <= 0.0) throw BadSpec("Gaussian sigma must be positive");
    if (sigma < 1.0) return delta_kernel(dims);  // sub-pixel width degenerates to a delta
    Image k(dims);
    if (dims.size() == 1) {
        for (std::size_t i = 0; i < dims[0]; ++i) {
            double t = wrapped_coord(i, dims[0]);
            k[i] = std::exp(-t * t / (2.0 * sigma * sigma));
        }
    } else {
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[1]; ++c) {
                double t1 = wrapped_coord(r, dims[0]);
                double t2 = wrapped_coord(c, dims[1]);
                k.at(r, c) = std::exp(-(t1 * t1 + t2 * t2) / (2.0 * sigma * sigma));
            }
    }
    normalize_sum(k);
    return k;
}

Image skewed_gaussian_kernel(const std::vector<std::size_t>& dims, double sigma) {
    if (sigma <= 0.0) throw BadSpec("SkewedGaussian sigma must be positive");
    Image k(dims);
    auto value = [&](double t1, double t2) {
        double a = t1 >= 0.0 ? 1.0 : 4.0;  // four-fold sharper decay on the negative side
        return std::exp(-(a * t1 * t1 + t2 * t2) / (2.0 * sigma * sigma));
    };
    if (dims.size() == 1) {
        for (std::size_t i = 0; i < dims[0]; ++i) k[i] = value(wrapped_coord(i, dims[0]), 0.0);
    } else {
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[1]; ++c)
                k.at(r, c) = value(wrapped_coord(r, dims[0]), wrapped_coord(c, dims[1]));
    }
    normalize_sum(k);
    return k;
}

// Natural cubic spline through (0,y0) .. (m-1,y_{m-1}); returns evaluator.
struct CubicSpline {
    std::vector<double> y, m2;  // second derivatives at knots

    explicit CubicSpline(std::vector<double> pts) : y(std::move(pts)) {
        const std::size_t n = y.size();
        m2.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            a[i] = 1.0;
            b[i] = 4.0;
            c[i] = 1.0;
            d[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
        }
        // Thomas algorithm on interior knots, natural BCs m2[0]=m2[n-1]=0
        for (std::size_t i = 2; i + 1 < n; ++i) {
            double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            double upper = (i + 2 < n) ? c[i] * m2[i + 1] : 0.0;
            m2[i] = (d[i] - upper) / b[i];
            if (i == 1) break;
        }
    }

    double operator()(double t) const {
        const std::size_t n = y.size();
        if (n == 1) return y[0];
        double tc = std::clamp(t, 0.0, static_cast<double>(n - 1));
        std::size_t i = std::min(static_cast<std::size_t>(tc), n - 2);
        double h = tc - static_cast<double>(i);
        double hm = 1.0 - h;
        return hm * y[i] + h * y[i + 1] +
               (hm * (hm * hm - 1.0) * m2[i] + h * (h * h - 1.0) * m2[i + 1]) / 6.0;
    }
};

Image motion_kernel(const std::vector<std::size_t>& dims, const MotionSpec& spec) {
    if (spec.points < 2) throw BadSpec("motion blur needs at least 2 points");
    if (spec.sigma1 <= 0.0 || spec.sigma2 <= 0.0)
        throw BadSpec("motion blur sigmas must be positive");
    CounterRng rng(spec.seed);
    const unsigned l = spec.points;
    std::vector<double> px(l), py(l);
    for (unsigned i = 0; i < l; ++i) px[i] = spec.sigma1 * rng.next_normal();
    if (dims.size() == 2)
        for (unsigned i = 0; i < l; ++i) py[i] = spec.sigma1 * rng.next_normal();

    CubicSpline sx(px), sy(py);
    // polyline length estimate to pick the sampling density (10x pixel density)
    double length = 0.0;
    const int probe = 64 * static_cast<int>(l);
    double prevx = sx(0.0), prevy = dims.size() == 2 ? sy(0.0) : 0.0;
    for (int i = 1; i <= probe; ++i) {
        double t = static_cast<double>(i) / probe * (l - 1);
        double cx = sx(t), cy = dims.size() == 2 ? sy(t) : 0.0;
        length += std::hypot(cx - prevx, cy - prevy);
        prevx = cx;
        prevy = cy;
    }
    const std::size_t samples = std::max<std::size_t>(2, static_cast<std::size_t>(10.0 * length) + 1);

    Image curve(dims);
    auto wrap = [](double x, std::size_t n) {
        double m = std::fmod(x, static_cast<double>(n));
        return m < 0.0 ? m + static_cast<double>(n) : m;
    };
    for (std::size_t s = 0; s < samples; ++s) {
        double t = static_cast<double>(s) / static_cast<double>(samples - 1) * (l - 1);
        if (dims.size() == 1) {
            double x = wrap(sx(t), dims[0]);
            std::size_t i0 = static_cast<std::size_t>(x) % dims[0];
            double f = x - std::floor(x);
            curve[i0] += 1.0 - f;
            curve[(i0 + 1) % dims[0]] += f;
        } else {
            double x = wrap(sx(t), dims[0]);
            double y = wrap(sy(t), dims[1]);
            std::size_t r0 = static_cast<std::size_t>(x) % dims[0];
            std::size_t c0 = static_cast<std::size_t>(y) % dims[1];
            double fr = x - std::floor(x), fc = y - std::floor(y);
            curve.at(r0, c0) += (1.0 - fr) * (1.0 - fc);
            curve.at((r0 + 1) % dims[0], c0) += fr * (1.0 - fc);
            curve.at(r0, (c0 + 1) % dims[1]) += (1.0 - fr) * fc;
            curve.at((r0 + 1) % dims[0], (c0 + 1) % dims[1]) += fr * fc;
        }
    }
    normalize_sum(curve);
    Image smooth = gaussian_kernel(dims, spec.sigma2);
    Psf g{smooth, GaussianSpec{spec.sigma2}};
    Image k = convolve(curve, g);
    for (double& x : k.v) x = std::max(x, 0.0);  // FFT roundoff can go slightly negative
    normalize_sum(k);
    return k;
}

Image airy_kernel(const std::vector<std::size_t>& dims, double scale) {
    if (scale <= 0.0) throw BadSpec("Airy scale must be positive");
    Image k(dims);
    auto value = [&](double r) {
        double x = M_PI * r / scale;
        if (x < 1e-12) return 1.0;
        double j1 = std::cyl_bessel_j(1.0, x);
        double a = 2.0 * j1 / x;
        return a * a;
    };
    if (dims.size() == 1) {
        for (std::size_t i = 0; i < dims[0]; ++i) k[i] = value(std::abs(wrapped_coord(i, dims[0])));
    } else {
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[1]; ++c)
                k.at(r, c) = value(std::hypot(wrapped_coord(r, dims[0]), wrapped_coord(c, dims[1])));
    }
    normalize_sum(k);
    return k;
}

Image defocus_kernel(const std::vector<std::size_t>& dims, double radius) {
    if (radius <= 0.0) throw BadSpec("defocus radius must be positive");
    Image k(dims);
    if (dims.size() == 1) {
        for (std::size_t i = 0; i < dims[0]; ++i)
            k[i] = std::abs(wrapped_coord(i, dims[0])) <= radius ? 1.0 : 0.0;
    } else {
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[1]; ++c)
                k.at(r, c) =
                    std::hypot(wrapped_coord(r, dims[0]), wrapped_coord(c, dims[1])) <= radius
                        ? 1.0
                        : 0.0;
    }
    normalize_sum(k);
    return k;
}

}  // namespace

std::string psf_spec_string(const PsfSpec& spec) {
    std::ostringstream os;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GaussianSpec>) {
                os << "gaussian:" << s.sigma;
            } else if constexpr (std::is_same_v<T, SkewedGaussianSpec>) {
                os << "skewed:" << s.sigma;
            } else if constexpr (std::is_same_v<T, MotionSpec>) {
                os << "motion:" << s.points << ":" << s.sigma1 << ":" << s.sigma2 << ":" << s.seed;
            } else if constexpr (std::is_same_v<T, AirySpec>) {
                os << "airy:" << s.scale;
            } else {
                os << "defocus:" << s.radius;
            }
        },
        spec);
    return os.str();
}

Psf generate_psf(const PsfSpec& spec, const std::vector<std::size_t>& dims) {
    Image tmp(dims);
    tmp.require_dyadic();
    Image k = std::visit(
        [&](const auto& s) -> Image {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, GaussianSpec>) {
                return gaussian_kernel(dims, s.sigma);
            } else if constexpr (std::is_same_v<T, SkewedGaussianSpec>) {
                return skewed_gaussian_kernel(dims, s.sigma);
            } else if constexpr (std::is_same_v<T, MotionSpec>) {
                return motion_kernel(dims, s);
            } else if constexpr (std::is_same_v<T, AirySpec>) {
                return airy_kernel(dims, s.scale);
            } else {
                return defocus_kernel(dims, s.radius);
            }
        },
        spec);
    return Psf{std::move(k), spec};
}

Image convolve(const Image& u, const Psf& psf) {
    return convolve_spectral(u, psf.kernel, false);
}

Image apply_adjoint(const Image& u, const Psf& psf) {
    return convolve_spectral(u, psf.kernel, true);
}

WaveletCoeffs exact_gradient(const WaveletCoeffs& x, const Psf& psf, const WaveletBasis& basis,
                             const Image& u0) {
    Image u = synthesize(x, basis);
    if (!u.same_shape(u0)) throw ShapeMismatch("exact_gradient: u0 dims do not match basis");
    Image residual = convolve(u, psf);
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= u0[i];
    Image back = apply_adjoint(residual, psf);
    return analyze(back, basis);
}

double exact_ops_per_pixel(const WaveletBasis& basis) {
    double n = static_cast<double>(basis.layout.total());
    double l = static_cast<double>(basis.filters.length());
    return 2.0 * std::log2(n) + 2.0 * l + 1.0;
}

Image add_noise(const Image& u, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw BadSpec("noise sigma must be >= 0");
    Image out = u;
    if (sigma == 0.0) return out;
    CounterRng rng(seed);
    for (std::size_t i = 0; i < out.size(); ++i) {
        // per-index Box-Muller so the stream is order-independent
        double u1 = (static_cast<double>(rng.at(2 * i) >> 11) + 0.5) * 0x1p-53;
        double u2 = (static_cast<double>(rng.at(2 * i + 1) >> 11) + 0.5) * 0x1p-53;
        out[i] += sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    return out;
}

double psnr(const Image& u, const Image& v) {
    if (!u.same_shape(v)) throw ShapeMismatch("psnr: dims differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(u.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<std::vector<double>> varying_blur_matrix(std::size_t n) {
    if (!is_pow2(n)) throw ShapeMismatch("varying_blur_matrix: n must be a power of 2");
    std::vector<std::vector<double>> h(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        double sigma = 4.0 + 10.0 * static_cast<double>(j) / static_cast<double>(n);
        double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
        for (std::size_t i = 0; i < n; ++i) {
            double diff = std::abs(static_cast<double>(i) - static_cast<double>(j));
            double d = std::min(diff, static_cast<double>(n) - diff);
            h[i][j] = norm * std::exp(-d * d / (2.0 * sigma * sigma));
        }
    }
    return h;
}

Image degrade(const Image& u, const DegradationModel& model) {
    return add_noise(convolve(u, model.psf), model.noise_sigma, model.seed);
}

}  // namespace waveblur
