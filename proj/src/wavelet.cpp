#include "waveblur/wavelet.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waveblur {

std::size_t SubbandLayout::total() const {
    std::size_t n = 1;
    for (auto s : dims) n *= s;
    return n;
}

const Band& SubbandLayout::find(unsigned level, unsigned orientation) const {
    for (const auto& b : bands)
        if (b.level == level && b.orientation == orientation) return b;
    throw BandNotFound("no band (level=" + std::to_string(level) +
                       ", e=" + std::to_string(orientation) + ")");
}

int SubbandLayout::band_of_flat(std::size_t flat) const {
    for (std::size_t i = bands.size(); i-- > 0;)
        if (flat >= bands[i].offset) return static_cast<int>(i);
    throw BandNotFound("flat index out of range");
}

SubbandLayout make_layout(const std::vector<std::size_t>& dims, unsigned J) {
    if (dims.empty() || dims.size() > 2) throw ShapeMismatch("layout needs 1 or 2 dims");
    std::size_t min_dim = dims[0];
    for (auto s : dims) {
        if (!is_pow2(s)) throw ShapeMismatch("side lengths must be powers of 2");
        min_dim = std::min(min_dim, s);
    }
    if (J < 1 || (std::size_t{1} << J) > min_dim)
        throw ShapeMismatch("decomposition depth too deep for these dims");

    const unsigned d = static_cast<unsigned>(dims.size());
    SubbandLayout layout;
    layout.dims = dims;
    layout.J = J;

    auto shape_at = [&](unsigned t) {
        std::vector<std::size_t> s(dims.size());
        for (std::size_t k = 0; k < dims.size(); ++k) s[k] = dims[k] >> t;
        return s;
    };

    std::size_t offset = 0;
    auto push = [&](unsigned t, unsigned e) {
        Band b;
        b.level = t;
        b.orientation = e;
        b.shape = shape_at(t);
        b.offset = offset;
        offset += b.count();
        layout.bands.push_back(b);
    };

    push(J, 0);  // approximation
    for (unsigned t = J; t >= 1; --t)
        for (unsigned e = 1; e < (1u << d); ++e) push(t, e);

    assert(offset == layout.total());
    return layout;
}

WaveletBasis make_basis(FilterFamily family, unsigned order,
                        const std::vector<std::size_t>& dims, unsigned J) {
    return WaveletBasis{make_filters(family, order), make_layout(dims, J)};
}

WaveletBasis make_basis(const std::string& filter_name, const std::vector<std::size_t>& dims,
                        unsigned J) {
    return WaveletBasis{make_filters(filter_name), make_layout(dims, J)};
}

namespace {

// One periodic analysis step along a strided line: first half lowpass,
// second half highpass. out must not alias in.
void dwt_line(const double* in, std::size_t stride, std::size_t n, const FilterPair& f,
              double* out, std::size_t out_stride) {
    const std::size_t half = n / 2;
    const std::size_t l = f.length();
    for (std::size_t k = 0; k < half; ++k) {
        double a = 0.0, d = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
            double s = in[((2 * k + i) % n) * stride];
            a += f.lowpass[i] * s;
            d += f.highpass[i] * s;
        }
        out[k * out_stride] = a;
        out[(half + k) * out_stride] = d;
    }
}

// Adjoint of dwt_line (exact inverse for orthonormal filters).
void idwt_line(const double* in, std::size_t stride, std::size_t n, const FilterPair& f,
               double* out, std::size_t out_stride) {
    const std::size_t half = n / 2;
    const std::size_t l = f.length();
    for (std::size_t j = 0; j < n; ++j) out[j * out_stride] = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
        const double a = in[k * stride];
        const double d = in[(half + k) * stride];
        for (std::size_t i = 0; i < l; ++i) {
            out[((2 * k + i) % n) * out_stride] += a * f.lowpass[i] + d * f.highpass[i];
        }
    }
}

// In-place Mallat cascade on a working copy of the image.
void forward_cascade(std::vector<double>& w, const std::vector<std::size_t>& dims, unsigned J,
                     const FilterPair& f, bool parallel) {
    if (dims.size() == 1) {
        const std::size_t n = dims[0];
        std::vector<double> tmp(n);
        for (unsigned t = 0; t < J; ++t) {
            const std::size_t nt = n >> t;
            dwt_line(w.data(), 1, nt, f, tmp.data(), 1);
            std::copy(tmp.begin(), tmp.begin() + nt, w.begin());
        }
        return;
    }
    const std::size_t cols = dims[1];
    for (unsigned t = 0; t < J; ++t) {
        const std::size_t n0 = dims[0] >> t;
        const std::size_t n1 = dims[1] >> t;
#pragma omp parallel for if (parallel) schedule(static)
        for (long long r = 0; r < static_cast<long long>(n0); ++r) {
            std::vector<double> tmp(n1);
            double* row = w.data() + static_cast<std::size_t>(r) * cols;
            dwt_line(row, 1, n1, f, tmp.data(), 1);
            std::copy(tmp.begin(), tmp.end(), row);
        }
#pragma omp parallel for if (parallel) schedule(static)
        for (long long c = 0; c < static_cast<long long>(n1); ++c) {
            std::vector<double> tmp(n0);
            double* col = w.data() + static_cast<std::size_t>(c);
            dwt_line(col, cols, n0, f, tmp.data(), 1);
            for (std::size_t r = 0; r < n0; ++r) col[r * cols] = tmp[r];
        }
    }
}

void inverse_cascade(std::vector<double>& w, const std::vector<std::size_t>& dims, unsigned J,
                     const FilterPair& f, bool parallel) {
    if (dims.size() == 1) {
        const std::size_t n = dims[0];
        std::vector<double> tmp(n);
        for (unsigned t = J; t >= 1; --t) {
            const std::size_t nt = n >> (t - 1);
            idwt_line(w.data(), 1, nt, f, tmp.data(), 1);
            std::copy(tmp.begin(), tmp.begin() + nt, w.begin());
        }
        return;
    }
    const std::size_t cols = dims[1];
    for (unsigned t = J; t >= 1; --t) {
        const std::size_t n0 = dims[0] >> (t - 1);
        const std::size_t n1 = dims[1] >> (t - 1);
#pragma omp parallel for if (parallel) schedule(static)
        for (long long c = 0; c < static_cast<long long>(n1); ++c) {
            std::vector<double> tmp(n0);
            double* col = w.data() + static_cast<std::size_t>(c);
            idwt_line(col, cols, n0, f, tmp.data(), 1);
            for (std::size_t r = 0; r < n0; ++r) col[r * cols] = tmp[r];
        }
#pragma omp parallel for if (parallel) schedule(static)
        for (long long r = 0; r < static_cast<long long>(n0); ++r) {
            std::vector<double> tmp(n1);
            double* row = w.data() + static_cast<std::size_t>(r) * cols;
            idwt_line(row, 1, n1, f, tmp.data(), 1);
            std::copy(tmp.begin(), tmp.end(), row);
        }
    }
}

// Position of a band's block inside the Mallat-layout buffer.
// Orientation bit: dim 0 carries the high bit.
std::size_t mallat_origin(const Band& b, const std::vector<std::size_t>& dims) {
    if (dims.size() == 1) {
        unsigned bit = b.orientation & 1u;
        return bit ? (dims[0] >> b.level) : 0;
    }
    unsigned e0 = (b.orientation >> 1) & 1u;
    unsigned e1 = b.orientation & 1u;
    std::size_t r0 = e0 ? (dims[0] >> b.level) : 0;
    std::size_t c0 = e1 ? (dims[1] >> b.level) : 0;
    return r0 * dims[1] + c0;
}

void gather_bands(const std::vector<double>& w, const SubbandLayout& layout,
                  std::vector<double>& out) {
    out.resize(layout.total());
    for (const auto& b : layout.bands) {
        const std::size_t o = mallat_origin(b, layout.dims);
        if (layout.dims.size() == 1) {
            for (std::size_t m = 0; m < b.shape[0]; ++m) out[b.offset + m] = w[o + m];
        } else {
            const std::size_t cols = layout.dims[1];
            for (std::size_t r = 0; r < b.shape[0]; ++r)
                for (std::size_t c = 0; c < b.shape[1]; ++c)
                    out[b.offset + r * b.shape[1] + c] = w[o + r * cols + c];
        }
    }
}

void scatter_bands(const std::vector<double>& in, const SubbandLayout& layout,
                   std::vector<double>& w) {
    w.assign(layout.total(), 0.0);
    for (const auto& b : layout.bands) {
        const std::size_t o = mallat_origin(b, layout.dims);
        if (layout.dims.size() == 1) {
            for (std::size_t m = 0; m < b.shape[0]; ++m) w[o + m] = in[b.offset + m];
        } else {
            const std::size_t cols = layout.dims[1];
            for (std::size_t r = 0; r < b.shape[0]; ++r)
                for (std::size_t c = 0; c < b.shape[1]; ++c)
                    w[o + r * cols + c] = in[b.offset + r * b.shape[1] + c];
        }
    }
}

WaveletCoeffs analyze_impl(const Image& signal, const WaveletBasis& basis, bool parallel) {
    signal.require_dyadic();
    if (signal.dims != basis.dims()) throw ShapeMismatch("signal dims do not match basis");
    std::vector<double> w = signal.v;
    forward_cascade(w, signal.dims, basis.levels(), basis.filters, parallel);
    WaveletCoeffs x;
    x.layout = &basis.layout;
    gather_bands(w, basis.layout, x.values);
    return x;
}

Image synthesize_impl(const WaveletCoeffs& coeffs, const WaveletBasis& basis, bool parallel) {
    if (coeffs.values.size() != basis.layout.total())
        throw ShapeMismatch("coefficient length does not match basis");
    std::vector<double> w;
    scatter_bands(coeffs.values, basis.layout, w);
    inverse_cascade(w, basis.dims(), basis.levels(), basis.filters, parallel);
    Image u(basis.dims());
    u.v = std::move(w);
    return u;
}

}  // namespace

WaveletCoeffs analyze(const Image& signal, const WaveletBasis& basis) {
    return analyze_impl(signal, basis, true);
}

Image synthesize(const WaveletCoeffs& coeffs, const WaveletBasis& basis) {
    return synthesize_impl(coeffs, basis, true);
}

Image single_wavelet(const WaveletBasis& basis, unsigned level, unsigned orientation) {
    const Band& b = basis.layout.find(level, orientation);
    WaveletCoeffs x;
    x.layout = &basis.layout;
    x.values.assign(basis.layout.total(), 0.0);
    x.values[b.offset] = 1.0;
    return synthesize(x, basis);
}

namespace ref {

WaveletCoeffs analyze(const Image& signal, const WaveletBasis& basis) {
    return analyze_impl(signal, basis, false);
}

Image synthesize(const WaveletCoeffs& coeffs, const WaveletBasis& basis) {
    return synthesize_impl(coeffs, basis, false);
}

}  // namespace ref

}  // namespace waveblur
