#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveblur {

struct ShapeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UnsupportedFilter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BandNotFound : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BadSpec : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct BadEpsilon : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MemoryGuard : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteEnergy : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_pow2(std::size_t n) {
    return n > 0 && (n & (n - 1)) == 0;
}

inline unsigned log2_exact(std::size_t n) {
    unsigned p = 0;
    while ((std::size_t{1} << p) < n) ++p;
    return p;
}

/// Real-valued d-dimensional grid, d in {1,2}, row-major, dyadic side lengths.
/// dims[0] is the slow (row) dimension.
struct Image {
    std::vector<std::size_t> dims;
    std::vector<double> v;

    Image() = default;
    explicit Image(std::vector<std::size_t> d, double fill = 0.0) : dims(std::move(d)) {
        std::size_t n = 1;
        for (auto s : dims) n *= s;
        v.assign(n, fill);
    }

    std::size_t ndim() const { return dims.size(); }
    std::size_t size() const { return v.size(); }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    // 2D access; valid only when ndim() == 2
    double& at(std::size_t r, std::size_t c) { return v[r * dims[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * dims[1] + c]; }

    bool same_shape(const Image& o) const { return dims == o.dims; }

    void require_dyadic() const {
        if (dims.empty() || dims.size() > 2)
            throw ShapeMismatch("image must be 1D or 2D");
        for (auto s : dims)
            if (!is_pow2(s)) throw ShapeMismatch("side lengths must be powers of 2");
    }
};

inline Image make_1d(std::size_t n) { return Image({n}); }
inline Image make_2d(std::size_t rows, std::size_t cols) { return Image({rows, cols}); }

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

// Grayscale I/O: 8/16-bit PGM (P5) and PNG, values mapped to [0,1] on read,
// clamped on write. Format chosen from the file extension.
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path, int bit_depth = 16);

// Deterministic synthetic test scene (smooth background, bars, disks),
// values in [0,1]. Used by tests and the CLI's "synthetic:<n>" pseudo-path.
Image synthetic_scene(std::vector<std::size_t> dims);

}  // namespace waveblur
