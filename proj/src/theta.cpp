#include "waveblur/theta.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace waveblur {

namespace {

// row-major flat index
std::size_t flatten(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape) {
    std::size_t f = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) f = f * shape[k] + idx[k];
    return f;
}

bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape) {
    for (std::size_t k = shape.size(); k-- > 0;) {
        if (++idx[k] < shape[k]) return true;
        idx[k] = 0;
    }
    return false;
}

}  // namespace

const ThetaBlock& CirculantTheta::block(unsigned in_band, unsigned out_band) const {
    const std::size_t nb = basis->layout.bands.size();
    if (in_band >= nb || out_band >= nb) throw BandNotFound("block band index out of range");
    return blocks[out_band * nb + in_band];
}

CirculantTheta build_theta_conv(const Psf& psf, const WaveletBasis& basis) {
    if (psf.kernel.dims != basis.dims())
        throw ShapeMismatch("build_theta_conv: psf dims do not match basis");
    const auto& bands = basis.layout.bands;
    const std::size_t nb = bands.size();

    // One wavelet per band: <H psi_(i,0), psi_mu> and <H psi_mu, psi_(i,0)>
    // for all mu, each via a single forward transform.
    std::vector<std::vector<double>> fwd(nb), adj(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        Image w = single_wavelet(basis, bands[i].level, bands[i].orientation);
        fwd[i] = analyze(convolve(w, psf), basis).values;
        adj[i] = analyze(apply_adjoint(w, psf), basis).values;
    }

    CirculantTheta theta;
    theta.basis = &basis;
    theta.blocks.resize(nb * nb);
    for (std::size_t out = 0; out < nb; ++out) {
        for (std::size_t in = 0; in < nb; ++in) {
            ThetaBlock& blk = theta.blocks[out * nb + in];
            blk.in_band = static_cast<unsigned>(in);
            blk.out_band = static_cast<unsigned>(out);
            const Band& bi = bands[in];
            const Band& bo = bands[out];
            if (bi.level <= bo.level) {
                // input grid finer or equal: g[m] = <H psi_(in,m), psi_(out,0)>
                blk.gen_shape = bi.shape;
                blk.generator.assign(adj[out].begin() + static_cast<long>(bi.offset),
                                     adj[out].begin() + static_cast<long>(bi.offset + bi.count()));
            } else {
                // output grid finer: g[n] = <H psi_(in,0), psi_(out,n)>
                blk.gen_shape = bo.shape;
                blk.generator.assign(fwd[in].begin() + static_cast<long>(bo.offset),
                                     fwd[in].begin() + static_cast<long>(bo.offset + bo.count()));
            }
        }
    }
    return theta;
}

std::vector<std::vector<double>> brute_force_theta(
    const std::function<Image(const Image&)>& apply_h, const WaveletBasis& basis,
    std::size_t guard) {
    const std::size_t n = basis.layout.total();
    if (n > guard) throw TooLarge("brute_force_theta: N exceeds the oracle guard");
    std::vector<std::vector<double>> theta(n, std::vector<double>(n, 0.0));
    WaveletCoeffs e;
    e.layout = &basis.layout;
    e.values.assign(n, 0.0);
    for (std::size_t col = 0; col < n; ++col) {
        e.values[col] = 1.0;
        auto column = analyze(apply_h(synthesize(e, basis)), basis);
        e.values[col] = 0.0;
        for (std::size_t row = 0; row < n; ++row) theta[row][col] = column.values[row];
    }
    return theta;
}

std::vector<std::vector<double>> expand_block(const CirculantTheta& theta, unsigned in_band,
                                              unsigned out_band) {
    const auto& bands = theta.basis->layout.bands;
    const ThetaBlock& blk = theta.block(in_band, out_band);
    const Band& bi = bands[in_band];
    const Band& bo = bands[out_band];
    const std::size_t rows = bo.count(), cols = bi.count();
    std::vector<std::vector<double>> dense(rows, std::vector<double>(cols, 0.0));

    const std::size_t d = bi.shape.size();
    std::vector<std::size_t> nidx(d, 0);
    do {
        std::vector<std::size_t> midx(d, 0);
        do {
            std::vector<std::size_t> g(d);
            if (bi.level <= bo.level) {
                for (std::size_t k = 0; k < d; ++k) {
                    std::size_t s = bi.shape[k] / bo.shape[k];
                    g[k] = (midx[k] + bi.shape[k] - (s * nidx[k]) % bi.shape[k]) % bi.shape[k];
                }
            } else {
                for (std::size_t k = 0; k < d; ++k) {
                    std::size_t s = bo.shape[k] / bi.shape[k];
                    g[k] = (nidx[k] + bo.shape[k] - (s * midx[k]) % bo.shape[k]) % bo.shape[k];
                }
            }
            dense[flatten(nidx, bo.shape)][flatten(midx, bi.shape)] =
                blk.generator[flatten(g, blk.gen_shape)];
        } while (next_index(midx, bi.shape));
    } while (next_index(nidx, bo.shape));
    return dense;
}

std::vector<std::vector<double>> expand_full(const CirculantTheta& theta) {
    const auto& layout = theta.basis->layout;
    const std::size_t n = layout.total();
    std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
    const std::size_t nb = layout.bands.size();
    for (std::size_t out = 0; out < nb; ++out) {
        for (std::size_t in = 0; in < nb; ++in) {
            auto blk = expand_block(theta, static_cast<unsigned>(in), static_cast<unsigned>(out));
            const std::size_t r0 = layout.bands[out].offset;
            const std::size_t c0 = layout.bands[in].offset;
            for (std::size_t r = 0; r < blk.size(); ++r)
                for (std::size_t c = 0; c < blk[r].size(); ++c) dense[r0 + r][c0 + c] = blk[r][c];
        }
    }
    return dense;
}

WeightVector uniform_weights(const SubbandLayout& layout) {
    return WeightVector{std::vector<double>(layout.total(), 1.0)};
}

WeightVector dyadic_weights(const SubbandLayout& layout) {
    WeightVector w;
    w.sigma.resize(layout.total());
    for (const auto& b : layout.bands) {
        // 2^-k with k the dyadic grid exponent of the band: the level-t band
        // lives on a grid of size N/2^t, so sigma = 2^(t-J) up to a global
        // scale. Coarser bands carry the larger weight.
        double s = std::pow(2.0, static_cast<double>(b.level) - static_cast<double>(layout.J));
        std::fill(w.sigma.begin() + static_cast<long>(b.offset),
                  w.sigma.begin() + static_cast<long>(b.offset + b.count()), s);
    }
    return w;
}

namespace {

struct Candidate {
    double key;       // selection magnitude (possibly weighted)
    std::uint32_t block;
    std::uint32_t gen_index;
};

struct Triplet {
    std::uint32_t row, col;
    double value;
};

SparseOperator assemble(const CirculantTheta& theta, std::vector<Triplet> triplets) {
    const auto& layout = theta.basis->layout;
    SparseOperator op;
    op.n = layout.total();
    op.layout = layout;
    op.family = theta.basis->filters.family;
    op.order = theta.basis->filters.order;

    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    op.row_offsets.assign(op.n + 1, 0);
    op.col_indices.reserve(triplets.size());
    op.values.reserve(triplets.size());
    for (const auto& t : triplets) {
        ++op.row_offsets[t.row + 1];
        op.col_indices.push_back(t.col);
        op.values.push_back(t.value);
    }
    for (std::size_t i = 0; i < op.n; ++i) op.row_offsets[i + 1] += op.row_offsets[i];
    return op;
}

// Shared top-K machinery; `weight_of_band` gives the selection weight of the
// COLUMN (input) band. Exploits the circulant structure: each generator
// entry stands for `multiplicity` equal-magnitude positions of Theta.
SparseOperator threshold_impl(const CirculantTheta& theta, std::size_t K,
                              const std::vector<double>& col_band_weight) {
    const auto& layout = theta.basis->layout;
    const auto& bands = layout.bands;

    std::vector<Candidate> cands;
    std::size_t total_gen = 0;
    for (const auto& blk : theta.blocks) total_gen += blk.generator.size();
    cands.reserve(total_gen);
    for (std::size_t b = 0; b < theta.blocks.size(); ++b) {
        const auto& blk = theta.blocks[b];
        const double w = col_band_weight[blk.in_band];
        for (std::size_t v = 0; v < blk.generator.size(); ++v) {
            double key = std::abs(blk.generator[v]) * w;
            if (key > 0.0)
                cands.push_back({key, static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(v)});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.key != b.key) return a.key > b.key;
        if (a.block != b.block) return a.block < b.block;
        return a.gen_index < b.gen_index;
    });

    std::vector<Triplet> triplets;
    triplets.reserve(std::min(K, total_gen * 4));
    std::size_t kept = 0;
    const std::size_t d = layout.dims.size();
    for (const auto& c : cands) {
        if (kept >= K) break;
        const ThetaBlock& blk = theta.blocks[c.block];
        const Band& bi = bands[blk.in_band];
        const Band& bo = bands[blk.out_band];
        const double value = blk.generator[c.gen_index];

        // decode generator index
        std::vector<std::size_t> v(d);
        std::size_t rem = c.gen_index;
        for (std::size_t k = d; k-- > 0;) {
            v[k] = rem % blk.gen_shape[k];
            rem /= blk.gen_shape[k];
        }

        // walk the positions of this entry (smaller band enumerated row-major)
        const bool in_finer = bi.level <= bo.level;
        const Band& small = in_finer ? bo : bi;
        std::vector<std::size_t> idx(d, 0);
        do {
            if (kept >= K) break;
            std::vector<std::size_t> n(d), m(d);
            if (in_finer) {
                for (std::size_t k = 0; k < d; ++k) {
                    std::size_t s = bi.shape[k] / bo.shape[k];
                    n[k] = idx[k];
                    m[k] = (v[k] + s * idx[k]) % bi.shape[k];
                }
            } else {
                for (std::size_t k = 0; k < d; ++k) {
                    std::size_t s = bo.shape[k] / bi.shape[k];
                    m[k] = idx[k];
                    n[k] = (v[k] + s * idx[k]) % bo.shape[k];
                }
            }
            triplets.push_back({static_cast<std::uint32_t>(bo.offset + flatten(n, bo.shape)),
                                static_cast<std::uint32_t>(bi.offset + flatten(m, bi.shape)),
                                value});
            ++kept;
        } while (next_index(idx, small.shape));
    }
    return assemble(theta, std::move(triplets));
}

}  // namespace

SparseOperator threshold_naive(const CirculantTheta& theta, std::size_t K) {
    std::vector<double> ones(theta.basis->layout.bands.size(), 1.0);
    return threshold_impl(theta, K, ones);
}

SparseOperator threshold_weighted(const CirculantTheta& theta, std::size_t K,
                                  const WeightVector& sigma) {
    const auto& layout = theta.basis->layout;
    if (sigma.sigma.size() != layout.total())
        throw ShapeMismatch("threshold_weighted: weight vector length mismatch");
    // sigma is constant per band; pick the band representative
    std::vector<double> per_band(layout.bands.size());
    for (std::size_t b = 0; b < layout.bands.size(); ++b) {
        double s = sigma.sigma[layout.bands[b].offset];
        if (s <= 0.0) throw BadSpec("threshold_weighted: sigma must be positive");
        per_band[b] = s;
    }
    return threshold_impl(theta, K, per_band);
}

std::vector<double> spmv(const SparseOperator& op, const std::vector<double>& x) {
    if (x.size() != op.n) throw ShapeMismatch("spmv: vector length mismatch");
    std::vector<double> y(op.n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(op.n); ++r) {
        double s = 0.0;
        for (std::uint64_t k = op.row_offsets[r]; k < op.row_offsets[r + 1]; ++k)
            s += op.values[k] * x[op.col_indices[k]];
        y[static_cast<std::size_t>(r)] = s;
    }
    return y;
}

namespace {

// CSC view of the operator (rows of the transpose), built once per call
// site that needs adjoint products repeatedly would be wasteful; cache it
// keyed by the operator's storage address.
struct TransposeView {
    std::vector<std::uint64_t> offsets;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
};

TransposeView make_transpose(const SparseOperator& op) {
    TransposeView t;
    t.offsets.assign(op.n + 1, 0);
    t.indices.resize(op.nnz());
    t.values.resize(op.nnz());
    for (auto c : op.col_indices) ++t.offsets[c + 1];
    for (std::size_t i = 0; i < op.n; ++i) t.offsets[i + 1] += t.offsets[i];
    std::vector<std::uint64_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
    for (std::size_t r = 0; r < op.n; ++r) {
        for (std::uint64_t k = op.row_offsets[r]; k < op.row_offsets[r + 1]; ++k) {
            std::uint64_t pos = cursor[op.col_indices[k]]++;
            t.indices[pos] = static_cast<std::uint32_t>(r);
            t.values[pos] = op.values[k];
        }
    }
    return t;
}

}  // namespace

std::vector<double> spmv_t(const SparseOperator& op, const std::vector<double>& x) {
    if (x.size() != op.n) throw ShapeMismatch("spmv_t: vector length mismatch");
    TransposeView t = make_transpose(op);
    std::vector<double> y(op.n, 0.0);
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(op.n); ++c) {
        double s = 0.0;
        for (std::uint64_t k = t.offsets[c]; k < t.offsets[c + 1]; ++k)
            s += t.values[k] * x[t.indices[k]];
        y[static_cast<std::size_t>(c)] = s;
    }
    return y;
}

std::vector<double> approx_gradient(const SparseOperator& op, const std::vector<double>& x,
                                    const std::vector<double>& x0) {
    if (x.size() != op.n || x0.size() != op.n)
        throw ShapeMismatch("approx_gradient: vector length mismatch");
    std::vector<double> r = spmv(op, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= x0[i];
    return spmv_t(op, r);
}

double ops_per_pixel(const SparseOperator& op) {
    return 2.0 * static_cast<double>(op.nnz()) / static_cast<double>(op.n);
}

SparseOperator transpose(const SparseOperator& op) {
    TransposeView t = make_transpose(op);
    SparseOperator tr;
    tr.n = op.n;
    tr.layout = op.layout;
    tr.family = op.family;
    tr.order = op.order;
    tr.row_offsets = std::move(t.offsets);
    tr.col_indices = std::move(t.indices);
    tr.values = std::move(t.values);
    return tr;
}

namespace ref {

std::vector<double> spmv(const SparseOperator& op, const std::vector<double>& x) {
    if (x.size() != op.n) throw ShapeMismatch("spmv: vector length mismatch");
    std::vector<double> y(op.n, 0.0);
    for (std::size_t r = 0; r < op.n; ++r) {
        double s = 0.0;
        for (std::uint64_t k = op.row_offsets[r]; k < op.row_offsets[r + 1]; ++k)
            s += op.values[k] * x[op.col_indices[k]];
        y[r] = s;
    }
    return y;
}

std::vector<double> spmv_t(const SparseOperator& op, const std::vector<double>& x) {
    if (x.size() != op.n) throw ShapeMismatch("spmv_t: vector length mismatch");
    TransposeView t = make_transpose(op);
    std::vector<double> y(op.n, 0.0);
    for (std::size_t c = 0; c < op.n; ++c) {
        double s = 0.0;
        for (std::uint64_t k = t.offsets[c]; k < t.offsets[c + 1]; ++k)
            s += t.values[k] * x[t.indices[k]];
        y[c] = s;
    }
    return y;
}

}  // namespace ref

namespace {
constexpr char kMagic[8] = {'W', 'T', 'H', 'E', 'T', 'A', '0', '1'};

template <typename T>
void write_raw(std::ofstream& f, const T* p, std::size_t count) {
    f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
void read_raw(std::ifstream& f, T* p, std::size_t count) {
    f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(sizeof(T) * count));
    if (!f) throw IoError("operator file truncated");
}
}  // namespace

void write_operator(const SparseOperator& op, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write operator file " + path);
    f.write(kMagic, 8);
    auto u32 = [&](std::uint32_t v) { write_raw(f, &v, 1); };
    u32(static_cast<std::uint32_t>(op.layout.dims.size()));
    for (auto s : op.layout.dims) u32(static_cast<std::uint32_t>(s));
    u32(op.layout.J);
    u32(static_cast<std::uint32_t>(op.family));
    u32(op.order);
    u32(static_cast<std::uint32_t>(op.nnz()));
    write_raw(f, op.row_offsets.data(), op.row_offsets.size());
    write_raw(f, op.col_indices.data(), op.col_indices.size());
    write_raw(f, op.values.data(), op.values.size());
    if (!f) throw IoError("write failed: " + path);
}

SparseOperator read_operator(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open operator file " + path);
    char magic[8];
    read_raw(f, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw IoError(path + ": not a WTHETA01 operator file");
    auto u32 = [&]() {
        std::uint32_t v;
        read_raw(f, &v, 1);
        return v;
    };
    std::uint32_t d = u32();
    if (d < 1 || d > 2) throw IoError(path + ": bad dimension count");
    std::vector<std::size_t> dims(d);
    for (auto& s : dims) s = u32();
    std::uint32_t J = u32();
    std::uint32_t family = u32();
    std::uint32_t order = u32();
    std::uint32_t nnz = u32();
    if (family > 2) throw IoError(path + ": bad filter family id");

    SparseOperator op;
    op.layout = make_layout(dims, J);
    op.n = op.layout.total();
    op.family = static_cast<FilterFamily>(family);
    op.order = order;
    op.row_offsets.resize(op.n + 1);
    op.col_indices.resize(nnz);
    op.values.resize(nnz);
    read_raw(f, op.row_offsets.data(), op.row_offsets.size());
    read_raw(f, op.col_indices.data(), nnz);
    read_raw(f, op.values.data(), nnz);
    if (op.row_offsets[0] != 0 || op.row_offsets[op.n] != nnz)
        throw IoError(path + ": inconsistent row offsets");
    for (std::size_t r = 0; r < op.n; ++r) {
        if (op.row_offsets[r] > op.row_offsets[r + 1])
            throw IoError(path + ": row offsets not nondecreasing");
        for (std::uint64_t k = op.row_offsets[r]; k < op.row_offsets[r + 1]; ++k) {
            if (op.col_indices[k] >= op.n) throw IoError(path + ": column index out of range");
            if (k > op.row_offsets[r] && op.col_indices[k] <= op.col_indices[k - 1])
                throw IoError(path + ": columns not strictly increasing in a row");
        }
    }
    return op;
}

}  // namespace waveblur
