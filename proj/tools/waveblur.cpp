// waveblur: wavelet-domain deblurring front end.
//
// Subcommands:
//   psf          render a point-spread function to an image file
//   build-theta  build the sparse wavelet-domain operator and serialize it
//   deblur       restore a blurred/noisy image
//   bench        sweep (method, K) combinations and emit a CSV report
//
// Exit codes: 0 ok, 2 usage, 3 I/O, 4 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "waveblur/operators.hpp"
#include "waveblur/precond.hpp"
#include "waveblur/solver.hpp"
#include "waveblur/theta.hpp"
#include "waveblur/wavelet.hpp"

using namespace waveblur;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- options

struct PsfOptions {
    std::string kind = "gaussian";
    double sigma = 5.0;       // gaussian / skewed
    unsigned points = 5;      // motion
    double sigma1 = 8.0;      // motion control-point spread
    double sigma2 = 1.0;      // motion post-smoothing
    double scale = 4.0;       // airy
    double radius = 5.0;      // defocus
    std::uint64_t seed = 0;   // motion control points + noise
};

void add_psf_flags(CLI::App* cmd, PsfOptions& o) {
    cmd->add_option("--psf", o.kind, "PSF kind: gaussian|skewed|motion|airy|defocus")
        ->check(CLI::IsMember({"gaussian", "skewed", "motion", "airy", "defocus"}));
    cmd->add_option("--sigma", o.sigma, "Gaussian/skewed width in pixels");
    cmd->add_option("--points", o.points, "motion: number of control points");
    cmd->add_option("--sigma1", o.sigma1, "motion: control point spread");
    cmd->add_option("--sigma2", o.sigma2, "motion: smoothing width");
    cmd->add_option("--scale", o.scale, "airy: pattern scale");
    cmd->add_option("--radius", o.radius, "defocus: disk radius");
    cmd->add_option("--seed", o.seed, "seed for motion control points and noise");
}

PsfSpec to_spec(const PsfOptions& o) {
    if (o.kind == "gaussian") return GaussianSpec{o.sigma};
    if (o.kind == "skewed") return SkewedGaussianSpec{o.sigma};
    if (o.kind == "motion") return MotionSpec{o.points, o.sigma1, o.sigma2, o.seed};
    if (o.kind == "airy") return AirySpec{o.scale};
    return DefocusSpec{o.radius};
}

// "256" -> {256,256}; "64x128" -> {64,128}; "1d:256" -> {256}
std::vector<std::size_t> parse_size(const std::string& s) {
    std::string t = s;
    bool one_d = false;
    if (t.rfind("1d:", 0) == 0) {
        one_d = true;
        t = t.substr(3);
    }
    auto x = t.find('x');
    std::vector<std::size_t> dims;
    try {
        if (x == std::string::npos) {
            std::size_t n = std::stoul(t);
            dims = one_d ? std::vector<std::size_t>{n} : std::vector<std::size_t>{n, n};
        } else {
            dims = {std::stoul(t.substr(0, x)), std::stoul(t.substr(x + 1))};
        }
    } catch (const std::exception&) {
        throw BadSpec("cannot parse size '" + s + "'");
    }
    for (auto d : dims)
        if (!is_pow2(d)) throw BadSpec("size '" + s + "' is not a power of 2");
    return dims;
}

// Input images: regular files, or "synthetic:<size>" for the built-in scene.
Image load_input(const std::string& path) {
    if (path.rfind("synthetic:", 0) == 0) return synthetic_scene(parse_size(path.substr(10)));
    return read_image(path);
}

// ---------------------------------------------------------------- cache

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string operator_key(const PsfSpec& spec, const WaveletBasis& basis, std::size_t K,
                         const std::string& sigma_mode) {
    std::ostringstream os;
    os << psf_spec_string(spec) << '|' << family_name(basis.filters.family)
       << basis.filters.order << "|J" << basis.layout.J << '|';
    for (auto d : basis.dims()) os << d << ',';
    os << "|K" << K << '|' << sigma_mode;
    return os.str();
}

SparseOperator build_operator(const PsfSpec& spec, const WaveletBasis& basis, std::size_t K,
                              const std::string& sigma_mode) {
    Psf psf = generate_psf(spec, basis.dims());
    CirculantTheta theta = build_theta_conv(psf, basis);
    if (sigma_mode == "uniform") return threshold_naive(theta, K);
    return threshold_weighted(theta, K, dyadic_weights(basis.layout));
}

// Build or fetch from the WAVEBLUR_CACHE directory, if configured.
SparseOperator obtain_operator(const PsfSpec& spec, const WaveletBasis& basis, std::size_t K,
                               const std::string& sigma_mode) {
    const char* cache = std::getenv("WAVEBLUR_CACHE");
    if (cache == nullptr || *cache == '\0') return build_operator(spec, basis, K, sigma_mode);
    std::filesystem::create_directories(cache);
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.wtheta",
                  static_cast<unsigned long long>(fnv1a(operator_key(spec, basis, K, sigma_mode))));
    std::filesystem::path path = std::filesystem::path(cache) / name;
    if (std::filesystem::exists(path)) return read_operator(path.string());
    SparseOperator op = build_operator(spec, basis, K, sigma_mode);
    write_operator(op, path.string());
    return op;
}

// ---------------------------------------------------------------- solvers

struct MethodRun {
    SolveReport report;
    double ops_per_pixel = 0.0;
};

DiagonalPreconditioner make_precond(const std::string& method, const SparseOperator* sp,
                                    std::size_t n, double eps_jacobi_rel) {
    if (method == "jacobi-fista") {
        GramDiagonals g = gram_diagonals(*sp);
        double mx = 0.0;
        for (double d : g.diagM) mx = std::max(mx, d);
        return jacobi(*sp, std::max(eps_jacobi_rel * mx, 1e-300));
    }
    if (method == "spai-fista") return spai(*sp);
    return identity_precond(n);
}

MethodRun run_method(const std::string& method, const ThetaOp& op, const SparseOperator* sp,
                     const DeblurProblem& problem, double eps_jacobi_rel,
                     const SolverConfig& config) {
    DiagonalPreconditioner P = make_precond(method, sp, op.dim(), eps_jacobi_rel);
    MethodRun r;
    r.ops_per_pixel = op.ops_per_pixel();
    r.report = method == "ista" ? ista(problem, P, config) : fista(problem, P, config);
    return r;
}

double reference_energy(const ThetaOp& op, const SparseOperator* sp,
                        const DeblurProblem& problem, std::size_t ref_iters) {
    DiagonalPreconditioner P =
        sp != nullptr ? spai(*sp) : identity_precond(op.dim());
    SolverConfig cfg;
    cfg.max_iters = ref_iters;
    SolveReport rep = fista(problem, P, cfg);
    double e = rep.energies.back();
    for (double x : rep.energies) e = std::min(e, x);
    return e;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- commands

int cmd_psf(const PsfOptions& psf_opts, const std::string& size, const std::string& out) {
    auto dims = parse_size(size);
    Psf psf = generate_psf(to_spec(psf_opts), dims);
    // center the kernel and scale to peak 1 for display
    Image view(dims);
    double mx = 0.0;
    for (double v : psf.kernel.v) mx = std::max(mx, v);
    if (dims.size() == 2) {
        for (std::size_t r = 0; r < dims[0]; ++r)
            for (std::size_t c = 0; c < dims[1]; ++c)
                view.at((r + dims[0] / 2) % dims[0], (c + dims[1] / 2) % dims[1]) =
                    psf.kernel.at(r, c) / mx;
    } else {
        for (std::size_t i = 0; i < dims[0]; ++i)
            view[(i + dims[0] / 2) % dims[0]] = psf.kernel[i] / mx;
    }
    if (!out.empty()) write_image(view, out);
    double sum = 0.0;
    for (double v : psf.kernel.v) sum += v;
    std::cout << "psf " << psf_spec_string(psf.spec) << " sum=" << fmt(sum)
              << " max=" << fmt(mx) << (out.empty() ? "" : " written " + out) << "\n";
    return 0;
}

int cmd_build_theta(const PsfOptions& psf_opts, const std::string& size,
                    const std::string& filter, unsigned levels, std::size_t K,
                    const std::string& sigma_mode, const std::string& out) {
    auto dims = parse_size(size);
    WaveletBasis basis = make_basis(filter, dims, levels);
    SparseOperator op = obtain_operator(to_spec(psf_opts), basis, K, sigma_mode);
    write_operator(op, out);
    std::cout << "operator " << out << " nnz=" << op.nnz()
              << " ops_per_pixel=" << fmt(ops_per_pixel(op)) << "\n";
    return 0;
}

struct DeblurOptions {
    std::string in, out, op_file;
    std::string method = "spai-fista";
    std::string filter = "symmlet6";
    unsigned levels = 4;
    double lambda = 1e-4;
    std::size_t K = 0;
    std::string sigma_mode = "dyadic";
    double eps_jacobi = 1e-3;
    std::size_t iters = 500;
    double noise = 0.0;
    bool degrade_input = false;
};

int cmd_deblur(const PsfOptions& psf_opts, const DeblurOptions& o) {
    Image clean = load_input(o.in);
    clean.require_dyadic();

    std::unique_ptr<SparseOperator> sp;
    WaveletBasis basis = [&] {
        if (!o.op_file.empty()) {
            sp = std::make_unique<SparseOperator>(read_operator(o.op_file));
            if (sp->layout.dims != clean.dims)
                throw ShapeMismatch("operator file dims do not match the image");
            return make_basis(sp->family, sp->order, sp->layout.dims, sp->layout.J);
        }
        return make_basis(o.filter, clean.dims, o.levels);
    }();

    PsfSpec spec = to_spec(psf_opts);
    Psf psf = generate_psf(spec, clean.dims);

    Image observed = clean;
    if (o.degrade_input)
        observed = degrade(clean, DegradationModel{psf, o.noise, psf_opts.seed});

    if (o.method != "exact-fista" && sp == nullptr) {
        if (o.K == 0)
            throw BadSpec("sparse methods need --K or --op (use --method exact-fista otherwise)");
        sp = std::make_unique<SparseOperator>(obtain_operator(spec, basis, o.K, o.sigma_mode));
    }

    std::unique_ptr<ThetaOp> op;
    if (o.method == "exact-fista")
        op = std::make_unique<ExactThetaOp>(psf, basis);
    else
        op = std::make_unique<SparseThetaOp>(*sp);

    DeblurProblem problem;
    problem.op = op.get();
    problem.x0 = analyze(observed, basis).values;
    problem.weights = scale_weights(basis.layout);
    problem.lambda = o.lambda;

    SolverConfig cfg;
    cfg.max_iters = o.iters;
    MethodRun run = run_method(o.method, *op, sp.get(), problem, o.eps_jacobi, cfg);

    Image restored = synthesize(WaveletCoeffs{&basis.layout, run.report.x_final}, basis);
    for (auto& v : restored.v) v = std::clamp(v, 0.0, 1.0);
    if (!o.out.empty()) write_image(restored, o.out);

    json report;
    report["method"] = o.method;
    report["K"] = sp != nullptr ? sp->nnz() : 0;
    report["ops_per_pixel"] = run.ops_per_pixel;
    report["iterations"] = run.report.iters_used;
    report["wall_time_s"] = run.report.wall_time_s;
    report["final_energy"] = run.report.energies.back();
    report["initial_energy"] = run.report.initial_energy;
    report["lambda"] = o.lambda;
    report["psnr_observed_db"] = psnr(clean, observed);
    report["psnr_restored_db"] = psnr(clean, restored);
    if (!o.out.empty()) {
        std::ofstream jf(o.out + ".json");
        jf << report.dump(2) << "\n";
    }
    std::cout << "deblur " << o.method << " iters=" << run.report.iters_used
              << " psnr_observed=" << fmt(psnr(clean, observed))
              << " psnr_restored=" << fmt(psnr(clean, restored)) << "\n";
    return 0;
}

struct BenchOptions {
    std::string in, out;
    std::string filter = "symmlet6";
    unsigned levels = 4;
    double lambda = 1e-4;
    std::vector<std::size_t> K;
    double drop_db = 0.0;
    std::string sigma_mode = "dyadic";
    std::vector<std::string> methods;
    double eps_jacobi = 1e-3;
    double noise = 0.0;
    std::size_t max_iters = 2000;
    std::size_t ref_iters = 1500;
};

int cmd_bench(const PsfOptions& psf_opts, const BenchOptions& o) {
    static const std::vector<std::string> kAll = {"exact-fista", "ista", "fista",
                                                  "jacobi-fista", "spai-fista"};
    std::vector<std::string> methods = o.methods.empty() ? kAll : o.methods;
    for (const auto& m : methods)
        if (std::find(kAll.begin(), kAll.end(), m) == kAll.end())
            throw BadSpec("unknown method '" + m + "'");

    Image clean = load_input(o.in);
    clean.require_dyadic();
    const std::size_t n = clean.size();

    std::vector<std::size_t> Ks = o.K;
    if (Ks.empty()) {
        if (o.drop_db <= 0.0) throw BadSpec("bench needs --K values or --drop-db");
        for (std::size_t f : {1, 2, 3, 4, 6, 8}) Ks.push_back(f * n);
    }

    WaveletBasis basis = make_basis(o.filter, clean.dims, o.levels);
    PsfSpec spec = to_spec(psf_opts);
    Psf psf = generate_psf(spec, clean.dims);
    Image observed = degrade(clean, DegradationModel{psf, o.noise, psf_opts.seed});

    DeblurProblem problem;
    problem.x0 = analyze(observed, basis).values;
    problem.weights = scale_weights(basis.layout);
    problem.lambda = o.lambda;

    struct Row {
        std::string method;
        std::size_t K;
        double opp;
        std::size_t iters;
        double wall;
        double psnr_db;
        double energy;
    };
    std::vector<Row> rows;

    auto restored_psnr = [&](const std::vector<double>& x) {
        Image r = synthesize(WaveletCoeffs{&basis.layout, x}, basis);
        for (auto& v : r.v) v = std::clamp(v, 0.0, 1.0);
        return psnr(clean, r);
    };

    SolverConfig cfg;
    cfg.max_iters = o.max_iters;
    cfg.rel_energy_tol = 1e-3;

    double exact_psnr = std::numeric_limits<double>::quiet_NaN();
    bool want_exact = std::find(methods.begin(), methods.end(), "exact-fista") != methods.end();
    if (want_exact || o.drop_db > 0.0) {
        ExactThetaOp exact(psf, basis);
        DeblurProblem p = problem;
        p.op = &exact;
        SolverConfig c = cfg;
        c.ref_energy = reference_energy(exact, nullptr, p, o.ref_iters);
        MethodRun run = run_method("exact-fista", exact, nullptr, p, o.eps_jacobi, c);
        exact_psnr = restored_psnr(run.report.x_final);
        rows.push_back({"exact-fista", 0, run.ops_per_pixel, run.report.iters_used,
                        run.report.wall_time_s, exact_psnr, run.report.energies.back()});
    }

    std::optional<std::size_t> drop_choice;
    for (std::size_t K : Ks) {
        SparseOperator sp = obtain_operator(spec, basis, K, o.sigma_mode);
        SparseThetaOp op(sp);
        DeblurProblem p = problem;
        p.op = &op;
        SolverConfig c = cfg;
        c.ref_energy = reference_energy(op, &sp, p, o.ref_iters);
        double best_psnr = -std::numeric_limits<double>::infinity();
        for (const auto& m : methods) {
            if (m == "exact-fista") continue;
            MethodRun run = run_method(m, op, &sp, p, o.eps_jacobi, c);
            double pv = restored_psnr(run.report.x_final);
            best_psnr = std::max(best_psnr, pv);
            rows.push_back({m, sp.nnz(), run.ops_per_pixel, run.report.iters_used,
                            run.report.wall_time_s, pv, run.report.energies.back()});
        }
        if (o.drop_db > 0.0 && !drop_choice && std::isfinite(exact_psnr) &&
            best_psnr >= exact_psnr - o.drop_db)
            drop_choice = K;
    }

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw IoError("cannot open '" + o.out + "' for writing");
        os = &file;
    }
    *os << "method,K,ops_per_pixel,iterations,wall_time_s,psnr_db,final_energy\n";
    for (const auto& r : rows)
        *os << r.method << ',' << r.K << ',' << fmt(r.opp) << ',' << r.iters << ','
            << fmt(r.wall) << ',' << fmt(r.psnr_db) << ',' << fmt(r.energy) << "\n";
    if (o.drop_db > 0.0) {
        if (drop_choice)
            std::cout << "drop_target_K=" << *drop_choice << "\n";
        else
            std::cout << "drop_target_K=none\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavelet-domain l1-l2 image deblurring"};
    app.require_subcommand(1);

    int jobs = 0;
    app.add_option("--jobs", jobs, "worker thread count (0 = library default)");

    PsfOptions psf_opts;

    auto* psf_cmd = app.add_subcommand("psf", "render a point-spread function");
    std::string psf_size = "256", psf_out;
    add_psf_flags(psf_cmd, psf_opts);
    psf_cmd->add_option("--size", psf_size, "grid size: N, RxC, or 1d:N");
    psf_cmd->add_option("--out", psf_out, "output image path");

    auto* build_cmd = app.add_subcommand("build-theta", "build and serialize the operator");
    std::string bt_size = "256", bt_filter = "symmlet6", bt_sigma_mode = "dyadic", bt_out;
    unsigned bt_levels = 4;
    std::size_t bt_K = 0;
    add_psf_flags(build_cmd, psf_opts);
    build_cmd->add_option("--size", bt_size, "grid size: N, RxC, or 1d:N");
    build_cmd->add_option("--filter", bt_filter, "wavelet filter: haar|dbN|symmletN");
    build_cmd->add_option("--levels", bt_levels, "decomposition depth J");
    build_cmd->add_option("--K", bt_K, "number of kept entries")->required();
    build_cmd->add_option("--sigma-mode", bt_sigma_mode, "thresholding weights")
        ->check(CLI::IsMember({"uniform", "dyadic"}));
    build_cmd->add_option("--out", bt_out, "operator file path")->required();

    auto* deblur_cmd = app.add_subcommand("deblur", "restore an image");
    DeblurOptions dbo;
    add_psf_flags(deblur_cmd, psf_opts);
    deblur_cmd->add_option("--in", dbo.in, "observed image (path or synthetic:<size>)")
        ->required();
    deblur_cmd->add_option("--out", dbo.out, "restored image path");
    deblur_cmd->add_option("--op", dbo.op_file, "prebuilt operator file");
    deblur_cmd->add_option("--method", dbo.method, "solver")
        ->check(CLI::IsMember({"exact-fista", "ista", "fista", "jacobi-fista", "spai-fista"}));
    deblur_cmd->add_option("--filter", dbo.filter, "wavelet filter");
    deblur_cmd->add_option("--levels", dbo.levels, "decomposition depth J");
    deblur_cmd->add_option("--lambda", dbo.lambda, "regularization scale");
    deblur_cmd->add_option("--K", dbo.K, "operator sparsity when built on the fly");
    deblur_cmd->add_option("--sigma-mode", dbo.sigma_mode, "thresholding weights")
        ->check(CLI::IsMember({"uniform", "dyadic"}));
    deblur_cmd->add_option("--eps-jacobi", dbo.eps_jacobi, "jacobi floor, relative");
    deblur_cmd->add_option("--iters", dbo.iters, "iteration budget");
    deblur_cmd->add_option("--noise", dbo.noise, "noise level for --degrade");
    deblur_cmd->add_flag("--degrade", dbo.degrade_input,
                         "blur + add noise to the input first (fixture mode)");

    auto* bench_cmd = app.add_subcommand("bench", "method/K sweep, CSV report");
    BenchOptions bo;
    add_psf_flags(bench_cmd, psf_opts);
    bench_cmd->add_option("--in", bo.in, "ground-truth image (path or synthetic:<size>)")
        ->required();
    bench_cmd->add_option("--out", bo.out, "CSV path (default stdout)");
    bench_cmd->add_option("--filter", bo.filter, "wavelet filter");
    bench_cmd->add_option("--levels", bo.levels, "decomposition depth J");
    bench_cmd->add_option("--lambda", bo.lambda, "regularization scale");
    bench_cmd->add_option("--K", bo.K, "operator sparsity values");
    bench_cmd->add_option("--drop-db", bo.drop_db, "target pSNR drop vs the exact operator");
    bench_cmd->add_option("--sigma-mode", bo.sigma_mode, "thresholding weights")
        ->check(CLI::IsMember({"uniform", "dyadic"}));
    bench_cmd->add_option("--method", bo.methods, "methods to run (repeatable)");
    bench_cmd->add_option("--eps-jacobi", bo.eps_jacobi, "jacobi floor, relative");
    bench_cmd->add_option("--noise", bo.noise, "noise standard deviation");
    bench_cmd->add_option("--max-iters", bo.max_iters, "per-run iteration cap");
    bench_cmd->add_option("--ref-iters", bo.ref_iters, "reference-optimum run length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#endif

    try {
        if (psf_cmd->parsed()) return cmd_psf(psf_opts, psf_size, psf_out);
        if (build_cmd->parsed())
            return cmd_build_theta(psf_opts, bt_size, bt_filter, bt_levels, bt_K,
                                   bt_sigma_mode, bt_out);
        if (deblur_cmd->parsed()) return cmd_deblur(psf_opts, dbo);
        if (bench_cmd->parsed()) return cmd_bench(psf_opts, bo);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NonFiniteEnergy& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const MemoryGuard& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {  // BadSpec, ShapeMismatch, ...
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
