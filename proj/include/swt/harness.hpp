#ifndef SWT_HARNESS_HPP
#define SWT_HARNESS_HPP

// End-to-end runs (sample -> WT -> smooth -> seed -> advance -> reconstruct
// -> density -> compare), epsilon sweeps and log-log slope fits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "swt/dynamics.hpp"
#include "swt/error.hpp"
#include "swt/io.hpp"
#include "swt/observables.hpp"
#include "swt/phasespace.hpp"
#include "swt/reference.hpp"
#include "swt/signals.hpp"

namespace swt {

// ---------------------------------------------------------------------------
// Meshing

// Smallest power-of-two n_x that resolves the recipe and the k range
// (k_max <= eps/(2 dx)) and puts at least two nodes per x-kernel standard
// deviation. With smoothing, eps/(2 dx) also clears the signal by
// sqrt(eps ln(1e12)/(2 pi))/sigma_x, where the sampled x convolution's
// aliasing weight exp(-2 pi sigma_x^2 margin^2/eps) drops to 1e-12.
inline std::size_t min_n_x(const ProblemSpec& spec, double sigma_x) {
    const double L = spec.x_max - spec.x_min;
    double n = 64.0;
    double k = std::max(max_local_wavenumber(spec), effective_k_max(spec));
    if (sigma_x > 0.0) k += std::sqrt(spec.epsilon * std::log(1e12) / (2 * std::numbers::pi)) / sigma_x;
    if (k > 0.0) n = std::max(n, 2.0 * k * L / spec.epsilon);
    if (sigma_x > 0.0) n = std::max(n, 2.0 * L / (sigma_x * std::sqrt(spec.epsilon / (4 * std::numbers::pi))));
    return next_power_of_two(static_cast<std::size_t>(std::ceil(n)));
}

// Two k nodes per k-kernel standard deviation across [-k_max, k_max).
inline std::size_t default_n_k(double k_max, double epsilon, double sigma_k) {
    const double sd = sigma_k * std::sqrt(epsilon / (4 * std::numbers::pi));
    return next_power_of_two(static_cast<std::size_t>(std::max(64.0, std::ceil(4.0 * k_max / sd))));
}

struct ReferenceMesh {
    std::size_t n_x = 0;
    std::size_t n_t = 0;
};

// n_x = max(1024, 2^ceil(log2(16 k_max L / eps))); n_t grows like 1/eps.
inline ReferenceMesh reference_mesh(const ProblemSpec& spec, ReferenceMethod m, double k_max) {
    const double L = spec.x_max - spec.x_min;
    ReferenceMesh r;
    r.n_x = std::max<std::size_t>(1024, next_power_of_two(static_cast<std::size_t>(std::ceil(16.0 * k_max * L / spec.epsilon))));
    if (m == ReferenceMethod::splitstep) r.n_t = static_cast<std::size_t>(std::max(64.0, std::ceil(16.0 * spec.t_max / spec.epsilon)));
    else if (m == ReferenceMethod::crank_nicolson)
        r.n_t = static_cast<std::size_t>(std::max(100.0, std::ceil(64.0 * spec.t_max * std::max(1.0, k_max * k_max) / spec.epsilon)));
    return r;
}

// Crank-Nicolson cost mesh for sweeps: dx and dt both shrink like eps^1.5,
// which keeps its O(dx^2 + dt^2) phase error on eps-scale waves bounded.
// n_x * n_t grows like eps^-3.
inline ReferenceMesh cn_benchmark_mesh(double epsilon) {
    ReferenceMesh r;
    r.n_x = next_power_of_two(static_cast<std::size_t>(std::ceil(45.0 * std::pow(epsilon, -1.5))));
    r.n_t = static_cast<std::size_t>(std::ceil(512.0 / (epsilon * epsilon * epsilon * static_cast<double>(r.n_x))));
    return r;
}

inline ReferenceMethod default_reference(const ProblemSpec& spec) {
    if (std::holds_alternative<GaussianSum>(spec.initial_condition) && std::holds_alternative<ZeroPotential>(spec.potential))
        return ReferenceMethod::exact_free_gaussian;
    return ReferenceMethod::splitstep;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineParams {
    std::size_t n_x = 0;        // 0: spec.n_x, else min_n_x
    std::size_t n_k = 0;        // 0: default_n_k (or n_x for an unsmoothed run)
    double k_max = 0.0;         // 0: effective_k_max(spec)
    double sigma_x = 1.0;
    double sigma_k = 1.0;
    bool smooth = true;         // false propagates the plain WT
    double eta = 1e-3;
    std::size_t particle_budget = 0;  // > 0: seed the largest nodes instead of thresholding
    double h = 0.0;             // 0: default_step
    std::vector<double> output_times;  // empty: {t_max}
    bool compare = true;
    std::optional<ReferenceMethod> reference;  // empty: default_reference
    ReferenceMesh reference_mesh;               // zeros: reference_mesh()
    std::vector<std::pair<ReferenceMethod, ReferenceMesh>> timed_references;
    WignerOptions wigner;
    unsigned threads = 1;
    std::string out_dir;        // empty: persist nothing
};

struct StageTimings {
    double sample = 0.0;
    double wt = 0.0;
    double smooth = 0.0;
    double seed = 0.0;
    double advance = 0.0;
    double reconstruct = 0.0;
    double observables = 0.0;

    double total() const { return sample + wt + smooth + seed + advance + reconstruct + observables; }
};

struct RunReport {
    std::string problem_id;
    double epsilon = 0.0;
    double t_max = 0.0;
    double sigma_x = 0.0;
    double sigma_k = 0.0;
    StageTimings timings;
    std::string reference_method;
    std::size_t reference_n_x = 0;
    std::size_t reference_n_t = 0;
    std::map<std::string, double> reference_timings;  // method name -> seconds
    std::size_t particles = 0;
    std::size_t n_x = 0;
    std::size_t n_k = 0;
    double k_max = 0.0;
    double h = 0.0;
    ErrorReport error;
    double coverage_gap = 0.0;
    bool ok = false;
    std::string failed_stage;
    std::string message;
};

struct PipelineResult {
    RunReport report;
    std::vector<DensityProfile> densities;  // one per output time
    std::vector<DensityProfile> references;
    PhaseSpaceGrid initial;                 // the seeded transform
    PhaseSpaceGrid final;                   // reconstruction at the last output time
};

namespace detail {

// Keeps every r-th node of a density sampled on a finer grid over the same box.
inline DensityProfile decimate(const DensityProfile& d, std::size_t n) {
    if (d.x.n % n != 0) throw input_error("reference grid is not a multiple of the pipeline grid");
    const std::size_t r = d.x.n / n;
    DensityProfile out = d;
    out.x.n = n;
    out.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.values[j] = d.values[j * r];
    return out;
}

template <class F>
auto timed(double& slot, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
        f();
        slot += seconds_since(t0);
    } else {
        auto r = f();
        slot += seconds_since(t0);
        return r;
    }
}

inline void write_lines(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot write '" + path + "'");
    body(os);
}

} // namespace detail

inline void write_report(std::ostream& os, const RunReport& r) {
    os << "problem=" << r.problem_id << "\n"
       << "ok=" << (r.ok ? "true" : "false") << "\n";
    if (!r.ok) os << "failed_stage=" << r.failed_stage << "\nmessage=" << r.message << "\n";
    os << "epsilon=" << io::fmt(r.epsilon) << "\nt_max=" << io::fmt(r.t_max) << "\nsigma_x=" << io::fmt(r.sigma_x)
       << "\nsigma_k=" << io::fmt(r.sigma_k) << "\nn_x=" << r.n_x << "\nn_k=" << r.n_k << "\nk_max=" << io::fmt(r.k_max)
       << "\nh=" << io::fmt(r.h) << "\nparticles=" << r.particles << "\n"
       << "t_sample=" << io::fmt(r.timings.sample) << "\nt_wt=" << io::fmt(r.timings.wt)
       << "\nt_smooth=" << io::fmt(r.timings.smooth) << "\nt_seed=" << io::fmt(r.timings.seed)
       << "\nt_advance=" << io::fmt(r.timings.advance) << "\nt_reconstruct=" << io::fmt(r.timings.reconstruct)
       << "\nt_observables=" << io::fmt(r.timings.observables) << "\nt_total_swt=" << io::fmt(r.timings.total()) << "\n";
    if (!r.reference_method.empty())
        os << "reference=" << r.reference_method << "\nreference_n_x=" << r.reference_n_x
           << "\nreference_n_t=" << r.reference_n_t << "\n";
    for (const auto& [m, t] : r.reference_timings) os << "t_reference_" << m << "=" << io::fmt(t) << "\n";
    os << "l1_rel=" << io::fmt(r.error.l1_rel) << "\nl2_rel=" << io::fmt(r.error.l2_rel)
       << "\nlinf_rel=" << io::fmt(r.error.linf_rel) << "\nmass_ratio=" << io::fmt(r.error.mass_ratio)
       << "\ncoverage_gap=" << io::fmt(r.coverage_gap) << "\n";
}

inline PipelineResult run_pipeline(const ProblemSpec& spec, PipelineParams params) {
    PipelineResult res;
    RunReport& rep = res.report;
    rep.problem_id = spec.id;
    rep.epsilon = spec.epsilon;
    rep.t_max = spec.t_max;
    rep.sigma_x = params.smooth ? params.sigma_x : 0.0;
    rep.sigma_k = params.smooth ? params.sigma_k : 0.0;
    std::string stage = "setup";
    try {
        if (params.output_times.empty()) params.output_times = {spec.t_max};
        std::sort(params.output_times.begin(), params.output_times.end());
        if (params.output_times.front() < 0.0) throw input_error("output times must be non-negative");
        if (params.n_x == 0) params.n_x = spec.n_x ? spec.n_x : min_n_x(spec, params.smooth ? params.sigma_x : 0.0);
        rep.n_x = params.n_x;
        rep.k_max = params.k_max > 0.0 ? params.k_max : effective_k_max(spec);
        if (params.n_k == 0) params.n_k = params.smooth ? default_n_k(rep.k_max, spec.epsilon, params.sigma_k) : params.n_x;
        rep.n_k = params.n_k;
        params.wigner.threads = params.threads;
        params.wigner.sigma_k = params.smooth ? params.sigma_k : 0.0;
        const Potential V(spec.potential);

        stage = "sample";
        const WavefunctionGrid u0 = detail::timed(rep.timings.sample, [&] { return sample_problem(spec, params.n_x); });

        stage = "wt";
        PhaseSpaceGrid W = detail::timed(rep.timings.wt, [&] { return wigner_transform(u0, params.n_k, rep.k_max, params.wigner); });

        if (params.smooth) {
            stage = "smooth";
            W = detail::timed(rep.timings.smooth, [&] {
                return smooth(W, SmoothingKernelSpec{params.sigma_x, params.sigma_k}, params.threads);
            });
        }

        stage = "seed";
        ParticleEnsemble ens = detail::timed(rep.timings.seed, [&] {
            return params.particle_budget > 0 ? seed_top_particles(W, params.particle_budget) : seed_particles(W, params.eta);
        });
        rep.particles = ens.size();
        const GridGeometry target = GridGeometry::of(W);
        res.initial = std::move(W);

        rep.h = params.h > 0.0 ? params.h
                               : default_step(params.output_times.back(), rep.k_max,
                                              V.max_abs_slope(spec.x_min, spec.x_max));
        for (double t : params.output_times) {
            stage = "advance";
            ens = detail::timed(rep.timings.advance, [&] { return advance(ens, V, t, rep.h, params.threads); });
            stage = "reconstruct";
            Reconstruction rec = detail::timed(rep.timings.reconstruct, [&] { return reconstruct(ens, target, params.threads); });
            rep.coverage_gap = rec.coverage_gap;
            stage = "observables";
            res.densities.push_back(detail::timed(rep.timings.observables, [&] { return phase_space_norm_density(rec.grid); }));
            res.final = std::move(rec.grid);
        }

        if (params.compare) {
            stage = "reference";
            const ReferenceMethod m = params.reference.value_or(default_reference(spec));
            ReferenceMesh mesh = params.reference_mesh;
            const ReferenceMesh dflt = reference_mesh(spec, m, rep.k_max);
            if (mesh.n_x == 0) mesh.n_x = m == ReferenceMethod::exact_free_gaussian ? params.n_x : std::max(dflt.n_x, params.n_x);
            if (mesh.n_t == 0) mesh.n_t = dflt.n_t;
            rep.reference_method = method_name(m);
            rep.reference_n_x = mesh.n_x;
            rep.reference_n_t = mesh.n_t;
            const ReferenceRun run = reference_solve(m, spec, mesh.n_x, mesh.n_t, params.output_times);
            rep.reference_timings[method_name(m)] = run.wall_time;
            for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
                const auto& snap = run.snapshots[s];
                DensityProfile ref = params.smooth ? smoothed_wavefunction_density(snap.u, params.sigma_x, snap.t)
                                                   : wavefunction_density(snap.u, snap.t);
                res.references.push_back(detail::decimate(ref, params.n_x));
            }
            stage = "compare";
            rep.error = compare(res.densities.back(), res.references.back());
        }
        for (const auto& [m, mesh] : params.timed_references) {
            stage = std::string("reference ") + method_name(m);
            const ReferenceRun run = reference_solve(m, spec, mesh.n_x, mesh.n_t, {spec.t_max});
            rep.reference_timings[method_name(m)] = run.wall_time;
        }
        rep.ok = true;

        if (!params.out_dir.empty()) {
            stage = "persist";
            namespace fs = std::filesystem;
            const fs::path dir(params.out_dir);
            fs::create_directories(dir);
            write_swtg((dir / "initial.swtg").string(), res.initial);
            write_swtg((dir / "final.swtg").string(), res.final);
            for (std::size_t s = 0; s < res.densities.size(); ++s) {
                const std::string tag = "_t" + io::fmt(res.densities[s].t);
                write_density_csv((dir / ("density" + tag + ".csv")).string(), res.densities[s]);
                if (s < res.references.size())
                    write_density_csv((dir / ("reference" + tag + ".csv")).string(), res.references[s]);
            }
            detail::write_lines((dir / "report.txt").string(), [&](std::ostream& os) { write_report(os, rep); });
        }
    } catch (const error& e) {
        rep.ok = false;
        rep.failed_stage = stage;
        rep.message = e.what();
    }
    return res;
}

// ---------------------------------------------------------------------------
// Slopes and sweeps

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci_half_width = 0.0;  // 95%, Student t with n-2 dof
};

// OLS of log(value) on log(1/epsilon).
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 3) throw input_error("slope fit needs at least 3 points");
    const double n = static_cast<double>(pairs.size());
    double sx = 0, sy = 0;
    std::vector<double> xs, ys;
    for (const auto& [eps, v] : pairs) {
        if (!(eps > 0.0)) throw input_error("slope fit: epsilon must be positive");
        if (!(v > 0.0)) throw input_error("slope fit: values must be positive, got " + io::fmt(v));
        xs.push_back(std::log(1.0 / eps));
        ys.push_back(std::log(v));
        sx += xs.back();
        sy += ys.back();
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw input_error("slope fit needs at least two distinct epsilons");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - f.intercept - f.slope * xs[i];
        sse += r * r;
    }
    const double se = std::sqrt(sse / (n - 2) / sxx);
    const boost::math::students_t dist(n - 2);
    f.ci_half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
    return f;
}

struct BenchRow {
    double epsilon = 0.0;
    double t_sample = 0.0, t_wt = 0.0, t_smooth = 0.0, t_seed = 0.0, t_advance = 0.0, t_reconstruct = 0.0;
    double t_total_swt = 0.0;
    double t_reference = 0.0;
    std::size_t particles = 0, n_x = 0, n_k = 0;
    double l1_rel = 0.0;
    double coverage_gap = 0.0;

    friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct BenchTable {
    std::vector<BenchRow> rows;
    SlopeFit slope_T_swt, slope_T_reference, slope_D;
    bool timings_comparable = true;

    void fit() {
        std::vector<std::pair<double, double>> t, r, d;
        for (const auto& row : rows) {
            t.emplace_back(row.epsilon, row.t_total_swt);
            r.emplace_back(row.epsilon, row.t_reference);
            d.emplace_back(row.epsilon, static_cast<double>(row.particles));
        }
        slope_T_swt = fit_slope(t);
        slope_T_reference = fit_slope(r);
        slope_D = fit_slope(d);
    }
};

inline const char* bench_header() {
    return "epsilon,inv_epsilon,t_sample,t_wt,t_smooth,t_seed,t_advance,t_reconstruct,t_total_swt,t_reference,particles,n_x,"
           "n_k,l1_rel,coverage_gap";
}

inline BenchRow bench_row(const RunReport& r, const std::string& reference) {
    BenchRow b;
    b.epsilon = r.epsilon;
    b.t_sample = r.timings.sample;
    b.t_wt = r.timings.wt;
    b.t_smooth = r.timings.smooth;
    b.t_seed = r.timings.seed;
    b.t_advance = r.timings.advance;
    b.t_reconstruct = r.timings.reconstruct;
    b.t_total_swt = r.timings.total();
    if (auto it = r.reference_timings.find(reference); it != r.reference_timings.end()) b.t_reference = it->second;
    b.particles = r.particles;
    b.n_x = r.n_x;
    b.n_k = r.n_k;
    b.l1_rel = r.error.l1_rel;
    b.coverage_gap = r.coverage_gap;
    return b;
}

inline void write_bench_row(std::ostream& os, const BenchRow& b) {
    os << io::fmt(b.epsilon) << ',' << io::fmt(1.0 / b.epsilon) << ',' << io::fmt(b.t_sample) << ',' << io::fmt(b.t_wt)
       << ',' << io::fmt(b.t_smooth) << ',' << io::fmt(b.t_seed) << ',' << io::fmt(b.t_advance) << ','
       << io::fmt(b.t_reconstruct) << ',' << io::fmt(b.t_total_swt) << ',' << io::fmt(b.t_reference) << ','
       << b.particles << ',' << b.n_x << ',' << b.n_k << ',' << io::fmt(b.l1_rel) << ',' << io::fmt(b.coverage_gap)
       << '\n';
}

inline void write_bench_slopes(std::ostream& os, const BenchTable& t) {
    auto line = [&](const char* name, const SlopeFit& f) {
        os << "# " << name << "=" << io::fmt(f.slope) << " ci=" << io::fmt(f.ci_half_width)
           << " intercept=" << io::fmt(f.intercept) << '\n';
    };
    line("slope_T_swt", t.slope_T_swt);
    line("slope_T_reference", t.slope_T_reference);
    line("slope_D", t.slope_D);
    if (!t.timings_comparable) os << "# timings_comparable=false\n";
}

inline void write_bench_csv(std::ostream& os, const BenchTable& t) {
    os << bench_header() << '\n';
    for (const auto& r : t.rows) write_bench_row(os, r);
    write_bench_slopes(os, t);
}

inline BenchTable read_bench_csv(std::istream& is) {
    BenchTable t;
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != bench_header()) throw input_error("bench CSV: unexpected header");
    auto integer = [](const std::string& s) {
        const double v = io::parse_double(s);
        if (v < 0 || v != std::floor(v)) throw input_error("bench CSV: expected a count, got '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    while (std::getline(is, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string first;
            ss >> first;
            const auto eq = first.find('=');
            if (eq == std::string::npos) continue;
            const std::string name = first.substr(0, eq), val = first.substr(eq + 1);
            if (name == "timings_comparable") {
                t.timings_comparable = val == "true";
                continue;
            }
            SlopeFit* f = name == "slope_T_swt" ? &t.slope_T_swt
                          : name == "slope_T_reference" ? &t.slope_T_reference
                          : name == "slope_D" ? &t.slope_D : nullptr;
            if (!f) throw input_error("bench CSV: unknown trailer '" + name + "'");
            f->slope = io::parse_double(val);
            std::string field;
            while (ss >> field) {
                const auto e2 = field.find('=');
                if (e2 == std::string::npos) throw input_error("bench CSV: malformed trailer field '" + field + "'");
                const std::string k = field.substr(0, e2);
                const double v = io::parse_double(field.substr(e2 + 1));
                if (k == "ci") f->ci_half_width = v;
                else if (k == "intercept") f->intercept = v;
                else throw input_error("bench CSV: unknown trailer field '" + k + "'");
            }
            continue;
        }
        std::vector<std::string> cells;
        std::size_t p = 0;
        while (p <= line.size()) {
            std::size_t q = line.find(',', p);
            if (q == std::string::npos) q = line.size();
            cells.push_back(line.substr(p, q - p));
            p = q + 1;
        }
        if (cells.size() != 15) throw input_error("bench CSV: expected 15 columns, got " + std::to_string(cells.size()));
        BenchRow b;
        b.epsilon = io::parse_double(cells[0]);
        b.t_sample = io::parse_double(cells[2]);
        b.t_wt = io::parse_double(cells[3]);
        b.t_smooth = io::parse_double(cells[4]);
        b.t_seed = io::parse_double(cells[5]);
        b.t_advance = io::parse_double(cells[6]);
        b.t_reconstruct = io::parse_double(cells[7]);
        b.t_total_swt = io::parse_double(cells[8]);
        b.t_reference = io::parse_double(cells[9]);
        b.particles = integer(cells[10]);
        b.n_x = integer(cells[11]);
        b.n_k = integer(cells[12]);
        b.l1_rel = io::parse_double(cells[13]);
        b.coverage_gap = io::parse_double(cells[14]);
        t.rows.push_back(b);
    }
    return t;
}

using SpecFamily = std::function<ProblemSpec(double epsilon)>;
using ParamsPolicy = std::function<PipelineParams(const ProblemSpec&)>;

// Sweep defaults for a problem family: n_x ~ 128/eps, n_k = n_x/4, the
// comparison reference from default_reference(), and Crank-Nicolson timed on
// cn_benchmark_mesh().
inline PipelineParams bench_params(const ProblemSpec& spec) {
    PipelineParams p;
    p.n_x = std::max(min_n_x(spec, 1.0), next_power_of_two(static_cast<std::size_t>(std::ceil(128.0 / spec.epsilon))));
    p.n_k = p.n_x / 4;
    p.timed_references = {{ReferenceMethod::crank_nicolson, cn_benchmark_mesh(spec.epsilon)}};
    return p;
}

// Each run is single-threaded. By default runs are also sequential;
// `parallel` runs the epsilons concurrently and marks the timings as not
// comparable. Rows are streamed to `csv` in input order; a failed run throws
// after the partial table is flushed.
inline BenchTable sweep(const SpecFamily& family, const std::vector<double>& epsilons, const ParamsPolicy& policy,
                        std::ostream* csv = nullptr, std::ostream* log = nullptr, bool parallel = false) {
    std::vector<double> distinct = epsilons;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw input_error("a sweep needs at least 4 distinct epsilons");
    for (double e : epsilons)
        if (!(e > 0.0)) throw input_error("sweep epsilons must be positive");
    BenchTable table;
    table.timings_comparable = !parallel;

    struct Job {
        std::string timed_ref;
        PipelineResult res;
    };
    auto run_one = [&](double eps) {
        const ProblemSpec spec = family(eps);
        PipelineParams params = policy(spec);
        params.threads = 1;
        Job j;
        j.timed_ref = params.timed_references.empty() ? method_name(params.reference.value_or(default_reference(spec)))
                                                      : method_name(params.timed_references.front().first);
        j.res = run_pipeline(spec, params);
        return j;
    };
    std::vector<std::future<Job>> pending;
    if (parallel)
        for (double eps : epsilons) pending.push_back(std::async(std::launch::async, run_one, eps));

    if (csv) *csv << bench_header() << '\n' << std::flush;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double eps = epsilons[i];
        const Job job = parallel ? pending[i].get() : run_one(eps);
        const RunReport& rep = job.res.report;
        if (!rep.ok) {
            if (csv) *csv << std::flush;
            for (std::size_t j = i + 1; j < pending.size(); ++j) pending[j].wait();
            throw numeric_error("sweep run at epsilon=" + io::fmt(eps) + " failed in stage " + rep.failed_stage + ": " +
                                rep.message);
        }
        table.rows.push_back(bench_row(rep, job.timed_ref));
        if (csv) {
            write_bench_row(*csv, table.rows.back());
            *csv << std::flush;
        }
        if (log) {
            *log << "eps=" << io::fmt(eps) << " t_total_swt=" << io::fmt(table.rows.back().t_total_swt)
                 << " t_reference=" << io::fmt(table.rows.back().t_reference) << " particles=" << table.rows.back().particles
                 << " l1_rel=" << io::fmt(table.rows.back().l1_rel) << '\n' << std::flush;
        }
    }
    table.fit();
    for (const auto* f : {&table.slope_T_swt, &table.slope_T_reference, &table.slope_D})
        if (!std::isfinite(f->slope)) throw numeric_error("fitted slope is not finite");
    if (csv) write_bench_slopes(*csv, table);
    return table;
}

} // namespace swt

#endif
