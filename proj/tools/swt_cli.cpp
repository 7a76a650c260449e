// swt: command-line front end for the smoothed Wigner transform pipeline.
//
//   swt problems
//   swt transform  --problem problem4 --epsilon 1/16 --out out [--raw]
//   swt propagate  --config p3.cfg --out run --times 0.05,0.1
//   swt reference  splitstep --problem problem3 --n-t 400
//   swt compare    a.csv b.csv
//   swt bench      --problem problem4 --epsilons 1/8,1/16,1/32,1/64,1/128
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "swt/harness.hpp"

namespace fs = std::filesystem;
using namespace swt;

namespace {

struct Globals {
    std::string config;
    std::string problem;
    std::string epsilon;
    std::string out;
    std::optional<double> eta;
    std::optional<double> sigma_x, sigma_k;
    std::optional<unsigned> threads;
    std::optional<std::size_t> n_x, n_k;
    std::optional<double> k_max, t_max;
    std::string window = "auto";
};

double parse_value(const std::string& s, const std::string& what) { return detail::parse_constant(s, what); }

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::size_t p = 0;
    while (p <= s.size()) {
        std::size_t q = s.find(',', p);
        if (q == std::string::npos) q = s.size();
        const std::string item = detail::trim(std::string_view(s).substr(p, q - p));
        if (item.empty()) throw input_error("empty entry in " + what + " list '" + s + "'");
        out.push_back(parse_value(item, what));
        p = q + 1;
    }
    return out;
}

ProblemSpec load_spec(const Globals& g) {
    ProblemSpec p;
    if (!g.config.empty() && !g.problem.empty()) throw input_error("give either --config or --problem, not both");
    if (!g.config.empty()) p = load_problem_config(g.config);
    else if (!g.problem.empty()) p = builtin_problem(g.problem, g.epsilon.empty() ? 1.0 / 16 : parse_value(g.epsilon, "epsilon"));
    else throw input_error("no problem given: use --config FILE or --problem ID (see `swt problems`)");
    if (!g.epsilon.empty()) p.epsilon = parse_value(g.epsilon, "epsilon");
    if (!(p.epsilon > 0.0)) throw input_error("epsilon must be positive");
    if (g.t_max) p.t_max = *g.t_max;
    if (g.k_max) p.k_max = *g.k_max;
    if (g.n_x) p.n_x = *g.n_x;
    if (g.sigma_x) p.sigma_x = *g.sigma_x;
    if (g.sigma_k) p.sigma_k = *g.sigma_k;
    return p;
}

LagWindow parse_window(const std::string& w) {
    if (w == "auto") return LagWindow::automatic;
    if (w == "periodic") return LagWindow::periodic;
    if (w == "zero") return LagWindow::zero_extended;
    throw input_error("unknown lag window '" + w + "' (auto, periodic, zero)");
}

PipelineParams base_params(const Globals& g, const ProblemSpec& spec) {
    PipelineParams p;
    p.n_x = spec.n_x;
    if (g.n_k) p.n_k = *g.n_k;
    p.sigma_x = spec.sigma_x;
    p.sigma_k = spec.sigma_k;
    if (g.eta) p.eta = *g.eta;
    p.threads = g.threads.value_or(1);
    p.wigner.window = parse_window(g.window);
    return p;
}

std::string out_dir(const Globals& g, const char* fallback) {
    const std::string d = g.out.empty() ? fallback : g.out;
    fs::create_directories(d);
    return d;
}

int cmd_problems() {
    for (const auto& id : builtin_problem_ids()) {
        const auto p = builtin_problem(id, 1.0 / 16);
        std::cout << id << ": " << builtin_problem_formula(id) << "\n    domain [" << io::fmt(p.x_min) << ", "
                  << io::fmt(p.x_max) << "], t_max " << io::fmt(p.t_max) << "\n";
    }
    return 0;
}

int cmd_transform(const Globals& g, bool raw, bool csv) {
    const ProblemSpec spec = load_spec(g);
    const PipelineParams params = base_params(g, spec);
    const std::size_t n_x = params.n_x ? params.n_x : min_n_x(spec, raw ? 0.0 : params.sigma_x);
    const double k_max = effective_k_max(spec);
    const std::size_t n_k = params.n_k ? params.n_k : raw ? n_x : default_n_k(k_max, spec.epsilon, params.sigma_k);
    const WavefunctionGrid u = sample_problem(spec, n_x);
    WignerOptions wo = params.wigner;
    wo.threads = params.threads;
    if (!raw) wo.sigma_k = params.sigma_k;
    PhaseSpaceGrid W = wigner_transform(u, n_k, k_max, wo);
    if (!raw) W = smooth(W, SmoothingKernelSpec{params.sigma_x, params.sigma_k}, params.threads);
    const std::string dir = out_dir(g, ".");
    const std::string path = (fs::path(dir) / (raw ? "wt.swtg" : "swt.swtg")).string();
    write_swtg(path, W);
    if (csv) {
        std::ofstream os(fs::path(dir) / (raw ? "wt.csv" : "swt.csv"));
        write_grid_csv(os, W);
    }
    const auto [mn, mx] = std::minmax_element(W.values.begin(), W.values.end());
    std::cout << "wrote " << path << "\nn_x=" << n_x << "\nn_k=" << n_k << "\nk_max=" << io::fmt(k_max)
              << "\nsigma_x=" << io::fmt(W.sigma_x) << "\nsigma_k=" << io::fmt(W.sigma_k) << "\nmin=" << io::fmt(*mn)
              << "\nmax=" << io::fmt(*mx) << "\n";
    return 0;
}

int cmd_propagate(const Globals& g, const std::string& times, std::size_t particles, double h, const std::string& ref,
                  bool no_compare, bool raw) {
    const ProblemSpec spec = load_spec(g);
    PipelineParams params = base_params(g, spec);
    if (!times.empty()) params.output_times = parse_list(times, "times");
    params.particle_budget = particles;
    params.h = h;
    params.smooth = !raw;
    params.compare = !no_compare;
    if (!ref.empty()) params.reference = parse_method(ref);
    params.out_dir = out_dir(g, "swt_out");
    const PipelineResult r = run_pipeline(spec, params);
    write_report(std::cout, r.report);
    if (!r.report.ok) {
        std::cerr << "swt: propagate failed in stage " << r.report.failed_stage << ": " << r.report.message << "\n";
        return 2;
    }
    return 0;
}

int cmd_reference(const Globals& g, const std::string& method, std::size_t n_t, const std::string& times, bool smoothed) {
    const ProblemSpec spec = load_spec(g);
    const ReferenceMethod m = parse_method(method);
    const ReferenceMesh dflt = reference_mesh(spec, m, effective_k_max(spec));
    const std::size_t n_x = spec.n_x ? spec.n_x : dflt.n_x;
    const std::vector<double> ts = times.empty() ? detail::default_times(spec) : parse_list(times, "times");
    const ReferenceRun run = reference_solve(m, spec, n_x, n_t ? n_t : dflt.n_t, ts);
    const std::string dir = out_dir(g, "swt_out");
    std::cout << "method=" << method_name(m) << "\nn_x=" << n_x << "\nn_t=" << (n_t ? n_t : dflt.n_t)
              << "\nwall_time=" << io::fmt(run.wall_time) << "\n";
    for (const auto& s : run.snapshots) {
        const std::string tag = "reference_" + std::string(method_name(m)) + "_t" + io::fmt(s.t);
        write_swtc((fs::path(dir) / (tag + ".swtc")).string(), s.u, s.t);
        const DensityProfile d = smoothed ? smoothed_wavefunction_density(s.u, spec.sigma_x, s.t) : wavefunction_density(s.u, s.t);
        const std::string path = (fs::path(dir) / (tag + ".csv")).string();
        write_density_csv(path, d);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b) {
    const ErrorReport e = compare(read_density_csv(a), read_density_csv(b));
    std::cout << "l1_rel=" << io::fmt(e.l1_rel) << "\nl2_rel=" << io::fmt(e.l2_rel) << "\nlinf_rel=" << io::fmt(e.linf_rel)
              << "\nmass_ratio=" << io::fmt(e.mass_ratio) << "\n";
    return 0;
}

int cmd_bench(const Globals& g, const std::string& eps_list, bool parallel) {
    if (g.threads) throw input_error("--threads is not accepted by bench: every timed stage runs single-threaded");
    const ProblemSpec base = load_spec(g);
    const std::vector<double> eps = eps_list.empty() ? std::vector<double>{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128}
                                                     : parse_list(eps_list, "epsilons");
    // n_x scales with epsilon; a fixed one from the problem file is dropped.
    const SpecFamily family = [&](double e) {
        ProblemSpec s = base;
        s.epsilon = e;
        s.n_x = 0;
        return s;
    };
    const ParamsPolicy policy = [&](const ProblemSpec& s) {
        PipelineParams p = bench_params(s);
        p.sigma_x = s.sigma_x;
        p.sigma_k = s.sigma_k;
        if (g.eta) p.eta = *g.eta;
        if (g.n_k) p.n_k = *g.n_k;
        p.wigner.window = parse_window(g.window);
        return p;
    };
    const std::string dir = out_dir(g, "swt_out");
    const std::string path = (fs::path(dir) / "bench.csv").string();
    std::ofstream csv(path);
    if (!csv) throw input_error("cannot write '" + path + "'");
    const BenchTable t = sweep(family, eps, policy, &csv, &std::cerr, parallel);
    write_bench_csv(std::cout, t);
    std::cerr << "wrote " << path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Smoothed Wigner transform: phase-space simulation of semiclassical Schrodinger dynamics"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "Problem file")->check(CLI::ExistingFile);
    app.add_option("--problem", g.problem, "Built-in problem id");
    app.add_option("--epsilon", g.epsilon, "Semiclassical parameter, e.g. 1/64");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--seed-eta", g.eta, "Seeding threshold relative to max|W|")->check(CLI::PositiveNumber);
    app.add_option("--sigma-x", g.sigma_x, "Smoothing width in x")->check(CLI::PositiveNumber);
    app.add_option("--sigma-k", g.sigma_k, "Smoothing width in k")->check(CLI::PositiveNumber);
    app.add_option("--threads", g.threads, "Worker threads (not for bench)")->check(CLI::PositiveNumber);
    app.add_option("--n-x", g.n_x, "Spatial grid size (power of two)");
    app.add_option("--n-k", g.n_k, "Wavenumber grid size");
    app.add_option("--k-max", g.k_max, "Half-width of the k range")->check(CLI::PositiveNumber);
    app.add_option("--t-max", g.t_max, "Final time")->check(CLI::NonNegativeNumber);
    app.add_option("--window", g.window, "WT lag window: auto, periodic, zero");

    auto* problems = app.add_subcommand("problems", "List the built-in problems");

    bool raw = false, csv = false;
    auto* transform = app.add_subcommand("transform", "Write the WT or SWT of the initial data");
    transform->add_flag("--raw", raw, "Unsmoothed Wigner transform");
    transform->add_flag("--csv", csv, "Also write the grid as CSV");

    std::string times, ref;
    std::size_t particles = 0;
    double h = 0.0;
    bool no_compare = false, prop_raw = false;
    auto* propagate = app.add_subcommand("propagate", "Run the full pipeline");
    propagate->add_option("--times", times, "Output times, comma separated");
    propagate->add_option("--particles", particles, "Seed this many largest nodes instead of thresholding");
    propagate->add_option("--step", h, "RK4 step")->check(CLI::PositiveNumber);
    propagate->add_option("--reference", ref, "Comparison reference: splitstep, cn, exact");
    propagate->add_flag("--no-compare", no_compare, "Skip the reference comparison");
    propagate->add_flag("--raw", prop_raw, "Propagate the unsmoothed WT");

    std::string method, ref_times;
    std::size_t n_t = 0;
    bool smoothed = false;
    auto* reference = app.add_subcommand("reference", "Solve the Schrodinger equation directly");
    reference->add_option("method", method, "splitstep, cn or exact")->required();
    reference->add_option("--n-t", n_t, "Time steps");
    reference->add_option("--times", ref_times, "Snapshot times, comma separated");
    reference->add_flag("--smoothed", smoothed, "Write the sigma_x-smoothed density");

    std::string file_a, file_b;
    auto* cmp = app.add_subcommand("compare", "Compare two density CSV files");
    cmp->add_option("a", file_a, "Density CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("b", file_b, "Reference density CSV")->required()->check(CLI::ExistingFile);

    std::string eps_list;
    bool parallel = false;
    auto* bench = app.add_subcommand("bench", "Epsilon sweep with timing table and fitted slopes");
    bench->add_option("--epsilons", eps_list, "Comma separated, e.g. 1/8,1/16,1/32,1/64");
    bench->add_flag("--parallel-sweep", parallel, "Run epsilons concurrently; timings are marked non-comparable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*problems) return cmd_problems();
        if (*transform) return cmd_transform(g, raw, csv);
        if (*propagate) return cmd_propagate(g, times, particles, h, ref, no_compare, prop_raw);
        if (*reference) return cmd_reference(g, method, n_t, ref_times, smoothed);
        if (*cmp) return cmd_compare(file_a, file_b);
        if (*bench) return cmd_bench(g, eps_list, parallel);
    } catch (const input_error& e) {
        std::cerr << "swt: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "swt: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
