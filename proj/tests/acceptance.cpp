// Acceptance suite: criteria 1-8, one PASS/FAIL line each.
//
//   acceptance           run everything
//   acceptance 2 5       run a subset
//
// Exit status is 0 only if every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "swt/harness.hpp"

using namespace swt;

namespace {

constexpr double pi = std::numbers::pi;

class Verdict {
public:
    void check(bool ok, const std::string& what) {
        ok_ = ok_ && ok;
        std::cout << "    [" << (ok ? " ok " : "FAIL") << "] " << what << "\n" << std::flush;
    }
    void note(const std::string& what) { std::cout << "    " << what << "\n" << std::flush; }
    bool ok() const { return ok_; }

private:
    bool ok_ = true;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_runtime(Verdict& v, std::chrono::steady_clock::time_point t0, double limit) {
    const double s = seconds_since(t0);
    v.check(s < limit, "runtime " + sci(s) + " s < " + sci(limit) + " s");
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

double l1_rel(const DensityProfile& a, const DensityProfile& b) { return compare(a, b).l1_rel; }

// |u|^2 of both solutions on the coarser of the two grids.
double density_l1(const WavefunctionGrid& a, const WavefunctionGrid& b) {
    const std::size_t n = std::min(a.size(), b.size());
    return l1_rel(detail::decimate(wavefunction_density(a), n), detail::decimate(wavefunction_density(b), n));
}

// ---------------------------------------------------------------------------

void marginal_identity(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemSpec spec = builtin_problem("problem4", 1.0 / 16);
    const WavefunctionGrid u = sample_problem(spec, 1024);
    const double k_nat = spec.epsilon / (2.0 * u.dx());
    std::vector<double> rho(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) rho[j] = std::norm(u[j]);
    const double tol = 1e-6 * *std::max_element(rho.begin(), rho.end());

    const double e_wt = max_abs_diff(marginal_x(wigner_transform(u, 1024, k_nat)), rho);
    v.check(e_wt <= tol, "max|marginal_x(WT) - |u0|^2| = " + sci(e_wt) + " <= " + sci(tol));

    const PhaseSpaceGrid S = swt::swt(u, SmoothingKernelSpec{1.0, 1.0}, 1024, k_nat);
    const double e_swt = max_abs_diff(marginal_x(S), smoothed_wavefunction_density(u, 1.0).values);
    v.check(e_swt <= tol, "max|marginal_x(SWT) - smoothed density| = " + sci(e_swt) + " <= " + sci(tol));
    check_runtime(v, t0, 30.0);
}

void husimi_positivity(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const SmoothingKernelSpec kern{1.0, 1.0};
    for (const auto& id : builtin_problem_ids()) {
        const ProblemSpec spec = builtin_problem(id, 1.0 / 16);
        const std::size_t n_x = min_n_x(spec, kern.sigma_x);
        const double k_max = effective_k_max(spec);
        const std::size_t n_k = default_n_k(k_max, spec.epsilon, kern.sigma_k);
        const PhaseSpaceGrid S = swt::swt(sample_problem(spec, n_x), kern, n_k, k_max);
        const double r = S.min() / S.max();
        v.check(r >= -1e-10, id + " (" + std::to_string(n_x) + " x " + std::to_string(n_k) + "): min/max = " + sci(r) +
                                 " >= -1e-10");
    }
    check_runtime(v, t0, 60.0);
}

void gaussian_closed_forms(Verdict& v) {
    // u = 2^(1/4) exp(-pi x^2) at eps = 1
    const Axis ax{-4.0, 4.0, 512};
    std::vector<cplx> vals(ax.n);
    for (std::size_t j = 0; j < ax.n; ++j) vals[j] = std::pow(2.0, 0.25) * std::exp(-pi * ax.at(j) * ax.at(j));
    const WavefunctionGrid u(ax, std::move(vals), 1.0);

    auto worst = [](const PhaseSpaceGrid& G, auto exact) {
        double err = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < G.n_x(); ++i)
            for (std::size_t j = 0; j < G.n_k(); ++j) {
                const double e = exact(G.x.at(i), G.k.at(j));
                err = std::max(err, std::abs(G(i, j) - e));
                peak = std::max(peak, std::abs(e));
            }
        return err / peak;
    };
    const PhaseSpaceGrid W = wigner_transform(u, 512, 4.0);
    const double e_wt = worst(W, [](double x, double k) { return 2.0 * std::exp(-2.0 * pi * (x * x + k * k)); });
    v.check(e_wt <= 1e-6, "WT vs 2 exp(-2 pi (x^2+k^2)): relative Linf " + sci(e_wt) + " <= 1e-6");

    const PhaseSpaceGrid S = swt::swt(u, SmoothingKernelSpec{1.0, 1.0}, 512, 4.0);
    const double e_swt = worst(S, [](double x, double k) { return std::exp(-pi * (x * x + k * k)); });
    v.check(e_swt <= 1e-6, "SWT vs exp(-pi (x^2+k^2)): relative Linf " + sci(e_swt) + " <= 1e-6");
}

void exact_transport(Verdict& v) {
    struct Case {
        const char* id;
        std::function<PhasePoint(PhasePoint, double)> exact;
    };
    const Case cases[] = {
        {"problem4", [](PhasePoint p, double t) { return PhasePoint{p.x + 2 * pi * p.k * t, p.k}; }},
        {"problem3", [](PhasePoint p, double t) { return PhasePoint{p.x + 2 * pi * p.k * t - t * t / 2, p.k - t / (2 * pi)}; }},
    };
    for (const auto& c : cases) {
        const ProblemSpec spec = builtin_problem(c.id, 1.0 / 16);
        const Potential V(spec.potential);
        const HamiltonianField H(V);
        const char* vname = std::holds_alternative<ZeroPotential>(spec.potential) ? "V=0" : "V=x";
        const double k_max = effective_k_max(spec);
        const PhaseSpaceGrid W0 = swt::swt(sample_problem(spec, min_n_x(spec, 1.0)), SmoothingKernelSpec{1.0, 1.0},
                                           default_n_k(k_max, spec.epsilon, 1.0), k_max);
        const ParticleEnsemble e0 = seed_particles(W0);
        const double t = 1.0;
        const double h = default_step(t, k_max, V.max_abs_slope(spec.x_min, spec.x_max));
        const ParticleEnsemble e1 = advance(e0, V, t, h);
        double pos = 0.0, drift = 0.0;
        for (std::size_t p = 0; p < e0.size(); ++p) {
            const PhasePoint q = c.exact(e0.positions[p], t);
            pos = std::max({pos, std::abs(e1.positions[p].x - q.x), std::abs(e1.positions[p].k - q.k)});
            drift = std::max(drift, std::abs(H.energy(e1.positions[p]) - H.energy(e0.positions[p])));
        }
        const std::string tag = std::string(vname) + " (" + c.id + " SWT, " + std::to_string(e0.size()) + " particles)";
        v.check(pos <= 1e-10, tag + ": max position error at t=1 " + sci(pos) + " <= 1e-10");
        v.check(drift <= 1e-10, tag + ": max Hamiltonian drift at t=1 " + sci(drift) + " <= 1e-10");

        // the sheared SWT outruns the seed lattice well before t=1; compare at the problem's horizon,
        // seeded at 8 nodes per kernel std so the gradient bound is not vacuous
        const double tr = spec.t_max;
        const double hr = default_step(tr, k_max, V.max_abs_slope(spec.x_min, spec.x_max));
        const double fine = std::sqrt(spec.epsilon / (4 * pi)) / 8;
        const std::size_t n_x = std::max(min_n_x(spec, 1.0), next_power_of_two(std::ceil((spec.x_max - spec.x_min) / fine)));
        const PhaseSpaceGrid Wf = swt::swt(sample_problem(spec, n_x), SmoothingKernelSpec{1.0, 1.0},
                                           next_power_of_two(std::ceil(2 * k_max / fine)), k_max);
        const GridGeometry g = GridGeometry::of(Wf);
        const PhaseSpaceGrid rec = reconstruct(advance(seed_particles(Wf), V, tr, hr), g).grid;
        const PhaseSpaceGrid back = backtrace_evaluate(Wf, V, tr, g, hr);
        const double bound = interpolation_error_bound(back, Wf.dx(), Wf.dk());
        const double peak = back.max_abs();
        std::size_t significant = 0, agree = 0;
        double worst = 0.0;
        for (std::size_t n = 0; n < back.values.size(); ++n)
            if (std::abs(back.values[n]) >= 1e-2 * peak) {
                ++significant;
                const double d = std::abs(rec.values[n] - back.values[n]);
                worst = std::max(worst, d);
                if (d <= 2.0 * bound) ++agree;
            }
        const double frac = significant ? static_cast<double>(agree) / static_cast<double>(significant) : 0.0;
        v.check(significant > 0 && frac >= 0.99,
                tag + ": reconstruct vs backtrace at t=" + sci(tr) + " on " + std::to_string(Wf.x.n) + " x " +
                    std::to_string(Wf.n_k()) + " within 2 x bound on " + sci(100.0 * frac) + "% of " +
                    std::to_string(significant) + " significant nodes, need >= 99% (bound " + sci(bound / peak) +
                    " max|W|, worst error " + sci(worst / peak) + " max|W|)");
    }
}

void slow_scale_validity(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    {
        const ProblemSpec spec = builtin_problem("problem4", 1.0 / 64);
        const PipelineResult r = run_pipeline(spec, PipelineParams{});
        v.check(r.report.ok && r.report.error.l1_rel <= 0.05,
                "problem4 eps=1/64 vs smoothed exact density: l1_rel " +
                    (r.report.ok ? sci(r.report.error.l1_rel) : "failed: " + r.report.message) + " <= 0.05");
    }
    for (const char* id : {"problem1", "problem2", "problem3"}) {
        const ProblemSpec spec = builtin_problem(id, 1.0 / 16);
        const PipelineResult r = run_pipeline(spec, PipelineParams{});
        if (!r.report.ok) {
            v.check(false, std::string(id) + " eps=1/16 failed in " + r.report.failed_stage + ": " + r.report.message);
            continue;
        }
        v.check(r.report.error.l1_rel <= 0.10, std::string(id) + " eps=1/16 vs " + r.report.reference_method +
                                                   " (" + std::to_string(r.report.reference_n_x) + " x " +
                                                   std::to_string(r.report.reference_n_t) + "): l1_rel " +
                                                   sci(r.report.error.l1_rel) + " <= 0.10");

        // the reference itself, against an independent solve
        const std::size_t n_x = r.report.reference_n_x, n_t = r.report.reference_n_t;
        const WavefunctionGrid ref = splitstep_solve(spec, n_x, n_t).last().u;
        if (std::string(id) == "problem3") {
            const WavefunctionGrid cn = crank_nicolson_solve(spec, 4 * n_x, 400).last().u;
            const double d = density_l1(cn, ref);
            v.check(d <= 1e-3, std::string(id) + " reference vs Crank-Nicolson " + std::to_string(4 * n_x) +
                                   " x 400: density l1 " + sci(d) + " <= 1e-3");
        } else {
            const WavefunctionGrid fine = splitstep_solve(spec, 2 * n_x, 2 * n_t).last().u;
            const double d = density_l1(fine, ref);
            v.check(d <= 1e-3, std::string(id) + " reference vs splitstep " + std::to_string(2 * n_x) + " x " +
                                   std::to_string(2 * n_t) + ": density l1 " + sci(d) +
                                   " <= 1e-3 (Crank-Nicolson cannot resolve this problem at desk scale)");
        }
    }
    check_runtime(v, t0, 600.0);
}

void scaling(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
    const SpecFamily family = [](double e) { return builtin_problem("problem4", e); };
    const BenchTable t = sweep(family, eps, bench_params, nullptr, nullptr);
    for (const auto& row : t.rows)
        v.note("eps=" + sci(row.epsilon) + "  t_total_swt=" + sci(row.t_total_swt) + " s  t_cn=" + sci(row.t_reference) +
               " s  particles=" + std::to_string(row.particles));
    auto fit = [](const SlopeFit& f) { return sci(f.slope) + " +- " + sci(f.ci_half_width); };
    v.check(t.slope_T_swt.slope <= 2.5, "slope of t_total_swt " + fit(t.slope_T_swt) + " <= 2.5");
    v.check(t.slope_T_reference.slope >= 2.8, "slope of Crank-Nicolson time " + fit(t.slope_T_reference) + " >= 2.8");
    v.check(t.slope_T_swt.slope < t.slope_T_reference.slope, "SWT slope < Crank-Nicolson slope");
    v.check(t.slope_D.slope <= 2.3, "slope of particle count " + fit(t.slope_D) + " <= 2.3");
    check_runtime(v, t0, 1200.0);
}

void wt_vs_swt(Verdict& v) {
    const ProblemSpec spec = builtin_problem("problem3", 1.0 / 64);
    const PipelineResult swt_default = run_pipeline(spec, PipelineParams{});
    if (!swt_default.report.ok) {
        v.check(false, "SWT run failed: " + swt_default.report.message);
        return;
    }
    const std::size_t budget = swt_default.report.particles;
    PipelineParams ps;
    ps.particle_budget = budget;
    const PipelineResult s = run_pipeline(spec, ps);
    PipelineParams pw;
    pw.smooth = false;
    pw.particle_budget = budget;
    const PipelineResult w = run_pipeline(spec, pw);
    if (!s.report.ok || !w.report.ok) {
        v.check(false, "run failed: " + s.report.message + w.report.message);
        return;
    }
    v.note("budget " + std::to_string(budget) + " particles; WT grid " + std::to_string(w.report.n_x) + " x " +
           std::to_string(w.report.n_k) + ", SWT grid " + std::to_string(s.report.n_x) + " x " + std::to_string(s.report.n_k));
    v.check(w.report.error.l1_rel > s.report.error.l1_rel, "WT l1_rel " + sci(w.report.error.l1_rel) + " > SWT l1_rel " +
                                                               sci(s.report.error.l1_rel));
}

ProblemSpec packet(double t_max, PotentialSpec pot) {
    ProblemSpec p;
    p.epsilon = 1.0 / 8;
    p.initial_condition = GaussianSum{{GaussianTerm{cplx(0.5, 0.0), cplx(0.0, 2 * pi * 0.4) / p.epsilon, 0.0, 0.0}}};
    p.potential = std::move(pot);
    p.t_max = t_max;
    p.x_min = -4.0;
    p.x_max = 4.0;
    return p;
}

double max_diff(const WavefunctionGrid& a, const WavefunctionGrid& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

void order_checks(Verdict& v) {
    {
        const Potential V(ExprPotential{parse_expression("sin(x)")});
        const HamiltonianField H(V);
        ParticleEnsemble e;
        e.positions = {{0.4, 0.3}};
        e.weights = {1.0};
        auto drift = [&](double h) { return std::abs(H.energy(advance(e, V, 2.0, h).positions[0]) - H.energy(e.positions[0])); };
        const double r = drift(0.05) / drift(0.025);
        v.check(std::abs(r - 16.0) <= 0.2 * 16.0, "RK4 energy error ratio under step halving, V=sin(x): " + sci(r) +
                                                       " in [12.8, 19.2]");
    }
    const ProblemSpec p = packet(0.25, LinearPotential{1.0});
    {
        const WavefunctionGrid fine = splitstep_solve(p, 512, 4096).last().u;
        const double e1 = max_diff(splitstep_solve(p, 512, 16).last().u, fine);
        const double e2 = max_diff(splitstep_solve(p, 512, 32).last().u, fine);
        v.check(std::abs(e1 / e2 - 4.0) <= 0.8, "splitstep temporal error ratio n_t 16 -> 32: " + sci(e1 / e2) +
                                                     " in [3.2, 4.8]");
    }
    {
        const WavefunctionGrid fine = crank_nicolson_solve(p, 1024, 6400).last().u;
        const double e1 = max_diff(crank_nicolson_solve(p, 1024, 100).last().u, fine);
        const double e2 = max_diff(crank_nicolson_solve(p, 1024, 200).last().u, fine);
        v.check(std::abs(e1 / e2 - 4.0) <= 0.8, "Crank-Nicolson temporal error ratio n_t 100 -> 200: " + sci(e1 / e2) +
                                                     " in [3.2, 4.8]");
    }
    {
        const WavefunctionGrid ss = splitstep_solve(p, 1024, 256).last().u;
        const WavefunctionGrid cn = crank_nicolson_solve(p, 4096, 2048).last().u;
        const double d = density_l1(cn, ss);
        v.check(d <= 1e-3, "splitstep vs Crank-Nicolson density l1 " + sci(d) + " <= 1e-3");
    }
}

} // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int number;
        const char* name;
        void (*run)(Verdict&);
    };
    const Criterion all[] = {
        {1, "marginal identity", marginal_identity},
        {2, "Husimi positivity", husimi_positivity},
        {3, "Gaussian closed forms", gaussian_closed_forms},
        {4, "exact transport", exact_transport},
        {5, "end-to-end slow-scale validity", slow_scale_validity},
        {6, "semiclassical scaling", scaling},
        {7, "WT vs SWT at equal particle budgets", wt_vs_swt},
        {8, "integrator and solver order", order_checks},
    };
    std::set<int> wanted;
    for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

    int failed = 0;
    std::vector<std::string> summary;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.number)) continue;
        std::cout << "criterion " << c.number << " (" << c.name << ")\n" << std::flush;
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(v);
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        const std::string line = "criterion " + std::to_string(c.number) + ": " + (v.ok() ? "PASS" : "FAIL") + "  " +
                                 c.name + " (" + sci(seconds_since(t0)) + " s)";
        std::cout << line << "\n\n" << std::flush;
        summary.push_back(line);
        failed += !v.ok();
    }
    std::cout << "summary\n";
    for (const auto& s : summary) std::cout << "  " << s << "\n";
    return failed ? 1 : 0;
}
