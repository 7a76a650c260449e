#ifndef SWT_REFERENCE_HPP
#define SWT_REFERENCE_HPP

// Reference solvers for  i eps u_t = -(eps^2/2) u_xx + V(x) u  on a periodic box.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "swt/error.hpp"
#include "swt/fft.hpp"
#include "swt/io.hpp"
#include "swt/signals.hpp"

namespace swt {

enum class ReferenceMethod { splitstep, crank_nicolson, exact_free_gaussian };

inline const char* method_name(ReferenceMethod m) {
    switch (m) {
    case ReferenceMethod::splitstep: return "splitstep";
    case ReferenceMethod::crank_nicolson: return "cn";
    case ReferenceMethod::exact_free_gaussian: return "exact";
    }
    return "?";
}

inline ReferenceMethod parse_method(std::string_view s) {
    if (s == "splitstep") return ReferenceMethod::splitstep;
    if (s == "cn" || s == "crank_nicolson") return ReferenceMethod::crank_nicolson;
    if (s == "exact" || s == "exact_free_gaussian") return ReferenceMethod::exact_free_gaussian;
    throw input_error("unknown reference method '" + std::string(s) + "' (expected splitstep, cn or exact)");
}

struct Snapshot {
    double t = 0.0;
    WavefunctionGrid u;
};

struct ReferenceRun {
    ReferenceMethod method = ReferenceMethod::splitstep;
    std::vector<Snapshot> snapshots;
    double wall_time = 0.0;
    std::size_t dof = 0;
    std::size_t n_t = 0;

    const Snapshot& last() const {
        if (snapshots.empty()) throw error("reference run has no snapshots");
        return snapshots.back();
    }
};

namespace detail {

// The box is periodic, so u0 must join continuously across x_max ~ x_min:
// either it has decayed at both ends or it is itself periodic.
inline void check_boundary_decay(const ProblemSpec& spec, const std::vector<cplx>& u) {
    double peak = 0.0;
    for (const auto& v : u) peak = std::max(peak, std::abs(v));
    const cplx wrap = evaluate_initial(spec.initial_condition, spec.x_max, spec.epsilon);
    const double jump = std::abs(wrap - u.front());
    if (jump > 1e-10 * peak)
        throw input_error("initial data does not decay at the boundary (jump across the periodic boundary " +
                          io::fmt(jump) + " > 1e-10 * max|u|); enlarge [x_min, x_max]");
}

// Step indices at which to record, one per requested time.
inline std::vector<std::size_t> output_steps(const std::vector<double>& times, double t_max, std::size_t n_t) {
    std::vector<std::size_t> steps;
    for (double t : times) {
        if (t < 0.0 || t > t_max * (1.0 + 1e-12)) throw input_error("output time outside [0, t_max]");
        steps.push_back(t_max > 0.0 ? static_cast<std::size_t>(std::llround(t / t_max * static_cast<double>(n_t))) : 0);
    }
    return steps;
}

template <typename Step>
ReferenceRun march(ReferenceMethod method, const ProblemSpec& spec, std::size_t n_x, std::size_t n_t,
                   const std::vector<double>& times, std::vector<cplx> u, Step&& step) {
    const auto t0 = std::chrono::steady_clock::now();
    const Axis ax = spec.axis(n_x);
    const double dt = n_t > 0 ? spec.t_max / static_cast<double>(n_t) : 0.0;
    const auto steps = output_steps(times, spec.t_max, n_t);
    ReferenceRun run;
    run.method = method;
    run.dof = n_x;
    run.n_t = n_t;
    auto record = [&](std::size_t s) {
        for (std::size_t q = 0; q < steps.size(); ++q)
            if (steps[q] == s) run.snapshots.push_back({static_cast<double>(s) * dt, WavefunctionGrid(ax, u, spec.epsilon)});
    };
    record(0);
    for (std::size_t s = 1; s <= n_t; ++s) {
        step(u);
        record(s);
    }
    for (const auto& v : u)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw numeric_error("reference solution became non-finite");
    run.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

inline std::vector<double> default_times(const ProblemSpec& spec) { return {0.0, spec.t_max}; }

} // namespace detail

// Strang splitting: half potential phase, exact kinetic step in Fourier
// space, half potential phase.
inline ReferenceRun splitstep_solve(const ProblemSpec& spec, std::size_t n_x, std::size_t n_t,
                                    std::vector<double> times = {}) {
    if (times.empty()) times = detail::default_times(spec);
    const auto f0 = sample_problem(spec, n_x);
    detail::check_boundary_decay(spec, f0.values());
    const double eps = spec.epsilon;
    const double dt = n_t > 0 ? spec.t_max / static_cast<double>(n_t) : 0.0;
    const Axis ax = spec.axis(n_x);
    std::vector<cplx> half_v(n_x), kinetic(n_x);
    for (std::size_t j = 0; j < n_x; ++j) half_v[j] = std::polar(1.0, -potential_value(spec.potential, ax.at(j)) * dt / (2.0 * eps));
    for (std::size_t m = 0; m < n_x; ++m) {
        const double xi = (m < n_x / 2 ? static_cast<double>(m) : static_cast<double>(m) - static_cast<double>(n_x)) / ax.length();
        const double w = two_pi * xi;
        // phase reduced in turns to keep large-mode factors accurate
        const double turns = -eps * w * w * dt / 2.0 / two_pi;
        kinetic[m] = std::polar(1.0 / static_cast<double>(n_x), two_pi * (turns - std::round(turns)));
    }
    FftPlan fwd(n_x, FftPlan::Direction::forward), bwd(n_x, FftPlan::Direction::backward);
    return detail::march(ReferenceMethod::splitstep, spec, n_x, n_t, times, f0.values(), [&](std::vector<cplx>& u) {
        for (std::size_t j = 0; j < n_x; ++j) u[j] *= half_v[j];
        fwd(u);
        for (std::size_t m = 0; m < n_x; ++m) u[m] *= kinetic[m];
        bwd(u);
        for (std::size_t j = 0; j < n_x; ++j) u[j] *= half_v[j];
    });
}

namespace detail {

// Solves A y = r for the periodic tridiagonal A with constant off-diagonal
// `off` (corners included) and diagonal `diag`, via Sherman-Morrison around
// a Thomas factorization computed once.
class CyclicTridiagonal {
public:
    CyclicTridiagonal(std::vector<cplx> diag, cplx off) : n_(diag.size()), off_(off) {
        if (n_ < 3) throw input_error("Crank-Nicolson needs at least 3 grid points");
        // A = B + u v^T with u = (gamma, 0..0, off), v = (1, 0..0, off/gamma)
        gamma_ = -diag[0];
        diag[0] -= gamma_;
        diag[n_ - 1] -= off_ * off_ / gamma_;
        c_.resize(n_);
        inv_.resize(n_);
        cplx b = diag[0];
        if (std::abs(b) == 0.0) throw numeric_error("Crank-Nicolson solve broke down (zero pivot)");
        inv_[0] = 1.0 / b;
        for (std::size_t j = 1; j < n_; ++j) {
            c_[j - 1] = off_ * inv_[j - 1];
            b = diag[j] - off_ * c_[j - 1];
            if (std::abs(b) < 1e-300) throw numeric_error("Crank-Nicolson solve broke down (zero pivot)");
            inv_[j] = 1.0 / b;
        }
        std::vector<cplx> u(n_, cplx{});
        u[0] = gamma_;
        u[n_ - 1] = off_;
        z_ = u;
        thomas(z_);
        // z decays geometrically from both ends; cut it before it goes subnormal
        for (auto& v : z_)
            if (std::abs(v) < 1e-200) v = 0.0;
        const cplx denom = 1.0 + z_[0] + off_ / gamma_ * z_[n_ - 1];
        if (std::abs(denom) < 1e-300) throw numeric_error("Crank-Nicolson solve broke down (singular update)");
        denom_inv_ = 1.0 / denom;
    }

    void solve(std::vector<cplx>& r) const {
        thomas(r);
        const cplx f = (r[0] + off_ / gamma_ * r[n_ - 1]) * denom_inv_;
        for (std::size_t j = 0; j < n_; ++j) r[j] -= f * z_[j];
    }

private:
    void thomas(std::vector<cplx>& r) const {
        r[0] *= inv_[0];
        for (std::size_t j = 1; j < n_; ++j) r[j] = (r[j] - off_ * r[j - 1]) * inv_[j];
        for (std::size_t j = n_ - 1; j-- > 0;) r[j] -= c_[j] * r[j + 1];
    }

    std::size_t n_;
    cplx off_, gamma_, denom_inv_;
    std::vector<cplx> c_, inv_, z_;
};

} // namespace detail

// theta = 1/2 scheme with the periodic second difference.
inline ReferenceRun crank_nicolson_solve(const ProblemSpec& spec, std::size_t n_x, std::size_t n_t,
                                         std::vector<double> times = {}) {
    if (times.empty()) times = detail::default_times(spec);
    const Axis ax = spec.axis(n_x);
    std::vector<cplx> u0 = sample_problem(spec, n_x).values();
    detail::check_boundary_decay(spec, u0);
    const double eps = spec.epsilon;
    const double dt = n_t > 0 ? spec.t_max / static_cast<double>(n_t) : 0.0;
    const double dx = ax.step();
    const cplx mu = cplx(0.0, dt / (2.0 * eps));               // i dt/(2 eps)
    const double kin = eps * eps / (2.0 * dx * dx);             // -(eps^2/2) D2 has diag 2 kin, off -kin
    std::vector<cplx> diag(n_x), rhs_diag(n_x);
    for (std::size_t j = 0; j < n_x; ++j) {
        const double h = 2.0 * kin + potential_value(spec.potential, ax.at(j));
        diag[j] = 1.0 + mu * h;
        rhs_diag[j] = 1.0 - mu * h;
    }
    const cplx off = -mu * kin, rhs_off = mu * kin;
    const detail::CyclicTridiagonal solver(diag, off);
    std::vector<cplx> r(n_x);
    return detail::march(ReferenceMethod::crank_nicolson, spec, n_x, n_t, times, std::move(u0), [&](std::vector<cplx>& u) {
        for (std::size_t j = 0; j < n_x; ++j) {
            const cplx left = u[j == 0 ? n_x - 1 : j - 1], right = u[j + 1 == n_x ? 0 : j + 1];
            r[j] = rhs_diag[j] * u[j] + rhs_off * (left + right);
        }
        solver.solve(r);
        u.swap(r);
    });
}

// Each term exp(-a x^2 + b x + c), a = alpha/eps + alpha0, evolves under
// u_t = D u_xx with D = i eps/2 as
//   (1 + 4 a D t)^(-1/2) exp((-a x^2 + b x + D t b^2)/(1 + 4 a D t) + c).
inline cplx free_gaussian_value(const GaussianTerm& term, double eps, double t, double x) {
    const cplx a = term.quadratic(eps);
    const cplx D(0.0, eps / 2.0);
    const cplx s = 1.0 + 4.0 * a * D * t;
    return std::exp((-a * x * x + term.beta * x + D * t * term.beta * term.beta) / s + term.gamma) / std::sqrt(s);
}

inline WavefunctionGrid exact_free_gaussian_solution(const GaussianSum& sum, double eps, double t, const Axis& axis) {
    for (const auto& term : sum.terms)
        if (!(term.quadratic(eps).real() > 0.0)) throw input_error("Gaussian term must have Re a > 0");
    std::vector<cplx> u(axis.n, cplx{});
    for (std::size_t j = 0; j < axis.n; ++j)
        for (const auto& term : sum.terms) u[j] += free_gaussian_value(term, eps, t, axis.at(j));
    return WavefunctionGrid(axis, std::move(u), eps);
}

inline ReferenceRun exact_free_gaussian_run(const ProblemSpec& spec, std::size_t n_x, std::vector<double> times = {}) {
    if (times.empty()) times = detail::default_times(spec);
    const auto* sum = std::get_if<GaussianSum>(&spec.initial_condition);
    if (!sum) throw input_error("exact reference needs a Gaussian-sum initial condition");
    if (!std::holds_alternative<ZeroPotential>(spec.potential))
        throw input_error("exact reference needs a zero potential");
    const auto t0 = std::chrono::steady_clock::now();
    ReferenceRun run;
    run.method = ReferenceMethod::exact_free_gaussian;
    run.dof = n_x;
    for (double t : times) run.snapshots.push_back({t, exact_free_gaussian_solution(*sum, spec.epsilon, t, spec.axis(n_x))});
    run.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

inline ReferenceRun reference_solve(ReferenceMethod m, const ProblemSpec& spec, std::size_t n_x, std::size_t n_t,
                                    std::vector<double> times = {}) {
    switch (m) {
    case ReferenceMethod::splitstep: return splitstep_solve(spec, n_x, n_t, std::move(times));
    case ReferenceMethod::crank_nicolson: return crank_nicolson_solve(spec, n_x, n_t, std::move(times));
    case ReferenceMethod::exact_free_gaussian: return exact_free_gaussian_run(spec, n_x, std::move(times));
    }
    throw error("unreachable");
}

// SWTC: "SWTC", u32 version=1, u32 n_x, f64 x_min, x_max, epsilon, t, then
// n_x (re, im) f64 pairs. Little-endian.
inline void write_swtc(std::ostream& os, const WavefunctionGrid& u, double t) {
    io::put_magic(os, "SWTC");
    io::put<std::uint32_t>(os, 1);
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(u.size()));
    for (double v : {u.axis().min, u.axis().max, u.epsilon(), t}) io::put(os, v);
    for (const auto& v : u.values()) {
        io::put(os, v.real());
        io::put(os, v.imag());
    }
}

inline Snapshot read_swtc(std::istream& is) {
    io::expect_magic(is, "SWTC");
    if (auto version = io::get<std::uint32_t>(is); version != 1)
        throw input_error("unsupported SWTC version " + std::to_string(version));
    const auto n = io::get<std::uint32_t>(is);
    double h[4];
    for (double& v : h) v = io::get<double>(is);
    std::vector<cplx> u(n);
    for (auto& v : u) {
        const double re = io::get<double>(is);
        v = cplx(re, io::get<double>(is));
    }
    return {h[3], WavefunctionGrid(Axis{h[0], h[1], n}, std::move(u), h[2])};
}

inline void write_swtc(const std::string& path, const WavefunctionGrid& u, double t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot write '" + path + "'");
    write_swtc(os, u, t);
}

inline Snapshot read_swtc(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open '" + path + "'");
    return read_swtc(is);
}

inline void write_snapshot_csv(std::ostream& os, const WavefunctionGrid& u) {
    os << "x,re,im\n";
    for (std::size_t j = 0; j < u.size(); ++j)
        os << io::fmt(u.x(j)) << ',' << io::fmt(u[j].real()) << ',' << io::fmt(u[j].imag()) << '\n';
}

} // namespace swt

#endif
