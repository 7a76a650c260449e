#ifndef SWT_DYNAMICS_HPP
#define SWT_DYNAMICS_HPP

// Liouville transport of a phase-space density along the characteristics
//   dx/dt = 2 pi k,   dk/dt = -V'(x)/(2 pi),
// with Hamiltonian H(x,k) = pi k^2 + V(x)/(2 pi).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "swt/error.hpp"
#include "swt/expr.hpp"
#include "swt/io.hpp"
#include "swt/parallel.hpp"
#include "swt/phasespace.hpp"
#include "swt/signals.hpp"

namespace swt {

class Potential {
public:
    Potential() = default;
    explicit Potential(PotentialSpec spec) : spec_(std::move(spec)) {
        if (const auto* e = std::get_if<ExprPotential>(&spec_)) {
            value_prog_.emplace(e->v.compile());
            slope_prog_.emplace(e->v.derivative().compile());
        }
    }

    const PotentialSpec& spec() const { return spec_; }
    bool is_closed_form() const { return !std::holds_alternative<ExprPotential>(spec_); }

    double value(double x) const {
        if (value_prog_) return (*value_prog_)(x);
        return potential_value(spec_, x);
    }

    // V'(x)
    double slope(double x) const {
        if (slope_prog_) return (*slope_prog_)(x);
        if (const auto* l = std::get_if<LinearPotential>(&spec_)) return l->slope;
        if (const auto* q = std::get_if<QuadraticPotential>(&spec_)) return q->curvature * x;
        return 0.0;
    }

    double max_abs_slope(double x_min, double x_max, std::size_t samples = 10000) const {
        if (std::holds_alternative<ZeroPotential>(spec_)) return 0.0;
        if (const auto* l = std::get_if<LinearPotential>(&spec_)) return std::abs(l->slope);
        if (const auto* q = std::get_if<QuadraticPotential>(&spec_))
            return std::abs(q->curvature) * std::max(std::abs(x_min), std::abs(x_max));
        double m = 0.0;
        for (std::size_t j = 0; j < samples; ++j) {
            const double x = x_min + (x_max - x_min) * static_cast<double>(j) / static_cast<double>(samples - 1);
            m = std::max(m, std::abs(slope(x)));
        }
        return m;
    }

private:
    PotentialSpec spec_ = ZeroPotential{};
    std::optional<ExprProgram> value_prog_, slope_prog_;
};

struct PhasePoint {
    double x = 0.0;
    double k = 0.0;
    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

class HamiltonianField {
public:
    explicit HamiltonianField(const Potential& v) : v_(&v) {}

    PhasePoint operator()(const PhasePoint& p) const { return {two_pi * p.k, -v_->slope(p.x) / two_pi}; }
    double energy(const PhasePoint& p) const { return std::numbers::pi * p.k * p.k + v_->value(p.x) / two_pi; }
    double dH_dk(const PhasePoint& p) const { return two_pi * p.k; }
    double dH_dx(const PhasePoint& p) const { return v_->slope(p.x) / two_pi; }

    PhasePoint rk4_step(const PhasePoint& p, double h) const {
        const PhasePoint a = (*this)(p);
        const PhasePoint b = (*this)({p.x + 0.5 * h * a.x, p.k + 0.5 * h * a.k});
        const PhasePoint c = (*this)({p.x + 0.5 * h * b.x, p.k + 0.5 * h * b.k});
        const PhasePoint d = (*this)({p.x + h * c.x, p.k + h * c.k});
        return {p.x + h / 6.0 * (a.x + 2.0 * b.x + 2.0 * c.x + d.x), p.k + h / 6.0 * (a.k + 2.0 * b.k + 2.0 * c.k + d.k)};
    }

private:
    const Potential* v_;
};

struct ParticleEnsemble {
    std::vector<PhasePoint> positions;
    std::vector<double> weights;
    double seed_dx = 1.0;
    double seed_dk = 1.0;
    double t = 0.0;
    double epsilon = 1.0;
    double sigma_x = 0.0;
    double sigma_k = 0.0;

    std::size_t size() const { return positions.size(); }
};

// Target geometry for reconstruction and backtracing.
struct GridGeometry {
    Axis x;
    Axis k;
    static GridGeometry of(const PhaseSpaceGrid& g) { return {g.x, g.k}; }
};

// One particle per node with |W0| >= eta max|W0|, in x-major node order.
inline ParticleEnsemble seed_particles(const PhaseSpaceGrid& W0, double eta = 1e-3) {
    if (!(eta > 0.0 && eta < 1.0)) throw input_error("seed threshold eta must lie in (0, 1)");
    for (double v : W0.values)
        if (!std::isfinite(v)) throw numeric_error("cannot seed from a non-finite grid");
    const double cut = eta * W0.max_abs();
    ParticleEnsemble e;
    e.seed_dx = W0.dx();
    e.seed_dk = W0.dk();
    e.t = W0.time;
    e.epsilon = W0.epsilon;
    e.sigma_x = W0.sigma_x;
    e.sigma_k = W0.sigma_k;
    if (cut > 0.0) {
        for (std::size_t i = 0; i < W0.n_x(); ++i)
            for (std::size_t j = 0; j < W0.n_k(); ++j)
                if (std::abs(W0(i, j)) >= cut) {
                    e.positions.push_back({W0.x.at(i), W0.k.at(j)});
                    e.weights.push_back(W0(i, j));
                }
    }
    if (e.positions.empty()) throw numeric_error("empty ensemble: no grid value reaches eta * max|W0|");
    return e;
}

// Fixed budget: the `count` nodes of largest |W0| (ties go to the earlier
// node), again in x-major order.
inline ParticleEnsemble seed_top_particles(const PhaseSpaceGrid& W0, std::size_t count) {
    if (count == 0) throw input_error("particle budget must be positive");
    for (double v : W0.values)
        if (!std::isfinite(v)) throw numeric_error("cannot seed from a non-finite grid");
    std::vector<std::size_t> order(W0.values.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    count = std::min(count, order.size());
    auto larger = [&](std::size_t a, std::size_t b) {
        const double va = std::abs(W0.values[a]), vb = std::abs(W0.values[b]);
        return va != vb ? va > vb : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count - 1), order.end(), larger);
    order.resize(count);
    std::sort(order.begin(), order.end());
    ParticleEnsemble e;
    e.seed_dx = W0.dx();
    e.seed_dk = W0.dk();
    e.t = W0.time;
    e.epsilon = W0.epsilon;
    e.sigma_x = W0.sigma_x;
    e.sigma_k = W0.sigma_k;
    for (std::size_t n : order) {
        if (W0.values[n] == 0.0) continue;
        e.positions.push_back({W0.x.at(n / W0.n_k()), W0.k.at(n % W0.n_k())});
        e.weights.push_back(W0.values[n]);
    }
    if (e.positions.empty()) throw numeric_error("empty ensemble: grid is identically zero");
    return e;
}

// h = t / ceil(t max(1, 2 pi k_max, max|V'|/(2 pi)) / 0.05)
inline double default_step(double t_max, double k_max, double max_abs_slope) {
    if (!(t_max > 0.0)) return 1.0;
    const double speed = std::max({1.0, two_pi * k_max, max_abs_slope / two_pi});
    return t_max / std::ceil(t_max * speed / 0.05);
}

namespace detail {

// Steps of length h covering `span`, the last one shortened.
inline std::size_t step_count(double span, double h) {
    if (span <= 0.0) return 0;
    return static_cast<std::size_t>(std::max(1.0, std::ceil(span / h - 1e-9)));
}

inline PhasePoint integrate(const HamiltonianField& field, PhasePoint p, double span, double h, std::size_t n) {
    const double sign = span < 0.0 ? -1.0 : 1.0;
    const double len = std::abs(span);
    for (std::size_t s = 0; s < n; ++s) {
        const double step = s + 1 < n ? h : len - h * static_cast<double>(n - 1);
        p = field.rk4_step(p, sign * step);
    }
    return p;
}

} // namespace detail

inline ParticleEnsemble advance(const ParticleEnsemble& ens, const Potential& V, double t_target, double h,
                                unsigned threads = 1) {
    if (!(h > 0.0)) throw input_error("time step h must be positive");
    if (t_target < ens.t) throw input_error("advance cannot run backwards: t_target < ensemble time");
    ParticleEnsemble out = ens;
    out.t = t_target;
    const double span = t_target - ens.t;
    const std::size_t n = detail::step_count(span, h);
    if (n == 0) return out;
    const HamiltonianField field(V);
    std::vector<char> bad(ens.size(), 0);
    parallel_blocks(ens.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t p = begin; p < end; ++p) {
            const PhasePoint q = detail::integrate(field, ens.positions[p], span, h, n);
            out.positions[p] = q;
            bad[p] = !(std::isfinite(q.x) && std::isfinite(q.k));
        }
    });
    for (std::size_t p = 0; p < bad.size(); ++p)
        if (bad[p])
            throw numeric_error("particle " + std::to_string(p) + " left the finite range during advance");
    return out;
}

struct Reconstruction {
    PhaseSpaceGrid grid;
    std::size_t gap_nodes = 0;     // nodes with no particle within the support radius
    double coverage_gap = 0.0;     // gap_nodes / total nodes
};

// Shepard inverse-distance-squared average over particles within 2 seed
// spacings (coordinates scaled by the seed spacings). A particle sitting on
// a node sets the node value.
inline Reconstruction reconstruct(const ParticleEnsemble& ens, const GridGeometry& target, unsigned threads = 1) {
    if (ens.positions.empty()) throw input_error("cannot reconstruct from an empty ensemble");
    constexpr double radius = 2.0;
    const double sx = 1.0 / ens.seed_dx, sk = 1.0 / ens.seed_dk;

    // Buckets of side `radius` over the target extent, one cell of margin.
    const double u0 = target.x.min * sx - radius, v0 = target.k.min * sk - radius;
    const auto cells_u = static_cast<std::size_t>(std::ceil(((target.x.max - target.x.min) * sx + 2 * radius) / radius)) + 1;
    const auto cells_v = static_cast<std::size_t>(std::ceil(((target.k.max - target.k.min) * sk + 2 * radius) / radius)) + 1;
    auto cell_of = [&](double u, double v, std::size_t& cu, std::size_t& cv) {
        const double a = std::floor((u - u0) / radius), b = std::floor((v - v0) / radius);
        if (!(a >= 0.0 && b >= 0.0 && a < static_cast<double>(cells_u) && b < static_cast<double>(cells_v))) return false;
        cu = static_cast<std::size_t>(a);
        cv = static_cast<std::size_t>(b);
        return true;
    };

    std::vector<std::size_t> start(cells_u * cells_v + 1, 0);
    std::vector<std::size_t> cell_id(ens.size(), static_cast<std::size_t>(-1));
    for (std::size_t p = 0; p < ens.size(); ++p) {
        std::size_t cu, cv;
        if (cell_of(ens.positions[p].x * sx, ens.positions[p].k * sk, cu, cv)) {
            cell_id[p] = cu * cells_v + cv;
            ++start[cell_id[p] + 1];
        }
    }
    for (std::size_t c = 0; c + 1 < start.size(); ++c) start[c + 1] += start[c];
    std::vector<std::size_t> members(start.back());
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t p = 0; p < ens.size(); ++p)
            if (cell_id[p] != static_cast<std::size_t>(-1)) members[fill[cell_id[p]]++] = p;
    }

    Reconstruction rec;
    rec.grid = PhaseSpaceGrid(target.x, target.k, ens.epsilon);
    rec.grid.sigma_x = ens.sigma_x;
    rec.grid.sigma_k = ens.sigma_k;
    rec.grid.time = ens.t;
    const std::size_t nk = target.k.n;
    std::vector<std::size_t> gaps(target.x.n, 0);
    parallel_blocks(target.x.n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t i = begin; i < end; ++i) {
            const double u = target.x.at(i) * sx;
            for (std::size_t j = 0; j < nk; ++j) {
                const double v = target.k.at(j) * sk;
                std::size_t cu = 1, cv = 1;
                cell_of(u, v, cu, cv);
                double num = 0.0, den = 0.0, exact = 0.0;
                std::size_t hits = 0, exact_hits = 0;
                for (std::size_t a = cu - 1; a <= cu + 1; ++a)
                    for (std::size_t b = cv - 1; b <= cv + 1; ++b) {
                        const std::size_t c = a * cells_v + b;
                        for (std::size_t m = start[c]; m < start[c + 1]; ++m) {
                            const std::size_t p = members[m];
                            const double du = ens.positions[p].x * sx - u, dv = ens.positions[p].k * sk - v;
                            const double d2 = du * du + dv * dv;
                            if (d2 > radius * radius) continue;
                            ++hits;
                            if (d2 < 1e-20) {
                                exact += ens.weights[p];
                                ++exact_hits;
                            } else {
                                num += ens.weights[p] / d2;
                                den += 1.0 / d2;
                            }
                        }
                    }
                double value = 0.0;
                if (exact_hits > 0) value = exact / static_cast<double>(exact_hits);
                else if (hits > 0) value = num / den;
                else ++gaps[i];
                rec.grid(i, j) = value;
            }
        }
    });
    for (std::size_t g : gaps) rec.gap_nodes += g;
    rec.coverage_gap = static_cast<double>(rec.gap_nodes) / static_cast<double>(target.x.n * nk);
    return rec;
}

// Bilinear interpolation on the node lattice; zero outside [x_0, x_{n-1}] x [k_0, k_{n-1}].
inline double bilinear(const PhaseSpaceGrid& W, double x, double k) {
    const double fi = (x - W.x.min) / W.dx(), fj = (k - W.k.min) / W.dk();
    const double last_i = static_cast<double>(W.n_x() - 1), last_j = static_cast<double>(W.n_k() - 1);
    if (!(fi >= 0.0 && fj >= 0.0 && fi <= last_i && fj <= last_j)) return 0.0;
    const auto i = static_cast<std::size_t>(std::min(std::floor(fi), std::max(last_i - 1.0, 0.0)));
    const auto j = static_cast<std::size_t>(std::min(std::floor(fj), std::max(last_j - 1.0, 0.0)));
    const double a = fi - static_cast<double>(i), b = fj - static_cast<double>(j);
    const std::size_t i1 = std::min(i + 1, W.n_x() - 1), j1 = std::min(j + 1, W.n_k() - 1);
    return (1 - a) * (1 - b) * W(i, j) + (1 - a) * b * W(i, j1) + a * (1 - b) * W(i1, j) + a * b * W(i1, j1);
}

// Pulls W0 back along characteristics: value(x,k,t) = W0(foot of the
// characteristic through (x,k) traced back over time t).
inline PhaseSpaceGrid backtrace_evaluate(const PhaseSpaceGrid& W0, const Potential& V, double t,
                                         const GridGeometry& target, double h, unsigned threads = 1) {
    if (!(h > 0.0)) throw input_error("time step h must be positive");
    if (t < 0.0) throw input_error("backtrace time must be non-negative");
    PhaseSpaceGrid out(target.x, target.k, W0.epsilon);
    out.sigma_x = W0.sigma_x;
    out.sigma_k = W0.sigma_k;
    out.time = W0.time + t;
    const std::size_t n = detail::step_count(t, h);
    const HamiltonianField field(V);
    std::vector<char> bad(target.x.n, 0);
    parallel_blocks(target.x.n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t j = 0; j < target.k.n; ++j) {
                const PhasePoint foot = detail::integrate(field, {target.x.at(i), target.k.at(j)}, -t, h, n);
                if (!(std::isfinite(foot.x) && std::isfinite(foot.k))) bad[i] = 1;
                out(i, j) = bilinear(W0, foot.x, foot.k);
            }
    });
    if (std::find(bad.begin(), bad.end(), 1) != bad.end())
        throw numeric_error("backtrace produced a non-finite foot point");
    return out;
}

// Worst-case interpolation error for comparing reconstruct() against
// backtrace_evaluate() on a density resembling `W`: Shepard error
// 2 (|W_x| dx + |W_k| dk) plus bilinear error (|W_xx| dx^2 + |W_kk| dk^2)/8,
// with derivative maxima from finite differences of W.
inline double interpolation_error_bound(const PhaseSpaceGrid& W, double seed_dx, double seed_dk) {
    double gx = 0.0, gk = 0.0, hx = 0.0, hk = 0.0;
    const std::size_t nx = W.n_x(), nk = W.n_k();
    for (std::size_t i = 0; i + 1 < nx; ++i)
        for (std::size_t j = 0; j < nk; ++j) {
            gx = std::max(gx, std::abs(W(i + 1, j) - W(i, j)));
            if (i > 0) hx = std::max(hx, std::abs(W(i + 1, j) - 2 * W(i, j) + W(i - 1, j)));
        }
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j + 1 < nk; ++j) {
            gk = std::max(gk, std::abs(W(i, j + 1) - W(i, j)));
            if (j > 0) hk = std::max(hk, std::abs(W(i, j + 1) - 2 * W(i, j) + W(i, j - 1)));
        }
    const double dx = W.dx(), dk = W.dk();
    gx /= dx;
    gk /= dk;
    hx /= dx * dx;
    hk /= dk * dk;
    return 2.0 * (gx * seed_dx + gk * seed_dk) + (hx * dx * dx + hk * dk * dk) / 8.0;
}

inline void write_ensemble_csv(std::ostream& os, const ParticleEnsemble& e) {
    os << "# t=" << io::fmt(e.t) << " epsilon=" << io::fmt(e.epsilon) << " sigma_x=" << io::fmt(e.sigma_x)
       << " sigma_k=" << io::fmt(e.sigma_k) << " seed_dx=" << io::fmt(e.seed_dx) << " seed_dk=" << io::fmt(e.seed_dk)
       << '\n';
    os << "x,k,weight\n";
    for (std::size_t p = 0; p < e.size(); ++p)
        os << io::fmt(e.positions[p].x) << ',' << io::fmt(e.positions[p].k) << ',' << io::fmt(e.weights[p]) << '\n';
}

inline void write_ensemble_csv(const std::string& path, const ParticleEnsemble& e) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot write '" + path + "'");
    write_ensemble_csv(os, e);
}

} // namespace swt

#endif
