#ifndef SWT_OBSERVABLES_HPP
#define SWT_OBSERVABLES_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "swt/dynamics.hpp"
#include "swt/error.hpp"
#include "swt/io.hpp"
#include "swt/phasespace.hpp"
#include "swt/signals.hpp"

namespace swt {

enum class DensityKind { norm_density, energy_density };

inline const char* kind_name(DensityKind k) { return k == DensityKind::norm_density ? "norm_density" : "energy_density"; }

inline DensityKind parse_kind(std::string_view s) {
    if (s == "norm_density") return DensityKind::norm_density;
    if (s == "energy_density") return DensityKind::energy_density;
    throw input_error("unknown density kind '" + std::string(s) + "'");
}

// sigma_x = 0 means no smoothing.
struct DensityProfile {
    Axis x;
    std::vector<double> values;
    DensityKind kind = DensityKind::norm_density;
    double sigma_x = 0.0;
    double epsilon = 1.0;
    double t = 0.0;

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    // sum values dx
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * x.step();
    }
};

struct ErrorReport {
    double l1_rel = 0.0;
    double l2_rel = 0.0;
    double linf_rel = 0.0;
    double mass_ratio = 1.0;
};

inline DensityProfile phase_space_norm_density(const PhaseSpaceGrid& W) {
    return {W.x, marginal_x(W), DensityKind::norm_density, W.sigma_x, W.epsilon, W.time};
}

// E(x) = int (pi k^2 + V(x)/(2 pi)) W(x,k) dk
inline DensityProfile phase_space_energy_density(const PhaseSpaceGrid& W, const Potential& V) {
    DensityProfile d{W.x, std::vector<double>(W.n_x(), 0.0), DensityKind::energy_density, W.sigma_x, W.epsilon, W.time};
    const double dk = W.dk();
    for (std::size_t i = 0; i < W.n_x(); ++i) {
        const double vx = V.value(W.x.at(i)) / two_pi;
        double s = 0.0;
        for (std::size_t j = 0; j < W.n_k(); ++j) {
            const double k = W.k.at(j);
            s += (std::numbers::pi * k * k + vx) * W(i, j);
        }
        d.values[i] = s * dk;
    }
    return d;
}

inline DensityProfile wavefunction_density(const WavefunctionGrid& u, double t = 0.0) {
    DensityProfile d{u.axis(), std::vector<double>(u.size()), DensityKind::norm_density, 0.0, u.epsilon(), t};
    for (std::size_t j = 0; j < u.size(); ++j) d.values[j] = std::norm(u[j]);
    return d;
}

// |u|^2 convolved with the same normalized, truncated, periodic
// Gaussian (variance eps sx^2/(4 pi)) that smooth() applies along x.
inline DensityProfile smoothed_wavefunction_density(const WavefunctionGrid& u, double sigma_x, double t = 0.0) {
    if (!(sigma_x > 0.0)) throw input_error("sigma_x must be positive");
    const std::size_t n = u.size();
    SmoothingKernelSpec kern;
    kern.sigma_x = sigma_x;
    const auto w = kern.taps_x(u.dx(), u.epsilon());
    if (w.size() > n) throw input_error("smoothing kernel is wider than the grid");
    const std::size_t h = w.size() / 2;
    std::vector<double> rho(n);
    for (std::size_t j = 0; j < n; ++j) rho[j] = std::norm(u[j]);
    DensityProfile d{u.axis(), std::vector<double>(n, 0.0), DensityKind::norm_density, sigma_x, u.epsilon(), t};
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t a = 0; a < w.size(); ++a) s += w[a] * rho[(i + n + h - a) % n];
        d.values[i] = s;
    }
    return d;
}

// b is the reference.
inline ErrorReport compare(const DensityProfile& a, const DensityProfile& b) {
    const double tol = 1e-9 * std::max(1.0, b.x.length());
    if (a.x.n != b.x.n || a.values.size() != b.values.size() || std::abs(a.x.min - b.x.min) > tol ||
        std::abs(a.x.max - b.x.max) > tol)
        throw input_error("cannot compare densities on different grids");
    if (a.kind != b.kind) throw input_error("cannot compare densities of different kinds");
    double d1 = 0, d2 = 0, dinf = 0, b1 = 0, b2 = 0, binf = 0, sa = 0, sb = 0;
    for (std::size_t j = 0; j < a.values.size(); ++j) {
        const double d = std::abs(a.values[j] - b.values[j]);
        d1 += d;
        d2 += d * d;
        dinf = std::max(dinf, d);
        b1 += std::abs(b.values[j]);
        b2 += b.values[j] * b.values[j];
        binf = std::max(binf, std::abs(b.values[j]));
        sa += a.values[j];
        sb += b.values[j];
    }
    auto ratio = [](double num, double den) { return num == 0.0 ? 0.0 : num / den; };
    ErrorReport r;
    r.l1_rel = ratio(d1, b1);
    r.l2_rel = ratio(std::sqrt(d2), std::sqrt(b2));
    r.linf_rel = ratio(dinf, binf);
    r.mass_ratio = sa == sb ? 1.0 : sa / sb;
    for (double v : {r.l1_rel, r.l2_rel, r.linf_rel, r.mass_ratio})
        if (!std::isfinite(v)) throw numeric_error("error report is not finite (reference density is zero)");
    return r;
}

inline void write_density_csv(std::ostream& os, const DensityProfile& d) {
    os << "# kind=" << kind_name(d.kind) << " t=" << io::fmt(d.t) << " epsilon=" << io::fmt(d.epsilon)
       << " sigma_x=" << io::fmt(d.sigma_x) << '\n';
    os << "x,value\n";
    for (std::size_t j = 0; j < d.values.size(); ++j) os << io::fmt(d.x.at(j)) << ',' << io::fmt(d.values[j]) << '\n';
}

inline void write_density_csv(const std::string& path, const DensityProfile& d) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot write '" + path + "'");
    write_density_csv(os, d);
}

// Reads what write_density_csv writes. The grid is recovered from the
// (uniform) x column; x_max = x_0 + n dx.
inline DensityProfile read_density_csv(std::istream& is) {
    DensityProfile d;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw input_error("density CSV: missing '# kind=...' header");
    std::istringstream hdr(line.substr(2));
    std::string field;
    while (hdr >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw input_error("density CSV: malformed header field '" + field + "'");
        const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "kind") d.kind = parse_kind(val);
        else if (key == "t") d.t = io::parse_double(val);
        else if (key == "epsilon") d.epsilon = io::parse_double(val);
        else if (key == "sigma_x") d.sigma_x = io::parse_double(val);
        else throw input_error("density CSV: unknown header field '" + key + "'");
    }
    if (!std::getline(is, line) || detail::trim(line) != "x,value") throw input_error("density CSV: expected 'x,value' column header");
    std::vector<double> xs;
    while (std::getline(is, line)) {
        if (detail::trim(line).empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw input_error("density CSV: malformed row '" + line + "'");
        xs.push_back(io::parse_double(std::string_view(line).substr(0, comma)));
        d.values.push_back(io::parse_double(std::string_view(line).substr(comma + 1)));
    }
    if (xs.size() < 2) throw input_error("density CSV: need at least two rows");
    const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    d.x = Axis{xs.front(), xs.front() + dx * static_cast<double>(xs.size()), xs.size()};
    return d;
}

inline DensityProfile read_density_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw input_error("cannot open '" + path + "'");
    return read_density_csv(is);
}

} // namespace swt

#endif
