#ifndef SWT_PHASESPACE_HPP
#define SWT_PHASESPACE_HPP

// Scaled Wigner transform on a Cartesian (x, k) grid and its smoothing by
// the epsilon-scaled tensor Gaussian
//
//   K(x, k) = 2/(eps sx sk) exp(-2 pi x^2/(eps sx^2) - 2 pi k^2/(eps sk^2)),
//
// i.e. a product of normal densities with variances eps sx^2/(4 pi) and
// eps sk^2/(4 pi).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "swt/error.hpp"
#include "swt/fft.hpp"
#include "swt/io.hpp"
#include "swt/parallel.hpp"
#include "swt/signals.hpp"

namespace swt {

// Real samples on an n_x x n_k grid, x-major (values[i*n_k + j] at
// (x_i, k_j)). The k axis runs over [-k_max, k_max) with k = 0 at j = n_k/2.
// sigma_x = sigma_k = 0 marks an unsmoothed Wigner transform.
struct PhaseSpaceGrid {
    Axis x;
    Axis k;
    std::vector<double> values;
    double epsilon = 1.0;
    double sigma_x = 0.0;
    double sigma_k = 0.0;
    double time = 0.0;

    PhaseSpaceGrid() = default;
    PhaseSpaceGrid(Axis x_axis, Axis k_axis, double eps)
        : x(x_axis), k(k_axis), values(x_axis.n * k_axis.n, 0.0), epsilon(eps) {}

    std::size_t n_x() const { return x.n; }
    std::size_t n_k() const { return k.n; }
    double dx() const { return x.step(); }
    double dk() const { return k.step(); }
    bool smoothed() const { return sigma_x > 0.0 || sigma_k > 0.0; }

    double& operator()(std::size_t i, std::size_t j) { return values[i * k.n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * k.n + j]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double min() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }
    double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
    // sum W dx dk
    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * dx() * dk();
    }
};

inline Axis symmetric_k_axis(double k_max, std::size_t n_k) { return Axis{-k_max, k_max, n_k}; }

// Normalized 1-D Gaussian taps of the given variance on a grid of spacing
// `step`, truncated at `truncation` standard deviations. taps[h] is the
// centre, h = taps.size()/2.
inline std::vector<double> gaussian_taps(double step, double variance, double truncation) {
    const double sd = std::sqrt(variance);
    const auto half = static_cast<std::size_t>(std::floor(truncation * sd / step));
    std::vector<double> w(2 * half + 1);
    double sum = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        const double d = (static_cast<double>(a) - static_cast<double>(half)) * step;
        w[a] = std::exp(-d * d / (2.0 * variance));
        sum += w[a];
    }
    for (double& v : w) v /= sum;
    return w;
}

struct SmoothingKernelSpec {
    double sigma_x = 1.0;
    double sigma_k = 1.0;
    double truncation = 8.0;  // in standard deviations; two-sided tail mass ~1.2e-15

    double variance_x(double eps) const { return eps * sigma_x * sigma_x / (4.0 * std::numbers::pi); }
    double variance_k(double eps) const { return eps * sigma_k * sigma_k / (4.0 * std::numbers::pi); }
    std::vector<double> taps_x(double dx, double eps) const { return gaussian_taps(dx, variance_x(eps), truncation); }
    std::vector<double> taps_k(double dk, double eps) const { return gaussian_taps(dk, variance_k(eps), truncation); }
    // Number of kernel samples per axis.
    std::size_t L_x(double dx, double eps) const { return taps_x(dx, eps).size(); }
    std::size_t L_k(double dk, double eps) const { return taps_k(dk, eps).size(); }
};

enum class HalfPointInterp { automatic, linear, band_limited };

// periodic: f is one period of a periodic signal; lags |s| <= L/4.
// zero_extended: f vanishes outside the domain; lags |s| <= L/2.
// automatic picks zero_extended when f has decayed at both ends.
enum class LagWindow { automatic, periodic, zero_extended };

struct WignerOptions {
    unsigned threads = 1;
    HalfPointInterp interp = HalfPointInterp::automatic;
    LagWindow window = LagWindow::automatic;
    // > 0: convolve in k with the Gaussian of variance eps sigma_k^2/(4 pi),
    // applied as the factor exp(-pi eps sigma_k^2 y^2 / 2) on the lag integrand.
    double sigma_k = 0.0;
};

namespace detail {

// f on the half-grid: out[2j] = f_j, out[2j+1] ~ f(x_j + dx/2).
inline std::vector<cplx> half_grid_samples(const std::vector<cplx>& f, bool band_limited) {
    const std::size_t p = f.size();
    std::vector<cplx> out(2 * p);
    if (band_limited && p >= 2) {
        std::vector<cplx> spec(f);
        FftPlan(p, FftPlan::Direction::forward)(spec);
        std::vector<cplx> wide(2 * p, cplx{});
        const std::size_t h = p / 2;
        for (std::size_t m = 0; m < h; ++m) wide[m] = spec[m];
        for (std::size_t m = h + 1; m < p; ++m) wide[p + m] = spec[m];
        // Nyquist bin split evenly between +p/2 and -p/2.
        wide[h] = 0.5 * spec[h];
        wide[2 * p - h] = 0.5 * spec[h];
        FftPlan(2 * p, FftPlan::Direction::backward)(wide);
        for (std::size_t i = 0; i < 2 * p; ++i) out[i] = wide[i] / static_cast<double>(p);
    } else {
        for (std::size_t j = 0; j < p; ++j) out[2 * j + 1] = 0.5 * (f[j] + f[(j + 1) % p]);
    }
    for (std::size_t j = 0; j < p; ++j) out[2 * j] = f[j];
    return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// W(x,k) = int exp(-2 pi i k y) f(x + eps y/2) conj(f(x - eps y/2)) dy,
// discretized as a trapezoid sum over half-grid lags s = eps y/2 = m dx/2
// and evaluated on the requested k rows with a chirp-z transform.
inline PhaseSpaceGrid wigner_transform(const WavefunctionGrid& f, std::size_t n_k, double k_max,
                                       const WignerOptions& opt = {}) {
    const std::size_t n = f.size();
    const double eps = f.epsilon();
    const double dx = f.dx();
    if (!is_power_of_two(n_k) || n_k < 2) throw input_error("n_k must be a power of two >= 2");
    if (!(k_max > 0.0)) throw input_error("k_max must be positive");
    const double k_resolvable = eps / (2.0 * dx);
    if (k_max > k_resolvable * (1.0 + 1e-12))
        throw input_error("n_x insufficient for requested k_max: k_max=" + io::fmt(k_max) +
                          " exceeds eps/(2 dx)=" + io::fmt(k_resolvable));

    if (opt.sigma_k < 0.0) throw input_error("sigma_k must be non-negative");
    PhaseSpaceGrid W(f.axis(), symmetric_k_axis(k_max, n_k), eps);
    W.sigma_k = opt.sigma_k;

    double peak = 0.0;
    for (const auto& v : f.values()) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) return W;

    LagWindow window = opt.window;
    if (window == LagWindow::automatic) {
        const double edge = std::max(std::abs(f[0]), std::abs(f[n - 1]));
        window = edge <= 1e-8 * peak ? LagWindow::zero_extended : LagWindow::periodic;
    }
    const bool band_limited =
        opt.interp == HalfPointInterp::band_limited || (opt.interp == HalfPointInterp::automatic && n >= 256);

    std::vector<cplx> src(f.values());
    if (window == LagWindow::zero_extended) src.resize(2 * n, cplx{});
    const std::size_t period = src.size();       // samples per period of the extended signal
    const std::vector<cplx> half = detail::half_grid_samples(src, band_limited);
    const std::size_t wrap = 2 * period;         // half-grid samples per period
    const std::size_t lag = period / 2;          // largest |m|

    // g(-m) = conj(g(m)), so the two-sided lag sum is 2 Re of the one-sided
    // sum over m = 0..lag with half weight at m = 0.
    const double a = dx / eps;                   // y-step per lag index
    const double dk = W.dk();
    const ChirpZ cz(lag + 1, n_k, dk * a);

    // Lag weights, phases reduced in turns.
    auto turn = [](double t) { return std::polar(1.0, two_pi * (t - std::round(t))); };
    std::vector<cplx> pre(lag + 1);
    for (std::size_t m = 0; m <= lag; ++m) {
        const double y = static_cast<double>(m) * a;
        const double weight = (m == 0 || m == lag) ? 0.5 : 1.0;
        pre[m] = weight * std::exp(-0.5 * std::numbers::pi * eps * opt.sigma_k * opt.sigma_k * y * y) *
                 turn(k_max * static_cast<double>(m) * a);
    }

    std::vector<char> finite(n, 1);
    parallel_blocks(n, opt.threads, [&](std::size_t begin, std::size_t end, unsigned) {
        std::vector<cplx> work(cz.work_size()), out(n_k);
        for (std::size_t i = begin; i < end; ++i) {
            // half-grid indices of x_i + s and x_i - s, s = m dx/2
            std::size_t plus = 2 * i, minus = 2 * i;
            for (std::size_t m = 0; m <= lag; ++m) {
                work[m] = pre[m] * half[plus] * std::conj(half[minus]);
                if (++plus == wrap) plus = 0;
                minus = (minus == 0 ? wrap : minus) - 1;
            }
            cz.transform(work, out);
            for (std::size_t j = 0; j < n_k; ++j) {
                W(i, j) = 2.0 * a * out[j].real();
                if (!std::isfinite(W(i, j))) finite[i] = 0;
            }
        }
    });
    if (std::find(finite.begin(), finite.end(), 0) != finite.end())
        throw numeric_error("Wigner transform produced non-finite values");
    return W;
}

namespace detail {
inline constexpr std::size_t fft_smoothing_taps = 64;

// In-place circular convolution of `lines` sequences of length n with the
// centred taps. Element e of line l sits at data[l*line_stride + e*stride].
// Long kernels go through the FFT, two real lines per complex transform.
inline void convolve_lines(std::vector<double>& data, std::size_t n, std::size_t stride, std::size_t lines,
                           std::size_t line_stride, const std::vector<double>& taps, unsigned threads) {
    const std::size_t h = taps.size() / 2;
    if (taps.size() <= fft_smoothing_taps) {
        parallel_blocks(lines, threads, [&](std::size_t begin, std::size_t end, unsigned) {
            std::vector<double> ext(n + 2 * h);
            for (std::size_t l = begin; l < end; ++l) {
                double* base = &data[l * line_stride];
                for (std::size_t j = 0; j < ext.size(); ++j) ext[j] = base[((j + n - h) % n) * stride];
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    // ext[j + h] is element j; tap a multiplies element j + h - a.
                    for (std::size_t a = 0; a < taps.size(); ++a) s += taps[a] * ext[j + 2 * h - a];
                    base[j * stride] = s;
                }
            }
        });
        return;
    }
    std::vector<std::complex<double>> kernel(n);
    for (std::size_t a = 0; a < taps.size(); ++a) kernel[(a + n - h) % n] += taps[a];
    {
        FftPlan fwd(n, FftPlan::Direction::forward);
        fwd(kernel);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t pairs = (lines + 1) / 2;
    parallel_blocks(pairs, threads, [&](std::size_t begin, std::size_t end, unsigned) {
        FftPlan fwd(n, FftPlan::Direction::forward), bwd(n, FftPlan::Direction::backward);
        std::vector<std::complex<double>> z(n);
        for (std::size_t p = begin; p < end; ++p) {
            double* a = &data[2 * p * line_stride];
            double* b = 2 * p + 1 < lines ? &data[(2 * p + 1) * line_stride] : nullptr;
            for (std::size_t e = 0; e < n; ++e) z[e] = {a[e * stride], b ? b[e * stride] : 0.0};
            fwd(z);
            for (std::size_t e = 0; e < n; ++e) z[e] *= kernel[e] * inv_n;
            bwd(z);
            for (std::size_t e = 0; e < n; ++e) {
                a[e * stride] = z[e].real();
                if (b) b[e * stride] = z[e].imag();
            }
        }
    });
}
} // namespace detail

// Circular discrete convolution with the normalized, truncated tensor
// Gaussian, along k and then along x. A transform already smoothed in k
// (WignerOptions::sigma_k == kern.sigma_k) only gets the x pass.
inline PhaseSpaceGrid smooth(const PhaseSpaceGrid& W, const SmoothingKernelSpec& kern, unsigned threads = 1) {
    if (!(kern.sigma_x > 0.0) || !(kern.sigma_k > 0.0)) throw input_error("sigma_x and sigma_k must be positive");
    if (W.sigma_x != 0.0 || (W.sigma_k != 0.0 && W.sigma_k != kern.sigma_k))
        throw input_error("smooth expects an unsmoothed Wigner transform (or one smoothed in k with the same sigma_k)");
    const bool k_done = W.sigma_k > 0.0;
    const std::size_t nx = W.n_x(), nk = W.n_k();
    const auto wx = kern.taps_x(W.dx(), W.epsilon);
    const auto wk = k_done ? std::vector<double>{1.0} : kern.taps_k(W.dk(), W.epsilon);
    if (wx.size() > nx || wk.size() > nk)
        throw input_error("smoothing kernel (" + std::to_string(wx.size()) + "x" + std::to_string(wk.size()) +
                          " samples) is wider than the grid (" + std::to_string(nx) + "x" + std::to_string(nk) + ")");

    PhaseSpaceGrid out(W.x, W.k, W.epsilon);
    out.sigma_x = kern.sigma_x;
    out.sigma_k = kern.sigma_k;
    out.time = W.time;
    out.values = W.values;
    if (!k_done) detail::convolve_lines(out.values, nk, 1, nx, nk, wk, threads);
    detail::convolve_lines(out.values, nx, nk, nk, 1, wx, threads);
    return out;
}

struct SwtTimings {
    double wt_seconds = 0.0;
    double smooth_seconds = 0.0;
};

// The k smoothing rides along in the transform's lag sum; x smoothing is a
// discrete convolution.
inline PhaseSpaceGrid swt(const WavefunctionGrid& f, const SmoothingKernelSpec& kern, std::size_t n_k, double k_max,
                          WignerOptions opt = {}, SwtTimings* timings = nullptr) {
    opt.sigma_k = kern.sigma_k;
    auto t0 = std::chrono::steady_clock::now();
    PhaseSpaceGrid W = wigner_transform(f, n_k, k_max, opt);
    const double t_wt = detail::seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    PhaseSpaceGrid S = smooth(W, kern, opt.threads);
    if (timings) {
        timings->wt_seconds = t_wt;
        timings->smooth_seconds = detail::seconds_since(t0);
    }
    return S;
}

// N(x) = int W dk (periodic trapezoid rule)
inline std::vector<double> marginal_x(const PhaseSpaceGrid& W) {
    std::vector<double> out(W.n_x(), 0.0);
    const double dk = W.dk();
    for (std::size_t i = 0; i < W.n_x(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < W.n_k(); ++j) s += W(i, j);
        out[i] = s * dk;
    }
    return out;
}

// int W dx per k column; for an unsmoothed WT this is |fhat(k/eps)|^2/eps.
inline std::vector<double> marginal_k(const PhaseSpaceGrid& W) {
    std::vector<double> out(W.n_k(), 0.0);
    for (std::size_t i = 0; i < W.n_x(); ++i)
        for (std::size_t j = 0; j < W.n_k(); ++j) out[j] += W(i, j);
    for (double& v : out) v *= W.dx();
    return out;
}

// ---------------------------------------------------------------------------
// SWTG: "SWTG", u32 version=1, u32 n_x, u32 n_k, f64 x_min, x_max, k_min,
// k_max, epsilon, sigma_x, sigma_k, time_stamp, then n_x*n_k f64 values,
// row-major. Little-endian throughout.

inline void write_swtg(std::ostream& os, const PhaseSpaceGrid& W) {
    io::put_magic(os, "SWTG");
    io::put<std::uint32_t>(os, 1);
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(W.n_x()));
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(W.n_k()));
    for (double v : {W.x.min, W.x.max, W.k.min, W.k.max, W.epsilon, W.sigma_x, W.sigma_k, W.time}) io::put(os, v);
    for (double v : W.values) io::put(os, v);
}

inline PhaseSpaceGrid read_swtg(std::istream& is) {
    io::expect_magic(is, "SWTG");
    if (auto version = io::get<std::uint32_t>(is); version != 1)
        throw input_error("unsupported SWTG version " + std::to_string(version));
    const auto nx = io::get<std::uint32_t>(is);
    const auto nk = io::get<std::uint32_t>(is);
    double h[8];
    for (double& v : h) v = io::get<double>(is);
    PhaseSpaceGrid W(Axis{h[0], h[1], nx}, Axis{h[2], h[3], nk}, h[4]);
    W.sigma_x = h[5];
    W.sigma_k = h[6];
    W.time = h[7];
    for (double& v : W.values) v = io::get<double>(is);
    return W;
}

inline void write_swtg(const std::string& path, const PhaseSpaceGrid& W) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot write '" + path + "'");
    write_swtg(os, W);
}

inline PhaseSpaceGrid read_swtg(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open '" + path + "'");
    return read_swtg(is);
}

inline void write_grid_csv(std::ostream& os, const PhaseSpaceGrid& W) {
    os << "x,k,value\n";
    for (std::size_t i = 0; i < W.n_x(); ++i)
        for (std::size_t j = 0; j < W.n_k(); ++j)
            os << io::fmt(W.x.at(i)) << ',' << io::fmt(W.k.at(j)) << ',' << io::fmt(W(i, j)) << '\n';
}

} // namespace swt

#endif
