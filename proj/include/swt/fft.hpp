#ifndef SWT_FFT_HPP
#define SWT_FFT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "swt/error.hpp"

namespace swt {

namespace detail {
// FFTW's planner is not reentrant; execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

// In-place complex FFT of fixed length. Forward is exp(-2 pi i jk/n),
// backward exp(+2 pi i jk/n); neither is normalized.
class FftPlan {
public:
    enum class Direction { forward, backward };

    FftPlan(std::size_t n, Direction dir) : n_(n) {
        std::vector<std::complex<double>> scratch(n);
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(scratch.data()),
                                 reinterpret_cast<fftw_complex*>(scratch.data()),
                                 dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan_) throw numeric_error("FFTW failed to create a plan of length " + std::to_string(n));
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& o) noexcept : n_(o.n_), plan_(o.plan_) { o.plan_ = nullptr; }
    FftPlan& operator=(FftPlan&& o) noexcept {
        std::swap(n_, o.n_);
        std::swap(plan_, o.plan_);
        return *this;
    }

    ~FftPlan() {
        if (plan_) {
            std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
    }

    std::size_t size() const { return n_; }

    void operator()(std::span<std::complex<double>> data) const {
        if (data.size() != n_) throw error("FFT length mismatch");
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan_, p, p);
    }

private:
    std::size_t n_;
    fftw_plan plan_ = nullptr;
};

// Chirp-z (Bluestein) evaluation of
//     X_j = sum_{q<M} h_q exp(-2 pi i beta q j),   j < N,
// for arbitrary real beta, in O((M+N) log(M+N)).
class ChirpZ {
public:
    ChirpZ(std::size_t m, std::size_t n, double beta)
        : m_(m), n_(n), p_(padded_length(m + n - 1)), beta_(beta),
          fwd_(p_, FftPlan::Direction::forward), bwd_(p_, FftPlan::Direction::backward),
          in_chirp_(m), out_chirp_(n), kernel_(p_) {
        // qj = (q^2 + j^2 - (j-q)^2)/2 turns the sum into a convolution with
        // exp(+pi i beta s^2), s in [-(m-1), n-1], laid out circularly.
        for (std::size_t q = 0; q < m; ++q) in_chirp_[q] = std::conj(chirp(static_cast<double>(q)));
        for (std::size_t j = 0; j < n; ++j) out_chirp_[j] = std::conj(chirp(static_cast<double>(j))) / static_cast<double>(p_);
        for (std::size_t s = 0; s < n; ++s) kernel_[s] = chirp(static_cast<double>(s));
        for (std::size_t s = 1; s < m; ++s) kernel_[p_ - s] = chirp(static_cast<double>(s));
        fwd_(kernel_);
    }

    std::size_t input_size() const { return m_; }
    std::size_t output_size() const { return n_; }
    // Scratch length a caller must provide to transform().
    std::size_t work_size() const { return p_; }

    // `work` must hold work_size() elements; its first input_size() entries
    // are the input h_q on entry. Output lands in `out` (output_size()).
    void transform(std::span<std::complex<double>> work, std::span<std::complex<double>> out) const {
        for (std::size_t q = 0; q < m_; ++q) work[q] *= in_chirp_[q];
        std::fill(work.begin() + static_cast<std::ptrdiff_t>(m_), work.end(), std::complex<double>{});
        fwd_(work);
        for (std::size_t i = 0; i < p_; ++i) work[i] *= kernel_[i];
        bwd_(work);
        for (std::size_t j = 0; j < n_; ++j) out[j] = work[j] * out_chirp_[j];
    }

private:
    // Smallest 2^a 3^b 5^c 7^d >= n.
    static std::size_t padded_length(std::size_t n) {
        for (std::size_t p = std::max<std::size_t>(n, 1);; ++p) {
            std::size_t r = p;
            for (std::size_t f : {2, 3, 5, 7})
                while (r % f == 0) r /= f;
            if (r == 1) return p;
        }
    }

    // exp(pi i beta s^2), reduced modulo whole turns before the trig call.
    std::complex<double> chirp(double s) const {
        double turns = std::fmod(0.5 * beta_ * s * s, 1.0);
        return std::polar(1.0, 2.0 * std::numbers::pi * turns);
    }

    std::size_t m_, n_, p_;
    double beta_;
    FftPlan fwd_, bwd_;
    std::vector<std::complex<double>> in_chirp_, out_chirp_, kernel_;
};

} // namespace swt

#endif
