#pragma once

#include <complex>
#include <cstddef>
#include <mutex>

#include <fftw3.h>

namespace maxdisc {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place complex DFT of fixed size. Owns an FFTW buffer and plan;
/// one instance per worker (fftw_execute on a private buffer is
/// thread-safe, planning is not).
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        buf_ = fftw_alloc_complex(n);
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_,
                                 FFTW_FORWARD, FFTW_ESTIMATE);
    }

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    ~Fft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }

    std::size_t size() const { return n_; }

    std::complex<double>* data() {
        return reinterpret_cast<std::complex<double>*>(buf_);
    }
    const std::complex<double>* data() const {
        return reinterpret_cast<const std::complex<double>*>(buf_);
    }

    /// Unnormalised forward transform of the buffer contents.
    void execute() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan plan_;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

}  // namespace maxdisc
