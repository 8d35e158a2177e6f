#pragma once

#include <fftw3.h>

#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "xray.hpp"

namespace trapray {

namespace detail {

struct FftwBuffer {
    double* re = nullptr;
    fftw_complex* co = nullptr;
    explicit FftwBuffer(int n) {
        re = fftw_alloc_real(static_cast<std::size_t>(n));
        co = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    }
    ~FftwBuffer() {
        fftw_free(re);
        fftw_free(co);
    }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
};

// r2c/c2r plan pair of length n; plans are made once and executed on per-call buffers
class FftPlans {
public:
    explicit FftPlans(int n) : n_(n) {
        static std::mutex planner;
        std::lock_guard<std::mutex> lock(planner);
        FftwBuffer b(n);
        fwd_ = fftw_plan_dft_r2c_1d(n, b.re, b.co, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(n, b.co, b.re, FFTW_ESTIMATE);
    }
    ~FftPlans() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

    void forward(FftwBuffer& b) const { fftw_execute_dft_r2c(fwd_, b.re, b.co); }
    void backward(FftwBuffer& b) const { fftw_execute_dft_c2r(bwd_, b.co, b.re); }
    int size() const { return n_; }

private:
    int n_;
    fftw_plan fwd_, bwd_;
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace detail

struct FiberSpectrum {
    int n = 0;  // angle grid size
    std::vector<std::vector<cplx>> coeffs;  // per (component, sample): k = 0..n/2, normalized by n
};

inline FiberSpectrum fiber_spectrum(const FanBeamData& d) {
    if (!d.full_circle) throw Error("fiber_spectrum expects full-circle data");
    if (!detail::is_power_of_two(d.n_angles)) throw Error("fiber angle count must be a power of two");
    detail::FftPlans plans(d.n_angles);
    detail::FftwBuffer b(d.n_angles);
    FiberSpectrum s;
    s.n = d.n_angles;
    for (int c = 0; c < d.n_comp; ++c)
        for (int i = 0; i < d.n_pts; ++i) {
            for (int k = 0; k < d.n_angles; ++k) b.re[k] = d.at(c, i, k);
            plans.forward(b);
            std::vector<cplx> row(static_cast<std::size_t>(d.n_angles / 2 + 1));
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = cplx(b.co[k][0], b.co[k][1]) / double(d.n_angles);
            s.coeffs.push_back(std::move(row));
        }
    return s;
}

// Fiberwise Hilbert transform: multiplier -i sign(k). The Nyquist mode has no sign and is removed.
inline FanBeamData hilbert_fiber(const FanBeamData& d) {
    if (!d.full_circle) throw Error("hilbert_fiber expects full-circle data");
    int n = d.n_angles;
    if (!detail::is_power_of_two(n)) throw Error("fiber angle count must be a power of two");
    FanBeamData o = d;
    detail::FftPlans plans(n);
    long rows = static_cast<long>(d.n_comp) * d.n_pts;
#pragma omp parallel
    {
        detail::FftwBuffer b(n);
#pragma omp for schedule(static)
        for (long r = 0; r < rows; ++r) {
            int c = static_cast<int>(r / d.n_pts), i = static_cast<int>(r % d.n_pts);
            for (int k = 0; k < n; ++k) b.re[k] = d.at(c, i, k);
            plans.forward(b);
            b.co[0][0] = b.co[0][1] = 0;
            b.co[n / 2][0] = b.co[n / 2][1] = 0;
            for (int k = 1; k < n / 2; ++k) {
                // (a + ib) * (-i) = b - ia
                double re = b.co[k][0], im = b.co[k][1];
                b.co[k][0] = im;
                b.co[k][1] = -re;
            }
            plans.backward(b);
            for (int k = 0; k < n; ++k) o.at(c, i, k) = b.re[k] / n;
        }
    }
    return o;
}

// split along the involution v -> -v (theta -> theta + pi)
inline std::pair<FanBeamData, FanBeamData> odd_even_split(const FanBeamData& d) {
    if (!d.full_circle) throw Error("odd_even_split expects full-circle data");
    if (d.n_angles % 2 != 0) throw Error("odd_even_split needs an even angle count");
    FanBeamData odd = d, even = d;
    int h = d.n_angles / 2;
    for (int c = 0; c < d.n_comp; ++c)
        for (int i = 0; i < d.n_pts; ++i)
            for (int k = 0; k < d.n_angles; ++k) {
                double a = d.at(c, i, k), b = d.at(c, i, (k + h) % d.n_angles);
                odd.at(c, i, k) = 0.5 * (a - b);
                even.at(c, i, k) = 0.5 * (a + b);
            }
    return {odd, even};
}

}  // namespace trapray
