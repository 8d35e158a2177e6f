#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace trapray {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double wrap_angle(double a) {
    a = std::fmod(a, two_pi);
    if (a < 0) a += two_pi;
    return a;
}

// maps an angle into (-pi, pi]
inline double principal_angle(double a) {
    a = wrap_angle(a);
    return a > pi ? a - two_pi : a;
}

inline double wrap_unit(double s) {
    s -= std::floor(s);
    return s >= 1.0 ? 0.0 : s;
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Neumaier summation, used where reductions must be reproducible and accurate
struct KahanSum {
    double s = 0, c = 0;
    void add(double x) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

}  // namespace trapray
