#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <chrono>
#include <limits>

#include "surface.hpp"

namespace trapray {

// ---------------------------------------------------------------- Gamma and digamma

namespace detail {

// Lanczos coefficients, g = 7, n = 9
inline constexpr double lanczos_g = 7.0;
inline constexpr std::array<double, 9> lanczos_c = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

inline bool is_gamma_pole(cplx z) {
    return z.imag() == 0 && z.real() <= 0 && z.real() == std::floor(z.real());
}

}  // namespace detail

inline cplx gamma_fn(cplx z) {
    if (detail::is_gamma_pole(z)) throw Error("gamma_fn: pole at a nonpositive integer");
    if (z.real() < 0.5) return pi / (std::sin(pi * z) * gamma_fn(1.0 - z));
    z -= 1.0;
    cplx a = detail::lanczos_c[0];
    for (std::size_t k = 1; k < detail::lanczos_c.size(); ++k) a += detail::lanczos_c[k] / (z + double(k));
    cplx t = z + detail::lanczos_g + 0.5;
    return std::sqrt(two_pi) * std::pow(t, z + 0.5) * std::exp(-t) * a;
}

inline double gamma_fn(double x) { return gamma_fn(cplx(x, 0.0)).real(); }

// digamma from the log-derivative of the Lanczos form
inline cplx digamma_lanczos(cplx z) {
    if (detail::is_gamma_pole(z)) throw Error("digamma: pole at a nonpositive integer");
    if (z.real() < 0.5) return digamma_lanczos(1.0 - z) - pi / std::tan(pi * z);
    cplx w = z - 1.0;
    cplx a = detail::lanczos_c[0], da = 0;
    for (std::size_t k = 1; k < detail::lanczos_c.size(); ++k) {
        cplx q = w + double(k);
        a += detail::lanczos_c[k] / q;
        da -= detail::lanczos_c[k] / (q * q);
    }
    cplx t = w + detail::lanczos_g + 0.5;
    return std::log(t) + (w + 0.5) / t - 1.0 + da / a;
}

// digamma from psi(z) = -gamma_E + sum_{n>=0} (1/(n+1) - 1/(n+z)); the first n_terms are
// summed directly and the remainder psi(z + n) - psi(n + 1) comes from the asymptotic series
inline cplx digamma_series(cplx z, int n_terms = 64) {
    if (detail::is_gamma_pole(z)) throw Error("digamma: pole at a nonpositive integer");
    constexpr double euler_gamma = 0.57721566490153286061;
    auto asym = [](cplx x) {
        cplx x2 = 1.0 / (x * x);
        return std::log(x) - 0.5 / x -
               x2 * (1.0 / 12 - x2 * (1.0 / 120 - x2 * (1.0 / 252 - x2 * (1.0 / 240 - x2 * (1.0 / 132)))));
    };
    cplx s = -euler_gamma;
    for (int n = 0; n < n_terms; ++n) s += 1.0 / (n + 1.0) - 1.0 / (double(n) + z);
    return s + asym(z + double(n_terms)) - asym(cplx(n_terms + 1.0, 0.0));
}

// ---------------------------------------------------------------- spectral function

// H_lambda(z) with the square root on the principal branch; the convention
// sqrt(z) = i(s - 1/2) for z = -(s - 1/2)^2 is the principal root.
inline double h_lambda(cplx z, double lambda) {
    if (!(lambda >= 0 && lambda < 0.5)) throw Error("h_lambda: lambda must lie in [0, 1/2)");
    cplx r = std::sqrt(z);
    double bound = 0.5 - lambda;
    if (!(std::abs(r.imag()) < bound)) throw Error("h_lambda: spectral value outside the domain of holomorphy");
    cplx iw = cplx(0, 1) * r * 0.5;
    cplx num = gamma_fn(0.25 - lambda / 2 - iw) * gamma_fn(0.25 + lambda / 2 + iw) * gamma_fn(0.25 - lambda / 2 + iw) *
               gamma_fn(0.25 + lambda / 2 - iw);
    cplx den = gamma_fn(0.25 - iw) * gamma_fn(0.25 + iw) * gamma_fn(0.75 - iw) * gamma_fn(0.75 + iw);
    return (4.0 * num / den).real();
}

inline double h_lambda(double z, double lambda) { return h_lambda(cplx(z, 0.0), lambda); }

inline cplx f_lambda(cplx r, double lambda) {
    cplx ir2 = cplx(0, 1) * r * 0.5;
    return gamma_fn(0.25 - ir2 - lambda / 2) * gamma_fn(0.25 - ir2 + lambda / 2) / gamma_fn(0.5 - 2.0 * ir2);
}

// The Mellin integral int_0^inf x^{-1/2-ir-lambda} (1+x^2)^{-1/2+ir} dx by the trapezoid rule in
// x = e^u. It equals f_lambda(r)/2 (Beta integral); H_lambda follows the Gamma form.
inline cplx f_lambda_quadrature(double r, double lambda, double du = 0.01, double u_max = 120) {
    cplx acc = 0;
    cplx a(0.5 - lambda, -r), b(-0.5, r);
    for (double u = -u_max; u <= u_max; u += du) {
        double e2 = std::exp(2 * u);
        acc += std::exp(a * u) * std::exp(b * std::log1p(e2));
    }
    return acc * du;
}

// theta(t) = H_lambda(4t^2) and its logarithmic derivative by the digamma series
inline double theta_fn(double t, double lambda) { return h_lambda(4 * t * t, lambda); }

inline double theta_log_derivative(double t, double lambda, int n_terms = 200000) {
    double s = 0;
    auto q = [&](double c) { return 1.0 / (c * c + t * t); };
    for (int n = 0; n < n_terms; ++n)
        s += q(n + (1 - 2 * lambda) / 4) + q(n + (1 + 2 * lambda) / 4) - q(n + 0.75) - q(n + 0.25);
    return -2 * t * s;
}

// rho(t): the Gamma quotient of the spectral function on the imaginary axis, 4 rho(t) = H_lambda(-4t^2)
inline double rho_fn(double t, double lambda) {
    double a = (1 - 2 * lambda) / 4, b = (1 + 2 * lambda) / 4;
    if (!(t >= 0 && t < a)) throw Error("rho_fn: t outside [0, (1 - 2 lambda)/4)");
    double num = gamma_fn(a - t) * gamma_fn(a + t) * gamma_fn(b + t) * gamma_fn(b - t);
    double den = gamma_fn(0.75 - t) * gamma_fn(0.25 - t) * gamma_fn(0.75 + t) * gamma_fn(0.25 + t);
    return num / den;
}

inline double rho_log_derivative(double t, double lambda) {
    double a = (1 - 2 * lambda) / 4, b = (1 + 2 * lambda) / 4;
    auto psi = [](double x) { return digamma_lanczos(cplx(x, 0)).real(); };
    return psi(a + t) - psi(a - t) + psi(b + t) - psi(b - t) + psi(0.75 - t) - psi(0.75 + t) + psi(0.25 - t) - psi(0.25 + t);
}

// ---------------------------------------------------------------- operator norms

struct SpectralParams {
    double lambda = 0;
    double delta = 0;
    double kappa0 = 1;
    double lambda1 = 1, lambda2 = 1;
};

inline double pi0_norm_branch1(double lambda) {
    double q = gamma_fn((1 - 2 * lambda) / 4) * gamma_fn((1 + 2 * lambda) / 4) / (gamma_fn(0.25) * gamma_fn(0.75));
    return 4 * q * q;
}

inline double pi0_norm_branch2(double lambda, double delta) {
    if (!(lambda < 1 - delta && lambda < delta)) throw Error("pi0_norm: Gamma pole, lambda too large for delta");
    double num = gamma_fn((delta - lambda) / 2) * gamma_fn((delta + lambda) / 2) * gamma_fn((1 - lambda - delta) / 2) *
                 gamma_fn((1 + lambda - delta) / 2);
    double den = gamma_fn((1 - delta) / 2) * gamma_fn(delta / 2) * gamma_fn((1 + delta) / 2) * gamma_fn(1 - delta / 2);
    return 4 * num / den;
}

// Unit-curvature norm of Pi_0^lambda on the quotient, selected by delta <= 1/2 or > 1/2
inline double pi0_norm(double lambda, double delta) {
    if (!(lambda >= 0 && lambda < 0.5)) throw Error("pi0_norm: lambda must lie in [0, 1/2)");
    if (!(delta >= 0 && delta < 1)) throw Error("pi0_norm: delta must lie in [0, 1)");
    if (delta <= 0.5) return pi0_norm_branch1(lambda);
    return pi0_norm_branch2(lambda, delta);
}

inline void check_spectral_params(const SpectralParams& p) {
    if (!(p.kappa0 > 0)) throw Error("kappa0 must be positive");
    if (!(p.lambda1 > 0 && p.lambda1 <= 1 && p.lambda2 > 0 && p.lambda2 <= 1)) throw Error("lambda1, lambda2 must lie in (0, 1]");
    double l12 = p.lambda1 * p.lambda2;
    if (!(l12 > std::max(p.delta, 0.5))) throw Error("need lambda1 lambda2 > max(delta, 1/2)");
    if (std::abs(1 - p.lambda - l12) > 1e-12) throw Error("need 1 - lambda = lambda1 lambda2");
}

inline double pi0_norm(const SpectralParams& p) {
    check_spectral_params(p);
    return pi0_norm(p.lambda, p.delta);
}

// ||I0* I0|| for a metric comparable to curvature -kappa0, with the kappa0 and lambda_i prefactors
inline double pi0_norm_scaled(const SpectralParams& p) {
    return p.lambda2 / (std::sqrt(p.kappa0) * std::pow(p.lambda1, 4)) * pi0_norm(p);
}

inline SpectralParams spectral_params(double delta, double lambda1, double lambda2, double kappa0 = 1) {
    SpectralParams p;
    p.delta = delta;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.kappa0 = kappa0;
    p.lambda = 1 - lambda1 * lambda2;
    check_spectral_params(p);
    return p;
}

// neighbourhood constant: |dk|_inf <= A kappa0^{3/2} makes W a contraction
inline double neighbourhood_constant(double delta, double lambda1, double lambda2) {
    SpectralParams p = spectral_params(delta, lambda1, lambda2);
    return 3 * std::pow(lambda1, 4) / (lambda2 * pi0_norm(p));
}

inline double w_norm_bound(double dkappa_sup, double kappa0, double pi0_norm_value) {
    if (!(kappa0 > 0)) throw Error("kappa0 must be positive");
    return dkappa_sup / (3 * kappa0) * pi0_norm_value;
}

inline double w_norm_bound(const SurfaceModel& m, double pi0_norm_value) {
    return w_norm_bound(curvature_gradient_sup(m), m.cfg.kappa0, pi0_norm_value);
}

// Cylinder(eps) chain: lambda1 = 1/cosh eps, lambda2 = 1, kappa0 = 1, delta = 0, and |dk| <= 2 eps (1 + eps)
inline double cylinder_gamma_quotient(double eps) {
    double c = 1 / std::cosh(eps);
    return gamma_fn(0.5 * (c - 0.5)) * gamma_fn(0.75 - 0.5 * c) / (gamma_fn(0.25) * gamma_fn(0.75));
}

inline double cylinder_pi0_bound(double eps) {
    if (!(eps >= 0 && eps <= std::acosh(2.0))) throw Error("cylinder bound needs 0 <= eps <= arccosh 2");
    double q = cylinder_gamma_quotient(eps);
    return 4 * std::pow(std::cosh(eps), 4) * q * q;
}

inline double cylinder_w_bound(double eps) {
    double q = cylinder_gamma_quotient(eps);
    if (!(eps >= 0 && eps <= std::acosh(2.0))) throw Error("cylinder bound needs 0 <= eps <= arccosh 2");
    return 8.0 / 3.0 * eps * (1 + eps) * std::pow(std::cosh(eps), 4) * q * q;
}

// largest eps with cylinder_w_bound(eps) < 1 (the bound is increasing in eps)
inline double cylinder_contraction_threshold() {
    double lo = 0, hi = std::acosh(2.0);
    for (int k = 0; k < 80; ++k) {
        double mid = 0.5 * (lo + hi);
        (cylinder_w_bound(mid) < 1 ? lo : hi) = mid;
    }
    return lo;
}

// ---------------------------------------------------------------- universal constant

// e^{3s/2} int_s^inf e^{-3u/2} / sqrt(sinh u) du, with u = s + w^2 so the endpoint is regular
inline double universal_inner_scaled(double s) {
    auto g = [s](double w) {
        if (w == 0) return s == 0 ? 2.0 : 0.0;
        return 2 * w * std::exp(-1.5 * w * w) / std::sqrt(std::sinh(s + w * w));
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, std::numeric_limits<double>::infinity(), 15,
                                                                         1e-13);
}

inline double universal_inner(double s) { return std::exp(-1.5 * s) * universal_inner_scaled(s); }

// int_0^inf e^{3s} (int_s^inf e^{-3u/2} / sqrt(sinh u) du)^2 ds
inline double universal_constant() {
    auto outer = [](double s) {
        double J = universal_inner_scaled(s);
        return J * J;
    };
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(outer, 0.0, std::numeric_limits<double>::infinity(), 1e-11);
}

// ---------------------------------------------------------------- Schur bound

struct SchurResult {
    std::vector<double> by_length;  // sup over sample points of the sum over |gamma| <= L, L = 0..max
    std::vector<int> words_by_length;
    double seconds = 0;
};

// Truncated Schur bound sup_x sum_{|gamma| <= L} int_F 2 sqrt(k0) cosh(lambda d)/sinh(d) dvol on the
// model grid. Sample points are every `stride`-th mask cell; the cell holding the sample point is
// integrated in geodesic polar coordinates, where the kernel times the area element is constant.
inline SchurResult schur_bound(const SurfaceModel& m, double lambda, int max_len, int stride = 2) {
    if (m.cylinder() || !m.group.rank()) throw Error("schur_bound needs a Schottky model");
    if (!(lambda >= 0 && lambda < 0.5)) throw Error("schur_bound: lambda must lie in [0, 1/2)");
    if (max_len < 0) throw Error("word length must be nonnegative");
    if (stride < 1) throw Error("stride must be positive");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<GroupElement> words = reduced_words(m.group, max_len);
    SchurResult res;
    res.words_by_length.assign(static_cast<std::size_t>(max_len) + 1, 0);
    for (const auto& w : words) ++res.words_by_length[w.word.size()];

    std::vector<cplx> cells;
    std::vector<double> area;  // hyperbolic (unit curvature) area of each cell
    std::vector<int> cell_index;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i)
            if (m.mask[m.idx(i, j)]) {
                cplx z(m.xc(i), m.yc(j));
                double c = 2 / (1 - std::norm(z));
                cells.push_back(z);
                area.push_back(c * c * m.cell * m.cell);
                cell_index.push_back(static_cast<int>(m.idx(i, j)));
            }
    std::vector<std::size_t> samples;
    for (std::size_t q = 0; q < cells.size(); ++q) {
        int id = cell_index[q];
        if ((id % m.N) % stride == 0 && (id / m.N) % stride == 0) samples.push_back(q);
    }
    double k0 = m.cfg.kappa0;
    // diagonal cell: 2 * int_0^{2pi} R(phi) dphi with R the distance to the cell edge
    auto diagonal = [&](cplx z) {
        double c = 2 / (1 - std::norm(z)), hh = 0.5 * m.cell;
        const int n = 256;
        double acc = 0;
        for (int k = 0; k < n; ++k) {
            double ph = two_pi * (k + 0.5) / n;
            double r = hh / std::max(std::abs(std::cos(ph)), std::abs(std::sin(ph)));
            acc += c * r;
        }
        return 2 * acc * two_pi / n;
    };
    std::vector<std::vector<double>> per_sample(samples.size(), std::vector<double>(static_cast<std::size_t>(max_len) + 1, 0.0));
#pragma omp parallel for schedule(dynamic, 1)
    for (long a = 0; a < static_cast<long>(samples.size()); ++a) {
        std::size_t q0 = samples[static_cast<std::size_t>(a)];
        cplx x = cells[q0];
        std::vector<double>& acc = per_sample[static_cast<std::size_t>(a)];
        for (const auto& w : words) {
            cplx gx = w.t(x);
            double ng = std::norm(gx);
            KahanSum s;
            for (std::size_t q = 0; q < cells.size(); ++q) {
                if (w.word.empty() && q == q0) {
                    s.add(diagonal(x));
                    continue;
                }
                double nq = std::norm(cells[q]);
                double ch = 1 + 2 * std::norm(gx - cells[q]) / ((1 - ng) * (1 - nq));
                double d = std::acosh(ch);
                s.add(2 * std::cosh(lambda * d) / std::sqrt(ch * ch - 1) * area[q]);
            }
            acc[w.word.size()] += s.value();
        }
        // kernel 2 sqrt(k0)/sinh(d) against dvol = dvol_unit / k0
        for (auto& v : acc) v /= std::sqrt(k0);
    }
    res.by_length.assign(static_cast<std::size_t>(max_len) + 1, 0.0);
    for (const auto& acc : per_sample) {
        double cum = 0;
        for (int L = 0; L <= max_len; ++L) {
            cum += acc[static_cast<std::size_t>(L)];
            res.by_length[static_cast<std::size_t>(L)] = std::max(res.by_length[static_cast<std::size_t>(L)], cum);
        }
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace trapray
