#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "surface.hpp"

namespace trapray {

struct PhaseState {
    double x = 0, y = 0, theta = 0;
};

struct FlowOptions {
    double h = 1e-3;
    double t_max = 30.0;
};

enum class FlowMethod { Auto, Heun, Exact };

struct ExitInfo {
    bool exited = false;
    bool capped = false;
    int circle = -1;
    int component = -1;
    double s = 0;      // boundary parameter of the exit point
    double beta = 0;   // exit direction measured from the inner normal, in (-pi, pi]
    double ell = 0;    // exit time (or t_max when capped)
    PhaseState state;  // state at exit
    int folds = 0;
};

struct GeodesicTrace {
    std::vector<double> t;
    std::vector<PhaseState> states;
    std::vector<int> word;  // identifications crossed, in order (wall indices)
    ExitInfo exit;
};

inline std::array<double, 3> geodesic_rhs(const SurfaceModel& m, const PhaseState& s) {
    double c = std::cos(s.theta), sn = std::sin(s.theta);
    if (m.cylinder()) {
        double hy = m.h(s.y);
        return {c / hy, sn, m.hprime(s.y) / hy * c};
    }
    if (m.flat()) return {c, sn, 0.0};
    double d = 1.0 - s.x * s.x - s.y * s.y;
    double e = 0.5 * std::sqrt(m.kappa0()) * d;
    // e^{-phi}(-phi_x sin + phi_y cos) with grad phi = 2z/d
    return {e * c, e * sn, std::sqrt(m.kappa0()) * (-s.x * sn + s.y * c)};
}

// metric norm of the coordinate velocity (equals 1 for unit speed geodesics)
inline double speed(const SurfaceModel& m, const PhaseState& s) {
    auto v = geodesic_rhs(m, s);
    if (m.cylinder()) {
        double hy = m.h(s.y);
        return std::sqrt(hy * hy * v[0] * v[0] + v[1] * v[1]);
    }
    return std::hypot(v[0], v[1]) / m.exp_neg_phi(s.x, s.y);
}

inline PhaseState heun_step(const SurfaceModel& m, const PhaseState& s, double h) {
    auto k1 = geodesic_rhs(m, s);
    PhaseState p{s.x + h * k1[0], s.y + h * k1[1], s.theta + h * k1[2]};
    auto k2 = geodesic_rhs(m, p);
    return {s.x + 0.5 * h * (k1[0] + k2[0]), s.y + 0.5 * h * (k1[1] + k2[1]), s.theta + 0.5 * h * (k1[2] + k2[2])};
}

namespace detail {

// index of a cut whose outside contains the point, or -1
inline int outside_cut(const SurfaceModel& m, double x, double y) {
    int best = -1;
    double fmax = 0;
    for (std::size_t k = 0; k < m.cuts.size(); ++k) {
        double f = m.cuts[k].eval(x, y);
        if (f >= fmax) {
            fmax = f;
            best = static_cast<int>(k);
        }
    }
    if (best < 0 && !m.cylinder() && x * x + y * y >= 1.0) best = 0;
    return best;
}

inline void fill_exit(const SurfaceModel& m, ExitInfo& e, int circle, const PhaseState& s, double t) {
    e.exited = true;
    e.circle = circle;
    e.state = s;
    e.state.theta = wrap_angle(e.state.theta);
    e.ell = t;
    auto [comp, sp] = m.boundary_parameter(circle, s.x, s.y);
    e.component = comp;
    e.s = sp;
    e.beta = principal_angle(s.theta - m.inner_normal_angle(circle, s.x, s.y));
}

}  // namespace detail

// Heun integration of one geodesic. visit(t, state) is called at t = 0, after every full step
// and at the bisected exit point.
template <class Visitor>
ExitInfo heun_trace(const SurfaceModel& m, PhaseState s, const FlowOptions& o, Visitor&& visit) {
    if (!(o.h > 0)) throw Error("integration step h must be positive");
    ExitInfo e;
    e.folds += m.fold(s.x, s.y, s.theta);
    double t = 0;
    visit(t, s);
    const double h = o.h;
    for (;;) {
        if (t >= o.t_max) {
            e.capped = true;
            e.ell = t;
            e.state = s;
            return e;
        }
        PhaseState n = heun_step(m, s, h);
        int nf = m.fold(n.x, n.y, n.theta);
        int c = detail::outside_cut(m, n.x, n.y);
        if (c >= 0) {
            double lo = 0, hi = h;
            PhaseState out = n;
            int cout = c;
            for (int it = 0; it < 34; ++it) {
                double mid = 0.5 * (lo + hi);
                PhaseState p = heun_step(m, s, mid);
                m.fold(p.x, p.y, p.theta);
                int cm = detail::outside_cut(m, p.x, p.y);
                if (cm >= 0) {
                    hi = mid;
                    out = p;
                    cout = cm;
                } else {
                    lo = mid;
                }
            }
            e.folds += nf;
            visit(t + hi, out);
            detail::fill_exit(m, e, cout, out, t + hi);
            return e;
        }
        e.folds += nf;
        s = n;
        t += h;
        visit(t, s);
    }
}

namespace detail {

// smallest u in (0,1) where a u^2 + b u + c changes sign from negative to positive
inline double outward_root(double a, double b, double c) {
    double best = 2.0;
    auto consider = [&](double u) {
        if (u > 1e-13 && u < 1.0 && 2 * a * u + b > 0 && u < best) best = u;
    };
    if (std::abs(a) < 1e-300) {
        if (b != 0) consider(-c / b);
        return best;
    }
    double disc = b * b - 4 * a * c;
    if (disc < 0) return best;
    double sq = std::sqrt(disc);
    double q = -0.5 * (b + (b >= 0 ? sq : -sq));
    if (q != 0) {
        consider(q / a);
        consider(c / q);
    } else {
        consider(0.0);
    }
    return best;
}

}  // namespace detail

// Exact ray casting for the constant curvature disk models (hyperbolic or flat).
// seg(state, t0, len) is called for every straight/geodesic segment inside the fundamental domain.
template <class SegmentVisitor>
ExitInfo exact_trace(const SurfaceModel& m, PhaseState s, double t_max, SegmentVisitor&& seg) {
    if (m.cylinder()) throw Error("exact ray casting is only available for the disk models");
    ExitInfo e;
    e.folds += m.fold(s.x, s.y, s.theta);
    double t = 0;
    const double sk = std::sqrt(m.kappa0());
    for (int guard = 0; guard < 100000; ++guard) {
        cplx z(s.x, s.y);
        double best = m.flat() ? 1e300 : 2.0;
        int hit_cut = -1, hit_wall = -1;
        double len = 0;
        if (m.flat()) {
            cplx d = std::polar(1.0, s.theta);
            for (std::size_t k = 0; k < m.cuts.size(); ++k) {
                const GenCircle& c = m.cuts[k];
                // f(z + u d) = A u^2 + 2(A Re(conj(d) z) + Re(conj(B) d)) u + f(z)
                double a = c.A, b = 2 * (c.A * std::real(std::conj(d) * z) + std::real(std::conj(c.B) * d));
                double disc = b * b - 4 * a * c.eval(z);
                if (a != 0 && disc >= 0) {
                    double r = (-b + std::sqrt(disc)) / (2 * a);
                    if (r > 1e-13 && r < best) {
                        best = r;
                        hit_cut = static_cast<int>(k);
                    }
                }
            }
            if (hit_cut < 0) break;
            len = best;
        } else {
            MobiusTransform f = conjugating_frame(z, s.theta);
            for (std::size_t k = 0; k < m.group.walls.size(); ++k) {
                GenCircle g = m.group.walls[k].circle.pushed_forward(f);
                double u = detail::outward_root(g.A, 2 * g.B.real(), g.C);
                if (u < best) {
                    best = u;
                    hit_wall = static_cast<int>(k);
                    hit_cut = -1;
                }
            }
            for (std::size_t k = 0; k < m.cuts.size(); ++k) {
                GenCircle g = m.cuts[k].pushed_forward(f);
                double u = detail::outward_root(g.A, 2 * g.B.real(), g.C);
                if (u < best) {
                    best = u;
                    hit_cut = static_cast<int>(k);
                    hit_wall = -1;
                }
            }
            if (best >= 1.0) break;
            len = 2.0 * std::atanh(best) / sk;
        }
        if (t + len >= t_max) {
            seg(s, t, t_max - t);
            e.capped = true;
            e.ell = t_max;
            e.state = s;
            return e;
        }
        seg(s, t, len);
        PhaseState p;
        if (m.flat()) {
            p = {s.x + len * std::cos(s.theta), s.y + len * std::sin(s.theta), s.theta};
        } else {
            DiskState d = exact_geodesic_flow({z, s.theta}, len, m.kappa0());
            p = {d.z.real(), d.z.imag(), d.theta};
        }
        t += len;
        if (hit_cut >= 0) {
            detail::fill_exit(m, e, hit_cut, p, t);
            return e;
        }
        const MobiusTransform& tr = m.group.walls[static_cast<std::size_t>(hit_wall)].to_inside;
        cplx q(p.x, p.y);
        double th = wrap_angle(p.theta + tr.direction_shift(q));
        q = tr(q);
        s = {q.real(), q.imag(), th};
        ++e.folds;
    }
    throw Error("exact ray casting failed to find an exit");
}

inline bool use_exact(const SurfaceModel& m, FlowMethod method) {
    if (method == FlowMethod::Exact) return true;
    if (method == FlowMethod::Heun) return false;
    return !m.cylinder();
}

// exit of the geodesic through a state, by the chosen method
inline ExitInfo cast_ray(const SurfaceModel& m, const PhaseState& s, const FlowOptions& o,
                         FlowMethod method = FlowMethod::Auto) {
    if (use_exact(m, method)) return exact_trace(m, s, o.t_max, [](const PhaseState&, double, double) {});
    return heun_trace(m, s, o, [](double, const PhaseState&) {});
}

inline GeodesicTrace integrate(const SurfaceModel& m, const PhaseState& s0, double h, double t_max) {
    GeodesicTrace tr;
    FlowOptions o{h, t_max};
    tr.exit = heun_trace(m, s0, o, [&](double t, const PhaseState& s) {
        tr.t.push_back(t);
        tr.states.push_back(s);
    });
    return tr;
}

// state on the boundary pointing into the domain at angle alpha from the inner normal
inline PhaseState influx_state(const BoundarySample& b, double alpha) { return {b.x, b.y, wrap_angle(b.normal_angle + alpha)}; }

inline ExitInfo scattering_endpoint(const SurfaceModel& m, const BoundarySample& b, double alpha, const FlowOptions& o = {},
                                    FlowMethod method = FlowMethod::Heun) {
    if (!(std::abs(alpha) < 0.5 * pi)) throw Error("influx angle must lie in (-pi/2, pi/2)");
    return cast_ray(m, influx_state(b, alpha), o, method);
}

// ---------------------------------------------------------------- escape rate

struct EscapeCurve {
    std::vector<double> t;
    std::vector<double> V;
    std::vector<long> alive;
    long n = 0;
};

inline PhaseState sample_liouville(const SurfaceModel& m, std::mt19937_64& rng, double dvol_max) {
    std::uniform_real_distribution<double> ux(m.x0, m.x0 + 2.0), uy(m.y0, m.y0 + 2.0), u01(0.0, 1.0),
        uth(0.0, two_pi);
    for (;;) {
        double x = ux(rng), y = uy(rng);
        if (!m.in_domain(x, y)) continue;
        if (u01(rng) * dvol_max > m.dvol(x, y)) continue;
        return {x, y, uth(rng)};
    }
}

inline double domain_dvol_max(const SurfaceModel& m) {
    double best = 0;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i)
            if (m.mask[m.idx(i, j)]) best = std::max(best, m.dvol(m.xc(i), m.yc(j)));
    for (const auto& a : m.arcs)
        for (int k = 0; k <= 256; ++k) {
            cplx p = a.point(k / 256.0);
            if (m.cylinder() || std::norm(p) < 1) best = std::max(best, m.dvol(p.real(), p.imag()));
        }
    return 1.05 * best;
}

inline EscapeCurve escape_rate(const SurfaceModel& m, long n_samples, double t_max, double bin, std::uint64_t seed = 1,
                               const FlowOptions& o = {}, FlowMethod method = FlowMethod::Auto) {
    if (n_samples < 1000) throw Error("escape_rate needs at least 1000 samples");
    if (!(bin > 0)) throw Error("bin width must be positive");
    std::mt19937_64 rng(seed);
    double dmax = domain_dvol_max(m);
    std::vector<PhaseState> starts(static_cast<std::size_t>(n_samples));
    for (auto& s : starts) s = sample_liouville(m, rng, dmax);
    FlowOptions oo = o;
    oo.t_max = t_max;
    std::vector<double> ell(starts.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n_samples; ++i) {
        ExitInfo e = cast_ray(m, starts[static_cast<std::size_t>(i)], oo, method);
        ell[static_cast<std::size_t>(i)] = e.capped ? INFINITY : e.ell;
    }
    std::sort(ell.begin(), ell.end());
    EscapeCurve c;
    c.n = n_samples;
    int nb = static_cast<int>(std::floor(t_max / bin + 1e-9));
    std::size_t k = 0;
    for (int b = 0; b <= nb; ++b) {
        double tb = b * bin;
        while (k < ell.size() && ell[k] <= tb) ++k;
        c.t.push_back(tb);
        c.alive.push_back(static_cast<long>(ell.size() - k));
        c.V.push_back(double(ell.size() - k) / double(n_samples));
    }
    return c;
}

struct DeltaFit {
    double delta = 0;
    double slope = 0;
    double intercept = 0;
    double t_lo = 0, t_hi = 0;
    int points = 0;
};

// least squares line through (t, -log V) on [t_lo, t_hi]; delta = 1 - slope
inline DeltaFit fit_delta(const std::vector<double>& t, const std::vector<double>& V, double t_lo, double t_hi) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(V[i] > 0)) throw Error("escape fit window reaches V = 0");
        double y = -std::log(V[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
        ++n;
    }
    if (n < 3) throw Error("escape fit window has fewer than 3 points");
    double den = n * stt - st * st;
    DeltaFit f;
    f.slope = (n * sty - st * sy) / den;
    f.intercept = (sy - f.slope * st) / n;
    f.delta = 1.0 - f.slope;
    f.t_lo = t_lo;
    f.t_hi = t_hi;
    f.points = n;
    return f;
}

// Window: from the first time V drops below 0.5 until fewer than min_alive samples survive.
inline DeltaFit estimate_delta_gamma(const EscapeCurve& c, long min_alive = 500) {
    std::size_t i0 = 0;
    while (i0 < c.V.size() && c.V[i0] >= 0.5) ++i0;
    if (i0 >= c.V.size()) throw Error("escape curve never drops below 1/2");
    std::size_t i1 = i0;
    while (i1 + 1 < c.V.size() && c.alive[i1 + 1] >= min_alive) ++i1;
    if (i1 < i0 + 2) throw Error("escape curve decays too fast for a fit");
    return fit_delta(c.t, c.V, c.t[i0], c.t[i1]);
}

inline DeltaFit estimate_delta_gamma(const std::vector<double>& t, const std::vector<double>& V) {
    std::size_t i0 = 0;
    while (i0 < V.size() && V[i0] >= 0.5) ++i0;
    if (i0 >= V.size()) throw Error("escape curve never drops below 1/2");
    std::size_t i1 = i0;
    while (i1 + 1 < V.size() && V[i1 + 1] > 0) ++i1;
    return fit_delta(t, V, t[i0], t[i1]);
}

// ---------------------------------------------------------------- Jacobi fields

struct JacobiState {
    double a = 1, ad = 0, b = 0, bd = 1;
    double A = 0, Ad = 0, B = 0, Bd = 0;
};

struct JacobiTrace {
    std::vector<double> t;
    std::vector<PhaseState> states;
    std::vector<JacobiState> jac;
    std::vector<double> kperp;
    std::vector<double> kappa;
    bool exited = false;
};

namespace detail {

using Jvec = std::array<double, 11>;

inline Jvec jacobi_rhs(const SurfaceModel& m, const Jvec& u) {
    PhaseState s{u[0], u[1], u[2]};
    auto g = geodesic_rhs(m, s);
    double k = m.gauss_curvature(s.x, s.y);
    double kp = m.kappa_perp(s.x, s.y, s.theta);
    double a = u[3], ad = u[4], b = u[5], bd = u[6], A = u[7], Ad = u[8], B = u[9], Bd = u[10];
    return {g[0], g[1], g[2], ad, -k * a, bd, -k * b, Ad, -k * A - b * a * kp, Bd, -k * B - b * b * kp};
}

}  // namespace detail

// Jacobi fields a, b and their vertical derivatives A = Va, B = Vb along the geodesic.
// The coupled system is advanced with classical RK4 with step h.
inline JacobiTrace jacobi_propagate(const SurfaceModel& m, const PhaseState& s0, double t_max, double h) {
    if (!(h > 0)) throw Error("integration step h must be positive");
    using detail::Jvec;
    JacobiTrace tr;
    PhaseState s = s0;
    m.fold(s.x, s.y, s.theta);
    Jvec u{s.x, s.y, s.theta, 1, 0, 0, 1, 0, 0, 0, 0};
    auto record = [&](double t) {
        tr.t.push_back(t);
        tr.states.push_back({u[0], u[1], u[2]});
        tr.jac.push_back({u[3], u[4], u[5], u[6], u[7], u[8], u[9], u[10]});
        tr.kperp.push_back(m.kappa_perp(u[0], u[1], u[2]));
        tr.kappa.push_back(m.gauss_curvature(u[0], u[1]));
    };
    record(0);
    int nsteps = static_cast<int>(std::ceil(t_max / h - 1e-9));
    for (int n = 1; n <= nsteps; ++n) {
        auto add = [](const Jvec& a, const Jvec& b, double c) {
            Jvec r;
            for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + c * b[i];
            return r;
        };
        Jvec k1 = detail::jacobi_rhs(m, u);
        Jvec k2 = detail::jacobi_rhs(m, add(u, k1, 0.5 * h));
        Jvec k3 = detail::jacobi_rhs(m, add(u, k2, 0.5 * h));
        Jvec k4 = detail::jacobi_rhs(m, add(u, k3, h));
        Jvec nu;
        for (std::size_t i = 0; i < nu.size(); ++i) nu[i] = u[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        m.fold(nu[0], nu[1], nu[2]);
        if (!m.inside_cuts(nu[0], nu[1])) {
            tr.exited = true;
            break;
        }
        u = nu;
        record(n * h);
    }
    return tr;
}

inline double wronskian(const JacobiState& j) { return j.a * j.bd - j.ad * j.b; }

// V(a/b)(t) at sample index k of a Jacobi trace
inline double w_kernel_value(const JacobiTrace& tr, std::size_t k) {
    const JacobiState& j = tr.jac.at(k);
    if (std::abs(j.b) < 1e-14) throw Error("w_kernel_probe: b vanishes (t = 0)");
    return (j.A * j.b - j.a * j.B) / (j.b * j.b);
}

// V(a/b)(t) from the Duhamel integral over the stored trace (composite Simpson, trapezoid tail)
inline double w_kernel_duhamel(const JacobiTrace& tr, std::size_t k) {
    if (k == 0) return 0.0;
    const JacobiState& jt = tr.jac[k];
    auto g = [&](std::size_t i) {
        const JacobiState& js = tr.jac[i];
        double w = js.a * jt.b - jt.a * js.b;
        return w * w * js.b * tr.kperp[i];
    };
    double sum = 0;
    std::size_t n = k;
    std::size_t even = n - (n % 2);
    for (std::size_t i = 0; i + 2 <= even; i += 2) {
        double hh = tr.t[i + 2] - tr.t[i];
        sum += hh / 6.0 * (g(i) + 4 * g(i + 1) + g(i + 2));
    }
    if (even < n) sum += 0.5 * (tr.t[n] - tr.t[even]) * (g(even) + g(n));
    return -sum / (jt.b * jt.b);
}

inline double w_kernel_probe(const SurfaceModel& m, const PhaseState& s, double t, double h = 1e-3) {
    if (!(t > 0)) throw Error("w_kernel_probe needs t > 0");
    JacobiTrace tr = jacobi_propagate(m, s, t, h);
    return w_kernel_value(tr, tr.jac.size() - 1);
}

}  // namespace trapray
