#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "geoflow.hpp"

namespace trapray {

struct RayGrid {
    int n_pts = 200;      // boundary samples per component
    int n_angles = 256;   // influx angles
    double alpha_max = 0.5 * pi;

    bool operator==(const RayGrid&) const = default;
};

// Boundary data indexed by (component, boundary sample, angle). Influx data use midpoint
// angles in (-alpha_max, alpha_max) measured from the inner normal; full-circle data use
// angles 2 pi k / n over [0, 2 pi), also measured from the inner normal.
struct FanBeamData {
    int n_comp = 0, n_pts = 0, n_angles = 0;
    bool full_circle = false;
    double alpha_max = 0.5 * pi;
    std::uint64_t model_hash = 0;
    std::vector<double> v;
    std::vector<std::uint8_t> capped;

    static FanBeamData influx(int n_comp, int n_pts, int n_angles, double alpha_max) {
        FanBeamData d;
        d.n_comp = n_comp;
        d.n_pts = n_pts;
        d.n_angles = n_angles;
        d.alpha_max = alpha_max;
        d.v.assign(static_cast<std::size_t>(n_comp) * n_pts * n_angles, 0.0);
        d.capped.assign(d.v.size(), 0);
        return d;
    }
    static FanBeamData full(int n_comp, int n_pts, int n_angles) {
        FanBeamData d = influx(n_comp, n_pts, n_angles, 0.5 * pi);
        d.full_circle = true;
        return d;
    }
    FanBeamData zeros_like() const {
        FanBeamData d = *this;
        std::fill(d.v.begin(), d.v.end(), 0.0);
        std::fill(d.capped.begin(), d.capped.end(), 0);
        return d;
    }

    std::size_t index(int c, int i, int k) const {
        return (static_cast<std::size_t>(c) * n_pts + i) * n_angles + k;
    }
    double& at(int c, int i, int k) { return v[index(c, i, k)]; }
    double at(int c, int i, int k) const { return v[index(c, i, k)]; }
    double s(int i) const { return (i + 0.5) / n_pts; }
    double angle(int k) const {
        if (full_circle) return two_pi * k / n_angles;
        return -alpha_max + (k + 0.5) * 2.0 * alpha_max / n_angles;
    }
    double dangle() const { return full_circle ? two_pi / n_angles : 2.0 * alpha_max / n_angles; }
    long n_capped() const {
        long n = 0;
        for (auto c : capped) n += c;
        return n;
    }
};

inline double mu_nu_weight(double alpha) { return std::abs(std::cos(alpha)); }

// ---------------------------------------------------------------- grid sampling

// Bilinear sampling of a masked grid field at points of the fundamental domain. Cells of the
// halo across the side pairings carry the values of their folded positions; cells outside
// the extended mask do not contribute and the remaining weights are renormalized.
class FieldSampler {
public:
    FieldSampler(const SurfaceModel& m, const GridField& f) : m_(m), N_(m.N) {
        vals_.assign(f.v.size(), 0.0);
        for (std::size_t k = 0; k < f.v.size(); ++k)
            if (m.mask[k]) vals_[k] = f.v[k];
        if (!m.cylinder()) {
            for (int j = 0; j < N_; ++j)
                for (int i = 0; i < N_; ++i) {
                    std::size_t k = m.idx(i, j);
                    if (m.mask[k] || !m.ext_mask[k]) continue;
                    double x = m.xc(i), y = m.yc(j), th = 0;
                    m.fold(x, y, th);
                    vals_[k] = bilinear(x, y, m.mask, f.v);
                }
        }
    }

    double operator()(double x, double y) const { return bilinear(x, y, m_.ext_mask, vals_); }

private:
    double bilinear(double x, double y, const std::vector<std::uint8_t>& mask, const std::vector<double>& val) const {
        double u = (x - m_.x0) / m_.cell - 0.5, w = (y - m_.y0) / m_.cell - 0.5;
        int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(w));
        double fu = u - i0, fw = w - j0;
        double acc = 0, wsum = 0;
        for (int dj = 0; dj < 2; ++dj) {
            int j = j0 + dj;
            if (j < 0 || j >= N_) continue;
            double wy = dj ? fw : 1 - fw;
            for (int di = 0; di < 2; ++di) {
                int i = i0 + di;
                if (m_.cylinder())
                    i = (i % N_ + N_) % N_;
                else if (i < 0 || i >= N_)
                    continue;
                std::size_t k = m_.idx(i, j);
                if (!mask[k]) continue;
                double wt = wy * (di ? fu : 1 - fu);
                acc += wt * val[k];
                wsum += wt;
            }
        }
        return wsum > 1e-12 ? acc / wsum : 0.0;
    }

    const SurfaceModel& m_;
    int N_;
    std::vector<double> vals_;
};

// ---------------------------------------------------------------- forward transforms

namespace detail {

// integrand evaluators: each returns the K integrand values at a state
struct ScalarIntegrand {
    std::vector<FieldSampler> f;
    void operator()(const SurfaceModel&, const PhaseState& s, double* out) const {
        for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k](s.x, s.y);
    }
    std::size_t size() const { return f.size(); }
};

struct OneFormIntegrand {
    std::vector<FieldSampler> ux, uy;
    void operator()(const SurfaceModel& m, const PhaseState& s, double* out) const {
        auto v = m.coord_velocity(s.x, s.y, s.theta);
        for (std::size_t k = 0; k < ux.size(); ++k) out[k] = ux[k](s.x, s.y) * v[0] + uy[k](s.x, s.y) * v[1];
    }
    std::size_t size() const { return ux.size(); }
};

template <class Integrand>
std::vector<FanBeamData> forward_batch(const SurfaceModel& m, const Integrand& g, const RayGrid& rg, const FlowOptions& o) {
    if (!(rg.alpha_max > 0 && rg.alpha_max <= 0.5 * pi)) throw Error("influx cone must lie within (-pi/2, pi/2)");
    const std::size_t K = g.size();
    int nc = m.n_components();
    std::vector<FanBeamData> out(K, FanBeamData::influx(nc, rg.n_pts, rg.n_angles, rg.alpha_max));
    const FanBeamData& proto = out[0];
    std::vector<BoundarySample> bs;
    for (int c = 0; c < nc; ++c)
        for (int i = 0; i < rg.n_pts; ++i) bs.push_back(m.boundary_sample(c, proto.s(i)));

    if (m.cylinder()) {
        // x-translation invariance: trace each (component, angle) once from x = 0 and shift
        long nr = static_cast<long>(nc) * rg.n_angles;
#pragma omp parallel for schedule(dynamic, 1)
        for (long r = 0; r < nr; ++r) {
            int c = static_cast<int>(r / rg.n_angles), k = static_cast<int>(r % rg.n_angles);
            BoundarySample b0 = bs[static_cast<std::size_t>(c) * rg.n_pts];
            b0.x = 0;
            std::vector<double> ts;
            std::vector<PhaseState> ss;
            ExitInfo e = heun_trace(m, influx_state(b0, proto.angle(k)), o, [&](double t, const PhaseState& s) {
                ts.push_back(t);
                ss.push_back(s);
            });
            std::vector<double> prev(K), cur(K), acc(K);
            for (int i = 0; i < rg.n_pts; ++i) {
                double xs = bs[static_cast<std::size_t>(c) * rg.n_pts + i].x;
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t q = 0; q < ts.size(); ++q) {
                    PhaseState s = ss[q];
                    s.x = std::fmod(s.x + xs, 2.0);
                    g(m, s, cur.data());
                    if (q > 0)
                        for (std::size_t a = 0; a < K; ++a) acc[a] += 0.5 * (prev[a] + cur[a]) * (ts[q] - ts[q - 1]);
                    prev.swap(cur);
                }
                for (std::size_t a = 0; a < K; ++a) {
                    std::size_t id = out[a].index(c, i, k);
                    out[a].v[id] = e.capped ? std::numeric_limits<double>::quiet_NaN() : acc[a];
                    out[a].capped[id] = e.capped ? 1 : 0;
                }
            }
        }
        return out;
    }

    long nr = static_cast<long>(bs.size()) * rg.n_angles;
#pragma omp parallel for schedule(dynamic, 16)
    for (long r = 0; r < nr; ++r) {
        std::size_t bi = static_cast<std::size_t>(r / rg.n_angles);
        int k = static_cast<int>(r % rg.n_angles);
        const BoundarySample& b = bs[bi];
        std::vector<double> prev(K), cur(K), acc(K, 0.0);
        double tprev = 0;
        bool first = true;
        ExitInfo e = heun_trace(m, influx_state(b, proto.angle(k)), o, [&](double t, const PhaseState& s) {
            g(m, s, cur.data());
            if (!first)
                for (std::size_t a = 0; a < K; ++a) acc[a] += 0.5 * (prev[a] + cur[a]) * (t - tprev);
            first = false;
            tprev = t;
            prev.swap(cur);
        });
        for (std::size_t a = 0; a < K; ++a) {
            std::size_t id = out[a].index(b.component, static_cast<int>(bi % rg.n_pts), k);
            out[a].v[id] = e.capped ? std::numeric_limits<double>::quiet_NaN() : acc[a];
            out[a].capped[id] = e.capped ? 1 : 0;
        }
    }
    return out;
}

}  // namespace detail

inline std::vector<FanBeamData> forward_I0_batch(const SurfaceModel& m, const std::vector<GridField>& fs, const RayGrid& rg,
                                                 const FlowOptions& o = {}) {
    detail::ScalarIntegrand g;
    for (const auto& f : fs) g.f.emplace_back(m, f);
    return detail::forward_batch(m, g, rg, o);
}

inline FanBeamData forward_I0(const SurfaceModel& m, const GridField& f, const RayGrid& rg, const FlowOptions& o = {}) {
    return forward_I0_batch(m, {f}, rg, o)[0];
}

// u = ux dx + uy dy
inline FanBeamData forward_I1(const SurfaceModel& m, const GridField& ux, const GridField& uy, const RayGrid& rg,
                              const FlowOptions& o = {}) {
    detail::OneFormIntegrand g;
    g.ux.emplace_back(m, ux);
    g.uy.emplace_back(m, uy);
    return detail::forward_batch(m, g, rg, o)[0];
}

// ---------------------------------------------------------------- angular resampling

// Angles where the exit component of the influx geodesic changes between two neighbouring
// grid angles. Across such a front the data jump (the geodesic peels off the trapped set
// on the other side), so resampling must not interpolate across it. Geometry only.
struct ExitFronts {
    int n_comp = 0, n_pts = 0, n_angles = 0;
    double alpha_max = 0.5 * pi;
    std::vector<std::int8_t> label;  // exit component per ray, -1 when capped
    std::vector<double> front;       // per (c, i, k < n_angles - 1): front angle in (alpha_k, alpha_k+1) or NaN

    std::size_t index(int c, int i, int k) const { return (static_cast<std::size_t>(c) * n_pts + i) * n_angles + k; }
    double at(int c, int i, int k) const { return front[index(c, i, k)]; }
    bool matches(const FanBeamData& d) const {
        return !d.full_circle && d.n_comp == n_comp && d.n_pts == n_pts && d.n_angles == n_angles && d.alpha_max == alpha_max;
    }
    long count() const {
        long n = 0;
        for (double f : front) n += !std::isnan(f);
        return n;
    }
};

inline ExitFronts exit_fronts(const SurfaceModel& m, const RayGrid& rg, const FlowOptions& o = {}, int bisections = 40) {
    FanBeamData proto = FanBeamData::influx(m.n_components(), rg.n_pts, rg.n_angles, rg.alpha_max);
    ExitFronts fr;
    fr.n_comp = proto.n_comp;
    fr.n_pts = rg.n_pts;
    fr.n_angles = rg.n_angles;
    fr.alpha_max = rg.alpha_max;
    fr.label.assign(proto.v.size(), -1);
    fr.front.assign(proto.v.size(), std::numeric_limits<double>::quiet_NaN());
    // on the cylinder the exit component does not depend on the x position of the start
    int n_pts_traced = m.cylinder() ? 1 : rg.n_pts;
    auto label_of = [&](const BoundarySample& b, double a) {
        ExitInfo e = cast_ray(m, influx_state(b, a), o);
        return static_cast<std::int8_t>(e.capped ? -1 : e.component);
    };
    long nr = static_cast<long>(fr.n_comp) * n_pts_traced;
#pragma omp parallel for schedule(dynamic, 1)
    for (long r = 0; r < nr; ++r) {
        int c = static_cast<int>(r / n_pts_traced), i = static_cast<int>(r % n_pts_traced);
        BoundarySample b = m.boundary_sample(c, proto.s(i));
        for (int k = 0; k < rg.n_angles; ++k) fr.label[fr.index(c, i, k)] = label_of(b, proto.angle(k));
        for (int k = 0; k + 1 < rg.n_angles; ++k) {
            std::int8_t la = fr.label[fr.index(c, i, k)], lb = fr.label[fr.index(c, i, k + 1)];
            if (la == lb || la < 0 || lb < 0) continue;
            double lo = proto.angle(k), hi = proto.angle(k + 1);
            for (int q = 0; q < bisections && hi - lo > 1e-13; ++q) {
                double mid = 0.5 * (lo + hi);
                std::int8_t lm = label_of(b, mid);
                if (lm == la)
                    lo = mid;
                else if (lm == lb)
                    hi = mid;
                else
                    break;  // a third outcome inside the cell: keep the current bracket
            }
            fr.front[fr.index(c, i, k)] = 0.5 * (lo + hi);
        }
    }
    if (m.cylinder())
        for (int c = 0; c < fr.n_comp; ++c)
            for (int i = 1; i < rg.n_pts; ++i)
                for (int k = 0; k < rg.n_angles; ++k) {
                    fr.label[fr.index(c, i, k)] = fr.label[fr.index(c, 0, k)];
                    fr.front[fr.index(c, i, k)] = fr.front[fr.index(c, 0, k)];
                }
    return fr;
}

// value of influx data at angle alpha (from the inner normal) at sample i; NaN (capped) reads as 0.
// With fronts, a cell split by a front takes the node value from the side alpha lies on.
inline double influx_value(const FanBeamData& d, int c, int i, double alpha, const ExitFronts* fr = nullptr) {
    if (!(std::abs(alpha) < 0.5 * pi)) return 0.0;
    if (std::abs(alpha) > d.alpha_max) return 0.0;
    double u = (alpha + d.alpha_max) / d.dangle() - 0.5;
    auto val = [&](int k) {
        double x = d.at(c, i, k);
        return std::isnan(x) ? 0.0 : x;
    };
    int n = d.n_angles;
    if (u <= 0) {
        if (d.alpha_max >= 0.5 * pi) return val(0) * (alpha + d.alpha_max) / (0.5 * d.dangle());
        return val(0);
    }
    if (u >= n - 1) {
        if (d.alpha_max >= 0.5 * pi) return val(n - 1) * (d.alpha_max - alpha) / (0.5 * d.dangle());
        return val(n - 1);
    }
    int k = static_cast<int>(u);
    double w = u - k;
    if (fr) {
        double f = fr->at(c, i, k);
        if (!std::isnan(f)) return alpha < f ? val(k) : val(k + 1);
    }
    return val(k) * (1 - w) + val(k + 1) * w;
}

// Full-circle odd extension: influx values on the influx half, minus the reversed
// influx value on the outflux half, zero at glancing angles and outside the cone.
inline FanBeamData odd_extension(const FanBeamData& d, int n_full = 512, const ExitFronts* fr = nullptr) {
    if (d.full_circle) throw Error("odd_extension expects influx data");
    if (n_full % 4 != 0) throw Error("full-circle angle count must be divisible by 4");
    if (fr && !fr->matches(d)) throw Error("exit fronts do not match the data grid");
    FanBeamData o = FanBeamData::full(d.n_comp, d.n_pts, n_full);
    o.model_hash = d.model_hash;
    for (int c = 0; c < d.n_comp; ++c)
        for (int i = 0; i < d.n_pts; ++i) {
            for (int k = 0; k < n_full; ++k) {
                double b = principal_angle(o.angle(k));
                double val;
                if (k == n_full / 4 || k == 3 * n_full / 4)
                    val = 0;
                else if (std::abs(b) < 0.5 * pi)
                    val = influx_value(d, c, i, b, fr);
                else
                    val = -influx_value(d, c, i, principal_angle(b - pi), fr);
                o.at(c, i, k) = val;
            }
            // antisymmetry exactly: copy the negated influx half onto the outflux half
            for (int k = 0; k < n_full / 2; ++k) {
                int kk = (k + n_full / 2) % n_full;
                double b = principal_angle(o.angle(k));
                if (std::abs(b) < 0.5 * pi) o.at(c, i, kk) = -o.at(c, i, k);
            }
            for (int k = n_full / 2; k < n_full; ++k) {
                int kk = k - n_full / 2;
                double b = principal_angle(o.angle(k));
                if (std::abs(b) < 0.5 * pi) o.at(c, i, kk) = -o.at(c, i, k);
            }
        }
    return o;
}

// bilinear lookup of full-circle data at (component, s, beta), periodic in s and beta
inline double full_circle_value(const FanBeamData& d, int c, double s, double beta) {
    double u = wrap_unit(s) * d.n_pts - 0.5;
    double w = wrap_angle(beta) / d.dangle();
    int i0 = static_cast<int>(std::floor(u));
    int k0 = static_cast<int>(std::floor(w));
    double fu = u - i0, fw = w - k0;
    auto P = [&](int i) { return (i % d.n_pts + d.n_pts) % d.n_pts; };
    auto A = [&](int k) { return (k % d.n_angles + d.n_angles) % d.n_angles; };
    int i1 = P(i0 + 1), k1 = A(k0 + 1);
    i0 = P(i0);
    k0 = A(k0);
    return (1 - fu) * ((1 - fw) * d.at(c, i0, k0) + fw * d.at(c, i0, k1)) + fu * ((1 - fw) * d.at(c, i1, k0) + fw * d.at(c, i1, k1));
}

// influx data lookup at (component, s, alpha), periodic linear in s
inline double influx_lookup(const FanBeamData& d, int c, double s, double alpha) {
    double u = wrap_unit(s) * d.n_pts - 0.5;
    int i0 = static_cast<int>(std::floor(u));
    double fu = u - i0;
    auto P = [&](int i) { return (i % d.n_pts + d.n_pts) % d.n_pts; };
    return (1 - fu) * influx_value(d, c, P(i0), alpha) + fu * influx_value(d, c, P(i0 + 1), alpha);
}

// ---------------------------------------------------------------- scattering tables

struct ScatterHit {
    int comp = -1;  // -1: time capped
    double s = 0;
    double beta = 0;
};

// Exit points of the geodesics through every pixel of the extended mask, for the
// fiber angles 2 pi k / n_theta.
class ScatterTable {
public:
    ScatterTable(const SurfaceModel& m, int n_theta, const FlowOptions& o = {}, FlowMethod method = FlowMethod::Auto)
        : m_(&m), n_theta_(n_theta) {
        if (n_theta % 2 != 0) throw Error("n_theta must be even");
        int N = m.N;
        if (m.cylinder()) {
            rows_ = true;
            comp_.assign(static_cast<std::size_t>(N) * n_theta, -1);
            s_.assign(comp_.size(), 0);
            beta_.assign(comp_.size(), 0);
#pragma omp parallel for schedule(dynamic, 1)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < n_theta; ++k) {
                    ExitInfo e = heun_trace(m, {0.0, m.yc(j), theta(k)}, o, [](double, const PhaseState&) {});
                    std::size_t id = static_cast<std::size_t>(j) * n_theta + k;
                    if (e.capped) continue;
                    comp_[id] = static_cast<std::int8_t>(e.component);
                    s_[id] = static_cast<float>(e.state.x);  // exit x for a start at x = 0
                    beta_[id] = static_cast<float>(e.beta);
                }
            return;
        }
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i)
                if (m.ext_mask[m.idx(i, j)]) {
                    slot_.push_back(static_cast<int>(m.idx(i, j)));
                }
        pixel_slot_.assign(static_cast<std::size_t>(N) * N, -1);
        for (std::size_t q = 0; q < slot_.size(); ++q) pixel_slot_[static_cast<std::size_t>(slot_[q])] = static_cast<int>(q);
        comp_.assign(slot_.size() * n_theta, -1);
        s_.assign(comp_.size(), 0);
        beta_.assign(comp_.size(), 0);
        long np = static_cast<long>(slot_.size());
#pragma omp parallel for schedule(dynamic, 8)
        for (long q = 0; q < np; ++q) {
            int pix = slot_[static_cast<std::size_t>(q)];
            double x = m.xc(pix % N), y = m.yc(pix / N);
            for (int k = 0; k < n_theta; ++k) {
                ExitInfo e = cast_ray(m, {x, y, theta(k)}, o, method);
                std::size_t id = static_cast<std::size_t>(q) * n_theta + k;
                if (e.capped) continue;
                comp_[id] = static_cast<std::int8_t>(e.component);
                s_[id] = static_cast<float>(e.s);
                beta_[id] = static_cast<float>(e.beta);
            }
        }
    }

    int n_theta() const { return n_theta_; }
    double theta(int k) const { return two_pi * k / n_theta_; }
    double dtheta() const { return two_pi / n_theta_; }
    bool has(int i, int j) const { return rows_ ? true : pixel_slot_[m_->idx(i, j)] >= 0; }

    ScatterHit hit(int i, int j, int k) const {
        ScatterHit h;
        if (rows_) {
            std::size_t id = static_cast<std::size_t>(j) * n_theta_ + k;
            h.comp = comp_[id];
            if (h.comp < 0) return h;
            double x = std::fmod(s_[id] + m_->xc(i), 2.0);
            auto [c, s] = m_->boundary_parameter(h.comp, x, h.comp == 0 ? -1.0 : 1.0);
            (void)c;
            h.s = s;
            h.beta = beta_[id];
            return h;
        }
        int q = pixel_slot_[m_->idx(i, j)];
        if (q < 0) return h;
        std::size_t id = static_cast<std::size_t>(q) * n_theta_ + k;
        h.comp = comp_[id];
        h.s = s_[id];
        h.beta = beta_[id];
        return h;
    }

    const SurfaceModel& model() const { return *m_; }

private:
    const SurfaceModel* m_;
    int n_theta_;
    bool rows_ = false;
    std::vector<int> slot_, pixel_slot_;
    std::vector<std::int8_t> comp_;
    std::vector<float> s_, beta_;
};

// ---------------------------------------------------------------- adjoint

// I0* w(x) = sum over fiber angles of w at the entry point of the geodesic through (x, theta)
inline GridField adjoint_I0(const SurfaceModel& m, const FanBeamData& w, const ScatterTable& tab) {
    if (w.full_circle) throw Error("adjoint_I0 expects influx data");
    GridField out = m.make_field();
    int n = tab.n_theta(), half = n / 2;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            KahanSum acc;
            for (int k = 0; k < n; ++k) {
                // backward exit of (x, theta) is the forward exit of (x, theta + pi)
                ScatterHit h = tab.hit(i, j, (k + half) % n);
                if (h.comp < 0) continue;
                acc.add(influx_lookup(w, h.comp, h.s, principal_angle(h.beta + pi)));
            }
            out.at(i, j) = acc.value() * tab.dtheta();
        }
    return out;
}

inline GridField adjoint_I0(const SurfaceModel& m, const FanBeamData& w, int n_theta = 512, const FlowOptions& o = {}) {
    ScatterTable tab(m, n_theta, o);
    return adjoint_I0(m, w, tab);
}

// I1* w as a 1-form (coefficients of dx, dy): the metric dual of sum_theta w(entry) v dtheta
inline std::pair<GridField, GridField> adjoint_I1(const SurfaceModel& m, const FanBeamData& w, const ScatterTable& tab) {
    if (w.full_circle) throw Error("adjoint_I1 expects influx data");
    GridField ex = m.make_field(), ey = m.make_field();
    int n = tab.n_theta(), half = n / 2;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            double c = 0, s = 0;
            for (int k = 0; k < n; ++k) {
                ScatterHit h = tab.hit(i, j, (k + half) % n);
                if (h.comp < 0) continue;
                double val = influx_lookup(w, h.comp, h.s, principal_angle(h.beta + pi));
                c += val * std::cos(tab.theta(k));
                s += val * std::sin(tab.theta(k));
            }
            double x = m.xc(i), y = m.yc(j);
            if (m.cylinder()) {
                ex.at(i, j) = m.h(y) * c * tab.dtheta();
                ey.at(i, j) = s * tab.dtheta();
            } else {
                double ep = 1.0 / m.exp_neg_phi(x, y);
                ex.at(i, j) = ep * c * tab.dtheta();
                ey.at(i, j) = ep * s * tab.dtheta();
            }
        }
    return {ex, ey};
}

// <u, eta> for 1-forms in L^2(M, dvol) with the metric inner product
inline double one_form_inner_product(const SurfaceModel& m, const GridField& ux, const GridField& uy, const GridField& ex,
                                     const GridField& ey) {
    KahanSum acc;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            std::size_t k = m.idx(i, j);
            if (!m.mask[k]) continue;
            double x = m.xc(i), y = m.yc(j);
            if (m.cylinder()) {
                double hy = m.h(y);
                acc.add((ux.v[k] * ex.v[k] / (hy * hy) + uy.v[k] * ey.v[k]) * hy);
            } else {
                acc.add(ux.v[k] * ex.v[k] + uy.v[k] * ey.v[k]);
            }
            (void)x;
        }
    return acc.value() * m.cell * m.cell;
}

// <I0 f, w> in L^2(d-SM, |<v,nu>| ds_g dalpha)
inline double boundary_inner_product(const SurfaceModel& m, const FanBeamData& a, const FanBeamData& b) {
    KahanSum acc;
    for (int c = 0; c < a.n_comp; ++c) {
        double ds = m.components[static_cast<std::size_t>(c)].length / a.n_pts;
        for (int i = 0; i < a.n_pts; ++i)
            for (int k = 0; k < a.n_angles; ++k) {
                double x = a.at(c, i, k), y = b.at(c, i, k);
                if (std::isnan(x) || std::isnan(y)) continue;
                acc.add(x * y * mu_nu_weight(a.angle(k)) * ds * a.dangle());
            }
    }
    return acc.value();
}

// <f, g> in L^2(M, dvol) over the fundamental-domain mask
inline double field_inner_product(const SurfaceModel& m, const GridField& f, const GridField& g) {
    KahanSum acc;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            std::size_t k = m.idx(i, j);
            if (!m.mask[k]) continue;
            acc.add(f.v[k] * g.v[k] * m.dvol(m.xc(i), m.yc(j)));
        }
    return acc.value() * m.cell * m.cell;
}

// ---------------------------------------------------------------- normal operator

// Pi0 f(x) = 2 * sum_theta int_0^{l+} f along the geodesic, sampled at every mask pixel
// (ray-level composition of I0* and I0). dt is the sampling step along exact geodesics.
inline GridField normal_operator(const SurfaceModel& m, const GridField& f, int n_theta, const FlowOptions& o = {},
                                 double dt = 0.0) {
    FieldSampler smp(m, f);
    GridField out = m.make_field();
    if (dt <= 0) dt = 0.125 * m.cell;
    bool exact = !m.cylinder();
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            double x = m.xc(i), y = m.yc(j);
            KahanSum acc;
            for (int k = 0; k < n_theta; ++k) {
                PhaseState s{x, y, two_pi * k / n_theta};
                double integral = 0;
                if (exact) {
                    exact_trace(m, s, o.t_max, [&](const PhaseState& st, double, double len) {
                        // midpoint rule; dt is a coordinate length, e^phi >= 2/sqrt(kappa0) converts it
                        double step = m.flat() ? dt : 2.0 * dt / std::sqrt(m.kappa0());
                        int n = std::max(1, static_cast<int>(std::ceil(len / step)));
                        double sum = 0;
                        for (int q = 0; q < n; ++q) {
                            double tq = (q + 0.5) * len / n;
                            double px, py;
                            if (m.flat()) {
                                px = st.x + tq * std::cos(st.theta);
                                py = st.y + tq * std::sin(st.theta);
                            } else {
                                DiskState d = exact_geodesic_flow({cplx(st.x, st.y), st.theta}, tq, m.kappa0());
                                px = d.z.real();
                                py = d.z.imag();
                            }
                            sum += smp(px, py);
                        }
                        integral += sum * len / n;
                    });
                } else {
                    double tprev = 0, vprev = 0;
                    bool first = true;
                    heun_trace(m, s, o, [&](double t, const PhaseState& st) {
                        double v = smp(st.x, st.y);
                        if (!first) integral += 0.5 * (v + vprev) * (t - tprev);
                        first = false;
                        tprev = t;
                        vprev = v;
                    });
                }
                acc.add(integral);
            }
            out.at(i, j) = 2.0 * acc.value() * two_pi / n_theta;
        }
    return out;
}

}  // namespace trapray
