#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypgeo.hpp"

namespace trapray {

enum class ModelKind { SchottkyOneGen, SchottkyTorus, SchottkyPants, Cylinder, FlatDisk, HyperbolicBall };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::SchottkyOneGen: return "schottky_one_gen";
        case ModelKind::SchottkyTorus: return "schottky_torus";
        case ModelKind::SchottkyPants: return "schottky_pants";
        case ModelKind::Cylinder: return "cylinder";
        case ModelKind::FlatDisk: return "flat_disk";
        case ModelKind::HyperbolicBall: return "hyperbolic_ball";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    for (ModelKind k : {ModelKind::SchottkyOneGen, ModelKind::SchottkyTorus, ModelKind::SchottkyPants, ModelKind::Cylinder,
                        ModelKind::FlatDisk, ModelKind::HyperbolicBall})
        if (to_string(k) == s) return k;
    throw Error("unknown model kind: " + s);
}

// param is x for the Schottky models, epsilon for the cylinder and the Euclidean
// radius of the boundary circle for the two disk test models.
struct ModelConfig {
    ModelKind kind = ModelKind::SchottkyOneGen;
    double param = -0.3;
    double kappa0 = 1.0;
    int N = 150;
    double cut_fraction = 0.5;

    bool operator==(const ModelConfig&) const = default;
};

struct BoundarySample {
    int component = 0;
    double s = 0;
    double x = 0, y = 0;
    double normal_angle = 0;   // fiber angle of the inner unit normal
    double tangent_angle = 0;  // fiber angle of the positively oriented unit tangent
};

// A boundary arc: piece of a generalized circle (or a horizontal line for the cylinder),
// parameterized by tau in [0,1] in the positive orientation (domain on the left).
struct BoundaryArc {
    int circle = 0;
    bool line = false;
    cplx center{0, 0};
    double radius = 0;
    double start = 0;  // psi0 (circle) or x0 (line)
    double sweep = 0;  // signed angular sweep or signed x extent
    double line_y = 0;
    std::vector<double> cum;  // cumulative metric length at uniform tau nodes
    double length = 0;

    cplx point(double tau) const {
        if (line) return {start + tau * sweep, line_y};
        return center + std::polar(radius, start + tau * sweep);
    }
};

struct BoundaryComponent {
    std::vector<int> arcs;
    std::vector<double> offsets;  // metric length before each arc
    double length = 0;
};

struct GridField {
    int N = 0;
    double x0 = 0, y0 = 0, cell = 0;
    std::vector<double> v;
    std::vector<std::uint8_t> mask;

    double& at(int i, int j) { return v[static_cast<std::size_t>(j) * N + i]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(j) * N + i]; }
    bool inside(int i, int j) const { return mask[static_cast<std::size_t>(j) * N + i] != 0; }
    double xc(int i) const { return x0 + (i + 0.5) * cell; }
    double yc(int j) const { return y0 + (j + 0.5) * cell; }
    std::size_t size() const { return v.size(); }
};

class SurfaceModel {
public:
    ModelConfig cfg;
    SchottkyGroup group;
    std::vector<GenCircle> cuts;  // domain = inside of every cut
    std::vector<BoundaryArc> arcs;
    std::vector<BoundaryComponent> components;
    std::vector<int> arc_component;
    int N = 0;
    double x0 = -1, y0 = -1, cell = 0;
    double width = 2;               // periodic length for the cylinder
    std::vector<std::uint8_t> mask;      // pixel centers in the fundamental domain
    std::vector<std::uint8_t> ext_mask;  // mask plus a halo across the identifications
    std::vector<std::uint8_t> interior;  // mask minus a 2-cell collar along the boundary

    bool cylinder() const { return cfg.kind == ModelKind::Cylinder; }
    bool flat() const { return cfg.kind == ModelKind::FlatDisk; }
    // constant negative curvature disk model: exact Moebius ray casting applies
    bool hyperbolic() const { return !cylinder() && !flat(); }
    double eps() const { return cfg.param; }
    double kappa0() const { return cfg.kappa0; }

    // ---- metric ----
    double h(double y) const { return std::cosh(y) * std::cosh(eps() * y); }
    double hprime(double y) const {
        double e = eps();
        return std::sinh(y) * std::cosh(e * y) + e * std::cosh(y) * std::sinh(e * y);
    }
    // e^{-phi} for conformal models
    double exp_neg_phi(double x, double y) const {
        if (flat()) return 1.0;
        return 0.5 * std::sqrt(kappa0()) * (1.0 - x * x - y * y);
    }
    double phi(double x, double y) const { return -std::log(exp_neg_phi(x, y)); }
    std::array<double, 2> grad_phi(double x, double y) const {
        if (flat()) return {0.0, 0.0};
        double d = 1.0 - x * x - y * y;
        return {2.0 * x / d, 2.0 * y / d};
    }
    // Riemannian area density w.r.t. dx dy
    double dvol(double x, double y) const {
        if (cylinder()) return h(y);
        double e = exp_neg_phi(x, y);
        return 1.0 / (e * e);
    }
    double gauss_curvature(double x, double y) const {
        (void)x;
        if (cylinder()) {
            double e = eps();
            return -(1.0 + e * e) - 2.0 * e * std::tanh(y) * std::tanh(e * y);
        }
        if (flat()) return 0.0;
        return -kappa0();
    }
    // coordinate gradient of the curvature
    std::array<double, 2> curvature_gradient(double x, double y) const {
        (void)x;
        if (!cylinder()) return {0.0, 0.0};
        double e = eps();
        double sy = 1.0 / std::cosh(y), se = 1.0 / std::cosh(e * y);
        return {0.0, -2.0 * e * (sy * sy * std::tanh(e * y) + e * std::tanh(y) * se * se)};
    }
    // dkappa(Jv) where v has fiber angle theta
    double kappa_perp(double x, double y, double theta) const {
        auto g = curvature_gradient(x, y);
        if (cylinder()) return g[1] * std::cos(theta);
        return exp_neg_phi(x, y) * (-g[0] * std::sin(theta) + g[1] * std::cos(theta));
    }
    // coordinate velocity of the unit vector with fiber angle theta
    std::array<double, 2> coord_velocity(double x, double y, double theta) const {
        if (cylinder()) return {std::cos(theta) / h(y), std::sin(theta)};
        double e = exp_neg_phi(x, y);
        return {e * std::cos(theta), e * std::sin(theta)};
    }

    // ---- domain ----
    bool inside_cuts(double x, double y) const {
        if (!cylinder() && x * x + y * y >= 1.0) return false;
        for (const auto& c : cuts)
            if (c.eval(x, y) >= 0.0) return false;
        return true;
    }
    bool beyond_wall(double x, double y) const {
        if (cylinder()) return x < 0.0 || x >= width;
        return violated_wall(group, cplx(x, y)) >= 0;
    }
    bool in_domain(double x, double y) const { return inside_cuts(x, y) && !beyond_wall(x, y); }

    // Apply side pairings until the point lies in the fundamental domain; theta is transported.
    // Returns the number of identifications applied.
    int fold(double& x, double& y, double& theta) const {
        if (cylinder()) {
            if (x < 0.0 || x >= width) {
                double k = std::floor(x / width);
                x -= k * width;
                if (x >= width) x -= width;
                return 1;
            }
            return 0;
        }
        if (group.walls.empty()) return 0;
        int n = 0;
        cplx z(x, y);
        for (;;) {
            int k = violated_wall(group, z);
            if (k < 0) break;
            const MobiusTransform& t = group.walls[static_cast<std::size_t>(k)].to_inside;
            theta += t.direction_shift(z);
            z = t(z);
            if (++n > fold_iteration_cap) throw Error("fold: iteration cap exceeded");
        }
        x = z.real();
        y = z.imag();
        theta = wrap_angle(theta);
        return n;
    }

    // ---- boundary ----
    int n_components() const { return static_cast<int>(components.size()); }

    // boundary parameter of a point on cut circle `circle`
    std::pair<int, double> boundary_parameter(int circle, double x, double y) const {
        const BoundaryArc& a = arcs[static_cast<std::size_t>(circle)];
        double tau;
        if (a.line) {
            tau = wrap_unit((x - a.start) / a.sweep);
        } else {
            double psi = std::arg(cplx(x, y) - a.center);
            double span = std::abs(a.sweep);
            double d = a.sweep > 0 ? wrap_angle(psi - a.start) : wrap_angle(a.start - psi);
            if (span >= two_pi - 1e-12) {
                tau = d / two_pi;
            } else if (d <= span) {
                tau = d / span;
            } else {
                tau = (d > 0.5 * (span + two_pi)) ? 0.0 : 1.0;
            }
        }
        int comp = arc_component[static_cast<std::size_t>(circle)];
        const BoundaryComponent& c = components[static_cast<std::size_t>(comp)];
        std::size_t pos = static_cast<std::size_t>(std::find(c.arcs.begin(), c.arcs.end(), circle) - c.arcs.begin());
        double len = c.offsets[pos] + cum_at(a, tau);
        return {comp, wrap_unit(len / c.length)};
    }

    BoundarySample boundary_sample(int comp, double s) const {
        const BoundaryComponent& c = components.at(static_cast<std::size_t>(comp));
        double target = wrap_unit(s) * c.length;
        std::size_t k = 0;
        while (k + 1 < c.arcs.size() && target >= c.offsets[k + 1]) ++k;
        const BoundaryArc& a = arcs[static_cast<std::size_t>(c.arcs[k])];
        double tau = tau_at(a, target - c.offsets[k]);
        cplx p = a.point(tau);
        BoundarySample b;
        b.component = comp;
        b.s = wrap_unit(s);
        b.x = p.real();
        b.y = p.imag();
        b.normal_angle = inner_normal_angle(a.circle, b.x, b.y);
        b.tangent_angle = wrap_angle(b.normal_angle - 0.5 * pi);
        return b;
    }

    // fiber angle of the inner normal at a point of cut circle `circle`
    double inner_normal_angle(int circle, double x, double y) const {
        cplx g = cuts[static_cast<std::size_t>(circle)].gradient(cplx(x, y));
        return wrap_angle(std::arg(-g));
    }

    std::vector<BoundarySample> boundary_parameterize(int n_per_component) const {
        std::vector<BoundarySample> out;
        for (int c = 0; c < n_components(); ++c)
            for (int i = 0; i < n_per_component; ++i)
                out.push_back(boundary_sample(c, (i + 0.5) / n_per_component));
        return out;
    }

    // geodesic curvature of the boundary at a point of cut circle `circle` (positive = convex)
    double boundary_geodesic_curvature(int circle, double x, double y) const {
        const GenCircle& c = cuts[static_cast<std::size_t>(circle)];
        double th = inner_normal_angle(circle, x, y);
        if (cylinder()) return -hprime(y) / h(y) * std::sin(th);
        double ke;
        if (c.is_line()) {
            ke = 0;
        } else {
            // positive when the domain lies on the center side
            ke = (c.A > 0 ? 1.0 : -1.0) / c.radius();
        }
        auto gp = grad_phi(x, y);
        double dn = gp[0] * std::cos(th) + gp[1] * std::sin(th);
        return exp_neg_phi(x, y) * (ke - dn);
    }

    // ---- grid ----
    double xc(int i) const { return x0 + (i + 0.5) * cell; }
    double yc(int j) const { return y0 + (j + 0.5) * cell; }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * N + i; }

    GridField make_field() const {
        GridField f;
        f.N = N;
        f.x0 = x0;
        f.y0 = y0;
        f.cell = cell;
        f.v.assign(static_cast<std::size_t>(N) * N, 0.0);
        f.mask = mask;
        return f;
    }

    double cum_at(const BoundaryArc& a, double tau) const {
        std::size_t m = a.cum.size() - 1;
        double u = std::clamp(tau, 0.0, 1.0) * m;
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(u), m - 1);
        double w = u - k;
        return a.cum[k] * (1 - w) + a.cum[k + 1] * w;
    }
    double tau_at(const BoundaryArc& a, double len) const {
        std::size_t m = a.cum.size() - 1;
        auto it = std::upper_bound(a.cum.begin(), a.cum.end(), len);
        std::size_t k = it == a.cum.begin() ? 0 : static_cast<std::size_t>(it - a.cum.begin()) - 1;
        if (k >= m) return 1.0;
        double w = (len - a.cum[k]) / (a.cum[k + 1] - a.cum[k]);
        return (k + std::clamp(w, 0.0, 1.0)) / m;
    }
};

namespace detail {

inline double line_density(const SurfaceModel& m, cplx p) {
    if (m.cylinder()) return m.h(p.imag());
    return 1.0 / m.exp_neg_phi(p.real(), p.imag());
}

inline void tabulate_arc(const SurfaceModel& m, BoundaryArc& a) {
    constexpr int M = 4096;
    a.cum.assign(M + 1, 0.0);
    double speed = a.line ? std::abs(a.sweep) : a.radius * std::abs(a.sweep);
    double prev = line_density(m, a.point(0.0)) * speed;
    for (int k = 1; k <= M; ++k) {
        double t0 = (k - 1.0) / M, t1 = double(k) / M;
        double mid = line_density(m, a.point(0.5 * (t0 + t1))) * speed;
        double cur = line_density(m, a.point(t1)) * speed;
        a.cum[k] = a.cum[k - 1] + (t1 - t0) * (prev + 4 * mid + cur) / 6.0;
        prev = cur;
    }
    a.length = a.cum[M];
}

// intersection points of two circles given as center/radius
inline std::vector<cplx> circle_intersections(cplx c1, double r1, cplx c2, double r2) {
    double d = std::abs(c2 - c1);
    if (d > r1 + r2 || d < std::abs(r1 - r2) || d == 0) return {};
    double a = (r1 * r1 - r2 * r2 + d * d) / (2 * d);
    double hh = std::sqrt(std::max(0.0, r1 * r1 - a * a));
    cplx u = (c2 - c1) / d;
    cplx base = c1 + a * u;
    return {base + cplx(0, 1) * u * hh, base - cplx(0, 1) * u * hh};
}

inline cplx wall_hit(const GenCircle& cut, const GenCircle& wall, cplx near) {
    auto pts = circle_intersections(cut.center(), cut.radius(), wall.center(), wall.radius());
    if (pts.empty()) throw Error("cut circle does not meet the wall");
    cplx best = pts[0];
    for (auto p : pts)
        if (std::norm(p) < 1.0 && std::abs(p - near) < std::abs(best - near)) best = p;
    if (std::norm(best) >= 1.0) throw Error("cut circle meets the wall outside the disk");
    return best;
}

// arc of `cut` from the intersection with wall wa to wall wb, passing through `mid`
inline BoundaryArc make_cut_arc(const SurfaceModel& m, int ci, const GenCircle& wa, const GenCircle& wb, cplx mid) {
    const GenCircle& cut = m.cuts[static_cast<std::size_t>(ci)];
    BoundaryArc a;
    a.circle = ci;
    a.center = cut.center();
    a.radius = cut.radius();
    cplx pa = wall_hit(cut, wa, mid), pb = wall_hit(cut, wb, mid);
    double sgn = cut.A > 0 ? 1.0 : -1.0;  // counterclockwise when the domain is inside
    double psa = std::arg(pa - a.center), psb = std::arg(pb - a.center), psm = std::arg(mid - a.center);
    // orient so the domain lies on the left; pick the endpoint order that passes through mid
    auto sweep_of = [&](double from, double to) {
        return sgn > 0 ? wrap_angle(to - from) : -wrap_angle(from - to);
    };
    auto passes = [&](double from, double sweep) {
        double d = sweep > 0 ? wrap_angle(psm - from) : wrap_angle(from - psm);
        return d < std::abs(sweep);
    };
    double s1 = sweep_of(psa, psb);
    if (passes(psa, s1)) {
        a.start = psa;
        a.sweep = s1;
    } else {
        a.start = psb;
        a.sweep = sweep_of(psb, psa);
    }
    tabulate_arc(m, a);
    return a;
}

inline void follow_components(SurfaceModel& m) {
    std::size_t na = m.arcs.size();
    std::vector<int> next(na, -1);
    for (std::size_t i = 0; i < na; ++i) {
        cplx end = m.arcs[i].point(1.0);
        int wk = 0;
        double best = 1e300;
        for (std::size_t k = 0; k < m.group.walls.size(); ++k) {
            double v = std::abs(m.group.walls[k].circle.eval(end));
            if (v < best) {
                best = v;
                wk = static_cast<int>(k);
            }
        }
        cplx q = m.group.walls[static_cast<std::size_t>(wk)].to_inside(end);
        double dbest = 1e300;
        for (std::size_t j = 0; j < na; ++j) {
            double d = std::abs(m.arcs[j].point(0.0) - q);
            if (d < dbest) {
                dbest = d;
                next[i] = static_cast<int>(j);
            }
        }
        if (dbest > 1e-8) throw Error("boundary arcs do not match across the side pairing");
    }
    m.arc_component.assign(na, -1);
    for (std::size_t i = 0; i < na; ++i) {
        if (m.arc_component[i] >= 0) continue;
        BoundaryComponent c;
        int cur = static_cast<int>(i);
        int id = static_cast<int>(m.components.size());
        while (m.arc_component[static_cast<std::size_t>(cur)] < 0) {
            m.arc_component[static_cast<std::size_t>(cur)] = id;
            c.offsets.push_back(c.length);
            c.arcs.push_back(cur);
            c.length += m.arcs[static_cast<std::size_t>(cur)].length;
            cur = next[static_cast<std::size_t>(cur)];
        }
        m.components.push_back(std::move(c));
    }
}

inline void single_arc_component(SurfaceModel& m) {
    m.arc_component.clear();
    for (std::size_t i = 0; i < m.arcs.size(); ++i) {
        BoundaryComponent c;
        c.arcs = {static_cast<int>(i)};
        c.offsets = {0.0};
        c.length = m.arcs[i].length;
        m.arc_component.push_back(static_cast<int>(m.components.size()));
        m.components.push_back(std::move(c));
    }
}

inline void build_masks(SurfaceModel& m) {
    int N = m.N;
    std::size_t n = static_cast<std::size_t>(N) * N;
    m.mask.assign(n, 0);
    m.ext_mask.assign(n, 0);
    m.interior.assign(n, 0);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) m.mask[m.idx(i, j)] = m.in_domain(m.xc(i), m.yc(j)) ? 1 : 0;
    if (m.cylinder()) {
        m.ext_mask = m.mask;
    } else {
        const int halo = 3;
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                if (m.mask[m.idx(i, j)]) {
                    m.ext_mask[m.idx(i, j)] = 1;
                    continue;
                }
                bool near = false;
                for (int dj = -halo; dj <= halo && !near; ++dj)
                    for (int di = -halo; di <= halo && !near; ++di) {
                        int a = i + di, b = j + dj;
                        if (a >= 0 && b >= 0 && a < N && b < N && m.mask[m.idx(a, b)]) near = true;
                    }
                if (!near) continue;
                double x = m.xc(i), y = m.yc(j), th = 0;
                if (x * x + y * y >= 0.999) continue;
                try {
                    m.fold(x, y, th);
                } catch (const Error&) {
                    continue;
                }
                if (m.inside_cuts(x, y)) m.ext_mask[m.idx(i, j)] = 1;
            }
    }
    const int collar = 2;
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            bool ok = true;
            for (int dj = -collar; dj <= collar && ok; ++dj)
                for (int di = -collar; di <= collar && ok; ++di) {
                    int a = i + di, b = j + dj;
                    if (m.cylinder()) a = (a % N + N) % N;
                    if (a < 0 || b < 0 || a >= N || b >= N || !m.ext_mask[m.idx(a, b)]) ok = false;
                }
            m.interior[m.idx(i, j)] = ok ? 1 : 0;
        }
}

}  // namespace detail

namespace detail {

inline void schottky_two_generator(SurfaceModel& m, double x, bool pants) {
    double c = (1 + x * x) / (2 * std::abs(x));
    double r = std::sqrt(c * c - 1);
    if (std::sqrt(2.0) * c <= 2 * r) throw Error("Schottky walls intersect: |x| too small for a two-generator model");
    double a = 2 * x / (x * x + 1);
    MobiusTransform ta = MobiusTransform::translation(a), tia = MobiusTransform::translation(cplx(0, a));
    GenCircle left = geodesic_wall_through(cplx(x, 0)), right = geodesic_wall_through(cplx(-x, 0));
    GenCircle bottom = geodesic_wall_through(cplx(0, x)), top = geodesic_wall_through(cplx(0, -x));
    MobiusTransform g1, g2;
    if (pants) {
        // rotation applied after the translation
        g1 = mobius_compose(MobiusTransform::rotation(0.5 * pi), ta);
        g2 = mobius_compose(MobiusTransform::rotation(-0.5 * pi), tia);
    } else {
        g1 = ta;
        g2 = tia;
    }
    g1.label = 0;
    g2.label = 2;
    m.group.generators = {g1, g2};
    if (pants) {
        // walls: 0 left, 1 right, 2 bottom, 3 top; g1: left -> top, g2: bottom -> right
        m.group.walls = {{left, g1, 0, 3}, {right, g2.inverse(), 3, 2}, {bottom, g2, 2, 1}, {top, g1.inverse(), 1, 0}};
    } else {
        m.group.walls = {{left, g1, 0, 1}, {right, g1.inverse(), 1, 0}, {bottom, g2, 2, 3}, {top, g2.inverse(), 3, 2}};
    }
    // cut circles across the four gaps, orthogonal to both adjacent walls
    double rho_geo = std::sqrt(2.0) / c - std::sqrt(std::max(0.0, 2.0 / (c * c) - 1.0));
    double rho_max = std::sqrt(2.0) * c / 2;
    double rho = rho_geo + m.cfg.cut_fraction * (rho_max - rho_geo);
    double t = (1 - rho * rho) / (std::sqrt(2.0) * c - 2 * rho);
    double s = t - rho;
    const GenCircle* adj[4][2] = {{&right, &top}, {&top, &left}, {&left, &bottom}, {&bottom, &right}};
    for (int q = 0; q < 4; ++q) {
        cplx u = std::polar(1.0, 0.25 * pi + 0.5 * pi * q);
        m.cuts.push_back(GenCircle::complement_of_disk(t * u, s));
    }
    for (int q = 0; q < 4; ++q) {
        cplx u = std::polar(1.0, 0.25 * pi + 0.5 * pi * q);
        m.arcs.push_back(make_cut_arc(m, q, *adj[q][0], *adj[q][1], rho * u));
    }
}

inline void check_pairings(const SurfaceModel& m) {
    for (const Wall& w : m.group.walls) {
        const GenCircle& src = w.circle;
        const GenCircle& dst = m.group.walls[static_cast<std::size_t>(w.paired)].circle;
        cplx c = src.center();
        double r = src.radius();
        for (int k = -3; k <= 3; ++k) {
            // points of the wall inside the disk: the arc around the point nearest the origin
            double base = std::arg(-c);
            cplx p = c + std::polar(r, base + 0.15 * k * std::atan(1.0 / r));
            if (std::norm(p) >= 1) continue;
            if (std::abs(dst.eval(w.to_inside(p))) > 1e-9) throw Error("side pairing does not map a wall onto its paired wall");
        }
    }
}

inline void check_convexity(const SurfaceModel& m) {
    for (const auto& a : m.arcs)
        for (int k = 0; k <= 64; ++k) {
            cplx p = a.point(k / 64.0);
            if (!(m.boundary_geodesic_curvature(a.circle, p.real(), p.imag()) > 0))
                throw Error("boundary component is not strictly convex; adjust cut_fraction");
        }
}

}  // namespace detail

inline SurfaceModel build_model(const ModelConfig& cfg) {
    if (cfg.N < 16) throw Error("grid resolution N must be at least 16");
    if (!(cfg.kappa0 > 0)) throw Error("kappa0 must be positive");
    if (!(cfg.cut_fraction > 0 && cfg.cut_fraction < 1)) throw Error("cut_fraction must lie in (0, 1)");
    SurfaceModel m;
    m.cfg = cfg;
    m.N = cfg.N;
    m.cell = 2.0 / cfg.N;
    double x = cfg.param;
    bool schottky = cfg.kind == ModelKind::SchottkyOneGen || cfg.kind == ModelKind::SchottkyTorus ||
                    cfg.kind == ModelKind::SchottkyPants;
    if (schottky && !(x > -1.0 && x < 0.0)) throw Error("Schottky parameter x must lie in (-1, 0)");
    switch (cfg.kind) {
        case ModelKind::SchottkyOneGen: {
            double a = 2 * x / (x * x + 1);
            MobiusTransform ta = MobiusTransform::translation(a);
            ta.label = 0;
            m.group.generators = {ta};
            GenCircle left = geodesic_wall_through(cplx(x, 0)), right = geodesic_wall_through(cplx(-x, 0));
            m.group.walls = {{left, ta, 0, 1}, {right, ta.inverse(), 1, 0}};
            // hypercycles of the real axis through the wall point at the given fraction of its height
            double c = left.center().real(), r = left.radius();
            double yw = cfg.cut_fraction * r / std::abs(c);
            double xw = c + std::sqrt(r * r - yw * yw);
            double k = (xw * xw + yw * yw - 1) / (2 * yw);
            double R = std::sqrt(1 + k * k);
            m.cuts = {GenCircle::disk(cplx(0, k), R), GenCircle::disk(cplx(0, -k), R)};
            m.arcs.push_back(detail::make_cut_arc(m, 0, left, right, cplx(0, k + R)));
            m.arcs.push_back(detail::make_cut_arc(m, 1, left, right, cplx(0, -k - R)));
            break;
        }
        case ModelKind::SchottkyTorus: detail::schottky_two_generator(m, x, false); break;
        case ModelKind::SchottkyPants: detail::schottky_two_generator(m, x, true); break;
        case ModelKind::Cylinder: {
            if (!(x >= 0.0 && x <= std::acosh(2.0))) throw Error("cylinder epsilon must lie in [0, arccosh 2]");
            m.x0 = 0;
            m.y0 = -1;
            m.cuts = {GenCircle::half_plane(cplx(0, -1), 1.0), GenCircle::half_plane(cplx(0, 1), 1.0)};
            BoundaryArc bottom, top;
            bottom.circle = 0;
            bottom.line = true;
            bottom.start = 0;
            bottom.sweep = 2;
            bottom.line_y = -1;
            top.circle = 1;
            top.line = true;
            top.start = 2;
            top.sweep = -2;
            top.line_y = 1;
            detail::tabulate_arc(m, bottom);
            detail::tabulate_arc(m, top);
            m.arcs = {bottom, top};
            break;
        }
        case ModelKind::FlatDisk:
        case ModelKind::HyperbolicBall: {
            if (!(x > 0.0 && x < 1.0)) throw Error("disk radius must lie in (0, 1)");
            m.cuts = {GenCircle::disk(cplx(0, 0), x)};
            BoundaryArc a;
            a.circle = 0;
            a.center = 0;
            a.radius = x;
            a.start = 0;
            a.sweep = two_pi;
            detail::tabulate_arc(m, a);
            m.arcs = {a};
            break;
        }
    }
    if (m.group.walls.empty()) {
        detail::single_arc_component(m);
    } else {
        detail::check_pairings(m);
        detail::follow_components(m);
    }
    detail::check_convexity(m);
    detail::build_masks(m);
    return m;
}

inline double curvature(const SurfaceModel& m, double x, double y) {
    if (!m.cylinder() && x * x + y * y >= 1.0) throw Error("curvature: point outside the model");
    if (m.cylinder() && std::abs(y) > 1.0) throw Error("curvature: point outside the model");
    return m.gauss_curvature(x, y);
}

// curvature from the metric by finite differences (cross-check of the closed forms)
inline double curvature_fd(const SurfaceModel& m, double x, double y, double d = 1e-4) {
    if (m.cylinder()) {
        // K = -h''/h
        double hpp = (m.h(y + d) - 2 * m.h(y) + m.h(y - d)) / (d * d);
        return -hpp / m.h(y);
    }
    double lap = (m.phi(x + d, y) + m.phi(x - d, y) + m.phi(x, y + d) + m.phi(x, y - d) - 4 * m.phi(x, y)) / (d * d);
    double e = m.exp_neg_phi(x, y);
    return -e * e * lap;
}

// sup over grid cells of |d kappa|_g
inline double curvature_gradient_sup(const SurfaceModel& m) {
    double best = 0;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            double x = m.xc(i), y = m.yc(j);
            auto g = m.curvature_gradient(x, y);
            double n;
            if (m.cylinder())
                n = std::hypot(g[0] / m.h(y), g[1]);
            else
                n = m.exp_neg_phi(x, y) * std::hypot(g[0], g[1]);
            best = std::max(best, n);
        }
    if (m.cylinder()) {
        auto g = m.curvature_gradient(0, 1.0);
        best = std::max(best, std::abs(g[1]));
    }
    return best;
}

}  // namespace trapray
