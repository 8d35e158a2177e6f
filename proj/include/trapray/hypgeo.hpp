#pragma once

#include <array>
#include <vector>

#include "core.hpp"

namespace trapray {

// z -> (alpha z + beta) / (conj(beta) z + conj(alpha)), |alpha|^2 - |beta|^2 = 1
struct MobiusTransform {
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
    int label = -1;

    static MobiusTransform identity() { return {}; }

    // T_a(z) = (z - a) / (1 - conj(a) z)
    static MobiusTransform translation(cplx a) {
        double n = std::norm(a);
        if (n >= 1.0) throw Error("translation parameter must lie in the open unit disk");
        double s = 1.0 / std::sqrt(1.0 - n);
        return {cplx(s, 0.0), -a * s, -1};
    }

    static MobiusTransform rotation(double angle) {
        return {std::polar(1.0, 0.5 * angle), cplx(0.0, 0.0), -1};
    }

    cplx operator()(cplx z) const { return (alpha * z + beta) / (std::conj(beta) * z + std::conj(alpha)); }

    cplx derivative(cplx z) const {
        cplx d = std::conj(beta) * z + std::conj(alpha);
        return 1.0 / (d * d);
    }

    // argument of the derivative: how tangent directions rotate
    double direction_shift(cplx z) const { return -2.0 * std::arg(std::conj(beta) * z + std::conj(alpha)); }

    MobiusTransform inverse() const { return {std::conj(alpha), -beta, label < 0 ? -1 : (label ^ 1)}; }

    double det() const { return std::norm(alpha) - std::norm(beta); }

    void renormalize() {
        double s = 1.0 / std::sqrt(det());
        alpha *= s;
        beta *= s;
    }
};

inline MobiusTransform mobius_compose(const MobiusTransform& t1, const MobiusTransform& t2) {
    MobiusTransform r;
    r.alpha = t1.alpha * t2.alpha + t1.beta * std::conj(t2.beta);
    r.beta = t1.alpha * t2.beta + t1.beta * std::conj(t2.alpha);
    r.renormalize();
    return r;
}

inline cplx mobius_apply(const MobiusTransform& t, cplx z) {
    if (std::abs(z) >= 1.0) throw std::domain_error("mobius_apply: point not inside the unit disk");
    return t(z);
}

inline double hyperbolic_distance(cplx z, cplx w) {
    double nz = std::norm(z), nw = std::norm(w);
    if (nz >= 1.0 || nw >= 1.0) throw std::domain_error("hyperbolic_distance: point not inside the unit disk");
    double q = std::norm(z - w) / ((1.0 - nz) * (1.0 - nw));
    return 2.0 * std::asinh(std::sqrt(q));
}

// distance in the disk of curvature -kappa0
inline double hyperbolic_distance(cplx z, cplx w, double kappa0) { return hyperbolic_distance(z, w) / std::sqrt(kappa0); }

// Isometry taking z to 0 and the direction angle theta at z to the positive real axis.
inline MobiusTransform conjugating_frame(cplx z, double theta) {
    return mobius_compose(MobiusTransform::rotation(-theta), MobiusTransform::translation(z));
}

struct DiskState {
    cplx z;
    double theta;
};

inline DiskState exact_geodesic_flow(const DiskState& s, double t, double kappa0 = 1.0) {
    if (t == 0.0) return s;
    double r = std::tanh(0.5 * std::sqrt(kappa0) * t);
    cplx e = std::polar(1.0, s.theta);
    cplx den = 1.0 + std::conj(s.z) * e * r;
    return {(e * r + s.z) / den, wrap_angle(s.theta - 2.0 * std::arg(den))};
}

// Generalized circle A|z|^2 + 2 Re(conj(B) z) + C = 0. The region f < 0 is the "inside".
struct GenCircle {
    double A = 0;
    cplx B{0, 0};
    double C = 0;

    double eval(cplx z) const { return A * std::norm(z) + 2.0 * (B.real() * z.real() + B.imag() * z.imag()) + C; }
    double eval(double x, double y) const { return A * (x * x + y * y) + 2.0 * (B.real() * x + B.imag() * y) + C; }
    cplx gradient(cplx z) const { return 2.0 * (A * z + B); }

    bool is_line() const { return A == 0.0; }
    cplx center() const { return -B / A; }
    double radius() const { return std::sqrt(std::norm(B) / (A * A) - C / A); }

    static GenCircle disk(cplx c, double r) { return {1.0, -c, std::norm(c) - r * r}; }
    static GenCircle complement_of_disk(cplx c, double r) { return {-1.0, c, r * r - std::norm(c)}; }
    // half plane {Re(conj(n) z) < d} for a unit normal n
    static GenCircle half_plane(cplx n, double d) { return {0.0, 0.5 * n, -d}; }

    // image of this circle (and its inside) under the map m
    GenCircle pushed_forward(const MobiusTransform& m) const {
        MobiusTransform n = m.inverse();
        cplx p = n.alpha, q = n.beta, r = std::conj(n.beta), s = std::conj(n.alpha);
        GenCircle o;
        o.A = A * std::norm(p) + 2.0 * std::real(std::conj(p) * B * r) + C * std::norm(r);
        o.B = std::conj(p) * (A * q + B * s) + std::conj(r) * (std::conj(B) * q + C * s);
        o.C = A * std::norm(q) + 2.0 * std::real(std::conj(q) * B * s) + C * std::norm(s);
        return o;
    }
};

// Geodesic wall through the real point x, orthogonal to both the unit circle and the real axis.
// The returned circle has the side containing 0 as its inside.
inline GenCircle geodesic_wall_through(cplx p) {
    double x = std::abs(p);
    cplx dir = p / x;
    double c = (1.0 + x * x) / (2.0 * x);
    double r = (1.0 - x * x) / (2.0 * x);
    return GenCircle::complement_of_disk(dir * c, r);
}

struct Wall {
    GenCircle circle;
    MobiusTransform to_inside;  // maps the region beyond this wall back across the paired wall
    int letter = -1;            // letter of to_inside
    int paired = -1;
};

// Letters: generator g is letter 2g, its inverse is letter 2g+1.
struct SchottkyGroup {
    std::vector<MobiusTransform> generators;
    std::vector<Wall> walls;

    MobiusTransform letter(int code) const {
        const MobiusTransform& g = generators.at(static_cast<std::size_t>(code / 2));
        return (code & 1) ? g.inverse() : g;
    }
    int rank() const { return static_cast<int>(generators.size()); }
};

struct FoldResult {
    cplx z;
    std::vector<int> word;  // z_original = letter(word[0]) o letter(word[1]) o ... (z)
};

inline constexpr int fold_iteration_cap = 200;
inline constexpr double wall_tolerance = 1e-12;

// index of a wall whose outside contains z, or -1
inline int violated_wall(const SchottkyGroup& g, cplx z) {
    for (std::size_t k = 0; k < g.walls.size(); ++k)
        if (g.walls[k].circle.eval(z) > wall_tolerance) return static_cast<int>(k);
    return -1;
}

inline FoldResult fold_to_fundamental_domain(cplx z, const SchottkyGroup& g) {
    if (std::abs(z) >= 1.0) throw std::domain_error("fold_to_fundamental_domain: point not inside the unit disk");
    FoldResult r{z, {}};
    for (int it = 0; it <= fold_iteration_cap; ++it) {
        int k = violated_wall(g, r.z);
        if (k < 0) return r;
        const Wall& w = g.walls[static_cast<std::size_t>(k)];
        r.z = w.to_inside(r.z);
        r.word.push_back(w.letter ^ 1);
    }
    throw Error("fold_to_fundamental_domain: iteration cap exceeded");
}

inline cplx apply_word(const SchottkyGroup& g, const std::vector<int>& word, cplx z) {
    for (auto it = word.rbegin(); it != word.rend(); ++it) z = g.letter(*it)(z);
    return z;
}

struct GroupElement {
    MobiusTransform t;
    std::vector<int> word;
};

// All reduced words of length <= max_len, breadth first, identity first.
inline std::vector<GroupElement> reduced_words(const SchottkyGroup& g, int max_len) {
    std::vector<GroupElement> out{{MobiusTransform::identity(), {}}};
    std::size_t begin = 0;
    int nletters = 2 * g.rank();
    for (int len = 1; len <= max_len; ++len) {
        std::size_t end = out.size();
        for (std::size_t i = begin; i < end; ++i) {
            for (int c = 0; c < nletters; ++c) {
                if (!out[i].word.empty() && (out[i].word.back() ^ 1) == c) continue;
                GroupElement e{mobius_compose(out[i].t, g.letter(c)), out[i].word};
                e.word.push_back(c);
                out.push_back(std::move(e));
            }
        }
        begin = end;
    }
    return out;
}

}  // namespace trapray
