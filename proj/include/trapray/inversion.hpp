#pragma once

#include <chrono>
#include <functional>
#include <optional>

#include "fiberharm.hpp"

namespace trapray {

struct ReconstructionReport {
    GridField reconstruction;
    std::vector<double> rel_l2;   // per iterate, when ground truth is given
    std::vector<double> sup_err;  // per iterate, relative to sup |f|
    std::vector<double> update_norms;
    int iterations = 0;
    bool diverged = false;
    double seconds = 0;
};

// *d I1* S^{-1} w: vector backprojection of full-circle boundary data w followed by the
// divergence of the rotated angular moment.
inline GridField backproject_and_curl(const SurfaceModel& m, const FanBeamData& w, const ScatterTable& tab) {
    if (!w.full_circle) throw Error("backproject_and_curl expects full-circle data");
    int N = m.N, n = tab.n_theta();
    std::vector<double> U1(static_cast<std::size_t>(N) * N, 0.0), U2(U1.size(), 0.0);
    std::vector<std::uint8_t> have(U1.size(), 0);
    std::vector<double> cs(static_cast<std::size_t>(n)), sn(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        cs[static_cast<std::size_t>(k)] = std::cos(tab.theta(k));
        sn[static_cast<std::size_t>(k)] = std::sin(tab.theta(k));
    }
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            std::size_t id = m.idx(i, j);
            if (!m.ext_mask[id] || !tab.has(i, j)) continue;
            double S = 0, C = 0;
            for (int k = 0; k < n; ++k) {
                ScatterHit h = tab.hit(i, j, k);
                if (h.comp < 0) continue;
                double val = full_circle_value(w, h.comp, h.s, h.beta);
                S += val * sn[static_cast<std::size_t>(k)];
                C += val * cs[static_cast<std::size_t>(k)];
            }
            S *= tab.dtheta();
            C *= tab.dtheta();
            double x = m.xc(i), y = m.yc(j);
            if (m.cylinder()) {
                U1[id] = -S;
                U2[id] = m.h(y) * C;
            } else {
                double ep = 1.0 / m.exp_neg_phi(x, y);
                U1[id] = -ep * S;
                U2[id] = ep * C;
            }
            have[id] = 1;
        }
    GridField out = m.make_field();
    auto avail = [&](int i, int j) {
        if (j < 0 || j >= N) return false;
        if (m.cylinder()) i = (i % N + N) % N;
        if (i < 0 || i >= N) return false;
        return have[m.idx(i, j)] != 0;
    };
    auto get = [&](const std::vector<double>& U, int i, int j) {
        if (m.cylinder()) i = (i % N + N) % N;
        return U[m.idx(i, j)];
    };
    auto deriv = [&](const std::vector<double>& U, int i, int j, int di, int dj, bool& ok) {
        bool p = avail(i + di, j + dj), q = avail(i - di, j - dj);
        if (p && q) return (get(U, i + di, j + dj) - get(U, i - di, j - dj)) / (2 * m.cell);
        if (p) return (get(U, i + di, j + dj) - get(U, i, j)) / m.cell;
        if (q) return (get(U, i, j) - get(U, i - di, j - dj)) / m.cell;
        ok = false;
        return 0.0;
    };
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            std::size_t id = m.idx(i, j);
            if (!m.mask[id] || !have[id]) continue;
            bool ok = true;
            double D = deriv(U1, i, j, 1, 0, ok) + deriv(U2, i, j, 0, 1, ok);
            if (!ok) continue;
            double x = m.xc(i), y = m.yc(j);
            if (m.cylinder()) {
                out.at(i, j) = D / m.h(y);
            } else {
                double e = m.exp_neg_phi(x, y);
                out.at(i, j) = e * e * D;
            }
        }
    return out;
}

struct InversionOptions {
    int n_full = 0;  // full-circle angle grid of the fiber FFT; 0 picks a power of two >= 4 x influx angles
};

inline int fiber_grid_size(const InversionOptions& opt, const FanBeamData& data) {
    if (opt.n_full > 0) return opt.n_full;
    int n = 512;
    while (n < 4 * data.n_angles) n *= 2;
    return n;
}

// A0(data) = 1/(4 pi) *d I1* S^{-1} (H I0^od data). With fiber angles counted counterclockwise
// from the inner normal and H = -i sign(k), this sign reproduces f on the flat and hyperbolic disks.
inline GridField one_shot_invert(const SurfaceModel& m, const FanBeamData& data, const ScatterTable& tab,
                                 const InversionOptions& opt = {}, const ExitFronts* fronts = nullptr) {
    if (data.n_comp != m.n_components()) throw Error("data geometry does not match the model");
    FanBeamData hw = hilbert_fiber(odd_extension(data, fiber_grid_size(opt, data), fronts));
    GridField g = backproject_and_curl(m, hw, tab);
    for (auto& v : g.v) v *= 1.0 / (4.0 * pi);
    return g;
}

// relative L2 (dvol weighted) and relative sup errors over the interior cells
inline std::pair<double, double> reconstruction_errors(const SurfaceModel& m, const GridField& rec, const GridField& truth) {
    KahanSum num, den;
    double sup = 0, ref = 0;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            std::size_t k = m.idx(i, j);
            if (!m.interior[k]) continue;
            double w = m.dvol(m.xc(i), m.yc(j));
            double e = rec.v[k] - truth.v[k];
            num.add(e * e * w);
            den.add(truth.v[k] * truth.v[k] * w);
            sup = std::max(sup, std::abs(e));
            ref = std::max(ref, std::abs(truth.v[k]));
        }
    double l2 = den.value() > 0 ? std::sqrt(num.value() / den.value()) : std::sqrt(num.value());
    return {l2, ref > 0 ? sup / ref : sup};
}

inline double field_norm(const SurfaceModel& m, const GridField& f) {
    KahanSum s;
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            std::size_t k = m.idx(i, j);
            if (!m.interior[k]) continue;
            s.add(f.v[k] * f.v[k] * m.dvol(m.xc(i), m.yc(j)));
        }
    return std::sqrt(s.value() * m.cell * m.cell);
}

// Generic Neumann recursion f_{k+1} = b + K f_k, f_0 = b. Returns the iterates.
template <class Vec, class Op>
std::vector<Vec> neumann_series(const Vec& b, Op&& K, int iters) {
    std::vector<Vec> it{b};
    for (int k = 0; k < iters; ++k) {
        Vec kf = K(it.back());
        for (std::size_t i = 0; i < kf.size(); ++i) kf[i] += b[i];
        it.push_back(std::move(kf));
    }
    return it;
}

// Neumann correction: f_{k+1} = A0 d + (Id - A0 I0) f_k
inline ReconstructionReport neumann_invert(const SurfaceModel& m, const FanBeamData& data, const ScatterTable& tab,
                                           const RayGrid& rg, const FlowOptions& fo, int iters,
                                           const GridField* truth = nullptr, const InversionOptions& opt = {},
                                           const ExitFronts* fronts = nullptr) {
    if (iters < 0) throw Error("iteration count must be nonnegative");
    auto t0 = std::chrono::steady_clock::now();
    ReconstructionReport rep;
    GridField b = one_shot_invert(m, data, tab, opt, fronts);
    GridField f = b;
    auto record = [&](const GridField& g) {
        if (truth) {
            auto [l2, sup] = reconstruction_errors(m, g, *truth);
            rep.rel_l2.push_back(l2);
            rep.sup_err.push_back(sup);
        }
    };
    record(f);
    int growing = 0;
    for (int k = 0; k < iters; ++k) {
        FanBeamData df = forward_I0(m, f, rg, fo);
        GridField af = one_shot_invert(m, df, tab, opt, fronts);
        GridField next = m.make_field();
        GridField diff = m.make_field();
        for (std::size_t i = 0; i < next.v.size(); ++i) {
            if (!m.mask[i]) continue;
            next.v[i] = b.v[i] + f.v[i] - af.v[i];
            diff.v[i] = next.v[i] - f.v[i];
        }
        rep.update_norms.push_back(field_norm(m, diff));
        f = std::move(next);
        record(f);
        rep.iterations = k + 1;
        const std::vector<double>& hist = truth ? rep.rel_l2 : rep.update_norms;
        if (hist.size() >= 2 && hist[hist.size() - 1] > hist[hist.size() - 2])
            ++growing;
        else
            growing = 0;
        if (growing >= 2) rep.diverged = true;
    }
    rep.reconstruction = std::move(f);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace trapray
