#pragma once

#include <vector>

#include "surface.hpp"

namespace trapray {

struct Gaussian {
    double cx = 0, cy = 0;
    double width = 0.1;
    double amplitude = 1.0;

    bool operator==(const Gaussian&) const = default;
};

// amplitude * exp(-|p - c|^2 / (2 width^2)); on the cylinder the x distance is periodic
inline double gaussian_value(const SurfaceModel& m, const Gaussian& g, double x, double y) {
    double dx = x - g.cx, dy = y - g.cy;
    if (m.cylinder()) dx -= m.width * std::round(dx / m.width);
    return g.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * g.width * g.width));
}

inline GridField make_phantom(const SurfaceModel& m, const std::vector<Gaussian>& gs) {
    GridField f = m.make_field();
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i) {
            if (!m.mask[m.idx(i, j)]) continue;
            double s = 0;
            for (const auto& g : gs) s += gaussian_value(m, g, m.xc(i), m.yc(j));
            f.at(i, j) = s;
        }
    return f;
}

}  // namespace trapray
