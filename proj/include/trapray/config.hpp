#pragma once

#include <nlohmann/json.hpp>

#include <fstream>

#include "io.hpp"
#include "phantom.hpp"

namespace trapray {

struct EscapeOptions {
    long n_samples = 200000;
    double t_max = 40;
    double bin = 0.25;
    long min_alive = 500;

    bool operator==(const EscapeOptions&) const = default;
};

struct RunConfig {
    ModelConfig model;
    RayGrid rays;
    int n_full = 512;  // backprojection angles over the full circle
    FlowOptions flow;
    int iters = 2;
    std::vector<Gaussian> phantom;
    EscapeOptions escape;
    std::string out_dir = "out";
    std::uint64_t seed = 1;

    bool operator==(const RunConfig& o) const {
        return model == o.model && rays == o.rays && n_full == o.n_full && flow.h == o.flow.h && flow.t_max == o.flow.t_max &&
               iters == o.iters && phantom == o.phantom && escape == o.escape && out_dir == o.out_dir && seed == o.seed;
    }
    std::uint64_t data_hash() const { return geometry_hash(model, rays, flow); }
    std::uint64_t field_hash() const { return model_hash(model); }
};

inline void validate(const RunConfig& c) {
    if (c.model.N < 16) throw Error("model.N must be at least 16");
    if (!(c.model.kappa0 > 0)) throw Error("model.kappa0 must be positive");
    if (c.rays.n_pts <= 0 || c.rays.n_angles <= 0) throw Error("ray counts must be positive");
    if (!(c.rays.alpha_max > 0 && c.rays.alpha_max <= 0.5 * pi)) throw Error("influx cone must lie in (-pi/2, pi/2)");
    if (c.n_full <= 0 || c.n_full % 4 != 0) throw Error("full-circle angle count must be a positive multiple of 4");
    if (!(c.flow.h > 0) || !(c.flow.t_max > 0)) throw Error("flow step and t_max must be positive");
    if (c.iters < 0) throw Error("iters must be nonnegative");
    for (const auto& g : c.phantom)
        if (!(g.width > 0)) throw Error("phantom widths must be positive");
    if (c.escape.n_samples < 1000 || !(c.escape.t_max > 0) || !(c.escape.bin > 0) || c.escape.min_alive < 1)
        throw Error("bad escape block");
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json ph = nlohmann::json::array();
    for (const auto& g : c.phantom) ph.push_back({{"center", {g.cx, g.cy}}, {"width", g.width}, {"amplitude", g.amplitude}});
    return {
        {"model",
         {{"kind", to_string(c.model.kind)},
          {"param", c.model.param},
          {"kappa0", c.model.kappa0},
          {"N", c.model.N},
          {"cut_fraction", c.model.cut_fraction}}},
        {"rays",
         {{"boundary_points", c.rays.n_pts},
          {"influx_angles", c.rays.n_angles},
          {"alpha_max", c.rays.alpha_max},
          {"full_circle_angles", c.n_full},
          {"h", c.flow.h},
          {"t_max", c.flow.t_max}}},
        {"inversion", {{"iters", c.iters}}},
        {"phantom", ph},
        {"escape",
         {{"samples", c.escape.n_samples}, {"t_max", c.escape.t_max}, {"bin", c.escape.bin}, {"min_alive", c.escape.min_alive}}},
        {"out_dir", c.out_dir},
        {"seed", c.seed},
    };
}

// missing keys keep their defaults
inline RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    auto get = [](const nlohmann::json& o, const char* k, auto& dst) {
        if (o.contains(k)) o.at(k).get_to(dst);
    };
    try {
        if (j.contains("model")) {
            const auto& m = j.at("model");
            if (m.contains("kind")) c.model.kind = parse_model_kind(m.at("kind").get<std::string>());
            get(m, "param", c.model.param);
            get(m, "kappa0", c.model.kappa0);
            get(m, "N", c.model.N);
            get(m, "cut_fraction", c.model.cut_fraction);
        }
        if (j.contains("rays")) {
            const auto& r = j.at("rays");
            get(r, "boundary_points", c.rays.n_pts);
            get(r, "influx_angles", c.rays.n_angles);
            get(r, "alpha_max", c.rays.alpha_max);
            get(r, "full_circle_angles", c.n_full);
            get(r, "h", c.flow.h);
            get(r, "t_max", c.flow.t_max);
        }
        if (j.contains("inversion")) get(j.at("inversion"), "iters", c.iters);
        if (j.contains("phantom"))
            for (const auto& g : j.at("phantom")) {
                Gaussian q;
                auto ctr = g.at("center");
                q.cx = ctr.at(0).get<double>();
                q.cy = ctr.at(1).get<double>();
                get(g, "width", q.width);
                get(g, "amplitude", q.amplitude);
                c.phantom.push_back(q);
            }
        if (j.contains("escape")) {
            const auto& e = j.at("escape");
            get(e, "samples", c.escape.n_samples);
            get(e, "t_max", c.escape.t_max);
            get(e, "bin", c.escape.bin);
            get(e, "min_alive", c.escape.min_alive);
        }
        get(j, "out_dir", c.out_dir);
        get(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    return from_json(j);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

inline void save_config(const std::string& path, const RunConfig& c) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os << dump_config(c);
}

// Desk-scale presets for the five numerical experiments
inline RunConfig experiment_preset(int n) {
    RunConfig c;
    c.rays = {200, 256, 0.5 * pi};
    c.flow = {1e-3, 30};
    switch (n) {
        case 1:
            c.model = {ModelKind::SchottkyOneGen, -0.3, 1.0, 150, 0.5};
            c.rays = {200, 400, 0.5 * pi};
            c.phantom = {{0.0, 0.2, 0.1, 1.0}};
            break;
        case 2:
        case 4:
            c.model = {ModelKind::SchottkyTorus, n == 2 ? -0.6 : -0.5, 1.0, 150, 0.5};
            c.rays = {300, 400, pi / 6};
            c.phantom = {{0.15, 0.1, 0.08, 1.0}, {-0.1, -0.15, 0.06, 0.8}};
            break;
        case 3:
            c.model = {ModelKind::SchottkyPants, -0.6, 1.0, 150, 0.5};
            c.rays = {200, 400, pi / 6};
            c.phantom = {{0.15, 0.1, 0.08, 1.0}, {-0.1, -0.15, 0.06, 0.8}};
            break;
        case 5:
            c.model = {ModelKind::Cylinder, 0.4, 1.0, 150, 0.5};
            c.flow = {2e-3, 30};
            c.phantom = {{0.6, 0.3, 0.15, 1.0}, {1.4, -0.35, 0.12, 0.7}};
            break;
        default:
            throw Error("experiments are numbered 1 to 5");
    }
    c.out_dir = "experiment" + std::to_string(n);
    return c;
}

}  // namespace trapray
