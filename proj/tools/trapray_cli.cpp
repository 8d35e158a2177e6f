// trapray: phantoms, forward transforms, inversion, escape rates and bound tables.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include <trapray/bounds.hpp>
#include <trapray/config.hpp>
#include <trapray/inversion.hpp>

namespace fs = std::filesystem;
using namespace trapray;

namespace {

struct Clock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

void ensure_parent(const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_field_set(const std::string& stem, const GridField& f, std::uint64_t hash) {
    ensure_parent(stem);
    save_field(stem + ".bin", f, hash);
    save_field_csv(stem + ".csv", f);
    save_field_pgm(stem + ".pgm", f);
}

// sinogram preview: rows = influx angle (top = +alpha_max), columns = boundary samples of all components
void save_sinogram_pgm(const std::string& path, const FanBeamData& d) {
    GridField g;
    int W = d.n_comp * d.n_pts, H = d.n_angles;
    // reuse the square PGM writer on a padded square
    int N = std::max(W, H);
    g.N = N;
    g.v.assign(static_cast<std::size_t>(N) * N, 0.0);
    g.mask.assign(g.v.size(), 0);
    for (int c = 0; c < d.n_comp; ++c)
        for (int i = 0; i < d.n_pts; ++i)
            for (int k = 0; k < H; ++k) {
                double v = d.at(c, i, k);
                std::size_t id = static_cast<std::size_t>(k) * N + c * d.n_pts + i;
                g.v[id] = std::isnan(v) ? 0.0 : v;
                g.mask[id] = 1;
            }
    save_field_pgm(path, g);
}

GridField error_field(const SurfaceModel& m, const GridField& rec, const GridField& truth) {
    GridField e = m.make_field();
    for (std::size_t k = 0; k < e.v.size(); ++k)
        if (m.mask[k]) e.v[k] = rec.v[k] - truth.v[k];
    return e;
}

GridField checked_field(const RunConfig& cfg, const std::string& path) {
    std::uint64_t h = 0;
    GridField f = load_field(path, &h);
    if (h != cfg.field_hash() || f.N != cfg.model.N) throw Error("field " + path + " was produced for a different model");
    return f;
}

FanBeamData checked_data(const RunConfig& cfg, const std::string& path) {
    FanBeamData d = load_fanbeam(path);
    if (d.model_hash != cfg.data_hash()) throw Error("data " + path + " was produced for a different model or ray grid");
    return d;
}

FanBeamData run_forward(const RunConfig& cfg, const SurfaceModel& m, const GridField& f) {
    FanBeamData d = forward_I0(m, f, cfg.rays, cfg.flow);
    d.model_hash = cfg.data_hash();
    return d;
}

struct Inverted {
    ReconstructionReport rep;
    long fronts = 0;
};

Inverted run_inversion(const RunConfig& cfg, const SurfaceModel& m, const FanBeamData& d, int iters, const GridField* truth) {
    ScatterTable tab(m, cfg.n_full, cfg.flow);
    ExitFronts fr = exit_fronts(m, cfg.rays, cfg.flow);
    Inverted out;
    out.fronts = fr.count();
    out.rep = neumann_invert(m, d, tab, cfg.rays, cfg.flow, iters, truth, {}, &fr);
    return out;
}

void write_report_csv(const std::string& path, const ReconstructionReport& r) {
    ensure_parent(path);
    std::ofstream os(path);
    os << "iteration,rel_l2,sup_err,update_norm\n";
    for (int k = 0; k <= r.iterations; ++k) {
        os << k << ',' << (k < static_cast<int>(r.rel_l2.size()) ? fmt17(r.rel_l2[k]) : "nan") << ','
           << (k < static_cast<int>(r.sup_err.size()) ? fmt17(r.sup_err[k]) : "nan") << ','
           << (k > 0 ? fmt17(r.update_norms[static_cast<std::size_t>(k - 1)]) : "nan") << '\n';
    }
}

DeltaFit run_escape(const RunConfig& cfg, const SurfaceModel& m, const std::string& csv) {
    EscapeCurve c = escape_rate(m, cfg.escape.n_samples, cfg.escape.t_max, cfg.escape.bin, cfg.seed, cfg.flow);
    ensure_parent(csv);
    std::ofstream os(csv);
    os << "t,V,alive\n";
    for (std::size_t i = 0; i < c.t.size(); ++i) os << fmt17(c.t[i]) << ',' << fmt17(c.V[i]) << ',' << c.alive[i] << '\n';
    DeltaFit f = estimate_delta_gamma(c, cfg.escape.min_alive);
    std::ofstream fit(csv + ".fit");
    fit << "delta,slope,intercept,t_lo,t_hi,points\n"
        << fmt17(f.delta) << ',' << fmt17(f.slope) << ',' << fmt17(f.intercept) << ',' << fmt17(f.t_lo) << ',' << fmt17(f.t_hi) << ','
        << f.points << '\n';
    return f;
}

void write_norms(std::ostream& os, const std::vector<double>& lambdas, const std::vector<double>& deltas) {
    os << "lambda,delta,pi0_norm,h_lambda_0,neighbourhood_A\n";
    for (double l : lambdas)
        for (double d : deltas) {
            double c = std::numeric_limits<double>::quiet_NaN(), a = c;
            try {
                c = pi0_norm(l, d);
                if (1 - l > std::max(d, 0.5)) a = neighbourhood_constant(d, 1 - l, 1.0);
            } catch (const Error&) {
            }
            os << fmt17(l) << ',' << fmt17(d) << ',' << fmt17(c) << ',' << fmt17(h_lambda(0.0, l)) << ',' << fmt17(a) << '\n';
        }
    os << "\neps,lambda,pi0_bound,w_bound\n";
    for (double e : {0.0, 0.02, 0.04, 0.1, 0.2, 0.3, 0.4}) {
        os << fmt17(e) << ',' << fmt17(1 - 1 / std::cosh(e)) << ',' << fmt17(cylinder_pi0_bound(e)) << ',' << fmt17(cylinder_w_bound(e))
           << '\n';
    }
    os << "\nuniversal_constant," << fmt17(universal_constant()) << "\ncylinder_contraction_eps," << fmt17(cylinder_contraction_threshold())
       << '\n';
}

int run_experiment(int n, RunConfig cfg, const std::string& out_dir) {
    Clock clk;
    fs::create_directories(out_dir);
    save_config(out_dir + "/config.json", cfg);
    SurfaceModel m = build_model(cfg.model);
    GridField f = make_phantom(m, cfg.phantom);
    write_field_set(out_dir + "/phantom", f, cfg.field_hash());
    FanBeamData d = run_forward(cfg, m, f);
    save_fanbeam(out_dir + "/sinogram.csv", d);
    save_sinogram_pgm(out_dir + "/sinogram.pgm", d);
    int iters = n == 5 ? cfg.iters : 0;
    Inverted inv = run_inversion(cfg, m, d, iters, &f);
    const ReconstructionReport& r = inv.rep;
    write_field_set(out_dir + "/reconstruction", r.reconstruction, cfg.field_hash());
    write_field_set(out_dir + "/error", error_field(m, r.reconstruction, f), cfg.field_hash());
    write_report_csv(out_dir + "/iterations.csv", r);
    if (n == 5) {
        // one-shot reconstruction alongside the corrected one
        Inverted one = run_inversion(cfg, m, d, 0, &f);
        write_field_set(out_dir + "/reconstruction_oneshot", one.rep.reconstruction, cfg.field_hash());
        write_field_set(out_dir + "/error_oneshot", error_field(m, one.rep.reconstruction, f), cfg.field_hash());
    }
    std::ofstream mc(out_dir + "/metrics.csv");
    mc << "experiment,model,param,N,rel_l2,sup_err,iterations,capped_rays,exit_fronts";
    double delta = std::numeric_limits<double>::quiet_NaN();
    if (n == 2 || n == 4) delta = run_escape(cfg, m, out_dir + "/escape.csv").delta;
    mc << ",delta_gamma\n";
    mc << n << ',' << to_string(cfg.model.kind) << ',' << fmt17(cfg.model.param) << ',' << cfg.model.N << ','
       << fmt17(r.rel_l2.back()) << ',' << fmt17(r.sup_err.back()) << ',' << r.iterations << ',' << d.n_capped() << ',' << inv.fronts
       << ',' << fmt17(delta) << '\n';
    std::ofstream(out_dir + "/runtime.txt") << "seconds " << clk.seconds() << '\n';
    std::cout << "experiment " << n << ": rel_l2 " << r.rel_l2.back() << " sup " << r.sup_err.back();
    if (!std::isnan(delta)) std::cout << " delta " << delta;
    std::cout << " (" << clk.seconds() << " s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geodesic X-ray transform inversion on surfaces with trapping"};
    app.require_subcommand(1);
    std::string config_path, out, field_path, data_path, truth_path;
    int threads = 0, iters = -1, exp_n = 1;
    long long seed = -1;
    double lambda = -1, delta = -1;
    app.add_option("--threads", threads, "worker threads (0 = all)");
    app.add_option("--seed", seed, "random seed (overrides the config)");

    auto* phantom = app.add_subcommand("phantom", "evaluate the configured Gaussian phantom on the grid");
    auto* forward = app.add_subcommand("forward", "geodesic X-ray transform of a field");
    auto* invert = app.add_subcommand("invert", "one-shot inversion of influx data");
    auto* neumann = app.add_subcommand("neumann", "inversion with Neumann-series correction");
    auto* escape = app.add_subcommand("escape", "escape rate and exponent estimate");
    auto* norms = app.add_subcommand("norms", "table of operator-norm bounds");
    auto* experiment = app.add_subcommand("experiment", "run an experiment preset end to end");
    for (auto* s : {phantom, forward, invert, neumann, escape, experiment}) s->add_option("--config", config_path, "JSON run config");
    for (auto* s : {phantom, forward, invert, neumann, escape, norms, experiment})
        s->add_option("--out", out, "output path")->required(s != experiment);
    for (auto* s : {phantom, forward, invert, neumann, escape, experiment}) s->get_option("--config")->required(s != experiment);
    forward->add_option("--field", field_path, "input field (.bin)")->required();
    for (auto* s : {invert, neumann}) {
        s->add_option("--data", data_path, "influx data (.csv)")->required();
        s->add_option("--truth", truth_path, "ground-truth field for error reports");
    }
    neumann->add_option("--iters", iters, "Neumann iterations (overrides the config)");
    experiment->add_option("--iters", iters, "Neumann iterations for experiment 5");
    experiment->add_option("n", exp_n, "experiment number 1..5")->required()->check(CLI::Range(1, 5));
    norms->add_option("--lambda", lambda, "single attenuation value");
    norms->add_option("--delta", delta, "single exponent value");

    CLI11_PARSE(app, argc, argv);
    try {
        if (threads > 0) set_threads(threads);
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (iters >= 0) cfg.iters = iters;

        if (*norms) {
            std::vector<double> ls = {0.0, 0.1, 0.2, 0.3, 0.45}, ds = {0.0, 0.3, 0.5, 0.6, 0.7};
            if (lambda >= 0) ls = {lambda};
            if (delta >= 0) ds = {delta};
            ensure_parent(out);
            std::ofstream os(out);
            if (!os) throw Error("cannot write " + out);
            write_norms(os, ls, ds);
            return 0;
        }
        if (*experiment) {
            RunConfig c = config_path.empty() ? experiment_preset(exp_n) : cfg;
            if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
            if (iters >= 0) c.iters = iters;
            return run_experiment(exp_n, c, out.empty() ? c.out_dir : out);
        }
        SurfaceModel m = build_model(cfg.model);
        if (*phantom) {
            write_field_set(out, make_phantom(m, cfg.phantom), cfg.field_hash());
        } else if (*forward) {
            GridField f = checked_field(cfg, field_path);
            FanBeamData d = run_forward(cfg, m, f);
            ensure_parent(out);
            save_fanbeam(out, d);
            std::cout << "forward: " << d.v.size() << " rays, " << d.n_capped() << " capped\n";
        } else if (*invert || *neumann) {
            FanBeamData d = checked_data(cfg, data_path);
            GridField truth;
            if (!truth_path.empty()) truth = checked_field(cfg, truth_path);
            Inverted inv = run_inversion(cfg, m, d, *neumann ? cfg.iters : 0, truth_path.empty() ? nullptr : &truth);
            write_field_set(out, inv.rep.reconstruction, cfg.field_hash());
            write_report_csv(out + ".report.csv", inv.rep);
            if (!inv.rep.rel_l2.empty())
                std::cout << "rel_l2 " << inv.rep.rel_l2.back() << " sup " << inv.rep.sup_err.back() << '\n';
            if (inv.rep.diverged) std::cout << "warning: iterates diverged\n";
        } else if (*escape) {
            DeltaFit f = run_escape(cfg, m, out);
            std::cout << "delta_gamma " << f.delta << " (fit on [" << f.t_lo << ", " << f.t_hi << "])\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "trapray: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
