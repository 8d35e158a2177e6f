#include <catch2/catch_amalgamated.hpp>

#include <trapray/phantom.hpp>

using namespace trapray;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SurfaceModel model(ModelKind k, double p, int N = 48, double kappa0 = 1.0) { return build_model({k, p, kappa0, N, 0.5}); }

}  // namespace

TEST_CASE("boundary components of each model", "[surface]") {
    CHECK(model(ModelKind::SchottkyOneGen, -0.3).n_components() == 2);
    CHECK(model(ModelKind::SchottkyTorus, -0.6).n_components() == 1);
    CHECK(model(ModelKind::SchottkyPants, -0.6).n_components() == 3);
    CHECK(model(ModelKind::Cylinder, 0.4).n_components() == 2);
    CHECK(model(ModelKind::HyperbolicBall, 0.9).n_components() == 1);
    CHECK(model(ModelKind::FlatDisk, 0.9).n_components() == 1);
}

TEST_CASE("invalid model parameters", "[surface]") {
    CHECK_THROWS_AS(model(ModelKind::SchottkyOneGen, 0.2), Error);
    CHECK_THROWS_AS(model(ModelKind::SchottkyTorus, -1.0), Error);
    CHECK_THROWS_AS(model(ModelKind::Cylinder, 1.5), Error);
    CHECK_THROWS_AS(model(ModelKind::FlatDisk, 1.0), Error);
    CHECK_THROWS_AS(model(ModelKind::HyperbolicBall, 0.5, 8), Error);
    CHECK_THROWS_AS(model(ModelKind::HyperbolicBall, 0.5, 32, 0.0), Error);
    CHECK_THROWS_AS(parse_model_kind("sphere"), Error);
    CHECK(parse_model_kind(to_string(ModelKind::SchottkyPants)) == ModelKind::SchottkyPants);
}

TEST_CASE("curvature closed forms", "[surface]") {
    auto hyp = model(ModelKind::SchottkyTorus, -0.6, 48, 2.0);
    CHECK_THAT(curvature(hyp, 0.1, 0.2), WithinAbs(-2.0, 1e-12));
    CHECK_THAT(curvature_fd(hyp, 0.1, 0.2), WithinAbs(-2.0, 1e-5));
    CHECK_THAT(curvature_fd(model(ModelKind::FlatDisk, 0.9), 0.3, 0.1), WithinAbs(0.0, 1e-6));
    CHECK_THROWS_AS(curvature(hyp, 0.9, 0.9), Error);

    for (double eps : {0.0, 0.2, 0.4}) {
        auto cyl = model(ModelKind::Cylinder, eps);
        for (double y : {-0.9, -0.3, 0.0, 0.5, 1.0}) {
            double k = -(1 + eps * eps) - 2 * eps * std::tanh(y) * std::tanh(eps * y);
            CHECK_THAT(curvature(cyl, 0.7, y), WithinAbs(k, 1e-12));
            CHECK_THAT(curvature_fd(cyl, 0.7, y), WithinAbs(k, 1e-6));
        }
        // |dk| <= 2 eps (1 + eps)
        CHECK(curvature_gradient_sup(cyl) <= 2 * eps * (1 + eps) + 1e-12);
    }
    CHECK_THROWS_AS(curvature(model(ModelKind::Cylinder, 0.4), 0.5, 1.5), Error);
}

TEST_CASE("boundary lengths", "[surface]") {
    // hyperbolic circle of Euclidean radius r: 2 pi sinh(2 artanh r) / sqrt(k0)
    for (double k0 : {1.0, 4.0}) {
        auto ball = model(ModelKind::HyperbolicBall, 0.8, 32, k0);
        CHECK_THAT(ball.components[0].length, WithinRel(two_pi * std::sinh(2 * std::atanh(0.8)) / std::sqrt(k0), 1e-6));
    }
    CHECK_THAT(model(ModelKind::FlatDisk, 0.7).components[0].length, WithinRel(two_pi * 0.7, 1e-6));
    auto cyl = model(ModelKind::Cylinder, 0.3);
    for (const auto& c : cyl.components) CHECK_THAT(c.length, WithinRel(2 * std::cosh(1.0) * std::cosh(0.3), 1e-6));
}

TEST_CASE("boundary parameter round trip", "[surface]") {
    for (auto [k, p] : std::vector<std::pair<ModelKind, double>>{{ModelKind::SchottkyOneGen, -0.3},
                                                                 {ModelKind::SchottkyTorus, -0.6},
                                                                 {ModelKind::SchottkyPants, -0.6},
                                                                 {ModelKind::Cylinder, 0.4},
                                                                 {ModelKind::HyperbolicBall, 0.9}}) {
        auto m = model(k, p);
        for (const auto& b : m.boundary_parameterize(17)) {
            int circle = -1;
            double best = 1e9;
            for (std::size_t c = 0; c < m.cuts.size(); ++c) {
                double v = std::abs(m.cuts[c].eval(b.x, b.y));
                if (v < best) {
                    best = v;
                    circle = static_cast<int>(c);
                }
            }
            CHECK(best < 1e-9);
            auto [comp, s] = m.boundary_parameter(circle, b.x, b.y);
            CHECK(comp == b.component);
            double ds = std::abs(s - b.s);
            CHECK(std::min(ds, 1 - ds) < 1e-6);
            // inner normal points into the domain
            double d = 1e-5;
            cplx n = std::polar(1.0, b.normal_angle);
            CHECK(m.inside_cuts(b.x + d * n.real(), b.y + d * n.imag()));
            CHECK(m.boundary_geodesic_curvature(circle, b.x, b.y) > 0);
        }
    }
}

TEST_CASE("grid masks", "[surface]") {
    auto m = model(ModelKind::SchottkyTorus, -0.6, 64);
    long nm = 0, ne = 0, ni = 0;
    for (std::size_t k = 0; k < m.mask.size(); ++k) {
        if (m.interior[k]) CHECK(m.mask[k]);
        if (m.mask[k]) CHECK(m.ext_mask[k]);
        nm += m.mask[k];
        ne += m.ext_mask[k];
        ni += m.interior[k];
    }
    CHECK(ni > 0);
    CHECK(nm > ni);
    CHECK(ne > nm);
    for (int j = 0; j < m.N; ++j)
        for (int i = 0; i < m.N; ++i)
            if (m.mask[m.idx(i, j)]) CHECK(m.in_domain(m.xc(i), m.yc(j)));
}

TEST_CASE("fold transports into the domain", "[surface]") {
    auto m = model(ModelKind::SchottkyPants, -0.6);
    double x = 0.75, y = 0.05, th = 1.0;
    REQUIRE(m.inside_cuts(0.0, 0.0));
    REQUIRE(m.beyond_wall(x, y));
    int n = m.fold(x, y, th);
    CHECK(n >= 1);
    CHECK(!m.beyond_wall(x, y));

    auto cyl = model(ModelKind::Cylinder, 0.4);
    double cx = 2.5, cy = 0.3, ct = 0.2;
    CHECK(cyl.fold(cx, cy, ct) == 1);
    CHECK_THAT(cx, WithinAbs(0.5, 1e-15));
}

TEST_CASE("Riemannian area element", "[surface]") {
    auto ball = model(ModelKind::HyperbolicBall, 0.9, 32, 2.0);
    CHECK_THAT(ball.dvol(0.3, 0.4), WithinRel(4 / (2.0 * std::pow(1 - 0.25, 2)), 1e-12));
    auto cyl = model(ModelKind::Cylinder, 0.4);
    CHECK_THAT(cyl.dvol(0.3, 0.5), WithinRel(std::cosh(0.5) * std::cosh(0.2), 1e-12));
}

TEST_CASE("phantom is periodic on the cylinder", "[surface]") {
    auto cyl = model(ModelKind::Cylinder, 0.4);
    Gaussian g{0.05, 0.0, 0.2, 1.0};
    CHECK_THAT(gaussian_value(cyl, g, 1.95, 0.0), WithinAbs(gaussian_value(cyl, g, -0.05, 0.0), 1e-15));
    GridField f = make_phantom(cyl, {g});
    double mx = 0;
    for (double v : f.v) mx = std::max(mx, v);
    CHECK(mx > 0.9);
}

TEST_CASE("wall pairings map each wall onto its partner", "[surface]") {
    for (auto [k, p] : std::vector<std::pair<ModelKind, double>>{
             {ModelKind::SchottkyOneGen, -0.3}, {ModelKind::SchottkyTorus, -0.6}, {ModelKind::SchottkyPants, -0.6}}) {
        auto m = build_model({k, p, 1.0, 32, 0.5});
        const auto& walls = m.group.walls;
        for (std::size_t w = 0; w < walls.size(); ++w) {
            REQUIRE(walls[w].paired >= 0);
            const Wall& partner = walls[static_cast<std::size_t>(walls[w].paired)];
            CHECK(static_cast<std::size_t>(partner.paired) == w);
            cplx c = walls[w].circle.center();
            double r = walls[w].circle.radius();
            int hits = 0;
            for (int q = 0; q < 64; ++q) {
                cplx z = c + std::polar(r, two_pi * q / 64);
                if (std::norm(z) >= 1) continue;
                cplx g = mobius_apply(walls[w].to_inside, z);
                CHECK(std::abs(partner.circle.eval(g)) < 1e-10 * std::max(1.0, std::abs(partner.circle.A)));
                ++hits;
            }
            CHECK(hits > 5);
        }
    }
}
