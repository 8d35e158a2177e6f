#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include <trapray/config.hpp>

using namespace trapray;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() / "trapray_test_io";
    std::filesystem::create_directories(p);
    return p;
}

std::string csv_text(const FanBeamData& d) {
    std::ostringstream os;
    write_fanbeam_csv(os, d);
    return os.str();
}

}  // namespace

TEST_CASE("number formatting round trips", "[io]") {
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0})
        CHECK(parse_double(fmt17(v)) == v);
    CHECK(std::isnan(parse_double(fmt17(std::numeric_limits<double>::quiet_NaN()))));
    CHECK_THROWS_AS(parse_double("1.5x"), Error);
    CHECK(parse_hex64(hex64(0xdeadbeef01234567ULL)) == 0xdeadbeef01234567ULL);
}

TEST_CASE("fan-beam CSV round trip", "[io]") {
    FanBeamData d = FanBeamData::influx(2, 3, 5, pi / 6);
    d.model_hash = 0x1234abcdULL;
    for (std::size_t k = 0; k < d.v.size(); ++k) d.v[k] = std::sin(0.37 * k) / 3;
    d.v[4] = std::numeric_limits<double>::quiet_NaN();
    d.capped[4] = 1;
    std::istringstream is(csv_text(d));
    FanBeamData r = read_fanbeam_csv(is);
    CHECK(r.model_hash == d.model_hash);
    CHECK(r.n_comp == 2);
    CHECK(!r.full_circle);
    CHECK(r.alpha_max == d.alpha_max);
    CHECK(r.capped == d.capped);
    for (std::size_t k = 0; k < d.v.size(); ++k) {
        if (k == 4) CHECK(std::isnan(r.v[k]));
        else CHECK(r.v[k] == d.v[k]);
    }
    CHECK(csv_text(r) == csv_text(d));

    FanBeamData f = FanBeamData::full(1, 2, 4);
    std::istringstream fs(csv_text(f));
    CHECK(read_fanbeam_csv(fs).full_circle);

    auto path = (scratch_dir() / "d.csv").string();
    save_fanbeam(path, d);
    CHECK(csv_text(load_fanbeam(path)) == csv_text(d));
    CHECK_THROWS_AS(load_fanbeam((scratch_dir() / "missing.csv").string()), Error);
}

TEST_CASE("malformed fan-beam CSV", "[io]") {
    std::string good = csv_text(FanBeamData::influx(1, 2, 2, 0.5 * pi));
    auto fails = [](const std::string& text) {
        std::istringstream is(text);
        CHECK_THROWS_AS(read_fanbeam_csv(is), Error);
    };
    fails("");
    fails("# something else\n");
    // drop the last row
    fails(good.substr(0, good.rfind('\n', good.size() - 2) + 1));
    std::string bad_flag = good;
    bad_flag.replace(bad_flag.rfind("ok"), 2, "huh");
    fails(bad_flag);
    std::string bad_key = good;
    bad_key.replace(bad_key.find("n_pts"), 5, "n_pps");
    fails(bad_key);
    fails(good + "0,7,0.5,0,0,1,ok\n");
}

TEST_CASE("grid field files", "[io]") {
    auto m = build_model({ModelKind::SchottkyTorus, -0.6, 1.0, 20, 0.5});
    GridField f = m.make_field();
    for (std::size_t k = 0; k < f.v.size(); ++k)
        if (m.mask[k]) f.v[k] = 0.01 * static_cast<double>(k) - 1.0;
    std::stringstream ss;
    write_field(ss, f, 77);
    std::uint64_t h = 0;
    GridField r = read_field(ss, &h);
    CHECK(h == 77);
    CHECK(r.N == f.N);
    CHECK(r.x0 == f.x0);
    CHECK(r.cell == f.cell);
    CHECK(r.mask == f.mask);
    CHECK(r.v == f.v);

    std::string bytes;
    {
        std::ostringstream os;
        write_field(os, f, 77);
        bytes = os.str();
    }
    std::istringstream trunc(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_field(trunc), Error);
    std::istringstream junk("GXRFLD99" + bytes.substr(8));
    CHECK_THROWS_AS(read_field(junk), Error);

    std::ostringstream csv;
    write_field_csv(csv, f);
    std::string text = csv.str();
    CHECK(text.rfind("i,j,x,y,mask,value\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 20 * 20);

    std::ostringstream pgm;
    PgmScale sc = write_field_pgm(pgm, f);
    CHECK(pgm.str().rfind("P5\n20 20\n255\n", 0) == 0);
    CHECK(pgm.str().size() == std::string("P5\n20 20\n255\n").size() + 400);
    CHECK(sc.lo < sc.hi);
}

TEST_CASE("run configuration", "[io]") {
    RunConfig c = experiment_preset(3);
    c.seed = 99;
    c.escape.n_samples = 5000;
    RunConfig r = parse_config(dump_config(c));
    CHECK(r == c);
    CHECK(dump_config(r) == dump_config(c));

    RunConfig d = parse_config(R"({"model": {"kind": "cylinder", "param": 0.3}})");
    CHECK(d.model.kind == ModelKind::Cylinder);
    CHECK(d.model.param == 0.3);
    CHECK(d.n_full == RunConfig{}.n_full);
    CHECK(d.phantom.empty());

    CHECK_THROWS_AS(parse_config("{"), Error);
    CHECK_THROWS_AS(parse_config(R"({"model": {"kind": "sphere"}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"model": {"N": 8}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"rays": {"alpha_max": 2.0}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"rays": {"full_circle_angles": 30}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"model": {"param": "x"}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"phantom": [{"center": [0, 0], "width": 0}]})"), Error);
    CHECK_THROWS_WITH(parse_config(R"({"inversion": {"iters": -1}})"), ContainsSubstring("iters"));

    auto path = (scratch_dir() / "c.json").string();
    save_config(path, c);
    CHECK(load_config(path) == c);
}

TEST_CASE("geometry hashes", "[io]") {
    RunConfig a = experiment_preset(1), b = a;
    CHECK(a.data_hash() == b.data_hash());
    b.rays.n_angles += 2;
    CHECK(a.data_hash() != b.data_hash());
    CHECK(a.field_hash() == b.field_hash());
    b = a;
    b.model.param = -0.31;
    CHECK(a.field_hash() != b.field_hash());
    b = a;
    b.flow.h = 2e-3;
    CHECK(a.data_hash() != b.data_hash());
}

TEST_CASE("experiment presets", "[io]") {
    for (int n = 1; n <= 5; ++n) {
        RunConfig c = experiment_preset(n);
        CHECK_NOTHROW(validate(c));
        CHECK(!c.phantom.empty());
    }
    CHECK(experiment_preset(2).model.kind == ModelKind::SchottkyTorus);
    CHECK(experiment_preset(2).model.param == -0.6);
    CHECK(experiment_preset(4).model.param == -0.5);
    CHECK(experiment_preset(3).model.kind == ModelKind::SchottkyPants);
    CHECK(experiment_preset(5).model.kind == ModelKind::Cylinder);
    CHECK(experiment_preset(5).model.param == 0.4);
    CHECK_THROWS_AS(experiment_preset(0), Error);
    CHECK_THROWS_AS(experiment_preset(6), Error);
}

TEST_CASE("forward data are byte-deterministic", "[io]") {
    auto m = build_model({ModelKind::SchottkyTorus, -0.6, 1.0, 32, 0.5});
    GridField f = make_phantom(m, {{0.1, 0.1, 0.1, 1.0}});
    RayGrid rg{12, 16, pi / 6};
    set_threads(1);
    std::string one = csv_text(forward_I0(m, f, rg, {2e-3, 30}));
    set_threads(4);
    std::string four = csv_text(forward_I0(m, f, rg, {2e-3, 30}));
    CHECK(one == four);
}
