#pragma once

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xray.hpp"

namespace trapray {

// ---------------------------------------------------------------- geometry hashes

class Fnv1a {
public:
    template <class T>
    Fnv1a& add(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (unsigned char c : b) {
            h_ ^= c;
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t model_hash(const ModelConfig& c) {
    Fnv1a h;
    h.add(static_cast<int>(c.kind)).add(c.param).add(c.kappa0).add(c.N).add(c.cut_fraction);
    return h.value();
}

inline std::uint64_t geometry_hash(const ModelConfig& c, const RayGrid& rg, const FlowOptions& fo) {
    Fnv1a h;
    h.add(model_hash(c)).add(rg.n_pts).add(rg.n_angles).add(rg.alpha_max).add(fo.h).add(fo.t_max);
    return h.value();
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

// ---------------------------------------------------------------- number formatting

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("malformed number: " + s);
    return v;
}

// ---------------------------------------------------------------- fan-beam CSV

// # trapray fanbeam 1
// # hash=<hex> n_comp=.. n_pts=.. n_angles=.. full_circle=0|1 alpha_max=..
// component,i,s,k,angle,value,flag
inline void write_fanbeam_csv(std::ostream& os, const FanBeamData& d) {
    os << "# trapray fanbeam 1\n";
    os << "# hash=" << hex64(d.model_hash) << " n_comp=" << d.n_comp << " n_pts=" << d.n_pts << " n_angles=" << d.n_angles
       << " full_circle=" << (d.full_circle ? 1 : 0) << " alpha_max=" << fmt17(d.alpha_max) << "\n";
    os << "component,i,s,k,angle,value,flag\n";
    for (int c = 0; c < d.n_comp; ++c)
        for (int i = 0; i < d.n_pts; ++i)
            for (int k = 0; k < d.n_angles; ++k) {
                std::size_t id = d.index(c, i, k);
                os << c << ',' << i << ',' << fmt17(d.s(i)) << ',' << k << ',' << fmt17(d.angle(k)) << ',' << fmt17(d.v[id]) << ','
                   << (d.capped[id] ? "capped" : "ok") << '\n';
            }
}

inline FanBeamData read_fanbeam_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "# trapray fanbeam 1") throw Error("not a fan-beam CSV file");
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw Error("fan-beam CSV: missing header");
    std::istringstream hs(line.substr(2));
    std::string tok;
    FanBeamData d;
    int fc = 0;
    std::uint64_t hash = 0;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw Error("fan-beam CSV: bad header token " + tok);
        std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "hash") hash = parse_hex64(v);
        else if (k == "n_comp") d.n_comp = std::stoi(v);
        else if (k == "n_pts") d.n_pts = std::stoi(v);
        else if (k == "n_angles") d.n_angles = std::stoi(v);
        else if (k == "full_circle") fc = std::stoi(v);
        else if (k == "alpha_max") d.alpha_max = parse_double(v);
        else throw Error("fan-beam CSV: unknown header key " + k);
    }
    if (d.n_comp <= 0 || d.n_pts <= 0 || d.n_angles <= 0) throw Error("fan-beam CSV: bad dimensions");
    d = fc ? FanBeamData::full(d.n_comp, d.n_pts, d.n_angles) : FanBeamData::influx(d.n_comp, d.n_pts, d.n_angles, d.alpha_max);
    d.model_hash = hash;
    if (!std::getline(is, line) || line != "component,i,s,k,angle,value,flag") throw Error("fan-beam CSV: missing column header");
    std::vector<std::uint8_t> seen(d.v.size(), 0);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<std::string, 7> f;
        std::istringstream ls(line);
        for (auto& x : f)
            if (!std::getline(ls, x, ',')) throw Error("fan-beam CSV: short row");
        int c = std::stoi(f[0]), i = std::stoi(f[1]), k = std::stoi(f[3]);
        if (c < 0 || c >= d.n_comp || i < 0 || i >= d.n_pts || k < 0 || k >= d.n_angles) throw Error("fan-beam CSV: index out of range");
        std::size_t id = d.index(c, i, k);
        d.v[id] = parse_double(f[5]);
        if (f[6] == "capped") d.capped[id] = 1;
        else if (f[6] != "ok") throw Error("fan-beam CSV: bad flag " + f[6]);
        seen[id] = 1;
    }
    for (auto s : seen)
        if (!s) throw Error("fan-beam CSV: missing rows");
    return d;
}

inline void save_fanbeam(const std::string& path, const FanBeamData& d) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    write_fanbeam_csv(os, d);
}

inline FanBeamData load_fanbeam(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot read " + path);
    return read_fanbeam_csv(is);
}

// ---------------------------------------------------------------- grid fields

// Binary layout (little endian): "GXRFLD01", int32 N, uint64 hash, float64 x0, y0, cell,
// mask bitmap (row-major, LSB first, ceil(N*N/8) bytes), N*N float64 values.
inline constexpr char field_magic[9] = "GXRFLD01";

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host expected");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated field file");
    return v;
}

}  // namespace detail

inline void write_field(std::ostream& os, const GridField& f, std::uint64_t hash) {
    os.write(field_magic, 8);
    detail::put_le<std::int32_t>(os, f.N);
    detail::put_le<std::uint64_t>(os, hash);
    detail::put_le(os, f.x0);
    detail::put_le(os, f.y0);
    detail::put_le(os, f.cell);
    std::vector<std::uint8_t> bits((f.v.size() + 7) / 8, 0);
    for (std::size_t k = 0; k < f.mask.size(); ++k)
        if (f.mask[k]) bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    for (double v : f.v) detail::put_le(os, v);
}

inline GridField read_field(std::istream& is, std::uint64_t* hash = nullptr) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, field_magic, 8) != 0) throw Error("not a grid field file");
    GridField f;
    f.N = detail::get_le<std::int32_t>(is);
    if (f.N <= 0 || f.N > 1 << 14) throw Error("grid field: bad size");
    std::uint64_t h = detail::get_le<std::uint64_t>(is);
    if (hash) *hash = h;
    f.x0 = detail::get_le<double>(is);
    f.y0 = detail::get_le<double>(is);
    f.cell = detail::get_le<double>(is);
    std::size_t n = static_cast<std::size_t>(f.N) * f.N;
    std::vector<std::uint8_t> bits((n + 7) / 8);
    if (!is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) throw Error("truncated field file");
    f.mask.resize(n);
    for (std::size_t k = 0; k < n; ++k) f.mask[k] = (bits[k / 8] >> (k % 8)) & 1u;
    f.v.resize(n);
    for (auto& v : f.v) v = detail::get_le<double>(is);
    return f;
}

inline void save_field(const std::string& path, const GridField& f, std::uint64_t hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path);
    write_field(os, f, hash);
}

inline GridField load_field(const std::string& path, std::uint64_t* hash = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path);
    return read_field(is, hash);
}

inline void write_field_csv(std::ostream& os, const GridField& f) {
    os << "i,j,x,y,mask,value\n";
    for (int j = 0; j < f.N; ++j)
        for (int i = 0; i < f.N; ++i)
            os << i << ',' << j << ',' << fmt17(f.xc(i)) << ',' << fmt17(f.yc(j)) << ',' << int(f.inside(i, j)) << ','
               << fmt17(f.at(i, j)) << '\n';
}

struct PgmScale {
    double lo = 0, hi = 0;
};

// 8-bit preview, top row = largest y, linear min/max over the mask; cells outside the mask are 0
inline PgmScale write_field_pgm(std::ostream& os, const GridField& f) {
    PgmScale sc{INFINITY, -INFINITY};
    for (std::size_t k = 0; k < f.v.size(); ++k)
        if (f.mask[k] && std::isfinite(f.v[k])) {
            sc.lo = std::min(sc.lo, f.v[k]);
            sc.hi = std::max(sc.hi, f.v[k]);
        }
    if (!(sc.lo <= sc.hi)) sc = {0, 0};
    os << "P5\n" << f.N << ' ' << f.N << "\n255\n";
    double span = sc.hi > sc.lo ? sc.hi - sc.lo : 1.0;
    for (int j = f.N - 1; j >= 0; --j)
        for (int i = 0; i < f.N; ++i) {
            unsigned char px = 0;
            if (f.inside(i, j) && std::isfinite(f.at(i, j)))
                px = static_cast<unsigned char>(std::lround(255.0 * (f.at(i, j) - sc.lo) / span));
            os.put(static_cast<char>(px));
        }
    return sc;
}

inline void save_field_csv(const std::string& path, const GridField& f) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    write_field_csv(os, f);
}

// writes path and a sidecar path + ".scale" holding the min/max used for the gray levels
inline void save_field_pgm(const std::string& path, const GridField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path);
    PgmScale sc = write_field_pgm(os, f);
    std::ofstream side(path + ".scale");
    side << "min " << fmt17(sc.lo) << "\nmax " << fmt17(sc.hi) << "\n";
}

}  // namespace trapray
