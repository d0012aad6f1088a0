#pragma once

// JSON configuration parsing, CSV writers and SHA-256 digests.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fblab/core.hpp"
#include "fblab/freeboundary.hpp"
#include "fblab/geometry.hpp"
#include "fblab/pme.hpp"
#include "fblab/thinobstacle.hpp"

namespace fblab::io {

using nlohmann::json;

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(hex[md[k] >> 4]);
        out.push_back(hex[md[k] & 15]);
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

/// Shortest round-trip representation.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Schema error carrying the line of the offending key in the source text.
class SchemaError : public ConfigError {
public:
    SchemaError(const std::string& what, int line) : ConfigError(what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Parsed config with its source text, for line-anchored messages.
struct ConfigDocument {
    json root;
    std::string text;
    std::string source = "<config>";

    int line_of(const std::string& key) const {
        const std::string quoted = "\"" + key + "\"";
        const std::size_t pos = text.find(quoted);
        if (pos == std::string::npos) return 1;
        return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    }
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const int line = line_of(key);
        throw SchemaError(source + ":" + std::to_string(line) + ": invalid-config: " + msg, line);
    }
};

inline ConfigDocument parse_config(const std::string& text, const std::string& source = "<config>") {
    ConfigDocument d;
    d.text = text;
    d.source = source;
    try {
        d.root = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw SchemaError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), line);
    }
    if (!d.root.is_object()) throw SchemaError(source + ":1: invalid-config: top level must be an object", 1);
    return d;
}

inline ConfigDocument load_config(const std::filesystem::path& p) { return parse_config(read_file(p), p.string()); }

// ---------------------------------------------------------------------------
// Typed field access
// ---------------------------------------------------------------------------

class Reader {
public:
    Reader(const ConfigDocument& doc, const json& node, std::string path) : doc_(doc), node_(node), path_(std::move(path)) {
        if (!node_.is_object()) doc_.fail(leaf(), path_ + " must be an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }
    Reader child(const std::string& key) const {
        if (!has(key)) doc_.fail(leaf(), "missing block " + qualified(key));
        return Reader(doc_, node_.at(key), qualified(key));
    }
    const json& raw(const std::string& key) const {
        if (!has(key)) doc_.fail(leaf(), "missing field " + qualified(key));
        return node_.at(key);
    }

    double number(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_number()) doc_.fail(key, qualified(key) + " must be a number");
        return v.get<double>();
    }
    double number(const std::string& key, double def) const { return has(key) ? number(key) : def; }
    int integer(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_number_integer()) doc_.fail(key, qualified(key) + " must be an integer");
        return v.get<int>();
    }
    int integer(const std::string& key, int def) const { return has(key) ? integer(key) : def; }
    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) return def;
        const json& v = raw(key);
        if (!v.is_boolean()) doc_.fail(key, qualified(key) + " must be true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_string()) doc_.fail(key, qualified(key) + " must be a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& def) const { return has(key) ? string(key) : def; }
    std::vector<double> numbers(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_array()) doc_.fail(key, qualified(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) doc_.fail(key, qualified(key) + " must be an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    Vec2 vec2(const std::string& key) const {
        const auto v = numbers(key);
        if (v.size() != 2) doc_.fail(key, qualified(key) + " must have two entries");
        return {v[0], v[1]};
    }
    Vec2 vec2(const std::string& key, Vec2 def) const { return has(key) ? vec2(key) : def; }

    /// Rejects keys outside the allowed list.
    void only(std::initializer_list<const char*> keys) const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) doc_.fail(it.key(), "unknown field " + qualified(it.key()));
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const { doc_.fail(key, msg); }
    const std::string& path() const { return path_; }
    const json& node() const { return node_; }
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string leaf() const {
        const auto p = path_.rfind('.');
        return p == std::string::npos ? path_ : path_.substr(p + 1);
    }
    const ConfigDocument& doc_;
    const json& node_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Geometry and data
// ---------------------------------------------------------------------------

inline BoxShape box_from(const Reader& r) {
    r.only({"type", "lo", "hi", "center", "radius"});
    const std::string type = r.string("type");
    try {
        if (type == "rectangle") return BoxShape(Rectangle{r.vec2("lo"), r.vec2("hi")});
        if (type == "disk") return BoxShape(Disk{r.vec2("center"), r.number("radius")});
    } catch (const SchemaError&) {
        throw;
    } catch (const ConfigError& e) {
        r.fail("type", e.what());
    }
    r.fail("type", "box.type must be \"rectangle\" or \"disk\"");
}

inline Obstacle obstacle_from(const Reader& r) {
    r.only({"type", "coeffs", "center", "radius"});
    const std::string type = r.string("type");
    if (type == "none") return Obstacle(NoObstacle{});
    if (type == "flat") return Obstacle::flat();
    if (type == "polynomial") return Obstacle(GraphObstacle{Polynomial{r.numbers("coeffs")}});
    if (type == "disk") return Obstacle(DiskObstacle{r.vec2("center"), r.number("radius")});
    r.fail("type", "obstacle.type must be one of none, flat, polynomial, disk");
}

inline Mat2 matrix_from(const Reader& r, const std::string& key) {
    const auto v = r.numbers(key);
    if (v.size() != 3) r.fail(key, r.qualified(key) + " must be [a11, a12, a22]");
    return {v[0], v[1], v[2]};
}

inline GeometrySpec geometry_from(const Reader& r) {
    r.only({"box", "obstacle", "V", "A", "delta"});
    GeometrySpec g;
    if (r.has("box")) g.box = box_from(r.child("box"));
    g.obstacle = r.has("obstacle") ? obstacle_from(r.child("obstacle")) : Obstacle(NoObstacle{});
    g.V = r.vec2("V", g.V);
    if (r.has("A")) {
        const Mat2 a = matrix_from(r, "A");
        if (!a.positive_definite()) r.fail("A", "geometry.A must be symmetric positive definite");
        g.A = Coefficient(a);
    }
    g.delta = r.number("delta", g.delta);
    try {
        g.validate();
    } catch (const Error& e) {
        r.fail("geometry", e.what());
    }
    return g;
}

/// Boundary data:
///   plane:    slope * (x . n - offset)^+, n normalized
///   bump:     slope * (y - level - amplitude cos(2 pi frequency x))^+
///   ramp:     s(x) (y - lift(x))^+ with s linear from slope[0] at x0 to
///             slope[1] at x1 and lift(x) = lift * max(0, (lift_end - x) / (lift_end - x0))
///   signorini: Re((x_1 + i x_2^+)^{3/2})
///   quadratic: c0 + cx x + cy y + cq (x^2 - y^2)
inline Datum datum_from(const Reader& r) {
    const std::string type = r.string("type");
    if (type == "plane") {
        r.only({"type", "normal", "offset", "slope"});
        const Vec2 n = r.vec2("normal", {0.0, 1.0});
        if (!(norm(n) > 0.0)) r.fail("normal", "datum.normal must be nonzero");
        const Vec2 nu = normalized(n);
        const double d = r.number("offset", 0.0), c = r.number("slope", 1.0);
        return [nu, d, c](Vec2 p) { return std::max(c * (dot(p, nu) - d), 0.0); };
    }
    if (type == "bump") {
        r.only({"type", "slope", "level", "amplitude", "frequency"});
        const double c = r.number("slope", 1.0), l = r.number("level", 0.5), a = r.number("amplitude", 0.1),
                     f = r.number("frequency", 1.0);
        return [c, l, a, f](Vec2 p) { return std::max(c * (p.y - l - a * std::cos(2.0 * M_PI * f * p.x)), 0.0); };
    }
    if (type == "ramp") {
        r.only({"type", "x0", "x1", "slope", "lift", "lift_end"});
        const double x0 = r.number("x0"), x1 = r.number("x1");
        if (!(x1 > x0)) r.fail("x1", "datum.x1 must exceed datum.x0");
        const auto s = r.numbers("slope");
        if (s.size() != 2) r.fail("slope", "datum.slope must be [left, right]");
        const double lift = r.number("lift", 0.0), le = r.number("lift_end", x0);
        return [=](Vec2 p) {
            const double t = (p.x - x0) / (x1 - x0);
            const double sl = s[0] + (s[1] - s[0]) * t;
            const double ht = le > x0 ? lift * std::max(0.0, (le - p.x) / (le - x0)) : 0.0;
            return std::max(sl * (p.y - ht), 0.0);
        };
    }
    if (type == "signorini") {
        r.only({"type"});
        return [](Vec2 p) { return std::pow(std::complex<double>(p.x, std::max(p.y, 0.0)), 1.5).real(); };
    }
    if (type == "quadratic") {
        r.only({"type", "c0", "cx", "cy", "cq"});
        const double c0 = r.number("c0", 0.0), cx = r.number("cx", 0.0), cy = r.number("cy", 0.0),
                     cq = r.number("cq", 0.0);
        return [=](Vec2 p) { return c0 + cx * p.x + cy * p.y + cq * (p.x * p.x - p.y * p.y); };
    }
    r.fail("type", "datum.type must be one of plane, bump, ramp, signorini, quadratic");
}

inline SolveConfig elliptic_from(const Reader& r) {
    r.only({"tolerance", "max_iterations", "relaxation"});
    SolveConfig c;
    c.tolerance = r.number("tolerance", c.tolerance);
    c.max_iterations = r.integer("max_iterations", c.max_iterations);
    c.relaxation = r.number("relaxation", c.relaxation);
    return c;
}

inline FreeBoundaryConfig solver_from(const Reader& r) {
    r.only({"resolution", "max_steps", "cfl", "reinit_every", "band", "fb_tol", "displacement_tol", "stable_steps",
            "coarse_levels", "gradient_floor", "fit_radius", "elliptic"});
    FreeBoundaryConfig c;
    c.resolution = r.integer("resolution", c.resolution);
    c.max_steps = r.integer("max_steps", c.max_steps);
    c.cfl = r.number("cfl", c.cfl);
    c.reinit_every = r.integer("reinit_every", c.reinit_every);
    c.band = r.number("band", c.band);
    c.fb_tol = r.number("fb_tol", c.fb_tol);
    c.displacement_tol = r.number("displacement_tol", c.displacement_tol);
    c.stable_steps = r.integer("stable_steps", c.stable_steps);
    c.coarse_levels = r.integer("coarse_levels", c.coarse_levels);
    c.extract.gradient_floor = r.number("gradient_floor", c.extract.gradient_floor);
    c.extract.fit_radius = r.number("fit_radius", c.extract.fit_radius);
    if (r.has("elliptic")) c.elliptic = elliptic_from(r.child("elliptic"));
    try {
        c.validate();
    } catch (const ConfigError& e) {
        r.fail("solver", e.what());
    }
    return c;
}

inline PMEConfig pme_from(const Reader& r) {
    r.only({"resolution", "dt_safety", "n_cap", "tol", "max_steps", "max_time", "check_every", "support_threshold",
            "gammas", "jitter"});
    PMEConfig c;
    c.resolution = r.integer("resolution", c.resolution);
    c.dt_safety = r.number("dt_safety", c.dt_safety);
    c.n_cap = r.number("n_cap", c.n_cap);
    c.tol = r.number("tol", c.tol);
    c.max_steps = r.integer("max_steps", c.max_steps);
    c.max_time = r.number("max_time", c.max_time);
    c.check_every = r.integer("check_every", c.check_every);
    c.support_threshold = r.number("support_threshold", c.support_threshold);
    try {
        c.validate();
    } catch (const ConfigError& e) {
        r.fail("pme", e.what());
    }
    return c;
}

inline ThinProblem thin_from(const Reader& r) {
    r.only({"box", "resolution", "W", "delta", "datum", "schedule", "exact_final_stage", "max_active_iterations",
            "elliptic"});
    ThinProblem p;
    if (r.has("box")) {
        const Reader b = r.child("box");
        b.only({"lo", "hi"});
        p.box = Rectangle{b.vec2("lo"), b.vec2("hi")};
    }
    p.resolution = r.integer("resolution", p.resolution);
    p.W = r.vec2("W", p.W);
    p.delta = r.number("delta", p.delta);
    p.datum = datum_from(r.child("datum"));
    if (r.has("schedule")) {
        const json& s = r.raw("schedule");
        if (!s.is_array()) r.fail("schedule", "thin.schedule must be an array of [k, ell] pairs");
        p.schedule.clear();
        for (const auto& e : s) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                r.fail("schedule", "thin.schedule must be an array of [k, ell] pairs");
            p.schedule.push_back({e[0].get<double>(), e[1].get<double>()});
        }
    }
    p.exact_final_stage = r.boolean("exact_final_stage", p.exact_final_stage);
    p.max_active_iterations = r.integer("max_active_iterations", p.max_active_iterations);
    if (r.has("elliptic")) p.elliptic = elliptic_from(r.child("elliptic"));
    try {
        p.validate();
    } catch (const ConfigError& e) {
        r.fail("thin", e.what());
    }
    return p;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Node field as i,j,x,y,value rows; nodes where keep(k) is false are skipped.
template <class Keep>
std::string field_csv(const ScalarField& f, Keep&& keep) {
    const Grid& g = f.grid();
    std::string out = "i,j,x,y,value\n";
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            if (!keep(k)) continue;
            const Vec2 x = g.node(i, j);
            out += std::to_string(i) + "," + std::to_string(j) + "," + num(x.x) + "," + num(x.y) + "," + num(f[k]) + "\n";
        }
    return out;
}

inline std::string field_csv(const ScalarField& f) {
    return field_csv(f, [](std::size_t) { return true; });
}

/// Reads a field written by field_csv back onto a known grid; missing nodes
/// are zero.
inline ScalarField field_from_csv(const std::string& text, const Grid& g) {
    ScalarField f(g);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("i,j,", 0) != 0) throw ConfigError("invalid-config: not a field CSV");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int i = 0, j = 0;
        double x = 0.0, y = 0.0, v = 0.0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &i, &j, &x, &y, &v) != 5 || !g.contains(i, j))
            throw ConfigError("invalid-config: malformed field CSV row: " + line);
        f(i, j) = v;
    }
    return f;
}

inline std::string curve_csv(const FreeBoundaryCurve& fb) {
    std::string out = "x,y,nx,ny,grad_norm,residual,tag,degenerate,near_box,component\n";
    for (const auto& p : fb.points)
        out += num(p.x.x) + "," + num(p.x.y) + "," + num(p.normal.x) + "," + num(p.normal.y) + "," +
               num(p.grad_norm) + "," + num(p.residual) + "," + (p.tag == FbTag::D ? "D" : "K") + "," +
               (p.degenerate ? "1" : "0") + "," + (p.near_box ? "1" : "0") + "," + std::to_string(p.component) + "\n";
    return out;
}

inline json grid_json(const Grid& g) {
    return {{"nx", g.nx()}, {"ny", g.ny()}, {"h", g.h()}, {"origin", {g.origin().x, g.origin().y}}};
}

inline Grid grid_from_json(const json& j) {
    return Grid(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("h").get<double>(),
                Vec2{j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()});
}

}  // namespace fblab::io
