#pragma once

// Command-line front end. Every run writes into its own directory:
//   config.json     copy of the input config
//   report.json     summaries, checks and the artifact manifest (deterministic)
//   metadata.json   timestamps and wall time
//   plot_data.json  labelled x-y series
//   *.csv           fields and curves
// Exit status: 0 all checks pass, 1 stage or check failure, 2 config error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fblab/diagnostics.hpp"
#include "fblab/flatten.hpp"
#include "fblab/freeboundary.hpp"
#include "fblab/io.hpp"
#include "fblab/pme.hpp"
#include "fblab/thinobstacle.hpp"

namespace fblab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kPass = 0, kFailure = 1, kConfigError = 2 };

struct Options {
    fs::path config;
    fs::path out;
    bool check = false;
    bool quiet = false;
    std::optional<int> resolution;
};

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    /// "<=" or ">=" or "==".
    std::string relation = "<=";
    bool pass = false;
};

inline Check check_le(std::string name, double value, double bound) {
    return {std::move(name), value, bound, "<=", value <= bound};
}
inline Check check_ge(std::string name, double value, double bound) {
    return {std::move(name), value, bound, ">=", value >= bound};
}
inline Check check_true(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok}; }

/// Collects the outputs of one run and writes the run directory.
class Run {
public:
    Run(std::string subcommand, fs::path out, bool write_fields)
        : subcommand_(std::move(subcommand)), out_(std::move(out)), write_fields_(write_fields) {
        fs::create_directories(out_);
        report_["subcommand"] = subcommand_;
        report_["summary"] = json::object();
        plot_["series"] = json::array();
    }

    json& report() { return report_; }
    json& summary() { return report_["summary"]; }

    void add_check(Check c) { checks_.push_back(std::move(c)); }
    const std::vector<Check>& checks() const { return checks_; }
    bool checks_pass() const {
        return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
    }

    /// Field artifacts are skipped in check mode; the report always lists
    /// what was written.
    void artifact(const std::string& name, const std::string& text, bool field = true) {
        if (field && !write_fields_) return;
        io::write_file(out_ / name, text);
        manifest_[name] = io::sha256_hex(text);
    }

    void series(const std::string& label, const std::vector<double>& x, const std::vector<double>& y,
                const std::string& xlabel, const std::string& ylabel) {
        plot_["series"].push_back({{"label", label}, {"xlabel", xlabel}, {"ylabel", ylabel}, {"x", x}, {"y", y}});
    }

    void note(const std::string& msg) { notes_.push_back(msg); }

    /// Writes report, plot data and metadata; returns the exit status.
    int finish(const std::string& status, double seconds) {
        json checks = json::array();
        for (const auto& c : checks_)
            checks.push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"relation", c.relation},
                              {"pass", c.pass}});
        report_["checks"] = checks;
        report_["status"] = status;
        report_["notes"] = notes_;
        const bool ok = status == "ok" && checks_pass();
        report_["pass"] = ok;
        const std::string plot = plot_.dump(1) + "\n";
        artifact("plot_data.json", plot, false);
        report_["artifacts"] = manifest_;
        io::write_file(out_ / "report.json", report_.dump(2) + "\n");
        const std::time_t now = std::time(nullptr);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        json meta = {{"timestamp", stamp}, {"wall_seconds", seconds}, {"subcommand", subcommand_}};
        io::write_file(out_ / "metadata.json", meta.dump(2) + "\n");
        return ok ? kPass : kFailure;
    }

private:
    std::string subcommand_;
    fs::path out_;
    bool write_fields_;
    json report_;
    json plot_;
    std::vector<Check> checks_;
    std::vector<std::string> notes_;
    std::map<std::string, std::string> manifest_;
};

inline json problem_identity(const json& cfg, int resolution) {
    json id = json::object();
    for (const char* k : {"geometry", "datum"})
        if (cfg.contains(k)) id[k] = cfg.at(k);
    id["resolution"] = resolution;
    return id;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int run_solve(const io::ConfigDocument& doc, const Options& opt, Run& run) {
    const io::Reader root(doc, doc.root, "");
    root.only({"subcommand", "geometry", "datum", "solver", "checks"});
    const GeometrySpec geom = io::geometry_from(root.child("geometry"));
    const Datum datum = io::datum_from(root.child("datum"));
    FreeBoundaryConfig cfg = root.has("solver") ? io::solver_from(root.child("solver")) : FreeBoundaryConfig{};
    if (opt.resolution) cfg.resolution = *opt.resolution;
    double max_res = 1e-2;
    bool need_conv = true, graph = true;
    if (root.has("checks")) {
        const io::Reader c = root.child("checks");
        c.only({"max_fb_residual", "require_converged", "graph_property"});
        max_res = c.number("max_fb_residual", max_res);
        need_conv = c.boolean("require_converged", need_conv);
        graph = c.boolean("graph_property", graph);
    }
    run.report()["problem_sha256"] = io::sha256_hex(problem_identity(doc.root, cfg.resolution).dump());

    const Solution s = solve_stationary(geom, datum, cfg);
    const Grid& g = s.u.grid();
    run.report()["grid"] = io::grid_json(g);
    auto& sm = run.summary();
    sm["converged"] = s.converged;
    sm["steps"] = s.steps;
    sm["elliptic_iterations"] = s.elliptic_iterations;
    sm["max_abs_residual_D"] = s.stats.max_abs_d;
    sm["min_residual_K"] = s.stats.min_k;
    sm["count_D"] = s.stats.count_d;
    sm["count_K"] = s.stats.count_k;
    sm["degenerate"] = s.stats.degenerate;
    sm["fb_points"] = s.fb.size();
    sm["components"] = s.fb.components;
    sm["message"] = s.message;
    if (need_conv) run.add_check(check_true("converged", s.converged));
    run.add_check(check_le("max |fb residual| on D", s.stats.max_abs_d, max_res));
    if (graph) {
        const RegionMask mask = classify_nodes(g, geom);
        const GraphReport gr = geom.A.is_identity()
                                   ? graph_property_check(s.u, geom.V, mask)
                                   : graph_property_check(s.u, mask, [&geom](Vec2 x) { return geom.A(x) * geom.V; });
        sm["graph_violations"] = gr.count();
        run.add_check(check_le("graph property violations", static_cast<double>(gr.count()), 0.0));
    }

    run.artifact("u.csv", io::field_csv(s.u));
    run.artifact("fb.csv", io::curve_csv(s.fb));
    std::string hist = "step,max_abs_residual,displacement_h\n";
    for (std::size_t k = 0; k < s.residual_history.size(); ++k)
        hist += std::to_string(k) + "," + io::num(s.residual_history[k]) + "," +
                io::num(k < s.displacement_history.size() ? s.displacement_history[k] : 0.0) + "\n";
    run.artifact("history.csv", hist);
    std::vector<double> fx, fy, step, res;
    for (const auto& p : s.fb.points) {
        fx.push_back(p.x.x);
        fy.push_back(p.x.y);
    }
    for (std::size_t k = 0; k < s.residual_history.size(); ++k) {
        step.push_back(static_cast<double>(k));
        res.push_back(s.residual_history[k]);
    }
    run.series("free boundary", fx, fy, "x1", "x2");
    run.series("fb residual history", step, res, "step", "max |residual|");
    return kPass;
}

// ---------------------------------------------------------------------------
// pme
// ---------------------------------------------------------------------------

inline fs::path resolve_relative(const io::ConfigDocument& doc, const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute() || doc.source == "<config>") return path;
    return fs::path(doc.source).parent_path() / path;
}

/// Positivity set of a solve run on the given grid.
inline ScalarField load_solution(const fs::path& dir, const Grid* expect = nullptr) {
    const json rep = json::parse(io::read_file(dir / "report.json"));
    const Grid g = io::grid_from_json(rep.at("grid"));
    if (expect && !(g == *expect)) throw ConfigError("invalid-config: reference grid does not match");
    return io::field_from_csv(io::read_file(dir / "u.csv"), g);
}

inline int run_pme(const io::ConfigDocument& doc, const Options& opt, Run& run) {
    const io::Reader root(doc, doc.root, "");
    root.only({"subcommand", "geometry", "datum", "pme", "solver", "reference", "checks"});
    const GeometrySpec geom = io::geometry_from(root.child("geometry"));
    const Datum datum = io::datum_from(root.child("datum"));
    const io::Reader pr = root.child("pme");
    PMEConfig cfg = io::pme_from(pr);
    if (opt.resolution) cfg.resolution = *opt.resolution;
    const std::vector<double> gammas = pr.has("gammas") ? pr.numbers("gammas") : std::vector<double>{5, 10, 20, 40};
    const double jitter = pr.number("jitter", 0.05);
    double band_h = 5.0;
    if (root.has("checks")) {
        const io::Reader c = root.child("checks");
        c.only({"support_band_h"});
        band_h = c.number("support_band_h", band_h);
    }
    run.report()["problem_sha256"] = io::sha256_hex(problem_identity(doc.root, cfg.resolution).dump());

    const PMEProblem problem(geom, datum, cfg);
    const Grid& g = problem.grid();
    run.report()["grid"] = io::grid_json(g);
    ScalarField ref;
    if (root.has("reference")) {
        ref = load_solution(resolve_relative(doc, root.string("reference")), &g);
    } else {
        FreeBoundaryConfig fc = root.has("solver") ? io::solver_from(root.child("solver")) : FreeBoundaryConfig{};
        fc.resolution = cfg.resolution;
        const Solution s = solve_stationary(geom, datum, fc);
        if (!(s.u.grid() == g)) throw ConfigError("invalid-config: solver and PME grids differ");
        run.summary()["reference_converged"] = s.converged;
        ref = s.u;
    }
    const SweepReport sw = gamma_sweep(geom, datum, cfg, gammas, ref, jitter);
    auto& sm = run.summary();
    sm["h"] = sw.h;
    sm["monotone"] = sw.monotone;
    sm["strictly_decreasing"] = sw.strictly_decreasing;
    sm["ab_bounded"] = sw.ab_bounded;
    json entries = json::array();
    std::string csv = "gamma,converged,steps,t,complementarity,support_area,support_distance,ab_min,error\n";
    std::vector<double> gx, comp;
    for (const auto& e : sw.entries) {
        entries.push_back({{"gamma", e.gamma},
                           {"converged", e.converged},
                           {"steps", e.steps},
                           {"t", e.t},
                           {"complementarity", e.complementarity},
                           {"support_area", e.support_area},
                           {"support_distance", e.support_distance},
                           {"ab_min", e.ab_min},
                           {"error", e.error}});
        csv += io::num(e.gamma) + "," + (e.converged ? "1" : "0") + "," + std::to_string(e.steps) + "," +
               io::num(e.t) + "," + io::num(e.complementarity) + "," + io::num(e.support_area) + "," +
               io::num(e.support_distance) + "," + io::num(e.ab_min) + "," + e.error + "\n";
        gx.push_back(e.gamma);
        comp.push_back(e.complementarity);
        run.add_check(check_true("gamma " + io::num(e.gamma) + " reached steady state", e.converged && e.error.empty()));
    }
    sm["entries"] = entries;
    run.add_check(check_true("complementarity strictly decreasing in gamma", sw.strictly_decreasing));
    if (!sw.entries.empty())
        run.add_check(check_le("support distance at largest gamma (h units)",
                               sw.entries.back().support_distance / sw.h, band_h));
    run.artifact("sweep.csv", csv);
    run.artifact("reference_u.csv", io::field_csv(ref));
    run.series("complementarity residual", gx, comp, "gamma", "mean |p Lap p|");
    return kPass;
}

// ---------------------------------------------------------------------------
// thin
// ---------------------------------------------------------------------------

inline int run_thin(const io::ConfigDocument& doc, const Options& opt, Run& run) {
    const io::Reader root(doc, doc.root, "");
    root.only({"subcommand", "thin", "checks"});
    ThinProblem p = io::thin_from(root.child("thin"));
    if (opt.resolution) p.resolution = *opt.resolution;
    double v_tol = 1e-6, sigma_tol = 1e-3, comp_tol = 1e-4, inner = 1.0, refl_tol = 1e-6, mp_tol = 1e-8;
    bool reflection = false, oracle = false;
    double oracle_tol = 5e-2;
    if (root.has("checks")) {
        const io::Reader c = root.child("checks");
        c.only({"v_tol", "sigma_tol", "comp_tol", "inner", "reflection", "reflection_tol", "max_principle_tol",
                "oracle_error"});
        v_tol = c.number("v_tol", v_tol);
        sigma_tol = c.number("sigma_tol", sigma_tol);
        comp_tol = c.number("comp_tol", comp_tol);
        inner = c.number("inner", inner);
        reflection = c.boolean("reflection", reflection);
        refl_tol = c.number("reflection_tol", refl_tol);
        mp_tol = c.number("max_principle_tol", mp_tol);
        if (c.has("oracle_error")) {
            oracle = true;
            oracle_tol = c.number("oracle_error");
        }
    }
    const ThinSolver solver(p);
    const ThinSolution s = solver.solve();
    const Grid& g = s.v.grid();
    run.report()["grid"] = io::grid_json(g);
    const ThinInvariants inv = check_invariants(s, v_tol, sigma_tol, comp_tol, inner);
    auto& sm = run.summary();
    sm["min_v"] = inv.min_v;
    sm["max_sigma"] = inv.max_sigma;
    sm["max_complementarity"] = inv.max_complementarity;
    sm["scale"] = inv.scale;
    sm["contact_nodes"] = std::count(s.contact.begin(), s.contact.end(), true);
    json stages = json::array();
    for (const auto& st : s.stages)
        stages.push_back({{"k", std::isinf(st.k) ? json("inf") : json(st.k)},
                          {"ell", st.ell},
                          {"active_iterations", st.active_iterations},
                          {"active_nodes", st.active_nodes}});
    sm["stages"] = stages;
    run.add_check(check_ge("min v on thin space", inv.min_v, -v_tol));
    run.add_check(check_le("max sigma_W", inv.max_sigma, sigma_tol));
    run.add_check(check_le("max |v sigma_W| / scale", inv.max_complementarity / std::max(inv.scale, 1e-300), comp_tol));

    // Unconstrained run: maximum principle.
    ThinProblem free = p;
    free.schedule = {{1.0, 0.0}};
    free.exact_final_stage = false;
    const ScalarField vfree = ThinSolver(free).solve_penalized(0.0, 0.0);
    const double mp = maximum_principle_excess(vfree, 0);
    sm["maximum_principle_excess"] = mp;
    run.add_check(check_le("maximum principle excess (unconstrained)", mp, mp_tol));
    if (reflection) {
        const double d = reflection_discrepancy(p, s);
        sm["reflection_discrepancy"] = d;
        run.add_check(check_le("reflection discrepancy", d, refl_tol));
    }
    if (oracle) {
        double err = 0.0;
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) err = std::max(err, std::abs(s.v(i, j) - p.datum(g.node(i, j))));
        sm["oracle_error"] = err;
        run.add_check(check_le("L-inf error against the datum extension", err, oracle_tol));
    }

    std::string csv = "x,v,sigma_W,contact\n";
    std::vector<double> tv, ts;
    for (std::size_t i = 0; i < s.thin_size(); ++i) {
        csv += io::num(s.thin_x[i]) + "," + io::num(s.thin_value(i)) + "," + io::num(s.sigma[i]) + "," +
               (s.contact[i] ? "1" : "0") + "\n";
        tv.push_back(s.thin_value(i));
        ts.push_back(s.sigma[i]);
    }
    run.artifact("thin.csv", csv);
    run.artifact("v.csv", io::field_csv(s.v));
    run.series("v on thin space", s.thin_x, tv, "x1", "v");
    run.series("sigma_W on thin space", s.thin_x, ts, "x1", "sigma_W");
    return kPass;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

inline int run_diagnose(const io::ConfigDocument& doc, const Options&, Run& run) {
    const io::Reader root(doc, doc.root, "");
    root.only({"subcommand", "input", "diagnostics"});
    const fs::path input = resolve_relative(doc, root.string("input"));
    for (const char* f : {"report.json", "u.csv", "config.json", "fb.csv"})
        if (!fs::exists(input / f)) {
            run.note("missing input: " + (input / f).string());
            run.summary()["missing_input"] = (input / f).string();
            return kFailure;
        }
    const io::ConfigDocument src = io::load_config(input / "config.json");
    const io::Reader sroot(src, src.root, "");
    const GeometrySpec geom = io::geometry_from(sroot.child("geometry"));
    const ScalarField u = load_solution(input);
    const Grid& g = u.grid();
    const double h = g.h();
    run.report()["grid"] = io::grid_json(g);
    const RegionMask mask = classify_nodes(g, geom);
    const FreeBoundaryCurve fb = extract_free_boundary(u, mask);

    static const json kEmpty = json::object();
    const io::Reader d = root.has("diagnostics") ? root.child("diagnostics") : io::Reader(doc, kEmpty, "diagnostics");
    d.only({"graph", "dichotomy", "decay", "c1alpha", "hodograph", "points"});
    auto& sm = run.summary();

    // Sample points: requested x1 positions snapped to the nearest regular
    // interior D point of the curve.
    std::vector<Vec2> pts;
    std::vector<Vec2> normals;
    if (d.has("points")) {
        for (double xs : d.numbers("points")) {
            std::optional<std::size_t> best;
            for (std::size_t m = 0; m < fb.size(); ++m) {
                const auto& p = fb.points[m];
                if (p.tag != FbTag::D || p.near_box || p.degenerate) continue;
                if (!best || std::abs(p.x.x - xs) < std::abs(fb.points[*best].x.x - xs)) best = m;
            }
            if (best) {
                pts.push_back(fb.points[*best].x);
                normals.push_back(fb.points[*best].normal);
            }
        }
    }

    if (d.boolean("graph", true)) {
        const GraphReport gr = graph_property_check(u, geom.V, mask);
        sm["graph_violations"] = gr.count();
        run.add_check(check_le("graph property violations", static_cast<double>(gr.count()), 0.0));
        std::string csv = "start_x,start_y,at_x,at_y\n";
        for (const auto& v : gr.violations)
            csv += io::num(v.start.x) + "," + io::num(v.start.y) + "," + io::num(v.at.x) + "," + io::num(v.at.y) + "\n";
        run.artifact("graph_violations.csv", csv);
    }
    if (d.boolean("dichotomy", !geom.obstacle.empty())) {
        const DichotomySummary ds = dichotomy_report(u, geom, mask, obstacle_boundary_points(mask));
        sm["dichotomy"] = {{"branching", ds.branching},
                           {"interior_contact", ds.interior},
                           {"vanishing", ds.vanishing},
                           {"contact_points", ds.contact},
                           {"consistent_fraction", ds.consistent_fraction()}};
        std::string csv = "x,beta,omega,tol,class,consistent\n";
        std::vector<double> bx, by;
        for (const auto& c : ds.points) {
            csv += io::num(c.x.x) + "," + io::num(c.beta) + "," + io::num(c.omega) + "," + io::num(c.tol) + "," +
                   to_string(c.type) + "," + (c.consistent ? "1" : "0") + "\n";
            bx.push_back(c.x.x);
            by.push_back(c.beta);
        }
        run.artifact("dichotomy.csv", csv);
        run.series("blow-up slope on the obstacle", bx, by, "x1", "beta");
        run.add_check(check_true("BRANCHING slopes within 10% of omega", ds.branching_all_within(0.1)));
        run.add_check(check_ge("dichotomy-consistent fraction", ds.consistent_fraction(), 0.95));
    }
    if (d.has("decay")) {
        const io::Reader dc = d.child("decay");
        dc.only({"r0", "eta", "levels", "max_ratio"});
        const double r0 = dc.number("r0", 0.25), eta = dc.number("eta", 0.5), bound = dc.number("max_ratio", 0.9);
        const int levels = dc.integer("levels", 8);
        json arr = json::array();
        std::string csv = "x0,y0,r,epsilon\n";
        for (std::size_t m = 0; m < pts.size(); ++m) {
            const Vec2 x = pts[m];
            const double rr = std::min({r0, x.x - g.origin().x, g.upper().x - x.x, x.y - g.origin().y, g.upper().y - x.y});
            const DecayCurve c = decay_curve(u, x, normals[m], geom.V, rr, eta, levels);
            arr.push_back({{"x", {x.x, x.y}}, {"max_ratio", c.max_ratio()}, {"exponent", c.exponent}, {"degenerate", c.degenerate}});
            std::vector<double> rs, es;
            for (const auto& s : c.samples) {
                csv += io::num(x.x) + "," + io::num(x.y) + "," + io::num(s.r) + "," + io::num(s.epsilon) + "\n";
                rs.push_back(s.r);
                es.push_back(s.epsilon);
            }
            run.series("flatness decay at (" + io::num(x.x) + ", " + io::num(x.y) + ")", rs, es, "r", "epsilon");
            run.add_check(check_le("flatness ratio at x1 = " + io::num(x.x), c.max_ratio(), bound));
        }
        sm["decay"] = arr;
        run.artifact("decay.csv", csv);
    }
    if (d.has("c1alpha")) {
        const io::Reader cr = d.child("c1alpha");
        cr.only({"window"});
        const double window = cr.number("window", 16.0 * h);
        json arr = json::array();
        for (const Vec2& x : pts) {
            const C1AlphaFit f = c1alpha_fit(fb, x, window, 2.0 * h);
            arr.push_back({{"x", {x.x, x.y}}, {"alpha", f.alpha}, {"C", f.C}, {"r2", f.r2}, {"status", f.status}});
        }
        sm["c1alpha"] = arr;
    }
    if (d.has("hodograph")) {
        const io::Reader hr = d.child("hodograph");
        hr.only({"window", "delta"});
        const double window = hr.number("window", 8.0 * h), delta = hr.number("delta", 0.1);
        json arr = json::array();
        for (const Vec2& x : pts) {
            const HodographResult r = hodograph_residual(u, x, window, geom.V, delta);
            arr.push_back({{"x", {x.x, x.y}}, {"interior", r.interior}, {"boundary", r.boundary},
                           {"window", r.window}, {"failed_columns", r.failed_columns}});
        }
        sm["hodograph"] = arr;
    }
    sm["sample_points"] = pts.size();
    return kPass;
}

// ---------------------------------------------------------------------------
// flatten-demo
// ---------------------------------------------------------------------------

inline int run_flatten(const io::ConfigDocument& doc, const Options& opt, Run& run) {
    const io::Reader root(doc, doc.root, "");
    root.only({"subcommand", "flatten"});
    const io::Reader f = root.child("flatten");
    f.only({"g", "radius", "resolution", "height", "V", "delta", "Pi0", "choose_eta0"});
    const Polynomial poly{f.numbers("g")};
    const double radius = f.number("radius", 1.0);
    int n = f.integer("resolution", 65);
    if (opt.resolution) n = *opt.resolution;
    if (n < 3) f.fail("resolution", "flatten.resolution must be >= 3");
    const double height = f.number("height", 1.0);
    const Vec2 V = f.vec2("V", {0.0, 1.0});
    const double delta = f.number("delta", 0.25), Pi0 = f.number("Pi0", 0.1);
    const double hh = 2.0 * radius / (n - 1);
    const Grid grid(n, static_cast<int>(std::ceil(height / hh - 1e-9)) + 1, hh, {-radius, 0.0});
    run.report()["grid"] = io::grid_json(grid);
    const FlatteningMap map{GraphFunction(poly), radius};
    const FlatProblemSpec spec = flatten_problem(map, grid, V, delta, Pi0);
    const FlatteningReport r = validate_flattening(spec);
    auto& sm = run.summary();
    for (const FlatteningCheck* c : {&r.a_minus_identity, &r.drift_defect, &r.nondegeneracy}) {
        sm[c->name] = {{"value", c->value}, {"bound", c->bound}, {"pass", c->pass}};
        run.add_check({c->name, c->value, c->bound, c == &r.nondegeneracy ? ">=" : "<=", c->pass});
    }
    sm["max_det_error"] = r.max_det_error;
    sm["spd"] = r.spd;
    run.add_check(check_le("max |det A - 1|", r.max_det_error, 1e-12));
    if (f.boolean("choose_eta0", false)) sm["eta0"] = choose_eta0(poly, radius, grid, V, delta, Pi0);
    run.artifact("flat_problem.json", to_json(spec).dump() + "\n");
    std::vector<double> xs, gs;
    for (int i = 0; i < grid.nx(); ++i) {
        const double x = grid.node(i, 0).x;
        xs.push_back(x);
        gs.push_back(map.g(x));
    }
    run.series("obstacle graph g", xs, gs, "x1", "g");
    return kPass;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct DiffEntry {
    std::string field;
    double a = 0.0;
    double b = 0.0;
    double tol = 0.0;
};

inline void flatten_numbers(const json& j, const std::string& prefix, std::map<std::string, double>& out) {
    if (j.is_number()) out[prefix] = j.get<double>();
    else if (j.is_boolean()) out[prefix] = j.get<bool>() ? 1.0 : 0.0;
    else if (j.is_object())
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten_numbers(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    else if (j.is_array())
        for (std::size_t k = 0; k < j.size(); ++k) flatten_numbers(j[k], prefix + "[" + std::to_string(k) + "]", out);
}

/// Field-by-field diff of two run reports. Same subcommand: numeric summary
/// fields differing by more than tol (relative to max(1, |a|, |b|)), with
/// per-field overrides. A pme run against a solve run on the same grid: the
/// support distance of every stored entry against the solve positivity set.
inline json compare_runs(const fs::path& a, const fs::path& b, double tol,
                         const std::map<std::string, double>& field_tol = {}) {
    const json ra = json::parse(io::read_file(a / "report.json"));
    const json rb = json::parse(io::read_file(b / "report.json"));
    const std::string sa = ra.at("subcommand"), sb = rb.at("subcommand");
    json out = {{"a", a.string()}, {"b", b.string()}, {"diff", json::array()}};
    if (sa == sb) {
        if (ra.value("problem_sha256", "") != rb.value("problem_sha256", "") ||
            ra.value("grid", json()) != rb.value("grid", json()))
            throw ConfigError("schema-mismatch: runs solve different problems");
        std::map<std::string, double> fa, fb;
        flatten_numbers(ra.at("summary"), "", fa);
        flatten_numbers(rb.at("summary"), "", fb);
        for (const auto& [k, v] : fa) {
            if (!fb.count(k)) throw ConfigError("schema-mismatch: field " + k + " missing in " + b.string());
        }
        for (const auto& [k, v] : fb)
            if (!fa.count(k)) throw ConfigError("schema-mismatch: field " + k + " missing in " + a.string());
        for (const auto& [k, va] : fa) {
            const double vb = fb.at(k);
            const double t = field_tol.count(k) ? field_tol.at(k) : tol;
            const bool same = (std::isnan(va) && std::isnan(vb)) || va == vb ||
                              std::abs(va - vb) <= t * std::max({1.0, std::abs(va), std::abs(vb)});
            if (!same) out["diff"].push_back({{"field", k}, {"a", va}, {"b", vb}, {"tol", t}});
        }
        return out;
    }
    if ((sa == "pme" && sb == "solve") || (sa == "solve" && sb == "pme")) {
        const fs::path pme = sa == "pme" ? a : b, sol = sa == "pme" ? b : a;
        const json rp = sa == "pme" ? ra : rb, rs = sa == "pme" ? rb : ra;
        if (rp.value("problem_sha256", "") != rs.value("problem_sha256", "") || rp.at("grid") != rs.at("grid"))
            throw ConfigError("schema-mismatch: pme and solve runs use different geometries");
        const Grid g = io::grid_from_json(rs.at("grid"));
        const ScalarField us = load_solution(sol);
        const ScalarField ur = io::field_from_csv(io::read_file(pme / "reference_u.csv"), g);
        std::vector<bool> sa_set(g.size()), sb_set(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            sa_set[k] = us[k] > 0.0;
            sb_set[k] = ur[k] > 0.0;
        }
        out["reference_distance_h"] = node_set_distance(g, sa_set, sb_set) / g.h();
        json entries = json::array();
        for (const auto& e : rp.at("summary").at("entries"))
            entries.push_back({{"gamma", e.at("gamma")}, {"support_distance_h", e.at("support_distance").get<double>() / g.h()}});
        out["support_distance"] = entries;
        return out;
    }
    throw ConfigError("schema-mismatch: cannot compare " + sa + " with " + sb);
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

using Stage = std::function<int(const io::ConfigDocument&, const Options&, Run&)>;

inline int run_stage(const std::string& sub, const Stage& stage, const Options& opt, std::ostream& err) {
    io::ConfigDocument doc;
    try {
        doc = io::load_config(opt.config);
        if (doc.root.contains("subcommand") && doc.root.at("subcommand") != sub)
            doc.fail("subcommand", "config is for \"" + doc.root.at("subcommand").dump() + "\", not \"" + sub + "\"");
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << opt.config.string() << ":1: " << e.what() << "\n";
        return kConfigError;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    Run run(sub, opt.out, !opt.check);
    io::write_file(opt.out / "config.json", doc.text);
    run.report()["config_sha256"] = io::sha256_hex(doc.root.dump());
    int code = kPass;
    std::string status = "ok";
    try {
        code = stage(doc, opt, run);
        if (code != kPass) status = "stage-failure";
    } catch (const io::SchemaError& e) {
        err << e.what() << "\n";
        run.note(e.what());
        run.finish("config-error", elapsed());
        return kConfigError;
    } catch (const ConfigError& e) {
        err << opt.config.string() << ":1: " << e.what() << "\n";
        run.note(e.what());
        run.finish("config-error", elapsed());
        return kConfigError;
    } catch (const std::exception& e) {
        err << "stage failure: " << e.what() << "\n";
        run.note(std::string("stage failure: ") + e.what());
        status = "stage-failure";
    }
    const int fin = run.finish(status, elapsed());
    if (!opt.quiet) {
        for (const auto& c : run.checks())
            err << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << io::num(c.value) << " " << c.relation << " "
                << io::num(c.bound) << "\n";
        err << sub << ": " << (fin == kPass ? "pass" : "fail") << " (" << opt.out.string() << ")\n";
    }
    return fin;
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"fblab: numerical lab for the obstacle-constrained one-phase free boundary problem"};
    app.require_subcommand(1);
    Options opt;
    int resolution = 0;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", opt.config, "JSON config")->required();
        s->add_option("--out", opt.out, "run directory")->required();
        s->add_flag("--check", opt.check, "exit-status mode: report only, no field artifacts");
        s->add_flag("--quiet", opt.quiet, "no console summary");
        s->add_option("--resolution", resolution, "override the grid resolution")->check(CLI::Range(3, 100000));
    };
    const std::vector<std::pair<std::string, Stage>> stages = {
        {"solve", run_solve}, {"pme", run_pme}, {"thin", run_thin}, {"diagnose", run_diagnose},
        {"flatten-demo", run_flatten}};
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, fn] : stages) subs[name] = app.add_subcommand(name, "run the " + name + " stage");
    for (auto& [name, s] : subs) add_common(s);
    CLI::App* cmp = app.add_subcommand("compare", "diff two run directories");
    fs::path ra, rb;
    double tol = 1e-9;
    std::vector<std::string> field_tols;
    cmp->add_option("run_a", ra, "first run directory")->required();
    cmp->add_option("run_b", rb, "second run directory")->required();
    cmp->add_option("--tol", tol, "relative tolerance for numeric fields");
    cmp->add_option("--field-tol", field_tols, "per-field tolerance as name=value");
    cmp->add_option("--out", opt.out, "write the diff to this file");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kPass : kConfigError;
    }
    if (resolution > 0) opt.resolution = resolution;
    if (cmp->parsed()) {
        try {
            std::map<std::string, double> ft;
            for (const auto& s : field_tols) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ConfigError("invalid-config: --field-tol expects name=value");
                ft[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
            }
            const json d = compare_runs(ra, rb, tol, ft);
            const std::string text = d.dump(2) + "\n";
            if (!opt.out.empty()) io::write_file(opt.out, text);
            else out << text;
            return d.contains("diff") && !d.at("diff").empty() ? kFailure : kPass;
        } catch (const ConfigError& e) {
            err << e.what() << "\n";
            return kConfigError;
        } catch (const std::exception& e) {
            err << e.what() << "\n";
            return kFailure;
        }
    }
    for (const auto& [name, fn] : stages)
        if (subs[name]->parsed()) return run_stage(name, fn, opt, err);
    return kConfigError;
}

}  // namespace fblab::cli
