#pragma once

// Porous medium equation in the frame moving with the far-field velocity:
//   dn/dt = div(n grad p) - V . grad n,   p = n^gamma,
// explicit in time, conservative flux form for the diffusion and upwind
// differences for the drift. As gamma grows the pressure is expected to
// approach the stationary free-boundary solution; the sweep below measures
// how close it gets.

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "fblab/core.hpp"
#include "fblab/freeboundary.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

struct PMEConfig {
    int resolution = 65;
    /// Fraction of the explicit stability bound used for dt.
    double dt_safety = 0.9;
    double n_cap = 1.5;
    /// Steady state once max |n_{k+1} - n_k| / dt < tol.
    double tol = 1e-3;
    int max_steps = 5'000'000;
    double max_time = 20.0;
    /// Stationarity is tested every check_every steps.
    int check_every = 200;
    /// Support of p: p > support_threshold * max p.
    double support_threshold = 1e-4;

    void validate() const {
        if (resolution < 3) throw ConfigError("invalid-config: resolution must be >= 3");
        if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw ConfigError("invalid-config: dt_safety must lie in (0, 1]");
        if (!(n_cap >= 1.0)) throw ConfigError("invalid-config: n_cap must be >= 1");
        if (!(tol > 0.0)) throw ConfigError("invalid-config: tol must be positive");
        if (max_steps < 1) throw ConfigError("invalid-config: max_steps must be >= 1");
        if (!(max_time > 0.0)) throw ConfigError("invalid-config: max_time must be positive");
        if (check_every < 1) throw ConfigError("invalid-config: check_every must be >= 1");
        if (!(support_threshold > 0.0 && support_threshold < 1.0))
            throw ConfigError("invalid-config: support_threshold must lie in (0, 1)");
    }
};

struct PMEState {
    ScalarField n;
    double gamma = 2.0;
    double t = 0.0;
    long steps = 0;
};

inline ScalarField pressure(const ScalarField& n, double gamma) {
    ScalarField p(n.grid());
    for (std::size_t k = 0; k < n.size(); ++k) p[k] = n[k] > 0.0 ? std::pow(n[k], gamma) : 0.0;
    return p;
}

/// Discrete L1 norm of p * Lap_h p over interior nodes divided by their area.
inline double complementarity_residual(const ScalarField& p) {
    const Grid& g = p.grid();
    const double h = g.h();
    double sum = 0.0;
    std::size_t count = 0;
    for (int j = 1; j + 1 < g.ny(); ++j)
        for (int i = 1; i + 1 < g.nx(); ++i) {
            const double lap = (p(i + 1, j) + p(i - 1, j) + p(i, j + 1) + p(i, j - 1) - 4.0 * p(i, j)) / (h * h);
            sum += std::abs(p(i, j) * lap);
            ++count;
        }
    return count ? sum / static_cast<double>(count) : 0.0;
}

/// min over interior nodes of gamma * t * Lap_h p.
inline double aronson_benilan_diagnostic(const ScalarField& p, double gamma, double t) {
    if (!(t > 0.0)) throw PreconditionError("aronson_benilan_diagnostic requires t > 0");
    const Grid& g = p.grid();
    const double h = g.h();
    double m = std::numeric_limits<double>::infinity();
    for (int j = 1; j + 1 < g.ny(); ++j)
        for (int i = 1; i + 1 < g.nx(); ++i) {
            const double lap = (p(i + 1, j) + p(i - 1, j) + p(i, j + 1) + p(i, j - 1) - 4.0 * p(i, j)) / (h * h);
            m = std::min(m, gamma * t * lap);
        }
    return m;
}

/// Grid, node roles and neighbor tables for one PME geometry. Without a
/// datum the box walls are no-flux; otherwise n = datum^(1/gamma) is imposed
/// on box-boundary nodes.
class PMEProblem {
public:
    PMEProblem(GeometrySpec geom, Datum datum, PMEConfig cfg)
        : geom_(std::move(geom)), datum_(std::move(datum)), cfg_(cfg) {
        cfg_.validate();
        geom_.validate();
        if (!geom_.A.is_identity()) throw ConfigError("invalid-config: the PME module requires A = I");
        grid_ = build_grid(geom_.box, cfg_.resolution);
        mask_ = classify_nodes(grid_, geom_);
        nb_.assign(grid_.size(), {-1, -1, -1, -1});
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (!evolves(k) && !pinned(k)) continue;
            const NodeIndex n = grid_.unindex(k);
            for (std::size_t d = 0; d < 4; ++d) {
                const int ii = n.i + kAxisDirs[d][0], jj = n.j + kAxisDirs[d][1];
                if (!grid_.contains(ii, jj)) continue;
                const std::size_t kk = grid_.index(ii, jj);
                if (mask_[kk] == Region::Exterior) continue;
                nb_[k][d] = static_cast<long>(kk);
            }
            if (evolves(k)) active_.push_back(k);
        }
    }

    const Grid& grid() const { return grid_; }
    const RegionMask& mask() const { return mask_; }
    const GeometrySpec& geometry() const { return geom_; }
    const PMEConfig& config() const { return cfg_; }
    bool no_flux() const { return !datum_; }

    PMEState initial_state(double gamma) const {
        if (!(gamma > 1.0)) throw ConfigError("invalid-config: gamma must be > 1");
        PMEState s{ScalarField(grid_, 0.0), gamma, 0.0, 0};
        apply_boundary(s.n, gamma);
        return s;
    }

    /// Largest dt meeting both the diffusion and the drift bound, scaled by
    /// dt_safety.
    double stable_dt(const ScalarField& n, double gamma) const {
        const double h = grid_.h();
        double pmax = 0.0;
        for (std::size_t k = 0; k < n.size(); ++k) pmax = std::max(pmax, n[k] > 0.0 ? std::pow(n[k], gamma) : 0.0);
        const double diff = 4.0 * gamma * pmax / (h * h);
        const double drift = (std::abs(geom_.V.x) + std::abs(geom_.V.y)) / h;
        const double rate = diff + drift;
        return rate > 0.0 ? cfg_.dt_safety / rate : cfg_.dt_safety * h;
    }

    /// One explicit step. Throws StepError when dt exceeds h^2 / (4 max gamma n^gamma)
    /// or h / |V|.
    PMEState step(const PMEState& s, double dt) const {
        std::vector<double> p(grid_.size());
        double pmax = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            p[k] = s.n[k] > 0.0 ? std::pow(s.n[k], s.gamma) : 0.0;
            pmax = std::max(pmax, p[k]);
        }
        check_dt(dt, s.gamma * pmax);
        PMEState next{s.n, s.gamma, s.t + dt, s.steps + 1};
        advance(s.n, p, dt, next.n);
        return next;
    }

    struct SteadyResult {
        PMEState state;
        ScalarField p;
        bool converged = false;
        double rate = std::numeric_limits<double>::infinity();
        std::vector<double> rate_history;
        std::string message;
    };

    /// Marches until max |dn/dt| < tol, max_steps or max_time.
    SteadyResult steady_state(double gamma) const {
        SteadyResult r;
        PMEState s = initial_state(gamma);
        ScalarField next(grid_, 0.0);
        std::vector<double> p(grid_.size());
        const double h = grid_.h();
        const double drift = (std::abs(geom_.V.x) + std::abs(geom_.V.y)) / h;
        while (s.steps < cfg_.max_steps && s.t < cfg_.max_time) {
            double pmax = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) {
                p[k] = s.n[k] > 0.0 ? std::pow(s.n[k], gamma) : 0.0;
                pmax = std::max(pmax, p[k]);
            }
            const double rate = 4.0 * gamma * pmax / (h * h) + drift;
            const double dt = rate > 0.0 ? cfg_.dt_safety / rate : cfg_.dt_safety * h;
            next.values() = s.n.values();
            advance(s.n, p, dt, next);
            ++s.steps;
            s.t += dt;
            if (s.steps % cfg_.check_every == 0) {
                double m = 0.0;
                for (std::size_t k : active_) m = std::max(m, std::abs(next[k] - s.n[k]));
                r.rate = m / dt;
                r.rate_history.push_back(r.rate);
                if (r.rate < cfg_.tol) {
                    std::swap(s.n, next);
                    r.converged = true;
                    break;
                }
            }
            std::swap(s.n, next);
        }
        if (!r.converged) r.message = "PME run did not reach a steady state";
        r.p = pressure(s.n, gamma);
        r.state = std::move(s);
        return r;
    }

    /// Support of p as a node mask.
    std::vector<bool> support(const ScalarField& p) const {
        const double thr = cfg_.support_threshold * p.max();
        std::vector<bool> out(grid_.size(), false);
        for (std::size_t k = 0; k < grid_.size(); ++k) out[k] = mask_[k] != Region::Exterior && p[k] > thr && p[k] > 0.0;
        return out;
    }

private:
    bool pinned(std::size_t k) const { return !no_flux() && mask_[k] == Region::BoxBoundary; }
    bool evolves(std::size_t k) const {
        const Region r = mask_[k];
        if (r == Region::Accessible) return true;
        return r == Region::BoxBoundary && no_flux();
    }

    void check_dt(double dt, double diffusivity) const {
        const double h = grid_.h();
        if (!(dt > 0.0)) throw StepError("PME step must be positive");
        if (diffusivity > 0.0 && dt > h * h / (4.0 * diffusivity) * (1.0 + 1e-12))
            throw StepError("PME step exceeds the diffusion bound h^2 / (4 max gamma n^gamma)");
        const double vn = norm(geom_.V);
        if (vn > 0.0 && dt > h / vn * (1.0 + 1e-12)) throw StepError("PME step exceeds the drift bound h / |V|");
    }

    void apply_boundary(ScalarField& n, double gamma) const {
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            const Region r = mask_[k];
            if (r == Region::Exterior || r == Region::Obstacle) n[k] = 0.0;
            else if (pinned(k)) n[k] = std::min(std::pow(std::max(datum_(grid_.node(grid_.unindex(k))), 0.0), 1.0 / gamma), cfg_.n_cap);
        }
    }

    void advance(const ScalarField& n, const std::vector<double>& p, double dt, ScalarField& out) const {
        const double h = grid_.h();
        const double c = dt / (h * h);
        const Vec2 V = geom_.V;
        for (std::size_t k : active_) {
            const auto& nb = nb_[k];
            double flux = 0.0;
            for (std::size_t d = 0; d < 4; ++d) {
                if (nb[d] < 0) continue;
                const auto kk = static_cast<std::size_t>(nb[d]);
                flux += 0.5 * (n[k] + n[kk]) * (p[kk] - p[k]);
            }
            // Upwind for n_t + V . grad n = 0; a missing neighbor carries no inflow.
            auto side = [&](long m) { return m < 0 ? n[k] : n[static_cast<std::size_t>(m)]; };
            const double dx = V.x > 0.0 ? n[k] - side(nb[1]) : side(nb[0]) - n[k];
            const double dy = V.y > 0.0 ? n[k] - side(nb[3]) : side(nb[2]) - n[k];
            const double v = n[k] + c * flux - dt / h * (V.x * dx + V.y * dy);
            out[k] = std::clamp(v, 0.0, cfg_.n_cap);
        }
    }

    GeometrySpec geom_;
    Datum datum_;
    PMEConfig cfg_;
    Grid grid_;
    RegionMask mask_;
    std::vector<std::array<long, 4>> nb_;
    std::vector<std::size_t> active_;
};

inline PMEState step_moving_frame(const PMEProblem& problem, const PMEState& s, double dt) {
    return problem.step(s, dt);
}

inline PMEProblem::SteadyResult steady_state(const GeometrySpec& geom, const Datum& datum, const PMEConfig& cfg,
                                             double gamma) {
    return PMEProblem(geom, datum, cfg).steady_state(gamma);
}

/// Hausdorff distance between two node sets on the same grid (physical
/// units); infinity when exactly one of them is empty.
inline double node_set_distance(const Grid& g, const std::vector<bool>& a, const std::vector<bool>& b) {
    std::vector<Vec2> pa, pb;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (a[k]) pa.push_back(g.node(g.unindex(k)));
        if (b[k]) pb.push_back(g.node(g.unindex(k)));
    }
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return std::numeric_limits<double>::infinity();
    auto one_way = [&](const std::vector<bool>& from, const std::vector<Vec2>& to) {
        double worst = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (!from[k] || (&from == &a ? b[k] : a[k])) continue;
            const Vec2 x = g.node(g.unindex(k));
            double best = std::numeric_limits<double>::infinity();
            for (const Vec2& y : to) best = std::min(best, norm2(x - y));
            worst = std::max(worst, std::sqrt(best));
        }
        return worst;
    };
    return std::max(one_way(a, pb), one_way(b, pa));
}

struct SweepEntry {
    double gamma = 0.0;
    bool converged = false;
    long steps = 0;
    double t = 0.0;
    double complementarity = 0.0;
    double support_area = 0.0;
    /// Distance between supp p and the reference positivity set, physical units.
    double support_distance = 0.0;
    double ab_min = 0.0;
    std::string error;
};

struct SweepReport {
    std::vector<SweepEntry> entries;
    double h = 0.0;
    /// Complementarity residual non-increasing in gamma up to the jitter allowance.
    bool monotone = false;
    /// Strictly decreasing up to the jitter allowance.
    bool strictly_decreasing = false;
    /// All Aronson-Benilan minima finite and above -bound.
    bool ab_bounded = false;
};

/// Runs one steady state per gamma (in parallel) and compares each support
/// with the positivity set of the reference solution, which must live on the
/// same grid. jitter is the relative slack in the monotonicity tests.
inline SweepReport gamma_sweep(const GeometrySpec& geom, const Datum& datum, const PMEConfig& cfg,
                               const std::vector<double>& gammas, const ScalarField& reference_u,
                               double jitter = 0.05, double ab_bound = 1e3) {
    if (gammas.empty()) throw ConfigError("invalid-config: gamma list is empty");
    for (std::size_t m = 0; m < gammas.size(); ++m) {
        if (!(gammas[m] > 1.0)) throw ConfigError("invalid-config: every gamma must be > 1");
        if (m > 0 && !(gammas[m] > gammas[m - 1])) throw ConfigError("invalid-config: gammas must be increasing");
    }
    const PMEProblem problem(geom, datum, cfg);
    if (!(reference_u.grid() == problem.grid()))
        throw ConfigError("invalid-config: reference solution grid does not match the PME geometry");
    std::vector<bool> omega(problem.grid().size(), false);
    for (std::size_t k = 0; k < omega.size(); ++k) omega[k] = reference_u[k] > 0.0;

    std::vector<std::future<SweepEntry>> jobs;
    for (double gamma : gammas) {
        jobs.push_back(std::async(std::launch::async, [&problem, &omega, gamma] {
            SweepEntry e;
            e.gamma = gamma;
            try {
                const auto r = problem.steady_state(gamma);
                const Grid& g = problem.grid();
                e.converged = r.converged;
                e.steps = r.state.steps;
                e.t = r.state.t;
                e.complementarity = complementarity_residual(r.p);
                const std::vector<bool> supp = problem.support(r.p);
                e.support_area = static_cast<double>(std::count(supp.begin(), supp.end(), true)) * g.h() * g.h();
                e.support_distance = node_set_distance(g, supp, omega);
                e.ab_min = r.state.t > 0.0 ? aronson_benilan_diagnostic(r.p, gamma, r.state.t) : 0.0;
                if (!r.converged) e.error = r.message;
            } catch (const std::exception& ex) {
                e.error = ex.what();
            }
            return e;
        }));
    }
    SweepReport rep;
    rep.h = problem.grid().h();
    for (auto& j : jobs) rep.entries.push_back(j.get());
    rep.monotone = rep.strictly_decreasing = rep.ab_bounded = true;
    for (std::size_t m = 0; m < rep.entries.size(); ++m) {
        const auto& e = rep.entries[m];
        if (!e.error.empty() && !e.converged) rep.ab_bounded = false;
        if (!(std::isfinite(e.ab_min) && e.ab_min >= -ab_bound)) rep.ab_bounded = false;
        if (m == 0) continue;
        const double prev = rep.entries[m - 1].complementarity;
        if (e.complementarity > prev * (1.0 + jitter)) rep.monotone = false;
        if (!(e.complementarity < prev * (1.0 + jitter)) || e.complementarity == prev) rep.strictly_decreasing = false;
    }
    return rep;
}

}  // namespace fblab
