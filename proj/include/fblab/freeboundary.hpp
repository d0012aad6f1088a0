#pragma once

// Stationary obstacle-constrained one-phase problem
//   div(A grad u) = 0 in {u > 0} cap D,  |grad u|^2 = grad u . V on the free
//   boundary inside D,  |grad u|^2 >= grad u . V where it touches K,
// solved by a trial free boundary: the positivity set is a level set {phi > 0}
// moved with normal speed s = |grad u| - V . nu until the front is stationary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fblab/core.hpp"
#include "fblab/elliptic.hpp"
#include "fblab/geometry.hpp"
#include "fblab/levelset.hpp"

namespace fblab {

using Datum = std::function<double(Vec2)>;

enum class FbTag : std::uint8_t { D, K };

struct FreeBoundaryPoint {
    Vec2 x;
    Vec2 grad;
    Vec2 normal;
    double grad_norm = 0.0;
    double residual = std::numeric_limits<double>::quiet_NaN();
    FbTag tag = FbTag::D;
    bool degenerate = false;
    /// Within the fit radius of the box boundary, where the free-boundary condition is not
    /// imposed.
    bool near_box = false;
    int component = 0;
};

struct FreeBoundaryCurve {
    std::vector<FreeBoundaryPoint> points;
    int components = 0;
    double gradient_floor = 0.0;

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
    std::size_t degenerate_count() const {
        return static_cast<std::size_t>(
            std::count_if(points.begin(), points.end(), [](const auto& p) { return p.degenerate; }));
    }
};

/// Gradient of u at a point on (or within a fraction of h of) the free
/// boundary, from a least-squares quadratic fit
///   u(x + d) = c + g . d + d^T H d / 2
/// over positive nodes within radius. Falls back to an affine fit when the
/// quadratic system is ill-conditioned.
inline Vec2 front_gradient(const ScalarField& u, Vec2 x, double radius) {
    const Grid& g = u.grid();
    const double h = g.h();
    const int reach = static_cast<int>(std::ceil(radius / h));
    const int ic = static_cast<int>(std::lround((x.x - g.origin().x) / h));
    const int jc = static_cast<int>(std::lround((x.y - g.origin().y) / h));
    std::vector<std::array<double, 3>> pts;
    pts.reserve(32);
    for (int j = std::max(0, jc - reach); j <= std::min(g.ny() - 1, jc + reach); ++j)
        for (int i = std::max(0, ic - reach); i <= std::min(g.nx() - 1, ic + reach); ++i) {
            const double v = u(i, j);
            if (!(v > 0.0)) continue;
            const Vec2 d = (g.node(i, j) - x) / h;
            if (norm(d) > radius / h) continue;
            pts.push_back({d.x, d.y, v});
        }
    const int n = static_cast<int>(pts.size());
    auto fit = [&](int cols) -> std::optional<Vec2> {
        if (n < cols + 1) return std::nullopt;
        Eigen::MatrixXd M(n, cols);
        Eigen::VectorXd b(n);
        for (int r = 0; r < n; ++r) {
            const auto& p = pts[static_cast<std::size_t>(r)];
            M(r, 0) = 1.0;
            M(r, 1) = p[0];
            M(r, 2) = p[1];
            if (cols == 6) {
                M(r, 3) = 0.5 * p[0] * p[0];
                M(r, 4) = p[0] * p[1];
                M(r, 5) = 0.5 * p[1] * p[1];
            }
            b(r) = p[2];
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (!(sv(cols - 1) > 1e-3 * sv(0))) return std::nullopt;
        const Eigen::VectorXd c = svd.solve(b);
        return Vec2{c(1) / h, c(2) / h};
    };
    if (auto q = fit(6)) return *q;
    if (auto l = fit(3)) return *l;
    if (n >= 1) {
        // Too few samples for a fit: secant through the vanishing point.
        Vec2 acc{};
        for (const auto& p : pts) {
            const Vec2 d{p[0], p[1]};
            acc += d * (p[2] / (norm2(d) * h));
        }
        return acc / static_cast<double>(n);
    }
    return {};
}

struct ExtractOptions {
    /// Gradient floor as a multiple of h.
    double gradient_floor = 10.0;
    /// Least-squares fit radius as a multiple of h.
    double fit_radius = 3.0;
};

namespace detail {

/// Orders points into polylines by greedy nearest-neighbor chaining grown
/// from both ends; a gap wider than max_gap starts a new component.
inline int chain_points(std::vector<FreeBoundaryPoint>& pts, double max_gap) {
    const std::size_t n = pts.size();
    std::vector<bool> used(n, false);
    std::vector<FreeBoundaryPoint> out;
    out.reserve(n);
    int comp = 0;
    auto nearest = [&](Vec2 x) {
        std::size_t best = n;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m) {
            if (used[m]) continue;
            const double d = norm(pts[m].x - x);
            if (d < bd) {
                bd = d;
                best = m;
            }
        }
        return std::pair<std::size_t, double>{best, bd};
    };
    while (out.size() < n) {
        std::size_t start = n;
        for (std::size_t m = 0; m < n; ++m) {
            if (used[m]) continue;
            if (start == n || pts[m].x.x < pts[start].x.x ||
                (pts[m].x.x == pts[start].x.x && pts[m].x.y < pts[start].x.y))
                start = m;
        }
        std::vector<std::size_t> chain{start};
        used[start] = true;
        bool grow_back = true, grow_front = true;
        while (grow_back || grow_front) {
            if (grow_back) {
                const auto [m, d] = nearest(pts[chain.back()].x);
                if (m < n && d <= max_gap) {
                    used[m] = true;
                    chain.push_back(m);
                } else {
                    grow_back = false;
                }
            } else {
                const auto [m, d] = nearest(pts[chain.front()].x);
                if (m < n && d <= max_gap) {
                    used[m] = true;
                    chain.insert(chain.begin(), m);
                } else {
                    grow_front = false;
                }
            }
        }
        for (std::size_t m : chain) {
            out.push_back(pts[m]);
            out.back().component = comp;
        }
        ++comp;
    }
    pts = std::move(out);
    return comp;
}

}  // namespace detail

/// Zero crossings of u along grid edges from a positive node P to a zero
/// node Z with at least one ACCESSIBLE endpoint. The crossing uses one-sided
/// linear extrapolation from P and the next node inward, clamped to [P, Z].
inline FreeBoundaryCurve extract_free_boundary(const ScalarField& u, const RegionMask& mask, ExtractOptions opt = {}) {
    const Grid& g = u.grid();
    if (!(g == mask.grid())) throw ConfigError("field grid does not match the mask");
    const double h = g.h();
    FreeBoundaryCurve fb;
    fb.gradient_floor = opt.gradient_floor * h;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t kp = g.index(i, j);
            if (!(u[kp] > 0.0)) continue;
            for (int dir = 0; dir < 4; ++dir) {
                const int di = kAxisDirs[static_cast<std::size_t>(dir)][0];
                const int dj = kAxisDirs[static_cast<std::size_t>(dir)][1];
                if (!g.contains(i + di, j + dj)) continue;
                const std::size_t kz = g.index(i + di, j + dj);
                if (u[kz] != 0.0) continue;
                if (mask[kp] != Region::Accessible && mask[kz] != Region::Accessible) continue;
                if (mask[kz] == Region::Exterior) continue;
                double t = 1.0;
                if (g.contains(i - di, j - dj)) {
                    const double up = u(i - di, j - dj);
                    if (up > u[kp]) t = std::clamp(u[kp] / (up - u[kp]), 0.0, 1.0);
                }
                FreeBoundaryPoint p;
                p.x = g.node(i, j) + Vec2{static_cast<double>(di), static_cast<double>(dj)} * (t * h);
                const double lvl = (1.0 - t) * mask.obstacle_level(kp) + t * mask.obstacle_level(kz);
                p.tag = std::abs(lvl) <= h * (1.0 + 1e-9) || mask[kz] == Region::Obstacle ? FbTag::K : FbTag::D;
                const double bl = (1.0 - t) * mask.box_level(kp) + t * mask.box_level(kz);
                p.near_box = bl >= -opt.fit_radius * h * (1.0 + 1e-9);
                p.grad = front_gradient(u, p.x, opt.fit_radius * h);
                p.grad_norm = norm(p.grad);
                p.degenerate = p.grad_norm < fb.gradient_floor;
                p.normal = p.degenerate ? Vec2{} : p.grad / p.grad_norm;
                fb.points.push_back(p);
            }
        }
    }
    fb.components = detail::chain_points(fb.points, 3.0 * h);
    return fb;
}

/// Variant without geometry: every node counts as accessible.
inline FreeBoundaryCurve extract_free_boundary(const ScalarField& u, ExtractOptions opt = {}) {
    const Grid& g = u.grid();
    std::vector<double> far(g.size(), std::numeric_limits<double>::max());
    std::vector<double> box(g.size(), -std::numeric_limits<double>::max());
    RegionMask mask(g, std::vector<Region>(g.size(), Region::Accessible), box, far);
    return extract_free_boundary(u, mask, opt);
}

/// residual_i = |grad u(x_i)|^2 - grad u(x_i) . V (also stored on the curve).
inline std::vector<double> fb_residual(const ScalarField& u, FreeBoundaryCurve& fb, Vec2 V) {
    (void)u;
    std::vector<double> r;
    r.reserve(fb.size());
    for (auto& p : fb.points) {
        p.residual = norm2(p.grad) - dot(p.grad, V);
        r.push_back(p.residual);
    }
    return r;
}

struct ResidualStats {
    double max_abs_d = 0.0;
    double min_k = 0.0;
    std::size_t count_d = 0;
    std::size_t count_k = 0;
    std::size_t degenerate = 0;
    std::size_t near_box = 0;
};

inline ResidualStats residual_stats(const FreeBoundaryCurve& fb) {
    ResidualStats s;
    s.min_k = std::numeric_limits<double>::infinity();
    for (const auto& p : fb.points) {
        if (p.degenerate) {
            ++s.degenerate;
            continue;
        }
        if (p.near_box) {
            ++s.near_box;
            continue;
        }
        if (p.tag == FbTag::D) {
            ++s.count_d;
            s.max_abs_d = std::max(s.max_abs_d, std::abs(p.residual));
        } else {
            ++s.count_k;
            s.min_k = std::min(s.min_k, p.residual);
        }
    }
    if (s.count_k == 0) s.min_k = 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Supersolution algebra
// ---------------------------------------------------------------------------

inline ScalarField inf_supersolutions(const ScalarField& w1, const ScalarField& w2) {
    if (!(w1.grid() == w2.grid()) || w1.size() != w2.size()) throw ConfigError("supersolution fields differ in shape");
    ScalarField out(w1.grid());
    for (std::size_t k = 0; k < w1.size(); ++k) out[k] = std::min(w1[k], w2[k]);
    return out;
}

/// Discrete harmonic function in {w > 0} cap D equal to w on the rest of the
/// grid (box-boundary nodes, zero set, obstacle). Edges into the zero set are
/// cut where the linear extrapolation of w from the positive side vanishes.
inline ScalarField harmonic_replacement(const ScalarField& w, const GeometrySpec& geom, const SolveConfig& cfg = {}) {
    const Grid& g = w.grid();
    const RegionMask mask = classify_nodes(g, geom);
    const MatrixField A = MatrixField::sample(g, geom.A);
    SystemBuilder b(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (mask[k] == Region::Exterior) continue;
        const NodeIndex n = g.unindex(k);
        const bool edge = n.i == 0 || n.j == 0 || n.i == g.nx() - 1 || n.j == g.ny() - 1;
        bool next_to_exterior = false;
        for (const auto& d : kAxisDirs)
            if (g.contains(n.i + d[0], n.j + d[1]) && mask(n.i + d[0], n.j + d[1]) == Region::Exterior)
                next_to_exterior = true;
        if (w[k] > 0.0 && mask[k] != Region::Obstacle && !mask.on_box_boundary(k) && !edge && !next_to_exterior)
            b.set_unknown(k);
        else
            b.set_fixed(k, w[k]);
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (b.role(k) != NodeRole::Unknown) continue;
        const NodeIndex n = g.unindex(k);
        for (int dir = 0; dir < 4; ++dir) {
            const int di = kAxisDirs[static_cast<std::size_t>(dir)][0];
            const int dj = kAxisDirs[static_cast<std::size_t>(dir)][1];
            if (w(n.i + di, n.j + dj) != 0.0 || mask(n.i + di, n.j + dj) == Region::Obstacle) continue;
            const double inner = w(n.i - di, n.j - dj);
            if (!(inner > w[k])) continue;
            const double t = w[k] / (inner - w[k]);
            if (t < 1.0) b.add_cut(k, dir, std::max(t, SystemBuilder::kMinTheta), 0.0);
        }
    }
    const LinearSystem sys = b.build(A);
    std::vector<double> u = b.initial(w.values());
    sys.solve(u, cfg);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (mask[k] == Region::Exterior) u[k] = w[k];
    return ScalarField(g, std::move(u));
}

// ---------------------------------------------------------------------------
// Trial free-boundary iteration
// ---------------------------------------------------------------------------

struct FreeBoundaryConfig {
    int resolution = 129;
    int max_steps = 20000;
    double cfl = 0.5;
    int reinit_every = 20;
    /// Reinitialization / extension band, multiple of h.
    double band = 16.0;
    double fb_tol = 5e-3;
    /// Displacement threshold per step, multiple of h.
    double displacement_tol = 0.01;
    int stable_steps = 10;
    /// Number of coarser grids (resolution halved each time) whose converged
    /// front seeds the finer one. 0 starts from the harmonic majorant.
    int coarse_levels = 0;
    ExtractOptions extract{};
    SolveConfig elliptic{};

    void validate() const {
        if (resolution < 3) throw ConfigError("invalid-config: resolution must be >= 3");
        if (max_steps < 1) throw ConfigError("invalid-config: max_steps must be >= 1");
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("invalid-config: cfl must lie in (0, 1]");
        if (reinit_every < 1) throw ConfigError("invalid-config: reinit_every must be >= 1");
        if (!(band >= 2.0)) throw ConfigError("invalid-config: band must be >= 2");
        if (!(fb_tol > 0.0)) throw ConfigError("invalid-config: fb_tol must be positive");
        if (!(displacement_tol > 0.0)) throw ConfigError("invalid-config: displacement_tol must be positive");
        if (stable_steps < 1) throw ConfigError("invalid-config: stable_steps must be >= 1");
        if (coarse_levels < 0) throw ConfigError("invalid-config: coarse_levels must be >= 0");
        elliptic.validate();
    }
};

struct TrialState {
    ScalarField u;
    ScalarField phi;
    int iteration = 0;
    /// Largest front displacement of the last step, in grid units.
    double displacement = std::numeric_limits<double>::infinity();
    double max_speed = 0.0;
    double dt = 0.0;
    int degenerate = 0;
    int elliptic_iterations = 0;
};

struct Solution {
    ScalarField u;
    ScalarField phi;
    ScalarField H;
    FreeBoundaryCurve fb;
    bool converged = false;
    int steps = 0;
    ResidualStats stats;
    std::vector<double> residual_history;
    std::vector<double> displacement_history;
    long elliptic_iterations = 0;
    std::string message;
};

/// Geometry, datum and discretization of one stationary problem. Holds the
/// immutable grid data shared by all steps.
class TrialProblem {
public:
    TrialProblem(GeometrySpec geom, Datum datum, FreeBoundaryConfig cfg)
        : geom_(std::move(geom)), datum_(std::move(datum)), cfg_(cfg) {
        cfg_.validate();
        geom_.validate();
        grid_ = build_grid(geom_.box, cfg_.resolution);
        mask_ = classify_nodes(grid_, geom_);
        A_ = MatrixField::sample(grid_, geom_.A);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (mask_[k] == Region::Exterior) continue;
            const double v = datum_(grid_.node(grid_.unindex(k)));
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("datum must be finite and nonnegative");
        }
    }

    const GeometrySpec& geometry() const { return geom_; }
    const Grid& grid() const { return grid_; }
    const RegionMask& mask() const { return mask_; }
    const MatrixField& coefficients() const { return A_; }
    const FreeBoundaryConfig& config() const { return cfg_; }
    double datum(Vec2 x) const { return datum_(x); }

    /// Nodes where u may be positive: inside D and not pinned by the box.
    bool in_d(std::size_t k) const {
        const Region r = mask_[k];
        return (r == Region::Accessible || r == Region::BoxBoundary) && !mask_.on_box_boundary(k);
    }

    /// Harmonic majorant: datum on the box boundary, 0 on K.
    ScalarField harmonic_majorant(SolveStats* stats = nullptr) const {
        ScalarField open(grid_, std::numeric_limits<double>::max());
        return solve_u(open, ScalarField(grid_, 0.0), stats);
    }

    /// Solves for u in {phi > 0} cap D with datum on the box, 0 on the front
    /// and on K. The guess warm-starts the iteration.
    ScalarField solve_u(const ScalarField& phi, const ScalarField& guess, SolveStats* stats = nullptr) const {
        const double h = grid_.h();
        SystemBuilder b(grid_);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            const Region r = mask_[k];
            if (r == Region::Exterior) continue;
            if (r == Region::Obstacle) b.set_fixed(k, 0.0);
            else if (mask_.on_box_boundary(k)) b.set_fixed(k, datum_(grid_.node(grid_.unindex(k))));
            else if (phi[k] > 0.0) b.set_unknown(k);
            else b.set_fixed(k, 0.0);
        }
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (b.role(k) != NodeRole::Unknown) continue;
            const NodeIndex n = grid_.unindex(k);
            const Vec2 x = grid_.node(n);
            for (int dir = 0; dir < 4; ++dir) {
                const int ii = n.i + kAxisDirs[static_cast<std::size_t>(dir)][0];
                const int jj = n.j + kAxisDirs[static_cast<std::size_t>(dir)][1];
                const Vec2 e{static_cast<double>(kAxisDirs[static_cast<std::size_t>(dir)][0]),
                             static_cast<double>(kAxisDirs[static_cast<std::size_t>(dir)][1])};
                const std::size_t kk = grid_.index(ii, jj);
                const Region rr = mask_[kk];
                if (rr == Region::Exterior) {
                    const double t = crossing_fraction(mask_.box_level(k), mask_.box_level(kk));
                    b.add_cut(k, dir, t, datum_(x + e * (t * h)));
                    continue;
                }
                if (mask_.on_box_boundary(kk)) continue;
                double t = 1.0;
                bool cut = false;
                if (rr == Region::Obstacle) {
                    t = crossing_fraction(mask_.obstacle_level(k), mask_.obstacle_level(kk));
                    cut = true;
                }
                if (!(phi[kk] > 0.0)) {
                    t = std::min(t, crossing_fraction(phi[k], phi[kk]));
                    cut = true;
                }
                if (cut && t < 1.0) b.add_cut(k, dir, t, 0.0);
            }
        }
        const LinearSystem sys = b.build(A_);
        std::vector<double> u = b.initial(guess.values());
        const SolveStats st = sys.solve(u, cfg_.elliptic);
        if (stats) *stats = st;
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (mask_[k] == Region::Exterior) u[k] = 0.0;
            else u[k] = std::max(u[k], 0.0);
        }
        return ScalarField(grid_, std::move(u));
    }

    /// Initial trial state: Omega^0 = {H > 0}, phi^0 the redistanced H.
    TrialState initial_state(const ScalarField& H) const {
        ScalarField phi(grid_, 0.0);
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            const Region r = mask_[k];
            if (r == Region::Exterior) phi[k] = -cfg_.band * grid_.h();
            else if (r == Region::Obstacle) phi[k] = 0.0;
            else if (mask_.on_box_boundary(k)) phi[k] = datum_(grid_.node(grid_.unindex(k)));
            else phi[k] = H[k];
        }
        return state_from_phi(std::move(phi), H);
    }

    TrialState state_from_phi(ScalarField phi, const ScalarField& guess) const {
        reinitialize(phi);
        TrialState s;
        SolveStats st;
        s.u = solve_u(phi, guess, &st);
        s.elliptic_iterations = st.iterations;
        s.phi = std::move(phi);
        return s;
    }

    void reinitialize(ScalarField& phi) const {
        const double band = cfg_.band * grid_.h();
        redistance(phi, band, [this](std::size_t k) { return mask_[k] == Region::Exterior; });
        clamp_obstacle(phi);
    }

    void clamp_obstacle(ScalarField& phi) const {
        for (std::size_t k = 0; k < grid_.size(); ++k)
            if (mask_[k] == Region::Obstacle) phi[k] = std::min(phi[k], 0.0);
    }

    struct FrontSpeeds {
        std::vector<FrontSample> samples;
        std::vector<bool> clamped;
        double max_speed = 0.0;
        int degenerate = 0;
    };

    /// Normal speed at every zero crossing of phi along grid edges.
    FrontSpeeds front_speeds(const TrialState& s) const {
        FrontSpeeds out;
        const Grid& g = grid_;
        const double h = g.h();
        const double floor = cfg_.extract.gradient_floor * h;
        const Vec2 V = geom_.V;
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                const std::size_t k = g.index(i, j);
                if (mask_[k] == Region::Exterior) continue;
                for (int dir : {0, 2}) {
                    const int ii = i + kAxisDirs[static_cast<std::size_t>(dir)][0];
                    const int jj = j + kAxisDirs[static_cast<std::size_t>(dir)][1];
                    if (!g.contains(ii, jj)) continue;
                    const std::size_t kk = g.index(ii, jj);
                    if (mask_[kk] == Region::Exterior) continue;
                    const bool pk = s.phi[k] > 0.0, pkk = s.phi[kk] > 0.0;
                    if (pk == pkk) continue;
                    const std::size_t kin = pk ? k : kk;
                    const std::size_t kout = pk ? kk : k;
                    const double t = crossing_t(s.phi[kin], s.phi[kout]);
                    const Vec2 xin = g.node(g.unindex(kin)), xout = g.node(g.unindex(kout));
                    const Vec2 x = xin + (xout - xin) * t;
                    const Vec2 nu = normalized(level_gradient(s.phi, kin, kout, t));
                    double gn = normal_slope(s.u, x, nu);
                    if (!(gn >= 0.0)) gn = norm(front_gradient(s.u, x, cfg_.extract.fit_radius * h));
                    if (gn < floor) ++out.degenerate;
                    const double speed = gn - dot(V, nu);
                    const double lvl = (1.0 - t) * mask_.obstacle_level(kin) + t * mask_.obstacle_level(kout);
                    const bool at_k = lvl <= h * (1.0 + 1e-9);
                    const double bl = (1.0 - t) * mask_.box_level(kin) + t * mask_.box_level(kout);
                    const bool at_box = bl >= -h * (1.0 + 1e-9);
                    out.samples.push_back({x, speed});
                    out.clamped.push_back((at_k && speed > 0.0) || at_box);
                    out.max_speed = std::max(out.max_speed, std::abs(speed));
                }
            }
        }
        return out;
    }

    double stable_dt(double max_speed) const {
        const double h = grid_.h();
        double dt = std::numeric_limits<double>::infinity();
        if (max_speed > 0.0) dt = cfg_.cfl * h / max_speed;
        const double vn = norm(geom_.V);
        if (vn > 0.0) dt = std::min(dt, cfg_.cfl * h / vn);
        if (!std::isfinite(dt)) dt = cfg_.cfl * h;
        return dt;
    }

    /// One pseudo-time step of the front followed by the harmonic re-solve.
    TrialState advance_front(const TrialState& s, double dt) const {
        const FrontSpeeds fs = front_speeds(s);
        return advance_with(s, fs, dt);
    }

    TrialState advance_with(const TrialState& s, const FrontSpeeds& fs, double dt) const {
        const double h = grid_.h();
        if (!(dt > 0.0)) throw StepError("pseudo-time step must be positive");
        if (dt * fs.max_speed > h * (1.0 + 1e-12)) throw StepError("CFL bound violated: dt exceeds h / max speed");
        const std::vector<double> speed = extend_speed(grid_, fs.samples, cfg_.band * h);
        TrialState next;
        next.phi = s.phi;
        advect(next.phi, speed, dt);
        clamp_obstacle(next.phi);
        next.iteration = s.iteration + 1;
        if (next.iteration % cfg_.reinit_every == 0) reinitialize(next.phi);
        double disp = 0.0;
        for (std::size_t m = 0; m < fs.samples.size(); ++m)
            if (!fs.clamped[m]) disp = std::max(disp, std::abs(fs.samples[m].speed) * dt / h);
        next.displacement = disp;
        next.max_speed = fs.max_speed;
        next.dt = dt;
        next.degenerate = fs.degenerate;
        SolveStats st;
        next.u = solve_u(next.phi, s.u, &st);
        next.elliptic_iterations = st.iterations;
        return next;
    }

    FreeBoundaryCurve free_boundary(const ScalarField& u) const {
        FreeBoundaryCurve fb = extract_free_boundary(u, mask_, cfg_.extract);
        fb_residual(u, fb, geom_.V);
        return fb;
    }

    /// Runs the iteration to convergence or max_steps.
    Solution solve(const ScalarField* initial_phi = nullptr) const {
        Solution sol;
        SolveStats hs;
        sol.H = harmonic_majorant(&hs);
        sol.elliptic_iterations += hs.iterations;
        TrialState s = initial_phi ? state_from_phi(*initial_phi, sol.H) : initial_state(sol.H);
        sol.elliptic_iterations += s.elliptic_iterations;
        int calm = 0;
        for (int step = 0; step < cfg_.max_steps; ++step) {
            const FrontSpeeds fs = front_speeds(s);
            const double dt = stable_dt(fs.max_speed);
            s = advance_with(s, fs, dt);
            sol.elliptic_iterations += s.elliptic_iterations;
            sol.displacement_history.push_back(s.displacement);
            calm = s.displacement < cfg_.displacement_tol ? calm + 1 : 0;
            if (calm >= cfg_.stable_steps) {
                FreeBoundaryCurve fb = free_boundary(s.u);
                const ResidualStats rs = residual_stats(fb);
                sol.residual_history.push_back(rs.max_abs_d);
                if (rs.max_abs_d <= cfg_.fb_tol && rs.min_k >= -cfg_.fb_tol) {
                    sol.converged = true;
                    sol.fb = std::move(fb);
                    sol.stats = rs;
                    break;
                }
            } else if (step % 50 == 0) {
                FreeBoundaryCurve fb = free_boundary(s.u);
                sol.residual_history.push_back(residual_stats(fb).max_abs_d);
            }
        }
        sol.steps = s.iteration;
        if (!sol.converged) {
            sol.fb = free_boundary(s.u);
            sol.stats = residual_stats(sol.fb);
            sol.message = "front did not become stationary within max_steps";
        }
        sol.u = std::move(s.u);
        sol.phi = std::move(s.phi);
        return sol;
    }

private:
    /// Slope of u along the inward normal nu at the front point x, from u at
    /// distances 2h and 3h (u = a s + b s^2). Negative when unavailable.
    double normal_slope(const ScalarField& u, Vec2 x, Vec2 nu) const {
        const double h = grid_.h();
        const Vec2 x2 = x + nu * (2.0 * h), x3 = x + nu * (3.0 * h);
        if (!grid_.in_hull(x2) || !grid_.in_hull(x3)) return -1.0;
        const double u2 = interpolate(u, x2), u3 = interpolate(u, x3);
        if (!(u2 > 0.0) || !(u3 > 0.0)) return -1.0;
        return std::max((9.0 * u2 - 4.0 * u3) / (6.0 * h), 0.0);
    }

    Vec2 level_gradient(const ScalarField& phi, std::size_t ka, std::size_t kb, double t) const {
        auto nodal = [&](std::size_t k) {
            const NodeIndex n = grid_.unindex(k);
            const double h = grid_.h();
            auto val = [&](int i, int j) {
                i = std::clamp(i, 0, grid_.nx() - 1);
                j = std::clamp(j, 0, grid_.ny() - 1);
                return phi(i, j);
            };
            return Vec2{(val(n.i + 1, n.j) - val(n.i - 1, n.j)) / (2.0 * h),
                        (val(n.i, n.j + 1) - val(n.i, n.j - 1)) / (2.0 * h)};
        };
        return nodal(ka) * (1.0 - t) + nodal(kb) * t;
    }

    GeometrySpec geom_;
    Datum datum_;
    FreeBoundaryConfig cfg_;
    Grid grid_;
    RegionMask mask_;
    MatrixField A_;
};

/// Stationary solve. With coarse_levels > 0 and an odd resolution, the run
/// on the (n + 1) / 2 grid is solved first and its level set, interpolated,
/// replaces the initial front.
inline Solution solve_stationary(const GeometrySpec& geom, const Datum& datum, const FreeBoundaryConfig& cfg,
                                 const ScalarField* initial_phi = nullptr) {
    const TrialProblem fine(geom, datum, cfg);
    const int coarse_res = (cfg.resolution + 1) / 2;
    if (initial_phi || cfg.coarse_levels == 0 || cfg.resolution % 2 == 0 || coarse_res < 17)
        return fine.solve(initial_phi);
    FreeBoundaryConfig cc = cfg;
    cc.resolution = coarse_res;
    cc.coarse_levels = cfg.coarse_levels - 1;
    const Solution coarse = solve_stationary(geom, datum, cc);
    const Grid& g = fine.grid();
    ScalarField phi(g, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) phi[k] = interpolate(coarse.phi, g.node(g.unindex(k)));
    Solution sol = fine.solve(&phi);
    sol.elliptic_iterations += coarse.elliptic_iterations;
    return sol;
}

}  // namespace fblab
