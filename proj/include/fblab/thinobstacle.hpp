#pragma once

// Oblique thin obstacle problem on a half rectangle {x_2 >= y0}:
//   Lap v = 0 above the thin space,  v >= 0 and grad v . W <= 0 on it,
//   grad v . W = 0 where v > 0,  v = datum on the outer boundary.
// Solved by penalization (grad v . W = k v where v <= 0) with continuation in
// (k, l) and a final exact stage (v = 0 on the contact set).

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fblab/core.hpp"
#include "fblab/elliptic.hpp"
#include "fblab/freeboundary.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

inline Vec2 adjoint_direction(Vec2 W, double delta = 0.0) {
    if (std::abs(norm(W) - 1.0) > 1e-9) throw ConfigError("invalid-config: W must be a unit vector");
    if (!(W.y > 0.0) || W.y < delta) throw ObliquenessError("oblique vector violates W . e_d >= delta");
    return {-W.x, W.y};
}

struct PenaltyStage {
    double k = 10.0;
    double ell = 0.1;
};

inline std::vector<PenaltyStage> default_schedule() {
    return {{10.0, 1e-1}, {1e2, 1e-2}, {1e3, 1e-3}, {1e4, 0.0}};
}

struct ThinProblem {
    /// Half domain; the thin space is its bottom edge.
    Rectangle box{{-1.0, 0.0}, {1.0, 1.0}};
    int resolution = 129;
    Vec2 W{0.0, 1.0};
    double delta = 0.25;
    Datum datum;
    std::vector<PenaltyStage> schedule = default_schedule();
    /// Appends the k = infinity stage (v = 0 on the contact set).
    bool exact_final_stage = true;
    int max_active_iterations = 200;
    SolveConfig elliptic{};

    void validate() const {
        if (!datum) throw ConfigError("invalid-config: thin problem needs a datum");
        if (resolution < 5) throw ConfigError("invalid-config: resolution must be >= 5");
        if (!(box.hi.x > box.lo.x && box.hi.y > box.lo.y)) throw ConfigError("invalid-config: empty box");
        if (!(delta > 0.0)) throw ConfigError("invalid-config: delta must be positive");
        adjoint_direction(W, delta);
        if (schedule.empty()) throw ConfigError("invalid-config: penalty schedule is empty");
        for (std::size_t s = 0; s < schedule.size(); ++s) {
            if (!(schedule[s].k > 0.0)) throw ConfigError("invalid-config: penalty k must be positive");
            if (!(schedule[s].ell >= 0.0)) throw ConfigError("invalid-config: ell must be nonnegative");
            if (s > 0 && !(schedule[s].k > schedule[s - 1].k))
                throw ConfigError("invalid-config: penalty k must increase along the schedule");
            if (s > 0 && !(schedule[s].ell <= schedule[s - 1].ell))
                throw ConfigError("invalid-config: ell must decrease along the schedule");
        }
        if (max_active_iterations < 1) throw ConfigError("invalid-config: max_active_iterations must be >= 1");
        elliptic.validate();
    }
};

struct StageReport {
    double k = 0.0;  // infinity for the exact stage
    double ell = 0.0;
    int active_iterations = 0;
    std::size_t active_nodes = 0;
};

struct ThinSolution {
    ScalarField v;
    /// Row index of the thin space in v's grid.
    int thin_row = 0;
    std::vector<double> thin_x;
    std::vector<double> sigma;
    std::vector<bool> contact;
    std::vector<StageReport> stages;
    Vec2 W{0.0, 1.0};

    double thin_value(std::size_t i) const { return v(static_cast<int>(i), thin_row); }
    std::size_t thin_size() const { return thin_x.size(); }
};

/// sigma_W at every node of row j0: grad v . W sampled at x' + t Wt for
/// t = h, 2h (bilinear interpolation of the nodal gradient field) and
/// extrapolated linearly to t = 0. Samples leaving the grid are clamped into
/// it horizontally.
inline std::vector<double> sigma_W(const ScalarField& v, Vec2 W, int j0 = 0) {
    const Grid& g = v.grid();
    const Vec2 Wt{-W.x, W.y};
    const auto [gx, gy] = gradient_field(v);
    const double h = g.h();
    const double xlo = g.origin().x, xhi = g.origin().x + (g.nx() - 1) * h;
    std::vector<double> s(static_cast<std::size_t>(g.nx()));
    for (int i = 0; i < g.nx(); ++i) {
        const Vec2 x = g.node(i, j0);
        auto dw = [&](double t) {
            Vec2 p = x + Wt * t;
            p.x = std::clamp(p.x, xlo, xhi);
            return interpolate(gx, p) * W.x + interpolate(gy, p) * W.y;
        };
        s[static_cast<std::size_t>(i)] = 2.0 * dw(h) - dw(2.0 * h);
    }
    return s;
}

/// Thin nodes of row j0 with |v| <= tol * max |v|.
inline std::vector<bool> contact_set(const ScalarField& v, double tol = 1e-6, int j0 = 0) {
    const Grid& g = v.grid();
    const double scale = v.max_abs();
    std::vector<bool> c(static_cast<std::size_t>(g.nx()));
    for (int i = 0; i < g.nx(); ++i) c[static_cast<std::size_t>(i)] = std::abs(v(i, j0)) <= tol * scale;
    return c;
}

/// min of the tangential second difference over rows 1 <= j with x_2 - y0 <= 1/2
/// and |x_1 - center| <= 1/2, divided by max |v|.
inline double tangential_semiconvexity(const ScalarField& v, int j0 = 0) {
    const Grid& g = v.grid();
    const double h = g.h();
    const double scale = v.max_abs();
    if (scale == 0.0) return 0.0;
    const double y0 = g.node(0, j0).y;
    const double xc = g.origin().x + 0.5 * (g.nx() - 1) * h;
    double m = std::numeric_limits<double>::infinity();
    for (int j = j0 + 1; j < g.ny() && g.node(0, j).y - y0 <= 0.5 + 1e-12; ++j)
        for (int i = 1; i + 1 < g.nx(); ++i) {
            if (std::abs(g.node(i, j).x - xc) > 0.5 + 1e-12) continue;
            m = std::min(m, (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (h * h));
        }
    return std::isfinite(m) ? m / scale : 0.0;
}

namespace detail {

/// Thin row for grad v . W = k v. One-sided: the ghost below is eliminated
/// (interior above only). Two-sided: the even reflection supplies the node
/// below, so the north weight is shared between N and S.
inline StencilRow thin_row(const Grid& g, NodeIndex n, Vec2 W, double k, bool two_sided) {
    StencilRow row = oblique_row(g, n, W, k, ObliqueScheme::Ghost);
    if (!two_sided) return row;
    const std::size_t kN = g.index(n.i, n.j + 1), kS = g.index(n.i, n.j - 1);
    for (int m = 0; m < row.count; ++m)
        if (row.nb[static_cast<std::size_t>(m)] == kN) row.w[static_cast<std::size_t>(m)] = 1.0;
    row.add(kS, 1.0);
    return row;
}

}  // namespace detail

/// Discretization of one thin problem on the half domain, or on the full
/// domain obtained by even reflection across the thin space.
class ThinSolver {
public:
    ThinSolver(ThinProblem p, bool full_domain = false) : p_(std::move(p)), full_(full_domain) {
        p_.validate();
        grid_ = build_grid(BoxShape(p_.box), p_.resolution);
        if (full_) {
            const double depth = (grid_.ny() - 1) * grid_.h();
            grid_ = Grid(grid_.nx(), 2 * grid_.ny() - 1, grid_.h(), grid_.origin() - Vec2{0.0, depth});
        }
        jt_ = full_ ? (grid_.ny() - 1) / 2 : 0;
        A_ = MatrixField::identity(grid_);
        const double h = grid_.h();
        const double lx = (grid_.nx() - 1) * h, ly = 2.0 * (grid_.ny() - 1 - jt_) * h;
        const double rho = 0.5 * (std::cos(M_PI * h / lx) + std::cos(M_PI * h / ly));
        if (p_.elliptic.relaxation == 0.0) p_.elliptic.relaxation = 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
    }

    const Grid& grid() const { return grid_; }
    int thin_row() const { return jt_; }
    const ThinProblem& problem() const { return p_; }

    bool is_thin(int i) const { return i > 0 && i + 1 < grid_.nx(); }

    double boundary_value(Vec2 x, double ell) const {
        if (full_ && x.y < p_.box.lo.y) x.y = 2.0 * p_.box.lo.y - x.y;
        return p_.datum(x) + ell;
    }

    /// One penalized stage: active-set fixed point on {v <= 0}.
    ScalarField solve_penalized(double k, double ell, const ScalarField* guess = nullptr,
                                StageReport* report = nullptr) const {
        ScalarField v = guess ? *guess : ScalarField(grid_, 0.0);
        std::vector<bool> active = guess ? nonpositive(v) : std::vector<bool>(grid_.size(), false);
        std::set<std::vector<bool>> seen;
        std::vector<double> history;
        for (int it = 1; it <= p_.max_active_iterations; ++it) {
            v = solve_linear(active, k, ell, false, v);
            std::vector<bool> next = nonpositive(v);
            const std::size_t na = static_cast<std::size_t>(std::count(next.begin(), next.end(), true));
            history.push_back(static_cast<double>(na));
            if (next == active) {
                if (report) *report = {k, ell, it, na};
                return v;
            }
            if (!seen.insert(active).second)
                throw ConvergenceError("penalized active set is cycling", static_cast<double>(na), history);
            active = std::move(next);
        }
        throw ConvergenceError("penalized active set did not settle", history.back(), history);
    }

    /// k = infinity stage: v = 0 on the active set, homogeneous oblique
    /// condition elsewhere; primal-dual update of the active set from the
    /// discrete multiplier.
    ScalarField solve_exact(const ScalarField& guess, StageReport* report = nullptr) const {
        ScalarField v = guess;
        std::vector<bool> active = nonpositive(v);
        std::set<std::vector<bool>> seen;
        std::vector<double> history;
        for (int it = 1; it <= p_.max_active_iterations; ++it) {
            v = solve_linear(active, 0.0, 0.0, true, v);
            const std::vector<double> sig = discrete_sigma(v);
            std::vector<bool> next(grid_.size(), false);
            for (int i = 1; i + 1 < grid_.nx(); ++i) {
                const std::size_t k = grid_.index(i, jt_);
                next[k] = active[k] ? sig[static_cast<std::size_t>(i)] < 0.0 : v[k] < 0.0;
            }
            const std::size_t na = static_cast<std::size_t>(std::count(next.begin(), next.end(), true));
            history.push_back(static_cast<double>(na));
            if (next == active) {
                if (report) *report = {std::numeric_limits<double>::infinity(), 0.0, it, na};
                return v;
            }
            if (!seen.insert(active).second)
                throw ConvergenceError("exact-stage active set is cycling", static_cast<double>(na), history);
            active = std::move(next);
        }
        throw ConvergenceError("exact-stage active set did not settle", history.back(), history);
    }

    ThinSolution solve() const {
        ThinSolution sol;
        sol.W = p_.W;
        ScalarField v;
        const ScalarField* guess = nullptr;
        for (std::size_t s = 0; s < p_.schedule.size(); ++s) {
            StageReport rep;
            try {
                v = solve_penalized(p_.schedule[s].k, p_.schedule[s].ell, guess, &rep);
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("stage " + std::to_string(s) + ": " + e.what(), e.final_residual(),
                                       e.history());
            }
            sol.stages.push_back(rep);
            guess = &v;
        }
        if (p_.exact_final_stage) {
            StageReport rep;
            try {
                v = solve_exact(v, &rep);
            } catch (const ConvergenceError& e) {
                throw ConvergenceError("stage " + std::to_string(p_.schedule.size()) + ": " + e.what(),
                                       e.final_residual(), e.history());
            }
            sol.stages.push_back(rep);
        }
        sol.thin_row = jt_;
        sol.sigma = sigma_W(v, p_.W, jt_);
        sol.contact = contact_set(v, 1e-6, jt_);
        for (int i = 0; i < grid_.nx(); ++i) sol.thin_x.push_back(grid_.node(i, jt_).x);
        sol.v = std::move(v);
        return sol;
    }

    /// grad v . W at thin nodes from the zero-penalty thin row: the ghost
    /// value implied by discrete harmonicity at the thin node.
    std::vector<double> discrete_sigma(const ScalarField& v) const {
        std::vector<double> s(static_cast<std::size_t>(grid_.nx()), 0.0);
        for (int i = 1; i + 1 < grid_.nx(); ++i) {
            const StencilRow row = detail::thin_row(grid_, {i, jt_}, p_.W, 0.0, full_);
            s[static_cast<std::size_t>(i)] = p_.W.y / (2.0 * grid_.h()) * row.defect(v.values());
        }
        return s;
    }

private:
    std::vector<bool> nonpositive(const ScalarField& v) const {
        std::vector<bool> a(grid_.size(), false);
        for (int i = 1; i + 1 < grid_.nx(); ++i) {
            const std::size_t k = grid_.index(i, jt_);
            a[k] = v[k] <= 0.0;
        }
        return a;
    }

    ScalarField solve_linear(const std::vector<bool>& active, double k, double ell, bool exact,
                             const ScalarField& guess) const {
        SystemBuilder b(grid_, GhostOrder::Linear);
        for (int j = 0; j < grid_.ny(); ++j)
            for (int i = 0; i < grid_.nx(); ++i) {
                const std::size_t kk = grid_.index(i, j);
                const bool outer = i == 0 || i + 1 == grid_.nx() || j == 0 || j + 1 == grid_.ny();
                if (j == jt_ && is_thin(i)) {
                    if (exact && active[kk]) b.set_fixed(kk, 0.0);
                    else b.set_custom_row(detail::thin_row(grid_, {i, j}, p_.W, active[kk] ? k : 0.0, full_));
                } else if (outer) {
                    b.set_fixed(kk, boundary_value(grid_.node(i, j), ell));
                } else {
                    b.set_unknown(kk);
                }
            }
        const LinearSystem sys = b.build(A_);
        std::vector<double> u = b.initial(guess.values());
        sys.solve(u, p_.elliptic);
        return ScalarField(grid_, std::move(u));
    }

    ThinProblem p_;
    bool full_;
    Grid grid_;
    int jt_ = 0;
    MatrixField A_;
};

inline ScalarField solve_penalized(const ThinProblem& p, double k, double ell) {
    return ThinSolver(p).solve_penalized(k, ell);
}

inline ThinSolution solve_thin(const ThinProblem& p) { return ThinSolver(p).solve(); }

/// Full-domain solve with the even reflection of the datum; returns max
/// |v_full - v_half| over the upper half.
inline double reflection_discrepancy(const ThinProblem& p, const ThinSolution& half) {
    const ThinSolver full(p, true);
    const ThinSolution f = full.solve();
    const Grid& g = half.v.grid();
    double d = 0.0;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) d = std::max(d, std::abs(f.v(i, j + full.thin_row()) - half.v(i, j)));
    return d;
}

struct ThinInvariants {
    double min_v = 0.0;
    double max_sigma = 0.0;
    double max_complementarity = 0.0;
    double scale = 0.0;
    bool v_nonnegative = false;
    bool sigma_nonpositive = false;
    bool complementary = false;

    bool ok() const { return v_nonnegative && sigma_nonpositive && complementary; }
};

/// Evaluated on thin nodes other than the two corners. The sigma and
/// complementarity checks are restricted to |x' - center| <= inner * half
/// width (inner = 1: whole thin space). Complementarity is measured against
/// comp_tol * max |v|^2.
inline ThinInvariants check_invariants(const ThinSolution& s, double tol, double sigma_tol, double comp_tol,
                                       double inner = 1.0) {
    ThinInvariants r;
    r.min_v = std::numeric_limits<double>::infinity();
    r.max_sigma = -std::numeric_limits<double>::infinity();
    r.scale = s.v.max_abs() * s.v.max_abs();
    const double center = 0.5 * (s.thin_x.front() + s.thin_x.back());
    const double reach = inner * 0.5 * (s.thin_x.back() - s.thin_x.front()) * (1.0 + 1e-12);
    for (std::size_t i = 1; i + 1 < s.thin_size(); ++i) {
        const double v = s.thin_value(i);
        r.min_v = std::min(r.min_v, v);
        if (std::abs(s.thin_x[i] - center) > reach) continue;
        r.max_sigma = std::max(r.max_sigma, s.sigma[i]);
        r.max_complementarity = std::max(r.max_complementarity, std::abs(v * s.sigma[i]));
    }
    r.v_nonnegative = r.min_v >= -tol;
    r.sigma_nonpositive = r.max_sigma <= sigma_tol;
    r.complementary = r.max_complementarity <= comp_tol * r.scale;
    return r;
}

/// Max over the interior and thin nodes minus max over the outer boundary.
/// Nonpositive (up to solver tolerance) when the maximum principle holds.
inline double maximum_principle_excess(const ScalarField& v, int j0 = 0) {
    const Grid& g = v.grid();
    double inner = -std::numeric_limits<double>::infinity(), outer = inner;
    for (int j = j0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const bool bd = i == 0 || i + 1 == g.nx() || j + 1 == g.ny();
            (bd ? outer : inner) = std::max(bd ? outer : inner, v(i, j));
        }
    return inner - outer;
}

struct HolderFit {
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double C = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    int annuli = 0;
    std::string status = "ok";
    std::vector<double> radii;
    std::vector<double> amplitudes;
};

/// Fit of max(-sigma_W) over dyadic annuli {r/2 <= |x' - x0| < r} against r:
/// -sigma <= C max|v| r^alpha. Annuli narrower than 2h are dropped.
inline HolderFit sigma_holder_fit(const ThinSolution& s, double x0) {
    const std::size_t n = s.thin_size();
    if (n < 2) throw InsufficientDataError("thin space has too few nodes");
    const double h = s.thin_x[1] - s.thin_x[0];
    std::size_t near = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(s.thin_x[i] - x0) < std::abs(s.thin_x[near] - x0)) near = i;
    if (s.contact[near]) throw PreconditionError("sigma_holder_fit: x0 lies in the contact set");
    const double vmax = s.v.max_abs();
    double rmax = 0.0;
    for (double x : s.thin_x) rmax = std::max(rmax, std::abs(x - x0));
    HolderFit fit;
    double peak = 0.0;
    for (double r = rmax * (1.0 + 1e-12); r / 2.0 >= 2.0 * h; r /= 2.0) {
        double amp = 0.0;
        bool any = false;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double d = std::abs(s.thin_x[i] - x0);
            if (d < r / 2.0 || d >= r) continue;
            any = true;
            amp = std::max(amp, -s.sigma[i]);
        }
        if (!any) continue;
        peak = std::max(peak, amp);
        fit.radii.push_back(r);
        fit.amplitudes.push_back(amp);
    }
    if (!(peak > 1e-6 * std::max(vmax, 1.0))) {
        fit.status = "no decay to fit";
        fit.radii.clear();
        fit.amplitudes.clear();
        return fit;
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t m = 0; m < fit.radii.size(); ++m)
        if (fit.amplitudes[m] > 1e-12 * peak) pts.emplace_back(std::log(fit.radii[m]), std::log(fit.amplitudes[m]));
    fit.annuli = static_cast<int>(pts.size());
    if (pts.size() < 3) throw InsufficientDataError("sigma_holder_fit needs at least 3 usable annuli");
    Eigen::MatrixXd M(pts.size(), 2);
    Eigen::VectorXd b(pts.size());
    for (std::size_t m = 0; m < pts.size(); ++m) {
        M(static_cast<Eigen::Index>(m), 0) = 1.0;
        M(static_cast<Eigen::Index>(m), 1) = pts[m].first;
        b(static_cast<Eigen::Index>(m)) = pts[m].second;
    }
    const Eigen::Vector2d c = M.colPivHouseholderQr().solve(b);
    fit.alpha = c(1);
    fit.C = std::exp(c(0)) / (vmax > 0.0 ? vmax : 1.0);
    const Eigen::VectorXd res = b - M * c;
    const double mean = b.mean();
    const double tot = (b.array() - mean).square().sum();
    fit.r2 = tot > 0.0 ? 1.0 - res.squaredNorm() / tot : 1.0;
    return fit;
}

}  // namespace fblab
