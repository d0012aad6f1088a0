#pragma once

// Iterative solver for div(A grad u) = 0 on structured grids.
//
// Problems are assembled row by row: every unknown node gets an equation
//   diag * u_k = rhs + sum_m w_m u_{nb_m}
// and a red-black ordered SOR sweep relaxes the rows. Boundaries that cut
// grid edges are handled by ghost extrapolation (linear or quadratic) through the boundary
// point; oblique derivative rows on a flat segment are supplied as custom
// rows by the helpers at the bottom of this file.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fblab/core.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

struct SolveConfig {
    double tolerance = 1e-8;
    int max_iterations = 200000;
    /// Over-relaxation factor in (0, 2); 0 selects the Jacobi-spectrum optimum.
    double relaxation = 0.0;

    void validate() const {
        if (!(tolerance > 0.0)) throw ConfigError("invalid-config: tolerance must be positive");
        if (max_iterations < 1) throw ConfigError("invalid-config: max_iterations must be >= 1");
        if (relaxation != 0.0 && !(relaxation > 0.0 && relaxation < 2.0))
            throw ConfigError("invalid-config: relaxation must lie in (0, 2)");
    }
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
    double relaxation = 1.0;
};

struct StencilRow {
    static constexpr int kMaxNeighbors = 10;
    std::size_t idx = 0;
    double diag = 1.0;
    double rhs = 0.0;
    /// Multiplies the algebraic defect to give the residual in physical units.
    double scale = 1.0;
    int count = 0;
    std::array<std::size_t, kMaxNeighbors> nb{};
    std::array<double, kMaxNeighbors> w{};

    void add(std::size_t k, double c) {
        if (c == 0.0) return;
        if (k == idx) {
            diag -= c;
            return;
        }
        for (int m = 0; m < count; ++m) {
            if (nb[m] == k) {
                w[m] += c;
                return;
            }
        }
        if (count == kMaxNeighbors) throw DomainError("stencil row overflow");
        nb[count] = k;
        w[count] = c;
        ++count;
    }

    double defect(const std::vector<double>& u) const {
        double acc = rhs;
        for (int m = 0; m < count; ++m) acc += w[m] * u[nb[m]];
        return acc - diag * u[idx];
    }
};

/// Assembled sparse system in red-black order.
class LinearSystem {
public:
    LinearSystem() = default;
    LinearSystem(Grid g, std::vector<StencilRow> rows, double extent_x, double extent_y)
        : grid_(g), rows_(std::move(rows)), lx_(extent_x), ly_(extent_y) {
        std::stable_sort(rows_.begin(), rows_.end(), [this](const StencilRow& a, const StencilRow& b) {
            return color(a.idx) < color(b.idx);
        });
    }

    const Grid& grid() const { return grid_; }
    const std::vector<StencilRow>& rows() const { return rows_; }

    double residual(const std::vector<double>& u) const {
        double r = 0.0;
        for (const auto& row : rows_) r = std::max(r, std::abs(row.scale * row.defect(u)));
        return r;
    }

    double optimal_relaxation() const {
        const double h = grid_.h();
        const double rho = 0.5 * (std::cos(M_PI * h / lx_) + std::cos(M_PI * h / ly_));
        return 2.0 / (1.0 + std::sqrt(std::max(0.0, 1.0 - rho * rho)));
    }

    /// Relaxes u in place. Values at nodes without rows are left untouched.
    /// A diverging sweep restarts from the initial guess with a damped factor.
    SolveStats solve(std::vector<double>& u, const SolveConfig& cfg) const {
        cfg.validate();
        SolveStats st;
        st.relaxation = cfg.relaxation > 0.0 ? cfg.relaxation : optimal_relaxation();
        std::vector<double> history;
        const double res0 = residual(u);
        double res = res0;
        if (res <= cfg.tolerance || rows_.empty()) {
            st.residual = res;
            return st;
        }
        const std::vector<double> start = u;
        int it = 0;
        while (it < cfg.max_iterations) {
            const double omega = st.relaxation;
            bool diverged = false;
            while (it < cfg.max_iterations) {
                ++it;
                double proxy = 0.0;
                for (const auto& row : rows_) {
                    const double d = row.defect(u);
                    proxy = std::max(proxy, std::abs(row.scale * d));
                    u[row.idx] += omega * d / row.diag;
                }
                st.iterations = it;
                if (proxy <= cfg.tolerance || it % 64 == 0 || it == cfg.max_iterations) {
                    res = residual(u);
                    if (it % 64 == 0) history.push_back(res);
                    if (res <= cfg.tolerance) {
                        st.residual = res;
                        return st;
                    }
                    if (!std::isfinite(res) || res > 1e6 * res0) {
                        diverged = true;
                        break;
                    }
                }
            }
            if (!diverged || omega <= 1.0) break;
            st.relaxation = 1.0 + 0.5 * (omega - 1.0);
            u = start;
        }
        throw ConvergenceError("elliptic solve did not reach tolerance", res, std::move(history));
    }

private:
    int color(std::size_t k) const {
        const NodeIndex n = grid_.unindex(k);
        return (n.i + n.j) & 1;
    }

    Grid grid_;
    std::vector<StencilRow> rows_;
    double lx_ = 1.0;
    double ly_ = 1.0;
};

enum class NodeRole : std::uint8_t { Inactive, Unknown, Fixed };

/// Extrapolation order of the ghost value across a boundary cut.
enum class GhostOrder : std::uint8_t { Linear, Quadratic };

/// Collects node roles, boundary cuts and custom rows, then assembles the
/// face-averaged 9-point operator of div(A grad u).
class SystemBuilder {
public:
    /// Cuts closer than this fraction of h pin the node to the boundary value.
    static constexpr double kMinTheta = 1e-6;

    explicit SystemBuilder(const Grid& g, GhostOrder ghost = GhostOrder::Quadratic)
        : grid_(g), ghost_(ghost), role_(g.size(), NodeRole::Inactive), value_(g.size(), 0.0), cuts_(g.size()) {}

    const Grid& grid() const { return grid_; }
    NodeRole role(std::size_t k) const { return role_[k]; }

    void set_unknown(std::size_t k) { role_[k] = NodeRole::Unknown; }
    void set_fixed(std::size_t k, double v) {
        role_[k] = NodeRole::Fixed;
        value_[k] = v;
    }
    double fixed_value(std::size_t k) const { return value_[k]; }

    /// Boundary crossing on the edge from node k in axis direction dir
    /// (0 = E, 1 = W, 2 = N, 3 = S) at fraction theta of h, carrying value g.
    void add_cut(std::size_t k, int dir, double theta, double g) {
        auto& c = cuts_[k][static_cast<std::size_t>(dir)];
        if (!c || theta < c->theta) c = Cut{std::clamp(theta, 0.0, 1.0), g};
    }
    bool has_cut(std::size_t k, int dir) const { return cuts_[k][static_cast<std::size_t>(dir)].has_value(); }

    void set_custom_row(const StencilRow& row) {
        role_[row.idx] = NodeRole::Unknown;
        custom_.push_back(row);
    }

    LinearSystem build(const MatrixField& A) const {
        const double h = grid_.h();
        std::vector<bool> is_custom(grid_.size(), false);
        for (const auto& r : custom_) is_custom[r.idx] = true;
        std::vector<StencilRow> rows;
        int imin = grid_.nx(), imax = -1, jmin = grid_.ny(), jmax = -1;
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (role_[k] != NodeRole::Unknown || is_custom[k]) continue;
            const NodeIndex n = grid_.unindex(k);
            imin = std::min(imin, n.i);
            imax = std::max(imax, n.i);
            jmin = std::min(jmin, n.j);
            jmax = std::max(jmax, n.j);
            rows.push_back(operator_row(A, n));
        }
        for (const auto& r : custom_) {
            const NodeIndex n = grid_.unindex(r.idx);
            imin = std::min(imin, n.i);
            imax = std::max(imax, n.i);
            jmin = std::min(jmin, n.j);
            jmax = std::max(jmax, n.j);
            rows.push_back(r);
        }
        const double lx = (std::max(imax - imin, 0) + 2) * h;
        const double ly = (std::max(jmax - jmin, 0) + 2) * h;
        return LinearSystem(grid_, std::move(rows), lx, ly);
    }

    /// Initial iterate: fixed values at fixed nodes, the supplied guess elsewhere.
    std::vector<double> initial(const std::vector<double>& guess) const {
        std::vector<double> u = guess;
        for (std::size_t k = 0; k < grid_.size(); ++k)
            if (role_[k] == NodeRole::Fixed) u[k] = value_[k];
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            if (role_[k] != NodeRole::Unknown) continue;
            for (const auto& c : cuts_[k])
                if (c && c->theta < kMinTheta) u[k] = c->g;
        }
        return u;
    }

private:
    struct Cut {
        double theta;
        double g;
    };

    struct Affine {
        int count = 0;
        std::array<std::pair<std::size_t, double>, 8> terms{};
        double c0 = 0.0;

        void add(std::size_t k, double c) {
            for (int m = 0; m < count; ++m) {
                if (terms[m].first == k) {
                    terms[m].second += c;
                    return;
                }
            }
            terms[count++] = {k, c};
        }
        Affine& operator+=(const Affine& o) {
            for (int m = 0; m < o.count; ++m) add(o.terms[m].first, o.terms[m].second);
            c0 += o.c0;
            return *this;
        }
        Affine scaled(double s) const {
            Affine r = *this;
            for (int m = 0; m < r.count; ++m) r.terms[m].second *= s;
            r.c0 *= s;
            return r;
        }
    };

    Affine node_expr(std::size_t k) const {
        Affine a;
        if (role_[k] == NodeRole::Fixed) a.c0 = value_[k];
        else a.add(k, 1.0);
        return a;
    }

    Affine axis_expr(NodeIndex n, int dir) const {
        const std::size_t k = grid_.index(n.i, n.j);
        if (const auto& c = cuts_[k][static_cast<std::size_t>(dir)]) {
            const double t = c->theta;
            Affine a;
            const int opp = dir ^ 1;
            const int io = n.i + kAxisDirs[static_cast<std::size_t>(opp)][0];
            const int jo = n.j + kAxisDirs[static_cast<std::size_t>(opp)][1];
            const bool quad = ghost_ == GhostOrder::Quadratic && !cuts_[k][static_cast<std::size_t>(opp)] &&
                              grid_.contains(io, jo) && role_[grid_.index(io, jo)] != NodeRole::Inactive;
            if (quad) {
                // Quadratic through the boundary point, the node and the node behind it.
                a.add(k, -2.0 * (1.0 - t) / t);
                a += node_expr(grid_.index(io, jo)).scaled((1.0 - t) / (1.0 + t));
                a.c0 += 2.0 * c->g / (t * (1.0 + t));
            } else {
                a.add(k, -(1.0 - t) / t);
                a.c0 = c->g / t;
            }
            return a;
        }
        const int ii = n.i + kAxisDirs[static_cast<std::size_t>(dir)][0];
        const int jj = n.j + kAxisDirs[static_cast<std::size_t>(dir)][1];
        if (!grid_.contains(ii, jj)) throw DomainError("unknown node on the grid edge without a boundary cut");
        const std::size_t kk = grid_.index(ii, jj);
        if (role_[kk] == NodeRole::Inactive) throw DomainError("unknown node next to an inactive node without a cut");
        return node_expr(kk);
    }

    /// Diagonal neighbor value, replaced by u_x + u_y - u_C when the
    /// diagonal is not directly usable.
    Affine diag_expr(NodeIndex n, int dx, int dy) const {
        const std::size_t k = grid_.index(n.i, n.j);
        const int dir_x = dx > 0 ? 0 : 1;
        const int dir_y = dy > 0 ? 2 : 3;
        const bool cut_x = cuts_[k][static_cast<std::size_t>(dir_x)].has_value();
        const bool cut_y = cuts_[k][static_cast<std::size_t>(dir_y)].has_value();
        const int ii = n.i + dx, jj = n.j + dy;
        if (!cut_x && !cut_y && grid_.contains(ii, jj)) {
            const std::size_t kk = grid_.index(ii, jj);
            if (role_[kk] != NodeRole::Inactive) return node_expr(kk);
        }
        Affine a = axis_expr(n, dir_x);
        a += axis_expr(n, dir_y);
        a.add(k, -1.0);
        return a;
    }

    StencilRow operator_row(const MatrixField& A, NodeIndex n) const {
        const double h = grid_.h();
        const std::size_t k = grid_.index(n.i, n.j);
        StencilRow row;
        row.idx = k;
        row.scale = 1.0 / (h * h);
        for (const auto& c : cuts_[k]) {
            if (c && c->theta < kMinTheta) {
                row.diag = 1.0;
                row.rhs = c->g;
                return row;
            }
        }
        const Mat2& ac = A.values[k];
        if (!ac.positive_definite()) throw CoefficientError("coefficient matrix is not positive definite");
        auto coef_at = [&](int dir) -> const Mat2& {
            const int ii = n.i + kAxisDirs[static_cast<std::size_t>(dir)][0];
            const int jj = n.j + kAxisDirs[static_cast<std::size_t>(dir)][1];
            return grid_.contains(ii, jj) ? A.values[grid_.index(ii, jj)] : ac;
        };
        row.diag = 0.0;
        Affine acc;
        for (int dir = 0; dir < 4; ++dir) {
            const Mat2& an = coef_at(dir);
            const double face = dir < 2 ? 0.5 * (ac.a11 + an.a11) : 0.5 * (ac.a22 + an.a22);
            Affine e = axis_expr(n, dir);
            e.add(k, -1.0);
            acc += e.scaled(face);
        }
        const double bE = coef_at(0).a12, bW = coef_at(1).a12, bN = coef_at(2).a12, bS = coef_at(3).a12;
        const std::array<std::array<int, 2>, 4> diag_dirs{{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};
        const std::array<double, 4> wd{0.25 * (bE + bN), -0.25 * (bW + bN), -0.25 * (bE + bS), 0.25 * (bW + bS)};
        for (int m = 0; m < 4; ++m) {
            if (wd[m] == 0.0) continue;
            acc += diag_expr(n, diag_dirs[m][0], diag_dirs[m][1]).scaled(wd[m]);
        }
        for (int m = 0; m < acc.count; ++m) row.add(acc.terms[m].first, acc.terms[m].second);
        row.rhs = acc.c0;
        if (!(row.diag > 0.0)) throw CoefficientError("assembled row lost its positive diagonal");
        return row;
    }

    Grid grid_;
    GhostOrder ghost_;
    std::vector<NodeRole> role_;
    std::vector<double> value_;
    std::vector<std::array<std::optional<Cut>, 4>> cuts_;
    std::vector<StencilRow> custom_;
};

using BoundaryData = std::function<double(Vec2)>;

/// Fraction of the edge from a (value la < 0 side) toward b where the linear
/// interpolant of the level values vanishes.
inline double crossing_fraction(double la, double lb) {
    const double d = la - lb;
    if (d == 0.0) return 1.0;
    return std::clamp(la / d, 0.0, 1.0);
}

namespace detail {

/// Assigns roles and cuts for a Dirichlet problem on the mask: nodes on the
/// box boundary and obstacle nodes are fixed, curved-boundary nodes get
/// ghost cuts toward exterior neighbors, and cuts toward obstacle nodes sit
/// at the interpolated zero of the obstacle level.
inline void setup_dirichlet(SystemBuilder& b, const RegionMask& mask, const BoundaryData& data) {
    const Grid& g = mask.grid();
    const double h = g.h();
    for (std::size_t k = 0; k < g.size(); ++k) {
        switch (mask[k]) {
            case Region::Exterior: break;
            case Region::Obstacle: b.set_fixed(k, data(g.node(g.unindex(k)))); break;
            case Region::BoxBoundary:
                if (mask.on_box_boundary(k)) b.set_fixed(k, data(g.node(g.unindex(k))));
                else b.set_unknown(k);
                break;
            case Region::Accessible: b.set_unknown(k); break;
        }
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (b.role(k) != NodeRole::Unknown) continue;
        const NodeIndex n = g.unindex(k);
        const Vec2 x = g.node(n);
        for (int dir = 0; dir < 4; ++dir) {
            const int ii = n.i + kAxisDirs[static_cast<std::size_t>(dir)][0];
            const int jj = n.j + kAxisDirs[static_cast<std::size_t>(dir)][1];
            const Vec2 e{static_cast<double>(kAxisDirs[static_cast<std::size_t>(dir)][0]),
                         static_cast<double>(kAxisDirs[static_cast<std::size_t>(dir)][1])};
            if (!g.contains(ii, jj)) throw DomainError("unknown node on the grid edge");
            const std::size_t kk = g.index(ii, jj);
            if (mask[kk] == Region::Exterior) {
                const double t = crossing_fraction(mask.box_level(k), mask.box_level(kk));
                b.add_cut(k, dir, t, data(x + e * (t * h)));
            } else if (mask[kk] == Region::Obstacle) {
                const double t = crossing_fraction(mask.obstacle_level(k), mask.obstacle_level(kk));
                if (t < 1.0) b.add_cut(k, dir, t, data(x + e * (t * h)));
            }
        }
    }
}

}  // namespace detail

/// Dirichlet problem on the accessible region, data evaluated at boundary
/// nodes and at sub-grid boundary crossings.
inline ScalarField solve_dirichlet(const MatrixField& A, const RegionMask& mask, const BoundaryData& data,
                                   const SolveConfig& cfg = {}, SolveStats* stats = nullptr) {
    cfg.validate();
    const Grid& g = mask.grid();
    SystemBuilder b(g, GhostOrder::Linear);
    detail::setup_dirichlet(b, mask, data);
    const LinearSystem sys = b.build(A);
    std::vector<double> u = b.initial(std::vector<double>(g.size(), 0.0));
    const SolveStats st = sys.solve(u, cfg);
    if (stats) *stats = st;
    return ScalarField(g, std::move(u));
}

/// Same, with nodal boundary values; sub-grid crossings use bilinear
/// interpolation of the data field.
inline ScalarField solve_dirichlet(const MatrixField& A, const RegionMask& mask, const ScalarField& data,
                                   const SolveConfig& cfg = {}, SolveStats* stats = nullptr) {
    if (!(data.grid() == mask.grid())) throw ConfigError("data field grid does not match the mask");
    return solve_dirichlet(A, mask, [&data](Vec2 p) { return interpolate(data, p); }, cfg, stats);
}

// ---------------------------------------------------------------------------
// Oblique derivative rows on a flat segment {x_d = const} with interior above
// ---------------------------------------------------------------------------

enum class ObliqueScheme {
    /// Ghost node below the segment eliminated with the centered oblique
    /// difference; second order, monotone for |W_1| <= W_d.
    Ghost,
    /// u_0 equals the interpolated value one row up along W.
    AlongW,
};

/// Row enforcing grad u . W = k u at a segment node (k = 0: homogeneous
/// oblique condition). Requires A = I near the segment for the Ghost scheme.
inline StencilRow oblique_row(const Grid& g, NodeIndex n, Vec2 W, double penalty, ObliqueScheme scheme) {
    const double h = g.h();
    if (!g.contains(n.i - 1, n.j) || !g.contains(n.i + 1, n.j) || !g.contains(n.i, n.j + 1))
        throw DomainError("oblique row needs E, W and N neighbors");
    StencilRow row;
    row.idx = g.index(n.i, n.j);
    const std::size_t kE = g.index(n.i + 1, n.j), kW = g.index(n.i - 1, n.j), kN = g.index(n.i, n.j + 1);
    if (scheme == ObliqueScheme::Ghost) {
        const double r = W.x / W.y;
        row.scale = 1.0 / (h * h);
        row.diag = 4.0 + 2.0 * h * penalty / W.y;
        if (std::abs(r) <= 1.0) {
            row.add(kE, 1.0 + r);
            row.add(kW, 1.0 - r);
        } else if (r > 0.0) {
            row.diag += 2.0 * r;
            row.add(kE, 1.0 + 2.0 * r);
            row.add(kW, 1.0);
        } else {
            row.diag += -2.0 * r;
            row.add(kE, 1.0);
            row.add(kW, 1.0 - 2.0 * r);
        }
        row.add(kN, 2.0);
        return row;
    }
    const double s = h * W.x / W.y;
    const double fi = n.i + s / h;
    int i0 = static_cast<int>(std::floor(fi));
    i0 = std::clamp(i0, 0, g.nx() - 2);
    const double t = std::clamp(fi - i0, 0.0, 1.0);
    row.scale = W.y / h;
    row.diag = 1.0 + h * penalty / W.y;
    row.add(g.index(i0, n.j + 1), 1.0 - t);
    row.add(g.index(i0 + 1, n.j + 1), t);
    return row;
}

inline void check_oblique(Vec2 W, double delta) {
    if (!(W.y >= delta)) throw ObliquenessError("oblique vector violates W . e_d >= delta");
}

/// Mixed problem: Dirichlet data on the mask boundary except on the oblique
/// segment nodes, where grad u . W = 0 holds.
inline ScalarField solve_oblique_mixed(const MatrixField& A, const RegionMask& mask, Vec2 W,
                                       const BoundaryData& dirichlet, const std::vector<NodeIndex>& oblique,
                                       double delta, const SolveConfig& cfg = {},
                                       ObliqueScheme scheme = ObliqueScheme::AlongW, SolveStats* stats = nullptr) {
    cfg.validate();
    check_oblique(W, delta);
    const Grid& g = mask.grid();
    if (!oblique.empty()) {
        const int j0 = oblique.front().j;
        for (const auto& n : oblique)
            if (n.j != j0) throw ConfigError("oblique set must lie on one grid row");
    }
    SystemBuilder b(g, GhostOrder::Linear);
    detail::setup_dirichlet(b, mask, dirichlet);
    for (const auto& n : oblique) {
        ObliqueScheme s = scheme;
        if (s == ObliqueScheme::Ghost) {
            for (int di = -1; di <= 1; ++di)
                if (!(A(n.i + di, n.j) == Mat2::identity())) s = ObliqueScheme::AlongW;
        }
        b.set_custom_row(oblique_row(g, n, W, 0.0, s));
    }
    const LinearSystem sys = b.build(A);
    std::vector<double> u = b.initial(std::vector<double>(g.size(), 0.0));
    const SolveStats st = sys.solve(u, cfg);
    if (stats) *stats = st;
    return ScalarField(g, std::move(u));
}

/// Max |div_h(A grad_h u)| over ACCESSIBLE nodes whose 3x3 neighborhood
/// stays inside the grid and the box, nodal values used as-is.
inline double residual(const ScalarField& u, const MatrixField& A, const RegionMask& mask) {
    const Grid& g = mask.grid();
    double r = 0.0;
    for (int j = 1; j < g.ny() - 1; ++j) {
        for (int i = 1; i < g.nx() - 1; ++i) {
            if (mask(i, j) != Region::Accessible) continue;
            bool ok = true;
            for (int dj = -1; dj <= 1 && ok; ++dj)
                for (int di = -1; di <= 1 && ok; ++di)
                    if (mask(i + di, j + dj) == Region::Exterior) ok = false;
            if (!ok) continue;
            const Mat2& ac = A(i, j);
            auto at = [&](int di, int dj) { return u(i + di, j + dj); };
            auto coef = [&](int di, int dj) -> const Mat2& { return A(i + di, j + dj); };
            const double uc = u(i, j);
            double s = 0.5 * (ac.a11 + coef(1, 0).a11) * (at(1, 0) - uc) +
                       0.5 * (ac.a11 + coef(-1, 0).a11) * (at(-1, 0) - uc) +
                       0.5 * (ac.a22 + coef(0, 1).a22) * (at(0, 1) - uc) +
                       0.5 * (ac.a22 + coef(0, -1).a22) * (at(0, -1) - uc);
            const double bE = coef(1, 0).a12, bW = coef(-1, 0).a12, bN = coef(0, 1).a12, bS = coef(0, -1).a12;
            s += 0.25 * (bE + bN) * at(1, 1) - 0.25 * (bW + bN) * at(-1, 1) - 0.25 * (bE + bS) * at(1, -1) +
                 0.25 * (bW + bS) * at(-1, -1);
            r = std::max(r, std::abs(s) / (g.h() * g.h()));
        }
    }
    return r;
}

}  // namespace fblab
