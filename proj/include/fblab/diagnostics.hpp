#pragma once

// Measurements on computed solutions: flatness and its decay across scales,
// blow-up slopes at the obstacle with the omega formula and the contact-point
// taxonomy, the graph property along V, C^{1,alpha} fits of the free boundary
// and the residual of the hodograph-transformed system.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fblab/core.hpp"
#include "fblab/freeboundary.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

/// W = 2 (V . nu) nu - V.
inline Vec2 oblique_vector(Vec2 nu, Vec2 V) {
    if (std::abs(norm(nu) - 1.0) > 1e-9) throw PreconditionError("oblique_vector: nu must be a unit vector");
    return nu * (2.0 * dot(V, nu)) - V;
}

/// (A V . nu) / (A nu . nu), nu normalized first.
inline double omega_at(const Mat2& A, Vec2 V, Vec2 nu) {
    const double n = norm(nu);
    if (!(n > 0.0)) throw PreconditionError("omega_at: direction must be nonzero");
    nu = nu / n;
    const double q = dot(A * nu, nu);
    if (!(q > 0.0)) throw CoefficientError("omega_at: A nu . nu <= 0 (ellipticity violated)");
    return dot(A * V, nu) / q;
}

struct FlatnessSample {
    Vec2 center;
    double r = 0.0;
    Vec2 nu;
    double c = 0.0;
    double epsilon = 0.0;
};

/// Smallest e with (c (x - x0) . nu - e)^+ <= u <= (c (x - x0) . nu + e)^+ at the
/// nodes of B_r(x0), divided by r.
inline FlatnessSample flatness(const ScalarField& u, Vec2 x0, double r, Vec2 nu, double c) {
    const Grid& g = u.grid();
    if (!(r > 0.0)) throw PreconditionError("flatness: radius must be positive");
    if (!(c > 0.0)) throw PreconditionError("flatness: slope must be positive");
    if (!g.in_hull(x0 - Vec2{r, r}, 1e-12) || !g.in_hull(x0 + Vec2{r, r}, 1e-12))
        throw DomainError("flatness: ball leaves the grid");
    nu = normalized(nu);
    const double h = g.h();
    const int i0 = static_cast<int>(std::ceil((x0.x - r - g.origin().x) / h - 1e-9));
    const int i1 = static_cast<int>(std::floor((x0.x + r - g.origin().x) / h + 1e-9));
    const int j0 = static_cast<int>(std::ceil((x0.y - r - g.origin().y) / h - 1e-9));
    const int j1 = static_cast<int>(std::floor((x0.y + r - g.origin().y) / h + 1e-9));
    double e = 0.0;
    for (int j = std::max(j0, 0); j <= std::min(j1, g.ny() - 1); ++j)
        for (int i = std::max(i0, 0); i <= std::min(i1, g.nx() - 1); ++i) {
            const Vec2 x = g.node(i, j);
            if (norm(x - x0) > r) continue;
            const double p = c * dot(x - x0, nu);
            const double v = u(i, j);
            e = std::max(e, p - v);
            if (v > 0.0) e = std::max(e, v - p);
        }
    return {x0, r, nu, c, e / r};
}

/// Direction minimizing flatness near nu0 (search over +-maxangle, refined).
/// slope(nu) gives the plane slope for a direction.
template <class Slope>
FlatnessSample best_flatness(const ScalarField& u, Vec2 x0, double r, Vec2 nu0, Slope&& slope,
                             double maxangle = 0.5) {
    const double a0 = std::atan2(nu0.y, nu0.x);
    auto eval = [&](double a) {
        const Vec2 nu{std::cos(a), std::sin(a)};
        return flatness(u, x0, r, nu, slope(nu));
    };
    FlatnessSample best = eval(a0);
    double center = a0, span = maxangle;
    for (int level = 0; level < 5; ++level) {
        const double c = center;
        for (int s = -8; s <= 8; ++s) {
            const FlatnessSample f = eval(c + span * s / 8.0);
            if (f.epsilon < best.epsilon) {
                best = f;
                center = c + span * s / 8.0;
            }
        }
        span /= 4.0;
    }
    return best;
}

inline bool on_free_boundary(const ScalarField& u, Vec2 x0) {
    const Grid& g = u.grid();
    const double h = g.h();
    bool pos = false, zero = false;
    const int ic = static_cast<int>(std::lround((x0.x - g.origin().x) / h));
    const int jc = static_cast<int>(std::lround((x0.y - g.origin().y) / h));
    for (int j = jc - 2; j <= jc + 2; ++j)
        for (int i = ic - 2; i <= ic + 2; ++i) {
            if (!g.contains(i, j) || norm(g.node(i, j) - x0) > 1.5 * h) continue;
            (u(i, j) > 0.0 ? pos : zero) = true;
        }
    return pos && zero;
}

struct DecayCurve {
    Vec2 x0;
    std::vector<FlatnessSample> samples;
    /// Log-log slope of epsilon against r over the usable scales.
    double exponent = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;

    /// max over consecutive usable scales of eps_{j+1} / eps_j.
    double max_ratio() const {
        double m = 0.0;
        for (std::size_t j = 1; j < samples.size(); ++j)
            m = std::max(m, samples[j].epsilon / samples[j - 1].epsilon);
        return m;
    }
};

/// Flatness at radii r0 eta^j, j = 0..J-1, keeping r >= min_radius (default
/// 8h). The direction is re-fitted at every scale; the slope is V . nu.
inline DecayCurve decay_curve(const ScalarField& u, Vec2 x0, Vec2 nu, Vec2 V, double r0, double eta, int J,
                              double min_radius = -1.0) {
    const Grid& g = u.grid();
    if (!(eta > 0.0 && eta < 1.0)) throw PreconditionError("decay_curve: eta must lie in (0, 1)");
    if (!on_free_boundary(u, x0)) throw PreconditionError("decay_curve: x0 is not on the free boundary");
    if (min_radius < 0.0) min_radius = 8.0 * g.h();
    DecayCurve d;
    d.x0 = x0;
    Vec2 dir = normalized(nu);
    double r = r0;
    for (int j = 0; j < J; ++j, r *= eta) {
        if (r < min_radius * (1.0 - 1e-9)) break;
        const FlatnessSample f =
            best_flatness(u, x0, r, dir, [V](Vec2 n) { return std::max(dot(V, n), 1e-12); });
        dir = f.nu;
        d.samples.push_back(f);
    }
    if (d.samples.size() < 3) throw InsufficientDataError("decay_curve needs at least 3 scales with r >= 8h");
    double peak = 0.0;
    for (const auto& s : d.samples) peak = std::max(peak, s.epsilon);
    if (!(peak > 1e-12)) {
        d.degenerate = true;
        return d;
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (const auto& s : d.samples) {
        if (!(s.epsilon > 0.0)) continue;
        const double lx = std::log(s.r), ly = std::log(s.epsilon);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n >= 2) d.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    else d.degenerate = true;
    return d;
}

struct GraphViolation {
    Vec2 start;
    Vec2 at;
};

struct GraphReport {
    std::size_t checked = 0;
    std::vector<GraphViolation> violations;
    std::size_t count() const { return violations.size(); }
};

/// Marches from every node with u > 0 along the field of directions dir(x)
/// (V for constant coefficients, A Vt after flattening) in steps of h/2 while
/// the path stays in D. A sample with u <= 0 and no positive node within 2h
/// is a violation.
template <class Dir>
GraphReport graph_property_check(const ScalarField& u, const RegionMask& mask, Dir&& dir) {
    const Grid& g = u.grid();
    const double h = g.h();
    GraphReport rep;
    auto inside = [&](Vec2 p) {
        if (!g.in_hull(p)) return false;
        const NodeIndex n = g.nearest(p);
        const std::size_t k = g.index(n.i, n.j);
        return mask[k] == Region::Accessible;
    };
    auto positive_near = [&](Vec2 p) {
        const int ic = static_cast<int>(std::lround((p.x - g.origin().x) / h));
        const int jc = static_cast<int>(std::lround((p.y - g.origin().y) / h));
        for (int j = jc - 3; j <= jc + 3; ++j)
            for (int i = ic - 3; i <= ic + 3; ++i)
                if (g.contains(i, j) && u(i, j) > 0.0 && norm(g.node(i, j) - p) <= 2.0 * h) return true;
        return false;
    };
    const int max_steps = 4 * (g.nx() + g.ny());
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(u[k] > 0.0) || mask[k] != Region::Accessible) continue;
        ++rep.checked;
        const Vec2 x0 = g.node(g.unindex(k));
        Vec2 x = x0;
        for (int s = 0; s < max_steps; ++s) {
            const Vec2 d = dir(x);
            const double dn = norm(d);
            if (!(dn > 0.0)) break;
            x += d * (0.5 * h / dn);
            if (!inside(x)) break;
            if (interpolate(u, x) <= 0.0 && !positive_near(x)) {
                rep.violations.push_back({x0, x});
                break;
            }
        }
    }
    return rep;
}

inline GraphReport graph_property_check(const ScalarField& u, Vec2 V, const RegionMask& mask) {
    return graph_property_check(u, mask, [V](Vec2) { return V; });
}

struct SlopeWindow {
    /// Radii in multiples of h.
    double lo = 4.0;
    double hi = 16.0;
};

/// beta = sum r u(x0 + r e_d) / sum r^2 over r = lo h, (lo + 1) h, ..., hi h.
inline double blowup_slope(const ScalarField& u, Vec2 x0, SlopeWindow w = {}) {
    const Grid& g = u.grid();
    const double h = g.h();
    if (!g.in_hull(x0 + Vec2{0.0, w.hi * h}, 1e-9) || !g.in_hull(x0, 1e-9))
        throw DomainError("blowup_slope: window leaves the grid");
    double num = 0.0, den = 0.0;
    for (double m = w.lo; m <= w.hi + 1e-9; m += 1.0) {
        const double r = m * h;
        num += r * interpolate(u, x0 + Vec2{0.0, r});
        den += r * r;
    }
    return num / den;
}

enum class ContactType : std::uint8_t { Branching, InteriorContact, Vanishing };

inline std::string to_string(ContactType t) {
    switch (t) {
        case ContactType::Branching: return "BRANCHING";
        case ContactType::InteriorContact: return "INTERIOR_CONTACT";
        case ContactType::Vanishing: return "VANISHING";
    }
    return "?";
}

/// Taxonomy at x0 on the flat obstacle boundary {level = 0}. With B_r^+ the
/// nodes of B_r(x0) above the obstacle: u == 0 on B_R^+ -> VANISHING; u > 0 on
/// all of B_R^+ -> INTERIOR_CONTACT; the free boundary meets B_r^+ for every
/// tested r = h, 2h, ..., R -> BRANCHING. A point failing the last test at the
/// finest scale lies in the closure of the interior of {u = 0} at grid
/// resolution and is reported as VANISHING.
inline ContactType classify_contact_point(const ScalarField& u, const RegionMask& mask, Vec2 x0,
                                          double radius_h = 4.0) {
    const Grid& g = u.grid();
    const double h = g.h();
    const NodeIndex n0 = g.nearest(x0);
    const std::size_t k0 = g.index(n0.i, n0.j);
    if (norm(g.node(n0) - x0) > 1e-9 * h || std::abs(mask.obstacle_level(k0)) > 1e-9 * h)
        throw PreconditionError("classify_contact_point: x0 is not an obstacle-boundary node");
    const int reach = static_cast<int>(std::ceil(radius_h)) + 1;
    // Smallest radius (in h) at which B_r^+ holds a positive node, and whether
    // B_R^+ is entirely positive.
    double first_pos = std::numeric_limits<double>::infinity();
    bool all_pos = true;
    for (int j = n0.j - reach; j <= n0.j + reach; ++j)
        for (int i = n0.i - reach; i <= n0.i + reach; ++i) {
            if (!g.contains(i, j)) continue;
            const double d = norm(g.node(i, j) - x0) / h;
            const std::size_t k = g.index(i, j);
            if (d > radius_h * (1.0 + 1e-12) || !(mask.obstacle_level(k) > 1e-9 * h) ||
                mask[k] == Region::Exterior)
                continue;
            if (u(i, j) > 0.0) first_pos = std::min(first_pos, d);
            else all_pos = false;
        }
    if (!std::isfinite(first_pos)) return ContactType::Vanishing;
    if (all_pos) return ContactType::InteriorContact;
    return first_pos <= 1.0 + 1e-9 ? ContactType::Branching : ContactType::Vanishing;
}

struct ContactReport {
    Vec2 x;
    double beta = 0.0;
    double omega = 0.0;
    double tol = 0.0;
    ContactType type = ContactType::Vanishing;
    bool consistent = false;
};

struct DichotomySummary {
    std::vector<ContactReport> points;
    std::size_t branching = 0;
    std::size_t interior = 0;
    std::size_t vanishing = 0;
    /// Contact points: BRANCHING and INTERIOR_CONTACT (the support touches K).
    std::size_t contact = 0;
    std::size_t contact_consistent = 0;
    bool branching_all_within(double rel) const {
        for (const auto& p : points)
            if (p.type == ContactType::Branching && std::abs(p.beta - p.omega) > rel * p.omega) return false;
        return true;
    }
    double consistent_fraction() const {
        return contact ? static_cast<double>(contact_consistent) / static_cast<double>(contact) : 1.0;
    }
};

/// tol_beta = max(0.1 omega, 5 h max(beta, omega)).
inline double beta_tolerance(double beta, double omega, double h) {
    return std::max(0.1 * omega, 5.0 * h * std::max(beta, omega));
}

/// Taxonomy, slope and omega = omega_at(A(x), V(x), e_d) at each point.
template <class AFn, class VFn>
DichotomySummary dichotomy_report(const ScalarField& u, const RegionMask& mask, const std::vector<Vec2>& points,
                                  AFn&& A, VFn&& V, SlopeWindow w = {}) {
    const double h = u.grid().h();
    DichotomySummary s;
    for (const Vec2& x : points) {
        ContactReport c;
        c.x = x;
        c.type = classify_contact_point(u, mask, x);
        c.beta = blowup_slope(u, x, w);
        c.omega = omega_at(A(x), V(x), Vec2{0.0, 1.0});
        c.tol = beta_tolerance(c.beta, c.omega, h);
        switch (c.type) {
            case ContactType::Branching:
                c.consistent = std::abs(c.beta - c.omega) <= c.tol;
                ++s.branching;
                break;
            case ContactType::InteriorContact:
                c.consistent = c.beta >= c.omega - c.tol;
                ++s.interior;
                break;
            case ContactType::Vanishing:
                c.consistent = c.beta <= c.tol;
                ++s.vanishing;
                break;
        }
        if (c.type != ContactType::Vanishing) {
            ++s.contact;
            if (c.consistent) ++s.contact_consistent;
        }
        s.points.push_back(c);
    }
    return s;
}

inline DichotomySummary dichotomy_report(const ScalarField& u, const GeometrySpec& geom, const RegionMask& mask,
                                         const std::vector<Vec2>& points, SlopeWindow w = {}) {
    return dichotomy_report(
        u, mask, points, [&geom](Vec2 x) { return geom.A(x); }, [&geom](Vec2) { return geom.V; }, w);
}

/// Obstacle-boundary nodes (obstacle level 0) whose slope window and
/// classification ball stay inside the accessible region.
inline std::vector<Vec2> obstacle_boundary_points(const RegionMask& mask, SlopeWindow w = {}) {
    const Grid& g = mask.grid();
    const double h = g.h();
    const int margin = static_cast<int>(std::ceil(std::max(w.hi, 4.0))) + 1;
    std::vector<Vec2> out;
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            if (std::abs(mask.obstacle_level(k)) > 1e-9 * h) continue;
            bool ok = true;
            for (int dj = 0; dj <= margin && ok; ++dj)
                for (int di = -4; di <= 4 && ok; ++di) {
                    if (!g.contains(i + di, j + dj)) {
                        ok = false;
                        break;
                    }
                    const std::size_t kk = g.index(i + di, j + dj);
                    if (mask[kk] == Region::Exterior || mask.on_box_boundary(kk)) ok = false;
                }
            if (ok) out.push_back(g.node(i, j));
        }
    return out;
}

struct C1AlphaFit {
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double C = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
    std::string status = "ok";
};

/// Fit |nu_y - nu_x0| <= C |y - x0|^alpha over curve points with
/// min_radius <= |y - x0| <= window; nu_x0 is the normal of the curve point
/// nearest to x0.
inline C1AlphaFit c1alpha_fit(const FreeBoundaryCurve& fb, Vec2 x0, double window, double min_radius = 0.0) {
    if (fb.empty()) throw InsufficientDataError("c1alpha_fit: empty curve");
    std::size_t near = 0;
    for (std::size_t m = 1; m < fb.size(); ++m)
        if (norm(fb.points[m].x - x0) < norm(fb.points[near].x - x0)) near = m;
    const Vec2 n0 = fb.points[near].normal;
    std::vector<std::pair<double, double>> pts;
    double peak = 0.0;
    std::size_t in_window = 0;
    for (std::size_t m = 0; m < fb.size(); ++m) {
        const auto& p = fb.points[m];
        const double d = norm(p.x - fb.points[near].x);
        if (d > window || p.degenerate) continue;
        ++in_window;
        if (m == near || d < min_radius || d <= 0.0) continue;
        const double dn = norm(p.normal - n0);
        peak = std::max(peak, dn);
        pts.emplace_back(d, dn);
    }
    C1AlphaFit f;
    f.points = in_window;
    if (in_window < 8) throw InsufficientDataError("c1alpha_fit needs at least 8 curve points in the window");
    if (!(peak > 1e-10)) {
        f.status = "flat";
        return f;
    }
    std::vector<std::pair<double, double>> logs;
    for (const auto& [d, dn] : pts)
        if (dn > 1e-12 * peak) logs.emplace_back(std::log(d), std::log(dn));
    if (logs.size() < 3) throw InsufficientDataError("c1alpha_fit: too few points with nonzero oscillation");
    Eigen::MatrixXd M(logs.size(), 2);
    Eigen::VectorXd b(logs.size());
    for (std::size_t m = 0; m < logs.size(); ++m) {
        M(static_cast<Eigen::Index>(m), 0) = 1.0;
        M(static_cast<Eigen::Index>(m), 1) = logs[m].first;
        b(static_cast<Eigen::Index>(m)) = logs[m].second;
    }
    const Eigen::Vector2d c = M.colPivHouseholderQr().solve(b);
    f.alpha = c(1);
    f.C = std::exp(c(0));
    const double tot = (b.array() - b.mean()).square().sum();
    f.r2 = tot > 0.0 ? 1.0 - (b - M * c).squaredNorm() / tot : 1.0;
    return f;
}

struct HodographResult {
    double interior = 0.0;
    double boundary = 0.0;
    /// Half-width of the window actually used (physical units).
    double window = 0.0;
    int columns = 0;
    std::vector<double> failed_columns;
};

/// Hodograph transform w(y_1, y_2) = x_2 with u(y_1, x_2) = y_2 near a free
/// boundary point where d_2 u >= delta, built column by column on
/// |x_1 - x0_1| <= window, y_2 in [0, window * d_2 u(x0)]. Returns the max
/// residuals of
///   -w_22 (1 + w_1^2) / w_2^3 + 2 w_1 w_12 / w_2^2 - w_11 / w_2 = 0   (y_2 > 0)
///   (1 + w_1^2) / w_2^2 - (V_2 - w_1 V_1) / w_2 = 0                    (y_2 = 0)
/// Columns where u is not increasing are reported and the window shrinks to
/// exclude them.
inline HodographResult hodograph_residual(const ScalarField& u, Vec2 x0, double window, Vec2 V,
                                          double delta = 0.1) {
    const Grid& g = u.grid();
    const double h = g.h();
    const Vec2 grad = front_gradient(u, x0, 3.0 * h);
    if (!(grad.y >= delta)) throw PreconditionError("hodograph_residual: d_2 u below delta at x0");
    const int ic = static_cast<int>(std::lround((x0.x - g.origin().x) / h));
    int half = static_cast<int>(std::floor(window / h + 1e-9));
    const double dy = h * grad.y;
    const int M = half;
    HodographResult res;

    // x_2 where column i reaches level y: cubic through four positive nodes
    // around the crossing, inverted by Newton. Empty when the column is not
    // increasing over the needed range.
    auto column = [&](int i) -> std::optional<std::vector<double>> {
        if (i < 0 || i >= g.nx()) return std::nullopt;
        int jp = 0;
        while (jp < g.ny() && !(u(i, jp) > 0.0)) ++jp;
        std::vector<double> w(static_cast<std::size_t>(M + 3));
        int j = jp - 1;
        for (int m = 0; m < M + 3; ++m) {
            const double y = m * dy;
            while (j + 1 < g.ny() && u(i, j + 1) < y) ++j;
            if (j + 1 >= g.ny()) return std::nullopt;
            const int s0 = std::max(jp, j - 1);
            if (s0 + 3 >= g.ny()) return std::nullopt;
            for (int q = s0; q < std::max(s0 + 3, j + 1); ++q)
                if (!(u(i, q + 1) > u(i, q))) return std::nullopt;
            double c[4];
            for (int q = 0; q < 4; ++q) c[q] = u(i, s0 + q);
            auto p = [&](double t) {
                double v = 0.0;
                for (int q = 0; q < 4; ++q) {
                    double l = 1.0;
                    for (int r = 0; r < 4; ++r)
                        if (r != q) l *= (t - r) / (q - r);
                    v += c[q] * l;
                }
                return v;
            };
            double t = j < jp ? -(c[0] - y) / (c[1] - c[0]) : (j - s0) + (y - u(i, j)) / (u(i, j + 1) - u(i, j));
            for (int it = 0; it < 30; ++it) {
                const double e = 1e-6;
                const double d = (p(t + e) - p(t - e)) / (2.0 * e);
                if (!(d > 0.0)) return std::nullopt;
                const double step = (p(t) - y) / d;
                t -= step;
                if (std::abs(step) < 1e-13) break;
            }
            w[static_cast<std::size_t>(m)] = g.node(i, s0).y + t * h;
        }
        return w;
    };

    std::vector<std::vector<double>> cols;
    for (;;) {
        cols.clear();
        int bad = 0;
        for (int di = -half - 1; di <= half + 1; ++di) {
            auto c = column(ic + di);
            if (!c) {
                bad = std::max(bad, std::abs(di));
                res.failed_columns.push_back(g.node(std::clamp(ic + di, 0, g.nx() - 1), 0).x);
                break;
            }
            cols.push_back(std::move(*c));
        }
        if (bad == 0) break;
        half = bad - 2;
        if (half < 2) throw PreconditionError("hodograph_residual: window collapsed (non-monotone columns)");
    }
    res.window = half * h;
    res.columns = 2 * half + 1;
    auto W = [&](int di, int m) { return cols[static_cast<std::size_t>(di + half + 1)][static_cast<std::size_t>(m)]; };
    for (int di = -half; di <= half; ++di) {
        const double w1 = (W(di + 1, 0) - W(di - 1, 0)) / (2.0 * h);
        const double w2 = (-3.0 * W(di, 0) + 4.0 * W(di, 1) - W(di, 2)) / (2.0 * dy);
        res.boundary = std::max(res.boundary, std::abs((1.0 + w1 * w1) / (w2 * w2) - (V.y - w1 * V.x) / w2));
        for (int m = 1; m < M; ++m) {
            const double a1 = (W(di + 1, m) - W(di - 1, m)) / (2.0 * h);
            const double a2 = (W(di, m + 1) - W(di, m - 1)) / (2.0 * dy);
            const double a11 = (W(di + 1, m) - 2.0 * W(di, m) + W(di - 1, m)) / (h * h);
            const double a22 = (W(di, m + 1) - 2.0 * W(di, m) + W(di, m - 1)) / (dy * dy);
            const double a12 = (W(di + 1, m + 1) - W(di + 1, m - 1) - W(di - 1, m + 1) + W(di - 1, m - 1)) / (4.0 * h * dy);
            const double r = -a22 * (1.0 + a1 * a1) / (a2 * a2 * a2) + 2.0 * a1 * a12 / (a2 * a2) - a11 / a2;
            res.interior = std::max(res.interior, std::abs(r));
        }
    }
    return res;
}

}  // namespace fblab
