#pragma once

// Level-set helpers for the trial free-boundary iteration: zero contours by
// marching squares, redistancing against the contour, first-order Godunov
// advection and speed extension from front points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fblab/core.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

struct Segment {
    Vec2 a;
    Vec2 b;
};

inline double point_segment_distance(Vec2 p, const Segment& s) {
    const Vec2 d = s.b - s.a;
    const double l2 = norm2(d);
    double t = l2 > 0.0 ? dot(p - s.a, d) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (s.a + d * t));
}

/// Fraction along a -> b of the zero of the linear interpolant, for values
/// of opposite sign classes (a > 0 >= b or a <= 0 < b).
inline double crossing_t(double a, double b) {
    const double d = a - b;
    if (d == 0.0) return 0.5;
    return std::clamp(a / d, 0.0, 1.0);
}

/// Zero contour of phi (positive side = inside). Cells touching a node for
/// which skip(k) is true are ignored. Saddle cells are resolved by the cell
/// average.
template <class Skip>
std::vector<Segment> marching_squares(const ScalarField& phi, Skip&& skip) {
    const Grid& g = phi.grid();
    std::vector<Segment> out;
    for (int j = 0; j + 1 < g.ny(); ++j) {
        for (int i = 0; i + 1 < g.nx(); ++i) {
            const std::array<std::size_t, 4> k{g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)};
            if (skip(k[0]) || skip(k[1]) || skip(k[2]) || skip(k[3])) continue;
            const std::array<double, 4> v{phi[k[0]], phi[k[1]], phi[k[2]], phi[k[3]]};
            const std::array<Vec2, 4> x{g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1), g.node(i, j + 1)};
            int mask = 0;
            for (int c = 0; c < 4; ++c)
                if (v[c] > 0.0) mask |= 1 << c;
            if (mask == 0 || mask == 15) continue;
            // Crossing on edge c -> c+1.
            auto cross = [&](int c) {
                const int d = (c + 1) % 4;
                const double t = crossing_t(v[c], v[d]);
                return x[c] + (x[d] - x[c]) * t;
            };
            std::array<int, 4> edges{};
            int ne = 0;
            for (int c = 0; c < 4; ++c) {
                const bool pc = v[c] > 0.0, pd = v[(c + 1) % 4] > 0.0;
                if (pc != pd) edges[ne++] = c;
            }
            if (ne == 2) {
                out.push_back({cross(edges[0]), cross(edges[1])});
            } else if (ne == 4) {
                const double center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                const bool center_in = center > 0.0;
                // Pair each crossing with the neighbor edge so that the
                // center's side is connected.
                const bool corner0_in = v[0] > 0.0;
                if (corner0_in == center_in) {
                    out.push_back({cross(0), cross(3)});
                    out.push_back({cross(1), cross(2)});
                } else {
                    out.push_back({cross(0), cross(1)});
                    out.push_back({cross(2), cross(3)});
                }
            }
        }
    }
    return out;
}

/// Replaces phi by the signed distance to its zero contour inside a band of
/// half-width band (physical units); values beyond are capped at +-band.
template <class Skip>
void redistance(ScalarField& phi, double band, Skip&& skip) {
    const Grid& g = phi.grid();
    const std::vector<Segment> segs = marching_squares(phi, skip);
    std::vector<double> dist(g.size(), band);
    const double h = g.h();
    const int reach = static_cast<int>(std::ceil(band / h)) + 1;
    for (const auto& s : segs) {
        const Vec2 lo{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y)};
        const Vec2 hi{std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)};
        const int i0 = std::max(0, static_cast<int>(std::floor((lo.x - g.origin().x) / h)) - reach);
        const int i1 = std::min(g.nx() - 1, static_cast<int>(std::ceil((hi.x - g.origin().x) / h)) + reach);
        const int j0 = std::max(0, static_cast<int>(std::floor((lo.y - g.origin().y) / h)) - reach);
        const int j1 = std::min(g.ny() - 1, static_cast<int>(std::ceil((hi.y - g.origin().y) / h)) + reach);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const std::size_t k = g.index(i, j);
                dist[k] = std::min(dist[k], point_segment_distance(g.node(i, j), s));
            }
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (skip(k)) continue;
        const double d = std::min(dist[k], band);
        phi[k] = phi[k] > 0.0 ? std::max(d, 0.0) : -d;
    }
}

/// One explicit Godunov step of phi_t = s |grad phi| (positive s enlarges
/// {phi > 0}). Missing neighbors at the grid edge give zero differences.
inline void advect(ScalarField& phi, const std::vector<double>& speed, double dt) {
    const Grid& g = phi.grid();
    const double h = g.h();
    const ScalarField old = phi;
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::size_t k = g.index(i, j);
            const double s = speed[k];
            if (s == 0.0) continue;
            const double c = old[k];
            const double dxm = i > 0 ? (c - old(i - 1, j)) / h : 0.0;
            const double dxp = i + 1 < g.nx() ? (old(i + 1, j) - c) / h : 0.0;
            const double dym = j > 0 ? (c - old(i, j - 1)) / h : 0.0;
            const double dyp = j + 1 < g.ny() ? (old(i, j + 1) - c) / h : 0.0;
            // psi = -phi moves with psi_t + s |grad psi| = 0.
            double grad2;
            if (s > 0.0) {
                const double ax = std::max(-dxm, 0.0), bx = std::min(-dxp, 0.0);
                const double ay = std::max(-dym, 0.0), by = std::min(-dyp, 0.0);
                grad2 = std::max(ax * ax, bx * bx) + std::max(ay * ay, by * by);
            } else {
                const double ax = std::min(-dxm, 0.0), bx = std::max(-dxp, 0.0);
                const double ay = std::min(-dym, 0.0), by = std::max(-dyp, 0.0);
                grad2 = std::max(ax * ax, bx * bx) + std::max(ay * ay, by * by);
            }
            phi[k] = c + dt * s * std::sqrt(grad2);
        }
    }
}

/// Front point with an attached normal speed.
struct FrontSample {
    Vec2 x;
    double speed = 0.0;
};

/// Constant extension of front speeds to the nodes within band of a front
/// point (nearest point wins); other nodes get zero.
inline std::vector<double> extend_speed(const Grid& g, const std::vector<FrontSample>& front, double band) {
    const double h = g.h();
    std::vector<double> speed(g.size(), 0.0);
    std::vector<double> best(g.size(), std::numeric_limits<double>::infinity());
    const int reach = static_cast<int>(std::ceil(band / h));
    for (const auto& f : front) {
        const int ic = static_cast<int>(std::lround((f.x.x - g.origin().x) / h));
        const int jc = static_cast<int>(std::lround((f.x.y - g.origin().y) / h));
        for (int j = std::max(0, jc - reach); j <= std::min(g.ny() - 1, jc + reach); ++j)
            for (int i = std::max(0, ic - reach); i <= std::min(g.nx() - 1, ic + reach); ++i) {
                const double d = norm(g.node(i, j) - f.x);
                if (d > band) continue;
                const std::size_t k = g.index(i, j);
                if (d < best[k]) {
                    best[k] = d;
                    speed[k] = f.speed;
                }
            }
    }
    return speed;
}

}  // namespace fblab
