#pragma once

// Flattening of a graph obstacle {x_2 <= g(x_1)} by Theta(x) = (x_1, x_2 - g(x_1)).
// A harmonic u becomes v = u o Theta^{-1} with div(A grad v) = 0, and the
// free-boundary condition |grad u|^2 = grad u . V becomes
// A grad v . grad v = grad v . A Vt. With a = g'(y_1):
//   A = DTheta DTheta^T = [[1, -a], [-a, 1 + a^2]],   Vt = (V_1 + a V_2, V_2).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fblab/core.hpp"
#include "fblab/elliptic.hpp"
#include "fblab/geometry.hpp"

namespace fblab {

struct FlatteningMap {
    GraphFunction g;
    /// Points with |x_1| <= radius belong to the domain of the map.
    double radius = 1.0;

    void check(Vec2 p) const {
        if (!(std::abs(p.x) <= radius * (1.0 + 1e-12)) || !std::isfinite(p.y))
            throw DomainError("point outside the domain of the flattening map");
    }

    Vec2 theta(Vec2 x) const {
        check(x);
        return {x.x, x.y - g(x.x)};
    }

    Vec2 theta_inv(Vec2 y) const {
        check(y);
        return {y.x, y.y + g(y.x)};
    }

    /// max |g| over the domain, sampled at n + 1 points.
    double sup_norm(int n = 2000) const {
        double m = 0.0;
        for (int s = 0; s <= n; ++s) m = std::max(m, std::abs(g(-radius + 2.0 * radius * s / n)));
        return m;
    }
};

inline Mat2 pullback_matrix(const GraphFunction& g, Vec2 y) {
    const double a = g.derivative(y.x);
    return {1.0, -a, 1.0 + a * a};
}

inline Vec2 pullback_vector(const GraphFunction& g, Vec2 y, Vec2 V) {
    const double a = g.derivative(y.x);
    return {V.x + a * V.y, V.y};
}

struct FlatProblemSpec {
    Grid grid;
    MatrixField A;
    VectorField Vtilde;
    Vec2 V;
    double delta = 0.25;
    double Pi0 = 0.1;
};

/// Samples A and Vt on the grid of the flattened box.
inline FlatProblemSpec flatten_problem(const FlatteningMap& map, const Grid& grid, Vec2 V, double delta = 0.25,
                                       double Pi0 = 0.1) {
    FlatProblemSpec s;
    s.grid = grid;
    s.V = V;
    s.delta = delta;
    s.Pi0 = Pi0;
    s.A = MatrixField::identity(grid);
    s.Vtilde = VectorField{grid, std::vector<Vec2>(grid.size())};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Vec2 y = grid.node(grid.unindex(k));
        map.check(y);
        s.A.values[k] = pullback_matrix(map.g, y);
        s.Vtilde.values[k] = pullback_vector(map.g, y, V);
    }
    return s;
}

struct FlatteningCheck {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct FlatteningReport {
    /// max over nodes of max |(A - I)_ij|; must be <= Pi0.
    FlatteningCheck a_minus_identity;
    /// max over nodes of |A Vt - V|_inf; must be <= Pi0.
    FlatteningCheck drift_defect;
    /// min over nodes of (A Vt) . e_d; must be >= 2 delta.
    FlatteningCheck nondegeneracy;
    double max_det_error = 0.0;
    bool spd = true;

    bool pass() const { return a_minus_identity.pass && drift_defect.pass && nondegeneracy.pass; }
};

inline FlatteningReport validate_flattening(const FlatProblemSpec& s) {
    FlatteningReport r;
    double am = 0.0, dm = 0.0, nd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        const Mat2& A = s.A.values[k];
        am = std::max({am, std::abs(A.a11 - 1.0), std::abs(A.a12), std::abs(A.a22 - 1.0)});
        const Vec2 w = A * s.Vtilde.values[k];
        dm = std::max({dm, std::abs(w.x - s.V.x), std::abs(w.y - s.V.y)});
        nd = std::min(nd, w.y);
        r.max_det_error = std::max(r.max_det_error, std::abs(A.det() - 1.0));
        if (!A.positive_definite()) r.spd = false;
    }
    r.a_minus_identity = {"|A - I| <= Pi0", am, s.Pi0, am <= s.Pi0};
    r.drift_defect = {"|A Vt - V| <= Pi0", dm, s.Pi0, dm <= s.Pi0};
    r.nondegeneracy = {"A Vt . e_d >= 2 delta", nd, 2.0 * s.delta, nd >= 2.0 * s.delta};
    return r;
}

/// Max |div_h(A grad_h v)| with v = u o Theta^{-1} sampled on the flattened
/// grid (nodes at least one cell from the grid edge).
template <class F>
double pullback_consistency_residual(const FlatteningMap& map, const Grid& grid, F&& u) {
    ScalarField v(grid);
    MatrixField A = MatrixField::identity(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Vec2 y = grid.node(grid.unindex(k));
        v[k] = u(map.theta_inv(y));
        A.values[k] = pullback_matrix(map.g, y);
    }
    const RegionMask all(grid, std::vector<Region>(grid.size(), Region::Accessible),
                         std::vector<double>(grid.size(), -1.0), std::vector<double>(grid.size(), 1.0));
    return residual(v, A, all);
}

/// Largest amplitude eta (bisection on [0, eta_max]) such that the map with
/// g = eta * shape / max|shape| passes validate_flattening on the grid.
inline double choose_eta0(const Polynomial& shape, double radius, const Grid& grid, Vec2 V, double delta,
                          double Pi0 = 0.1, double eta_max = 1.0, int iterations = 60) {
    const FlatteningMap unit{GraphFunction(shape), radius};
    const double norm0 = unit.sup_norm();
    if (!(norm0 > 0.0)) throw ConfigError("invalid-config: obstacle shape is identically zero");
    auto passes = [&](double eta) {
        Polynomial p = shape;
        for (double& c : p.coeffs) c *= eta / norm0;
        return validate_flattening(flatten_problem({GraphFunction(p), radius}, grid, V, delta, Pi0)).pass();
    };
    if (!passes(0.0)) throw GeometryError("flattening fails even for a flat obstacle (check V and delta)");
    if (passes(eta_max)) return eta_max;
    double lo = 0.0, hi = eta_max;
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
    }
    return lo;
}

inline nlohmann::json to_json(const FlatProblemSpec& s) {
    nlohmann::json j;
    j["grid"] = {{"nx", s.grid.nx()},
                 {"ny", s.grid.ny()},
                 {"h", s.grid.h()},
                 {"origin", {s.grid.origin().x, s.grid.origin().y}}};
    j["V"] = {s.V.x, s.V.y};
    j["delta"] = s.delta;
    j["Pi0"] = s.Pi0;
    nlohmann::json a = nlohmann::json::array(), v = nlohmann::json::array();
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        const Mat2& m = s.A.values[k];
        a.push_back({m.a11, m.a12, m.a22});
        v.push_back({s.Vtilde.values[k].x, s.Vtilde.values[k].y});
    }
    j["A"] = std::move(a);
    j["Vtilde"] = std::move(v);
    return j;
}

inline FlatProblemSpec flat_problem_from_json(const nlohmann::json& j) {
    FlatProblemSpec s;
    const auto& gj = j.at("grid");
    s.grid = Grid(gj.at("nx").get<int>(), gj.at("ny").get<int>(), gj.at("h").get<double>(),
                  Vec2{gj.at("origin").at(0).get<double>(), gj.at("origin").at(1).get<double>()});
    s.V = {j.at("V").at(0).get<double>(), j.at("V").at(1).get<double>()};
    s.delta = j.at("delta").get<double>();
    s.Pi0 = j.at("Pi0").get<double>();
    const auto& a = j.at("A");
    const auto& v = j.at("Vtilde");
    if (a.size() != s.grid.size() || v.size() != s.grid.size())
        throw ConfigError("invalid-config: flat problem arrays do not match the grid");
    s.A = MatrixField::identity(s.grid);
    s.Vtilde = VectorField{s.grid, std::vector<Vec2>(s.grid.size())};
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        s.A.values[k] = Mat2{a[k].at(0).get<double>(), a[k].at(1).get<double>(), a[k].at(2).get<double>()};
        s.Vtilde.values[k] = {v[k].at(0).get<double>(), v[k].at(1).get<double>()};
    }
    return s;
}

}  // namespace fblab
