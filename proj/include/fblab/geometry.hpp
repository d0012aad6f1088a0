#pragma once

// Structured grids, box/obstacle shapes, region classification, nodal fields,
// bilinear interpolation and the basic difference stencils shared by every
// solver in the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "fblab/core.hpp"

namespace fblab {

// ---------------------------------------------------------------------------
// Graph functions g(x') describing obstacles {x_d <= g(x')}
// ---------------------------------------------------------------------------

/// Polynomial sum_k c_k x^k. Derivatives are exact.
struct Polynomial {
    std::vector<double> coeffs;

    double operator()(double x) const {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
        return acc;
    }

    double derivative(double x) const {
        double acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * coeffs[k];
        return acc;
    }

    double second_derivative(double x) const {
        double acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 2;)
            acc = acc * x + static_cast<double>(k * (k - 1)) * coeffs[k];
        return acc;
    }

    bool is_zero() const {
        return std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
    }
};

/// Uniformly sampled graph. Values are linearly interpolated; the derivative
/// uses centered differences of the table (O(spacing^2) at the samples).
struct SampledGraph {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> values;

    SampledGraph() = default;
    SampledGraph(double start, double spacing, std::vector<double> v) : x0(start), dx(spacing), values(std::move(v)) {
        if (values.size() < 3) throw ConfigError("sampled graph needs at least 3 samples");
        if (!(dx > 0.0)) throw ConfigError("sampled graph spacing must be positive");
    }

    double x_end() const { return x0 + dx * static_cast<double>(values.size() - 1); }

    double operator()(double x) const {
        const auto [k, t] = locate(x);
        return (1.0 - t) * values[k] + t * values[k + 1];
    }

    double derivative(double x) const {
        const auto [k, t] = locate(x);
        return (1.0 - t) * slope_at(k) + t * slope_at(k + 1);
    }

    bool is_zero() const {
        return std::all_of(values.begin(), values.end(), [](double c) { return c == 0.0; });
    }

private:
    std::pair<std::size_t, double> locate(double x) const {
        const double s = (x - x0) / dx;
        const double last = static_cast<double>(values.size() - 1);
        if (s < -1e-9 || s > last + 1e-9) throw DomainError("sampled graph evaluated outside its table");
        const double sc = std::clamp(s, 0.0, last);
        auto k = static_cast<std::size_t>(std::floor(sc));
        if (k >= values.size() - 1) k = values.size() - 2;
        return {k, sc - static_cast<double>(k)};
    }

    double slope_at(std::size_t k) const {
        const std::size_t n = values.size();
        if (k == 0) return (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
        if (k == n - 1) return (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
        return (values[k + 1] - values[k - 1]) / (2.0 * dx);
    }
};

class GraphFunction {
public:
    GraphFunction() : impl_(Polynomial{}) {}
    GraphFunction(Polynomial p) : impl_(std::move(p)) {}
    GraphFunction(SampledGraph s) : impl_(std::move(s)) {}

    double operator()(double x) const {
        return std::visit([x](const auto& g) { return g(x); }, impl_);
    }
    double derivative(double x) const {
        return std::visit([x](const auto& g) { return g.derivative(x); }, impl_);
    }
    bool is_zero() const {
        return std::visit([](const auto& g) { return g.is_zero(); }, impl_);
    }
    bool is_polynomial() const { return std::holds_alternative<Polynomial>(impl_); }
    const Polynomial* polynomial() const { return std::get_if<Polynomial>(&impl_); }
    const SampledGraph* samples() const { return std::get_if<SampledGraph>(&impl_); }

private:
    std::variant<Polynomial, SampledGraph> impl_;
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct NodeIndex {
    int i = 0;
    int j = 0;
    constexpr bool operator==(const NodeIndex&) const = default;
};

/// Uniform Cartesian node grid. Node (i, j) sits at origin + (i h, j h).
class Grid {
public:
    Grid() = default;
    Grid(int nx, int ny, double h, Vec2 origin) : nx_(nx), ny_(ny), h_(h), origin_(origin) {
        if (nx < 3 || ny < 3) throw ConfigError("grid needs at least 3 nodes per direction");
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid spacing must be positive");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }
    Vec2 origin() const { return origin_; }
    std::size_t size() const { return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_); }

    Vec2 node(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
    Vec2 node(NodeIndex n) const { return node(n.i, n.j); }
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
    }
    NodeIndex unindex(std::size_t k) const {
        return {static_cast<int>(k % static_cast<std::size_t>(nx_)), static_cast<int>(k / static_cast<std::size_t>(nx_))};
    }
    bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }

    Vec2 upper() const { return node(nx_ - 1, ny_ - 1); }
    bool in_hull(Vec2 p, double slack = 0.0) const {
        const Vec2 hi = upper();
        return p.x >= origin_.x - slack && p.x <= hi.x + slack && p.y >= origin_.y - slack && p.y <= hi.y + slack;
    }

    /// Nearest node to a point (clamped to the grid).
    NodeIndex nearest(Vec2 p) const {
        const int i = std::clamp(static_cast<int>(std::lround((p.x - origin_.x) / h_)), 0, nx_ - 1);
        const int j = std::clamp(static_cast<int>(std::lround((p.y - origin_.y) / h_)), 0, ny_ - 1);
        return {i, j};
    }

    bool operator==(const Grid& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && h_ == o.h_ && origin_ == o.origin_;
    }

private:
    int nx_ = 0;
    int ny_ = 0;
    double h_ = 1.0;
    Vec2 origin_{};
};

/// Direction offsets E, W, N, S followed by the diagonals NE, NW, SE, SW.
inline constexpr std::array<std::array<int, 2>, 4> kAxisDirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// ---------------------------------------------------------------------------
// Shapes
// ---------------------------------------------------------------------------

struct Rectangle {
    Vec2 lo;
    Vec2 hi;
};

struct Disk {
    Vec2 center;
    double radius = 1.0;
};

/// The container B. Signed distance is negative inside.
class BoxShape {
public:
    BoxShape() : impl_(Rectangle{{0.0, 0.0}, {1.0, 1.0}}) {}
    BoxShape(Rectangle r) : impl_(r) {
        if (!(r.hi.x > r.lo.x && r.hi.y > r.lo.y)) throw ConfigError("rectangle box must have positive extent");
    }
    BoxShape(Disk d) : impl_(d) {
        if (!(d.radius > 0.0)) throw ConfigError("disk box must have positive radius");
    }

    static BoxShape unit_square() { return BoxShape(Rectangle{{0.0, 0.0}, {1.0, 1.0}}); }
    static BoxShape unit_disk() { return BoxShape(Disk{{0.0, 0.0}, 1.0}); }

    double signed_distance(Vec2 p) const {
        if (const auto* r = std::get_if<Rectangle>(&impl_)) {
            const double dx = std::max(r->lo.x - p.x, p.x - r->hi.x);
            const double dy = std::max(r->lo.y - p.y, p.y - r->hi.y);
            if (dx <= 0.0 && dy <= 0.0) return std::max(dx, dy);
            return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
        }
        const auto& d = std::get<Disk>(impl_);
        return norm(p - d.center) - d.radius;
    }

    Rectangle bounding_rect() const {
        if (const auto* r = std::get_if<Rectangle>(&impl_)) return *r;
        const auto& d = std::get<Disk>(impl_);
        return {{d.center.x - d.radius, d.center.y - d.radius}, {d.center.x + d.radius, d.center.y + d.radius}};
    }

    bool is_rectangle() const { return std::holds_alternative<Rectangle>(impl_); }
    const Rectangle* rectangle() const { return std::get_if<Rectangle>(&impl_); }
    const Disk* disk() const { return std::get_if<Disk>(&impl_); }

    std::string name() const { return is_rectangle() ? "rectangle" : "disk"; }

private:
    std::variant<Rectangle, Disk> impl_;
};

/// Node-sampled level function of an obstacle, K = {psi <= 0}.
struct SampledLevelSet {
    Grid grid;
    std::vector<double> values;
};

struct NoObstacle {};

/// K = {x_d <= g(x')}, intersected with the closed box.
struct GraphObstacle {
    GraphFunction g;
};

/// K = closed disk.
struct DiskObstacle {
    Vec2 center;
    double radius = 0.0;
};

class Obstacle {
public:
    Obstacle() : impl_(NoObstacle{}) {}
    Obstacle(NoObstacle o) : impl_(o) {}
    Obstacle(GraphObstacle o) : impl_(std::move(o)) {}
    Obstacle(DiskObstacle o) : impl_(o) {}
    Obstacle(SampledLevelSet o) : impl_(std::move(o)) {}

    static Obstacle flat() { return Obstacle(GraphObstacle{Polynomial{{0.0}}}); }

    /// Level function, <= 0 inside K.
    double level(Vec2 p) const {
        return std::visit(
            [p](const auto& o) -> double {
                using T = std::decay_t<decltype(o)>;
                if constexpr (std::is_same_v<T, NoObstacle>) {
                    return std::numeric_limits<double>::infinity();
                } else if constexpr (std::is_same_v<T, GraphObstacle>) {
                    return p.y - o.g(p.x);
                } else if constexpr (std::is_same_v<T, DiskObstacle>) {
                    return norm(p - o.center) - o.radius;
                } else {
                    return sample_level(o, p);
                }
            },
            impl_);
    }

    bool contains(Vec2 p, double eps = 0.0) const { return level(p) <= eps; }
    bool empty() const { return std::holds_alternative<NoObstacle>(impl_); }
    const GraphObstacle* graph() const { return std::get_if<GraphObstacle>(&impl_); }
    const DiskObstacle* disk() const { return std::get_if<DiskObstacle>(&impl_); }
    const SampledLevelSet* sampled() const { return std::get_if<SampledLevelSet>(&impl_); }

    std::string name() const {
        return std::visit(
            [](const auto& o) -> std::string {
                using T = std::decay_t<decltype(o)>;
                if constexpr (std::is_same_v<T, NoObstacle>) return "none";
                else if constexpr (std::is_same_v<T, GraphObstacle>) return "graph";
                else if constexpr (std::is_same_v<T, DiskObstacle>) return "disk";
                else return "level_set";
            },
            impl_);
    }

private:
    static double sample_level(const SampledLevelSet& s, Vec2 p);

    std::variant<NoObstacle, GraphObstacle, DiskObstacle, SampledLevelSet> impl_;
};

// ---------------------------------------------------------------------------
// Coefficients
// ---------------------------------------------------------------------------

/// Matrix-valued coefficient A(x) of div(A grad u).
class Coefficient {
public:
    Coefficient() = default;
    explicit Coefficient(Mat2 constant) : constant_(constant) {}
    explicit Coefficient(std::function<Mat2(Vec2)> fn) : fn_(std::move(fn)) {}

    Mat2 operator()(Vec2 p) const { return fn_ ? fn_(p) : constant_; }
    bool is_constant() const { return !fn_; }
    bool is_identity() const { return !fn_ && constant_ == Mat2::identity(); }
    Mat2 constant() const { return constant_; }

private:
    Mat2 constant_ = Mat2::identity();
    std::function<Mat2(Vec2)> fn_;
};

struct GeometrySpec {
    BoxShape box = BoxShape::unit_square();
    Obstacle obstacle{};
    Vec2 V{0.0, 1.0};
    Coefficient A{};
    double delta = 0.25;
    /// When set, construction checks A V . e_d >= 2 delta (boundary regularity setting).
    bool check_nondegeneracy = false;

    void validate() const {
        if (!(delta > 0.0)) throw ConfigError("delta must be positive");
        if (!std::isfinite(V.x) || !std::isfinite(V.y)) throw ConfigError("V must be finite");
        if (const auto* d = obstacle.disk()) {
            if (!(d->radius > 0.0)) throw ConfigError("disk obstacle radius must be positive");
            // K must sit inside the closed box.
            constexpr int kSamples = 720;
            for (int s = 0; s < kSamples; ++s) {
                const double t = 2.0 * M_PI * s / kSamples;
                const Vec2 p = d->center + Vec2{std::cos(t), std::sin(t)} * d->radius;
                if (box.signed_distance(p) > 1e-12 * (1.0 + d->radius))
                    throw GeometryError("obstacle is not contained in the closed box");
            }
        }
        if (check_nondegeneracy) {
            const Mat2 a = A.constant();
            if ((a * V).y < 2.0 * delta)
                throw GeometryError("nondegeneracy A V . e_d >= 2 delta violated");
        }
    }
};

// ---------------------------------------------------------------------------
// Region classification
// ---------------------------------------------------------------------------

enum class Region : std::uint8_t { Exterior, BoxBoundary, Obstacle, Accessible };

inline const char* to_string(Region r) {
    switch (r) {
        case Region::Exterior: return "EXTERIOR";
        case Region::BoxBoundary: return "BOX_BOUNDARY";
        case Region::Obstacle: return "OBSTACLE";
        case Region::Accessible: return "ACCESSIBLE";
    }
    return "?";
}

/// Per-node region tags plus the node samples of the box distance and
/// obstacle level, which the solvers use to locate sub-grid boundary points
/// by linear interpolation along grid edges.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(Grid g, std::vector<Region> tags, std::vector<double> box_level, std::vector<double> obstacle_level)
        : grid_(g), tags_(std::move(tags)), box_level_(std::move(box_level)), obstacle_level_(std::move(obstacle_level)) {}

    const Grid& grid() const { return grid_; }
    Region operator()(int i, int j) const { return tags_[grid_.index(i, j)]; }
    Region operator[](std::size_t k) const { return tags_[k]; }
    const std::vector<Region>& tags() const { return tags_; }
    double box_level(std::size_t k) const { return box_level_[k]; }
    double obstacle_level(std::size_t k) const { return obstacle_level_[k]; }

    /// True when the node lies on the box boundary itself (Dirichlet node).
    bool on_box_boundary(std::size_t k) const {
        return tags_[k] == Region::BoxBoundary && std::abs(box_level_[k]) <= boundary_eps();
    }
    double boundary_eps() const { return 1e-9 * grid_.h(); }

    std::size_t count(Region r) const {
        return static_cast<std::size_t>(std::count(tags_.begin(), tags_.end(), r));
    }

private:
    Grid grid_;
    std::vector<Region> tags_;
    std::vector<double> box_level_;
    std::vector<double> obstacle_level_;
};

inline Grid build_grid(const BoxShape& box, int resolution) {
    if (resolution < 3) throw ConfigError("invalid-config: resolution must be >= 3");
    const Rectangle r = box.bounding_rect();
    const double wx = r.hi.x - r.lo.x;
    const double wy = r.hi.y - r.lo.y;
    const double extent = std::max(wx, wy);
    const double h = extent / (resolution - 1);
    auto count = [h](double w) {
        const double c = w / h;
        return static_cast<int>(std::ceil(c - 1e-9)) + 1;
    };
    return Grid(count(wx), count(wy), h, r.lo);
}

/// Tag for a single point (no neighborhood information, so points inside B
/// near its boundary are reported ACCESSIBLE unless exactly on it).
inline Region classify_point(const GeometrySpec& geom, Vec2 p, double eps = 1e-12) {
    const double sb = geom.box.signed_distance(p);
    if (sb > eps) return Region::Exterior;
    if (geom.obstacle.contains(p, eps)) return Region::Obstacle;
    if (sb >= -eps) return Region::BoxBoundary;
    return Region::Accessible;
}

inline RegionMask classify_nodes(const Grid& grid, const GeometrySpec& geom) {
    geom.validate();
    const std::size_t n = grid.size();
    std::vector<double> box_level(n), obs_level(n);
    std::vector<Region> tags(n, Region::Exterior);
    const double eps = 1e-9 * grid.h();
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            const std::size_t k = grid.index(i, j);
            const Vec2 p = grid.node(i, j);
            box_level[k] = geom.box.signed_distance(p);
            obs_level[k] = geom.obstacle.level(p);
            if (!std::isfinite(obs_level[k])) obs_level[k] = std::numeric_limits<double>::max();
        }
    }
    for (int j = 0; j < grid.ny(); ++j) {
        for (int i = 0; i < grid.nx(); ++i) {
            const std::size_t k = grid.index(i, j);
            const bool in_box = box_level[k] <= eps;
            const bool in_k = obs_level[k] <= eps;
            if (!in_box) {
                if (in_k && geom.obstacle.sampled())
                    throw GeometryError("obstacle is not contained in the closed box");
                tags[k] = Region::Exterior;
                continue;
            }
            if (in_k) {
                tags[k] = Region::Obstacle;
                continue;
            }
            bool touches_exterior = box_level[k] >= -eps;
            for (const auto& d : kAxisDirs) {
                const int ii = i + d[0];
                const int jj = j + d[1];
                if (!grid.contains(ii, jj) || box_level[grid.index(ii, jj)] > eps) touches_exterior = true;
            }
            tags[k] = touches_exterior ? Region::BoxBoundary : Region::Accessible;
        }
    }
    return RegionMask(grid, std::move(tags), std::move(box_level), std::move(obs_level));
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(Grid g, double fill = 0.0) : grid_(g), values_(g.size(), fill) {}
    ScalarField(Grid g, std::vector<double> v) : grid_(g), values_(std::move(v)) {
        if (values_.size() != grid_.size()) throw ConfigError("field size does not match grid");
    }

    template <class F>
    static ScalarField sample(const Grid& g, F&& f) {
        ScalarField out(g);
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) out(i, j) = f(g.node(i, j));
        return out;
    }

    const Grid& grid() const { return grid_; }
    double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
    double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }

private:
    Grid grid_;
    std::vector<double> values_;
};

struct MatrixField {
    Grid grid;
    std::vector<Mat2> values;

    static MatrixField identity(const Grid& g) { return {g, std::vector<Mat2>(g.size(), Mat2::identity())}; }
    static MatrixField constant(const Grid& g, Mat2 a) { return {g, std::vector<Mat2>(g.size(), a)}; }
    static MatrixField sample(const Grid& g, const Coefficient& c) {
        MatrixField f{g, std::vector<Mat2>(g.size())};
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) f.values[g.index(i, j)] = c(g.node(i, j));
        return f;
    }

    const Mat2& operator()(int i, int j) const { return values[grid.index(i, j)]; }
    bool is_identity() const {
        return std::all_of(values.begin(), values.end(), [](const Mat2& a) { return a == Mat2::identity(); });
    }
};

struct VectorField {
    Grid grid;
    std::vector<Vec2> values;

    static VectorField constant(const Grid& g, Vec2 v) { return {g, std::vector<Vec2>(g.size(), v)}; }
    const Vec2& operator()(int i, int j) const { return values[grid.index(i, j)]; }
};

/// Bilinear interpolation. Exact on bilinear functions and at nodes.
inline double interpolate(const ScalarField& f, Vec2 p) {
    const Grid& g = f.grid();
    const double tol = 1e-12 * g.h();
    if (!g.in_hull(p, tol) || !std::isfinite(p.x) || !std::isfinite(p.y))
        throw DomainError("interpolation point outside the grid hull");
    auto split = [&](double s, int n) {
        double r = std::round(s);
        if (std::abs(s - r) < 1e-12) s = r;
        s = std::clamp(s, 0.0, static_cast<double>(n - 1));
        int k = static_cast<int>(std::floor(s));
        if (k >= n - 1) k = n - 2;
        return std::pair<int, double>{k, s - k};
    };
    const auto [i, tx] = split((p.x - g.origin().x) / g.h(), g.nx());
    const auto [j, ty] = split((p.y - g.origin().y) / g.h(), g.ny());
    if (tx == 0.0 && ty == 0.0) return f(i, j);
    const double f00 = f(i, j), f10 = f(i + 1, j), f01 = f(i, j + 1), f11 = f(i + 1, j + 1);
    return (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11);
}

inline double Obstacle::sample_level(const SampledLevelSet& s, Vec2 p) {
    if (!s.grid.in_hull(p, 1e-12 * s.grid.h())) return std::numeric_limits<double>::max();
    return interpolate(ScalarField(s.grid, s.values), p);
}

enum class GradientSide { Centered, OneSidedFromPositive };

/// Nodal gradient. Centered mode is second order; one-sided mode only reads
/// neighbors where the field is positive (plus the node itself), falling back
/// to the second-order one-sided three-point formula.
inline Vec2 gradient_at(const ScalarField& f, NodeIndex n, GradientSide side = GradientSide::Centered) {
    const Grid& g = f.grid();
    const double h = g.h();
    if (!g.contains(n.i, n.j)) throw DomainError("gradient node outside the grid");
    auto component = [&](int di, int dj) -> double {
        auto val = [&](int s) -> std::pair<bool, double> {
            const int ii = n.i + s * di, jj = n.j + s * dj;
            if (!g.contains(ii, jj)) return {false, 0.0};
            return {true, f(ii, jj)};
        };
        const auto [hp, fp] = val(1);
        const auto [hm, fm] = val(-1);
        const double f0 = f(n.i, n.j);
        if (side == GradientSide::Centered) {
            if (!hp || !hm) throw DomainError("centered stencil leaves the grid");
            return (fp - fm) / (2.0 * h);
        }
        const bool pos_p = hp && fp > 0.0;
        const bool pos_m = hm && fm > 0.0;
        if (pos_p && pos_m) return (fp - fm) / (2.0 * h);
        if (pos_p) {
            const auto [hpp, fpp] = val(2);
            if (hpp && fpp > 0.0) return (-3.0 * f0 + 4.0 * fp - fpp) / (2.0 * h);
            return (fp - f0) / h;
        }
        if (pos_m) {
            const auto [hmm, fmm] = val(-2);
            if (hmm && fmm > 0.0) return (3.0 * f0 - 4.0 * fm + fmm) / (2.0 * h);
            return (f0 - fm) / h;
        }
        if (hp && hm) return (fp - fm) / (2.0 * h);
        if (hp) return (fp - f0) / h;
        if (hm) return (f0 - fm) / h;
        throw DomainError("one-sided stencil leaves the grid");
    };
    return {component(1, 0), component(0, 1)};
}

/// Nodal gradient field: centered in the interior, second-order one-sided at
/// the grid edges.
inline std::pair<ScalarField, ScalarField> gradient_field(const ScalarField& f) {
    const Grid& g = f.grid();
    const double h = g.h();
    ScalarField gx(g), gy(g);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (i == 0) gx(i, j) = (-3.0 * f(0, j) + 4.0 * f(1, j) - f(2, j)) / (2.0 * h);
            else if (i == g.nx() - 1) gx(i, j) = (3.0 * f(i, j) - 4.0 * f(i - 1, j) + f(i - 2, j)) / (2.0 * h);
            else gx(i, j) = (f(i + 1, j) - f(i - 1, j)) / (2.0 * h);
            if (j == 0) gy(i, j) = (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) / (2.0 * h);
            else if (j == g.ny() - 1) gy(i, j) = (3.0 * f(i, j) - 4.0 * f(i, j - 1) + f(i, j - 2)) / (2.0 * h);
            else gy(i, j) = (f(i, j + 1) - f(i, j - 1)) / (2.0 * h);
        }
    }
    return {std::move(gx), std::move(gy)};
}

}  // namespace fblab
