#include <gtest/gtest.h>

#include <set>

#include "fblab/geometry.hpp"

using namespace fblab;

TEST(BuildGrid, UnitSquare65) {
    const Grid g = build_grid(BoxShape::unit_square(), 65);
    EXPECT_EQ(g.nx(), 65);
    EXPECT_EQ(g.ny(), 65);
    EXPECT_DOUBLE_EQ(g.h(), 1.0 / 64.0);
}

TEST(BuildGrid, UnitDisk129) {
    const Grid g = build_grid(BoxShape::unit_disk(), 129);
    EXPECT_EQ(g.nx(), 129);
    EXPECT_EQ(g.ny(), 129);
    EXPECT_DOUBLE_EQ(g.h(), 2.0 / 128.0);
    EXPECT_DOUBLE_EQ(g.origin().x, -1.0);
    EXPECT_DOUBLE_EQ(g.upper().y, 1.0);
}

TEST(BuildGrid, ResolutionTwoRejected) { EXPECT_THROW(build_grid(BoxShape::unit_square(), 2), ConfigError); }

TEST(BuildGrid, NodeCoordinatesExact) {
    const Grid g(5, 4, 0.25, {1.0, -2.0});
    EXPECT_EQ(g.node(3, 2).x, 1.0 + 3 * 0.25);
    EXPECT_EQ(g.node(3, 2).y, -2.0 + 2 * 0.25);
    EXPECT_EQ(g.unindex(g.index(3, 2)), (NodeIndex{3, 2}));
}

namespace {
GeometrySpec disk_half_plane() {
    GeometrySpec gs;
    gs.box = BoxShape::unit_disk();
    gs.obstacle = Obstacle::flat();
    return gs;
}
}  // namespace

TEST(ClassifyNodes, DiskWithHalfPlaneObstacle) {
    const GeometrySpec gs = disk_half_plane();
    EXPECT_EQ(classify_point(gs, {0.0, 0.5}), Region::Accessible);
    EXPECT_EQ(classify_point(gs, {0.0, -0.5}), Region::Obstacle);
    EXPECT_EQ(classify_point(gs, {2.0, 0.0}), Region::Exterior);

    const Grid g = build_grid(gs.box, 33);
    const RegionMask m = classify_nodes(g, gs);
    const NodeIndex up = g.nearest({0.0, 0.5}), down = g.nearest({0.0, -0.5});
    EXPECT_EQ(m(up.i, up.j), Region::Accessible);
    EXPECT_EQ(m(down.i, down.j), Region::Obstacle);
}

TEST(ClassifyNodes, MaskIsPartition) {
    const GeometrySpec gs = disk_half_plane();
    const Grid g = build_grid(gs.box, 33);
    const RegionMask m = classify_nodes(g, gs);
    EXPECT_EQ(m.count(Region::Exterior) + m.count(Region::BoxBoundary) + m.count(Region::Obstacle) +
                  m.count(Region::Accessible),
              g.size());
    EXPECT_GT(m.count(Region::BoxBoundary), 0u);
}

TEST(ClassifyNodes, ObstacleOutsideBoxRejected) {
    GeometrySpec gs;
    gs.obstacle = Obstacle(DiskObstacle{{0.9, 0.5}, 0.3});
    EXPECT_THROW(gs.validate(), GeometryError);
}

TEST(GradientAt, LinearFieldExact) {
    const Grid g(9, 9, 0.125, {0.0, 0.0});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return p.x; });
    for (int j = 1; j < 8; ++j)
        for (int i = 1; i < 8; ++i) {
            const Vec2 d = gradient_at(f, {i, j});
            EXPECT_NEAR(d.x, 1.0, 1e-13);
            EXPECT_NEAR(d.y, 0.0, 1e-13);
        }
}

TEST(GradientAt, AffineFieldExactEverywhere) {
    const Grid g(7, 6, 0.2, {-0.5, 0.1});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return 0.3 - 1.7 * p.x + 2.5 * p.y; });
    for (int j = 1; j + 1 < g.ny(); ++j)
        for (int i = 1; i + 1 < g.nx(); ++i) {
            const Vec2 d = gradient_at(f, {i, j});
            EXPECT_NEAR(d.x, -1.7, 1e-12);
            EXPECT_NEAR(d.y, 2.5, 1e-12);
        }
    EXPECT_THROW(gradient_at(f, {0, 2}), DomainError);
}

TEST(GradientAt, CenteredQuadraticExact) {
    const Grid g(9, 9, 0.125, {0.0, 0.0});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return p.x * p.x; });
    const Vec2 d = gradient_at(f, g.nearest({0.5, 0.5}));
    EXPECT_DOUBLE_EQ(d.x, 1.0);
}

TEST(GradientAt, OneSidedFromPositive) {
    const int n = 33;
    const Grid g(n, n, 1.0 / (n - 1), {0.0, -0.5});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return 2.0 * std::max(p.y, 0.0); });
    const NodeIndex at = g.nearest({0.5, g.h()});
    const Vec2 d = gradient_at(f, at, GradientSide::OneSidedFromPositive);
    EXPECT_NEAR(d.x, 0.0, 1e-12);
    EXPECT_NEAR(d.y, 2.0, 2.0 * g.h());
}

TEST(GradientAt, StencilOutsideGrid) {
    const Grid g(5, 5, 0.25, {0.0, 0.0});
    const ScalarField f(g, 1.0);
    EXPECT_THROW(gradient_at(f, {7, 2}), DomainError);
}

TEST(Interpolate, Constant) {
    const Grid g(5, 5, 0.25, {0.0, 0.0});
    EXPECT_DOUBLE_EQ(interpolate(ScalarField(g, 3.0), {0.37, 0.61}), 3.0);
}

TEST(Interpolate, BilinearExactAtCellCenter) {
    const Grid g(5, 5, 0.25, {0.0, 0.0});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return p.x * p.y; });
    EXPECT_NEAR(interpolate(f, {0.375, 0.625}), 0.375 * 0.625, 1e-15);
}

TEST(Interpolate, ReproducesNodalValues) {
    const Grid g(6, 5, 0.2, {0.0, 0.0});
    const ScalarField f = ScalarField::sample(g, [](Vec2 p) { return std::sin(3 * p.x) + p.y * p.y; });
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) EXPECT_EQ(interpolate(f, g.node(i, j)), f(i, j));
}

TEST(Interpolate, OutsideHull) {
    const Grid g(5, 5, 0.25, {0.0, 0.0});
    EXPECT_THROW(interpolate(ScalarField(g, 1.0), {1.5, 0.5}), DomainError);
}

TEST(Coefficient, NonSpdMatrixDetected) {
    EXPECT_FALSE((Mat2{1.0, 2.0, 1.0}).positive_definite());
    EXPECT_TRUE((Mat2{2.0, 0.5, 1.0}).positive_definite());
}
