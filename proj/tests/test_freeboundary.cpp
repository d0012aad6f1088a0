#include <gtest/gtest.h>

#include <cmath>

#include "fblab/freeboundary.hpp"

using namespace fblab;

namespace {

GeometrySpec strip(Vec2 V) {
    GeometrySpec gs;
    gs.V = V;
    return gs;
}

double mean_height(const FreeBoundaryCurve& fb) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : fb.points)
        if (!p.near_box) {
            s += p.x.y;
            ++n;
        }
    return n ? s / static_cast<double>(n) : std::nan("");
}

ScalarField front_at(const Grid& g, double a) {
    return ScalarField::sample(g, [a](Vec2 p) { return p.y - a; });
}

}  // namespace

TEST(InfSupersolutions, OrderedPairReturnsSmaller) {
    const Grid g(9, 9, 0.125, {0.0, 0.0});
    const ScalarField w1 = ScalarField::sample(g, [](Vec2 p) { return p.y; });
    const ScalarField w2 = ScalarField::sample(g, [](Vec2 p) { return p.y + 0.1 + p.x; });
    EXPECT_EQ(inf_supersolutions(w1, w2).values(), w1.values());
    EXPECT_EQ(inf_supersolutions(w1, w1).values(), w1.values());
}

TEST(InfSupersolutions, CrossingPlanes) {
    const Grid g(9, 9, 0.125, {0.0, 0.0});
    const ScalarField w1 = ScalarField::sample(g, [](Vec2 p) { return p.x; });
    const ScalarField w2 = ScalarField::sample(g, [](Vec2 p) { return 1.0 - p.x; });
    const ScalarField w = inf_supersolutions(w1, w2);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(w[k], std::min(w1[k], w2[k]));
}

TEST(InfSupersolutions, ShapeMismatch) {
    EXPECT_THROW(inf_supersolutions(ScalarField(Grid(5, 5, 0.25, {0, 0})), ScalarField(Grid(9, 9, 0.125, {0, 0}))),
                 ConfigError);
}

TEST(HarmonicReplacement, HarmonicInputIsFixedPoint) {
    const GeometrySpec gs;
    const Grid g = build_grid(gs.box, 33);
    const ScalarField w = ScalarField::sample(g, [](Vec2 p) { return std::max(p.y - 0.31, 0.0); });
    const ScalarField wb = harmonic_replacement(w, gs);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(wb[k], w[k], 1e-7);
}

TEST(HarmonicReplacement, KinkedMinimumDecreases) {
    const GeometrySpec gs;
    const Grid g = build_grid(gs.box, 33);
    const ScalarField w = inf_supersolutions(ScalarField::sample(g, [](Vec2 p) { return 0.2 + p.y + 0.3 * p.x; }),
                                             ScalarField::sample(g, [](Vec2 p) { return 1.2 - p.y + 0.3 * p.x; }));
    const ScalarField wb = harmonic_replacement(w, gs);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LE(wb[k], w[k] + 1e-9);
    const NodeIndex kink = g.nearest({0.5, 0.5});
    EXPECT_GT(w(kink.i, kink.j) - wb(kink.i, kink.j), 1e-2);
}

TEST(HarmonicReplacement, ZeroStaysZero) {
    const GeometrySpec gs;
    const Grid g = build_grid(gs.box, 17);
    const ScalarField wb = harmonic_replacement(ScalarField(g, 0.0), gs);
    for (double v : wb.values()) EXPECT_EQ(v, 0.0);
}

TEST(FbResidual, PlaneWithMatchingSlopeVanishes) {
    const Grid g(65, 65, 1.0 / 64, {0.0, 0.0});
    const Vec2 V{0.3, 1.0};
    const ScalarField u = ScalarField::sample(g, [](Vec2 p) { return std::max(p.y - 0.51, 0.0); });
    FreeBoundaryCurve fb = extract_free_boundary(u);
    ASSERT_FALSE(fb.empty());
    for (double r : fb_residual(u, fb, V)) EXPECT_NEAR(r, 0.0, g.h());
}

TEST(FbResidual, OversteepPlane) {
    const Grid g(65, 65, 1.0 / 64, {0.0, 0.0});
    const ScalarField u = ScalarField::sample(g, [](Vec2 p) { return 2.0 * std::max(p.y - 0.51, 0.0); });
    FreeBoundaryCurve fb = extract_free_boundary(u);
    for (double r : fb_residual(u, fb, {0.3, 1.0})) EXPECT_NEAR(r, 2.0, 2.0 * g.h());
}

TEST(FbResidual, VelocityTangentToFront) {
    const Grid g(65, 65, 1.0 / 64, {0.0, 0.0});
    const ScalarField u = ScalarField::sample(g, [](Vec2 p) { return std::max(p.y - 0.51, 0.0); });
    FreeBoundaryCurve fb = extract_free_boundary(u);
    for (double r : fb_residual(u, fb, {1.0, 0.0})) EXPECT_NEAR(r, 1.0, g.h());
}

TEST(ExtractFreeBoundary, HorizontalLine) {
    const Grid g(33, 33, 1.0 / 32, {0.0, 0.0});
    const double a = 0.5 + g.h() / 3.0;
    const ScalarField u = ScalarField::sample(g, [a](Vec2 p) { return std::max(p.y - a, 0.0); });
    const FreeBoundaryCurve fb = extract_free_boundary(u);
    ASSERT_EQ(fb.size(), static_cast<std::size_t>(g.nx()));
    EXPECT_EQ(fb.components, 1);
    for (const auto& p : fb.points) {
        EXPECT_NEAR(p.x.y, a, 1e-12);
        EXPECT_NEAR(norm(p.normal), 1.0, 1e-12);
    }
}

TEST(ExtractFreeBoundary, ZeroFieldGivesEmptyCurve) {
    EXPECT_TRUE(extract_free_boundary(ScalarField(Grid(9, 9, 0.125, {0, 0}), 0.0)).empty());
}

TEST(ExtractFreeBoundary, CollapsedOnObstacle) {
    GeometrySpec gs;
    gs.box = BoxShape(Rectangle{{-0.5, 0.0}, {0.5, 1.0}});
    gs.obstacle = Obstacle::flat();
    const Grid g = build_grid(gs.box, 33);
    const RegionMask m = classify_nodes(g, gs);
    const ScalarField u = ScalarField::sample(g, [](Vec2 p) { return std::max(p.y, 0.0) + 0.0; });
    const FreeBoundaryCurve fb = extract_free_boundary(u, m);
    ASSERT_FALSE(fb.empty());
    for (const auto& p : fb.points) EXPECT_EQ(p.tag, FbTag::K);
}

TEST(AdvanceFront, StationaryPlaneBarelyMoves) {
    FreeBoundaryConfig cfg;
    cfg.resolution = 33;
    const TrialProblem P(strip({0.3, 1.0}), [](Vec2 p) { return std::max(p.y - 0.3, 0.0); }, cfg);
    const TrialState s = P.state_from_phi(front_at(P.grid(), 0.3), ScalarField(P.grid(), 0.0));
    const TrialState next = P.advance_front(s, 0.5 * P.grid().h());
    EXPECT_LT(next.displacement, 0.05);
}

TEST(AdvanceFront, OversteepPlaneGrows) {
    FreeBoundaryConfig cfg;
    cfg.resolution = 33;
    const TrialProblem P(strip({0.3, 1.0}), [](Vec2 p) { return 2.0 * std::max(p.y - 0.3, 0.0); }, cfg);
    TrialState s = P.state_from_phi(front_at(P.grid(), 0.3), ScalarField(P.grid(), 0.0));
    const double before = mean_height(P.free_boundary(s.u));
    for (int k = 0; k < 5; ++k) s = P.advance_front(s, 0.25 * P.grid().h());
    EXPECT_LT(mean_height(P.free_boundary(s.u)), before - 0.5 * P.grid().h());
}

TEST(AdvanceFront, CflViolationRejected) {
    FreeBoundaryConfig cfg;
    cfg.resolution = 33;
    const TrialProblem P(strip({0.3, 1.0}), [](Vec2 p) { return 2.0 * std::max(p.y - 0.3, 0.0); }, cfg);
    const TrialState s = P.state_from_phi(front_at(P.grid(), 0.3), ScalarField(P.grid(), 0.0));
    EXPECT_THROW(P.advance_front(s, 10.0), StepError);
}

TEST(AdvanceFront, FrontNeverEntersObstacle) {
    GeometrySpec gs;
    gs.box = BoxShape(Rectangle{{-0.5, 0.0}, {0.5, 1.0}});
    gs.obstacle = Obstacle::flat();
    gs.V = {0.3, 1.0};
    FreeBoundaryConfig cfg;
    cfg.resolution = 33;
    const TrialProblem P(gs, [](Vec2 p) { return 3.0 * std::max(p.y - 0.05, 0.0); }, cfg);
    TrialState s = P.state_from_phi(front_at(P.grid(), 0.05), ScalarField(P.grid(), 0.0));
    for (int k = 0; k < 10; ++k) s = P.advance_front(s, 0.2 * P.grid().h());
    const RegionMask& m = P.mask();
    for (std::size_t k = 0; k < P.grid().size(); ++k)
        if (m[k] == Region::Obstacle) {
            EXPECT_LE(s.phi[k], 0.0);
            EXPECT_EQ(s.u[k], 0.0);
        }
}

TEST(SolveStationary, StripRecoversPlaneWave) {
    const GeometrySpec gs = strip({0.3, 1.0});
    const auto datum = [](Vec2 p) { return std::max(p.y - 0.3, 0.0); };
    FreeBoundaryConfig cfg;
    cfg.resolution = 65;
    cfg.max_steps = 3000;
    const TrialProblem P(gs, datum, cfg);
    const Solution sol = P.solve();
    ASSERT_TRUE(sol.converged) << sol.message;
    const Grid& g = P.grid();
    for (const auto& p : sol.fb.points)
        if (!p.near_box) {
            EXPECT_NEAR(p.x.y, 0.3, 2.0 * g.h());
        }
    EXPECT_LE(sol.stats.max_abs_d, cfg.fb_tol);
    const RegionMask& m = P.mask();
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_GE(sol.u[k], 0.0);
        EXPECT_LE(sol.u[k], sol.H[k] + 2.0 * cfg.elliptic.tolerance);
        if (m.on_box_boundary(k)) {
            EXPECT_DOUBLE_EQ(sol.u[k], datum(g.node(g.unindex(k))));
        }
    }
}

TEST(SolveStationary, VerticalVelocityTravelingWave) {
    const auto datum = [](Vec2 p) { return 0.7 * std::max(p.y - 0.4, 0.0); };
    FreeBoundaryConfig cfg;
    cfg.resolution = 65;
    cfg.max_steps = 3000;
    const Solution sol = solve_stationary(strip({0.0, 0.7}), datum, cfg);
    ASSERT_TRUE(sol.converged) << sol.message;
    const double h = 1.0 / 64;
    for (const auto& p : sol.fb.points)
        if (!p.near_box) {
            EXPECT_NEAR(p.x.y, 0.4, 2.0 * h);
        }
}

TEST(SolveStationary, NestedInitialSetsStayNested) {
    const auto datum = [](Vec2 p) { return std::max(p.y - 0.3, 0.0); };
    FreeBoundaryConfig cfg;
    cfg.resolution = 65;
    cfg.max_steps = 3000;
    const TrialProblem P(strip({0.3, 1.0}), datum, cfg);
    const ScalarField small = front_at(P.grid(), 0.4), large = front_at(P.grid(), 0.35);
    const Solution a = P.solve(&small), b = P.solve(&large);
    ASSERT_TRUE(a.converged) << a.message;
    ASSERT_TRUE(b.converged) << b.message;
    EXPECT_LE(mean_height(b.fb), mean_height(a.fb) + P.grid().h());
}

TEST(SolveStationary, NonConvergenceIsReported) {
    FreeBoundaryConfig cfg;
    cfg.resolution = 33;
    cfg.max_steps = 2;
    const Solution sol = solve_stationary(strip({0.3, 1.0}), [](Vec2 p) { return 2.0 * std::max(p.y - 0.6, 0.0); }, cfg);
    EXPECT_FALSE(sol.converged);
    EXPECT_FALSE(sol.message.empty());
    EXPECT_EQ(sol.displacement_history.size(), 2u);
}

TEST(SolveStationary, InvalidInputs) {
    FreeBoundaryConfig cfg;
    cfg.resolution = 2;
    EXPECT_THROW(TrialProblem(strip({0.3, 1.0}), [](Vec2) { return 0.0; }, cfg), ConfigError);
    cfg.resolution = 17;
    EXPECT_THROW(TrialProblem(strip({0.3, 1.0}), [](Vec2) { return -1.0; }, cfg), ConfigError);
}
