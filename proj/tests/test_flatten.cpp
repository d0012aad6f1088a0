#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fblab/flatten.hpp"

using namespace fblab;

namespace {

GraphFunction poly(std::vector<double> c) { return GraphFunction(Polynomial{std::move(c)}); }

const Grid kFlatGrid(33, 33, 1.0 / 32, {-0.5, 0.0});

}  // namespace

TEST(Theta, ZeroGraphIsIdentity) {
    const FlatteningMap m{poly({0.0}), 1.0};
    const Vec2 x{0.3, -0.4};
    EXPECT_EQ(m.theta(x), x);
    EXPECT_EQ(m.theta_inv(x), x);
}

TEST(Theta, LinearGraph) {
    const FlatteningMap m{poly({0.0, 1.0}), 1.0};
    const Vec2 y = m.theta({0.5, 0.7});
    EXPECT_DOUBLE_EQ(y.x, 0.5);
    EXPECT_NEAR(y.y, 0.2, 1e-15);
}

TEST(Theta, RoundTrip) {
    const FlatteningMap m{poly({0.01, -0.2, 0.3, 0.05}), 1.0};
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int s = 0; s < 100; ++s) {
        const Vec2 x{U(rng), U(rng)};
        const Vec2 back = m.theta_inv(m.theta(x));
        EXPECT_EQ(back.x, x.x);
        EXPECT_NEAR(back.y, x.y, 4e-16);
    }
}

TEST(Theta, OutsideDomain) {
    const FlatteningMap m{poly({0.0}), 0.5};
    EXPECT_THROW(m.theta({0.8, 0.0}), DomainError);
}

TEST(PullbackMatrix, Examples) {
    EXPECT_EQ(pullback_matrix(poly({0.0}), {0.2, 0.3}), Mat2::identity());
    const Mat2 A = pullback_matrix(poly({0.0, 1.0}), {0.2, 0.3});
    EXPECT_DOUBLE_EQ(A.a11, 1.0);
    EXPECT_DOUBLE_EQ(A.a12, -1.0);
    EXPECT_DOUBLE_EQ(A.a22, 2.0);
    for (double a : {-3.0, -0.4, 0.0, 0.7, 5.0}) {
        const Mat2 B = pullback_matrix(poly({0.0, a}), {0.0, 0.0});
        EXPECT_NEAR(B.det(), 1.0, 1e-12);
        EXPECT_TRUE(B.positive_definite());
    }
}

TEST(PullbackVector, Examples) {
    EXPECT_EQ(pullback_vector(poly({0.0}), {0.1, 0.1}, {0.3, 1.0}), (Vec2{0.3, 1.0}));
    const Vec2 v = pullback_vector(poly({0.0, 1.0}), {0.1, 0.1}, {1.0, 1.0});
    EXPECT_DOUBLE_EQ(v.x, 2.0);
    EXPECT_DOUBLE_EQ(v.y, 1.0);
    for (double a : {-2.0, 0.5, 3.0}) EXPECT_EQ(pullback_vector(poly({0.0, a}), {0.0, 0.0}, {1.0, 0.0}), (Vec2{1.0, 0.0}));
}

TEST(PullbackVector, FreeBoundaryConditionTransforms) {
    // |grad u|^2 - grad u . V equals A grad v . grad v - grad v . A Vt.
    const GraphFunction g = poly({0.0, 0.2, -0.4});
    const Vec2 y{0.3, 0.1}, V{0.3, 1.0}, gv{0.7, -1.1};
    const double a = g.derivative(y.x);
    const Vec2 gu{gv.x - a * gv.y, gv.y};
    const Mat2 A = pullback_matrix(g, y);
    const Vec2 Vt = pullback_vector(g, y, V);
    EXPECT_NEAR(dot(gu, gu) - dot(gu, V), dot(A * gv, gv) - dot(gv, A * Vt), 1e-14);
}

TEST(ValidateFlattening, FlatObstaclePassesExactly) {
    const FlatProblemSpec s = flatten_problem({poly({0.0}), 1.0}, kFlatGrid, {0.0, 1.0}, 0.25, 0.1);
    const FlatteningReport r = validate_flattening(s);
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.a_minus_identity.value, 0.0);
    EXPECT_EQ(r.drift_defect.value, 0.0);
    EXPECT_EQ(r.max_det_error, 0.0);
}

TEST(ValidateFlattening, LinearGraphNorm) {
    const FlatteningMap m{poly({0.0, 0.5}), 1.0};
    EXPECT_DOUBLE_EQ(validate_flattening(flatten_problem(m, kFlatGrid, {0.0, 1.0}, 0.25, 0.5)).a_minus_identity.value, 0.5);
    EXPECT_TRUE(validate_flattening(flatten_problem(m, kFlatGrid, {0.0, 1.0}, 0.25, 0.5)).a_minus_identity.pass);
    EXPECT_FALSE(validate_flattening(flatten_problem(m, kFlatGrid, {0.0, 1.0}, 0.25, 0.49)).a_minus_identity.pass);
}

TEST(ValidateFlattening, TangentialDriftFlagged) {
    const FlatteningReport r = validate_flattening(flatten_problem({poly({0.0}), 1.0}, kFlatGrid, {1.0, 0.0}, 0.25));
    EXPECT_FALSE(r.nondegeneracy.pass);
    EXPECT_EQ(r.nondegeneracy.value, 0.0);
    EXPECT_FALSE(r.pass());
}

TEST(FlattenProblem, RandomPolynomialsKeepUnitDeterminant) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    for (int s = 0; s < 10; ++s) {
        const FlatteningMap m{poly({U(rng), U(rng), U(rng), U(rng)}), 1.0};
        const FlatteningReport r = validate_flattening(flatten_problem(m, kFlatGrid, {0.3, 1.0}));
        EXPECT_LE(r.max_det_error, 1e-12);
        EXPECT_TRUE(r.spd);
        for (std::size_t k = 0; k < kFlatGrid.size(); k += 37) {
            const Mat2 A = pullback_matrix(m.g, kFlatGrid.node(kFlatGrid.unindex(k)));
            EXPECT_GT(A.eigenvalues().first, 0.0);
        }
    }
}

TEST(FlattenProblem, ZeroGraphMatchesConstantSpec) {
    const FlatProblemSpec s = flatten_problem({poly({0.0}), 1.0}, kFlatGrid, {0.3, 1.0});
    for (std::size_t k = 0; k < kFlatGrid.size(); ++k) {
        EXPECT_EQ(s.A.values[k], Mat2::identity());
        EXPECT_EQ(s.Vtilde.values[k], (Vec2{0.3, 1.0}));
    }
}

TEST(FlattenProblem, JsonRoundTrip) {
    const FlatProblemSpec s = flatten_problem({poly({0.0, 0.02, 0.03}), 1.0}, kFlatGrid, {0.3, 1.0}, 0.25, 0.1);
    const FlatProblemSpec t = flat_problem_from_json(nlohmann::json::parse(to_json(s).dump()));
    EXPECT_EQ(t.grid, s.grid);
    for (std::size_t k = 0; k < kFlatGrid.size(); ++k) {
        EXPECT_EQ(t.A.values[k], s.A.values[k]);
        EXPECT_EQ(t.Vtilde.values[k], s.Vtilde.values[k]);
    }
}

TEST(PullbackConsistency, LinearGraphResidualVanishesUnderRefinement) {
    const FlatteningMap m{poly({0.0, 1.0}), 1.0};
    double prev = 0.0;
    for (int n : {33, 65, 129}) {
        const Grid g(n, n, 1.0 / (n - 1), {-0.5, 0.0});
        const double r = pullback_consistency_residual(m, g, [](Vec2 x) { return x.x; });
        EXPECT_LE(r, 1e-8);
        if (prev > 0.0) {
            EXPECT_LE(r, prev + 1e-9);
        }
        prev = r;
    }
}

TEST(PullbackConsistency, IdentityMapTruncationOnly) {
    const FlatteningMap m{poly({0.0}), 1.0};
    const double r = pullback_consistency_residual(m, kFlatGrid, [](Vec2 x) { return x.x * x.x - x.y * x.y; });
    EXPECT_LE(r, 1e-9);
}

TEST(PullbackConsistency, QuadraticGraphRefinement) {
    const FlatteningMap m{poly({0.0, 0.0, 0.3}), 1.0};
    double prev = 0.0;
    for (int n : {33, 65, 129}) {
        const Grid g(n, n, 1.0 / (n - 1), {-0.5, 0.0});
        const double r = pullback_consistency_residual(m, g, [](Vec2 x) { return x.x * x.x - x.y * x.y; });
        if (prev > 0.0) {
            EXPECT_GE(prev / r, 1.8);
        }
        prev = r;
    }
}

TEST(ChooseEta0, PassesAtChosenAmplitude) {
    const double eta = choose_eta0(Polynomial{{0.0, 0.0, 1.0}}, 1.0, kFlatGrid, {0.3, 1.0}, 0.25);
    EXPECT_GT(eta, 0.0);
    const FlatteningMap m{poly({0.0, 0.0, eta}), 1.0};
    EXPECT_TRUE(validate_flattening(flatten_problem(m, kFlatGrid, {0.3, 1.0}, 0.25)).pass());
    const FlatteningMap over{poly({0.0, 0.0, 1.05 * eta}), 1.0};
    EXPECT_FALSE(validate_flattening(flatten_problem(over, kFlatGrid, {0.3, 1.0}, 0.25)).pass());
}
