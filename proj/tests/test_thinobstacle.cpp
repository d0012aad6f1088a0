#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "fblab/thinobstacle.hpp"

using namespace fblab;

namespace {

double signorini(Vec2 p) {
    const std::complex<double> z(p.x, std::max(p.y, 0.0));
    return std::pow(z, 1.5).real();
}

ThinProblem prototype(int n) {
    ThinProblem p;
    p.resolution = n;
    p.datum = signorini;
    return p;
}

double max_error(const ScalarField& v, double (*f)(Vec2)) {
    const Grid& g = v.grid();
    double e = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) e = std::max(e, std::abs(v[k] - f(g.node(g.unindex(k)))));
    return e;
}

}  // namespace

TEST(AdjointDirection, Examples) {
    EXPECT_EQ(adjoint_direction({0.0, 1.0}), (Vec2{0.0, 1.0}));
    const Vec2 w = adjoint_direction({0.6, 0.8});
    EXPECT_DOUBLE_EQ(w.x, -0.6);
    EXPECT_DOUBLE_EQ(w.y, 0.8);
    EXPECT_NEAR(norm(w), 1.0, 1e-15);
    EXPECT_THROW(adjoint_direction({1.0, 0.0}, 0.25), ObliquenessError);
}

TEST(SolvePenalized, ConstantDatum) {
    ThinProblem p = prototype(33);
    p.datum = [](Vec2) { return 0.7; };
    const ScalarField v = solve_penalized(p, 10.0, 0.0);
    for (double x : v.values()) EXPECT_NEAR(x, 0.7, 1e-6);
}

TEST(SolvePenalized, PositiveDatumLeavesPenaltyInactive) {
    ThinProblem p = prototype(33);
    p.W = {0.6, 0.8};
    p.delta = 0.5;
    p.datum = [](Vec2 x) { return 1.0 + 0.3 * x.x + 0.2 * x.y; };
    StageReport rep;
    const ScalarField v = ThinSolver(p).solve_penalized(100.0, 0.0, nullptr, &rep);
    EXPECT_EQ(rep.active_nodes, 0u);
    EXPECT_GT(v.min(), 0.0);
}

TEST(SolvePenalized, SignoriniPrototypeWithinPenaltyError) {
    const ThinProblem p = prototype(65);
    const ScalarField v = solve_penalized(p, 1e4, 0.0);
    EXPECT_LE(max_error(v, signorini), 1.0 / 64 + 1e-4 + 1e-2);
}

TEST(SolvePenalized, OrderedInEll) {
    const ThinProblem p = prototype(33);
    const double l1 = 0.01, l2 = 0.05, tol = 1e-6;
    const ScalarField a = solve_penalized(p, 100.0, l1), b = solve_penalized(p, 100.0, l2);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LE(a[k], b[k] + 2.0 * tol);
        EXPECT_LE(b[k], a[k] + (l2 - l1) + 2.0 * tol);
    }
}

TEST(SolveThin, SignoriniContactSet) {
    const ThinSolution s = solve_thin(prototype(65));
    const double h = s.v.grid().h();
    for (std::size_t i = 1; i + 1 < s.thin_size(); ++i) {
        if (s.thin_x[i] < -2.0 * h) {
            EXPECT_TRUE(s.contact[i]) << s.thin_x[i];
        }
        if (s.thin_x[i] > 2.0 * h) {
            EXPECT_FALSE(s.contact[i]) << s.thin_x[i];
        }
    }
    EXPECT_LE(max_error(s.v, signorini), 5e-2);
    EXPECT_TRUE(check_invariants(s, 1e-6, 1e-3, 1e-4).ok());
}

TEST(SolveThin, PositiveDatumHasEmptyContact) {
    ThinProblem p = prototype(33);
    p.datum = [](Vec2 x) { return 1.0 + 0.5 * x.x; };
    const ThinSolution s = solve_thin(p);
    for (std::size_t i = 1; i + 1 < s.thin_size(); ++i) {
        EXPECT_FALSE(s.contact[i]);
        EXPECT_NEAR(s.sigma[i], 0.0, 1e-3);
    }
}

TEST(SolveThin, ObliqueInvariantsOnInnerHalf) {
    ThinProblem p = prototype(129);
    p.W = {0.6, 0.8};
    p.delta = 0.5;
    p.datum = [](Vec2 x) { return -0.2 + 0.6 * x.x + x.y + 0.3 * (x.x * x.x - x.y * x.y); };
    const ThinSolution s = solve_thin(p);
    const ThinInvariants inv = check_invariants(s, 1e-6, 1e-3, 1e-3, 0.5);
    EXPECT_TRUE(inv.v_nonnegative) << inv.min_v;
    EXPECT_TRUE(inv.sigma_nonpositive) << inv.max_sigma;
    EXPECT_TRUE(inv.complementary) << inv.max_complementarity;
    EXPECT_GT(std::count(s.contact.begin(), s.contact.end(), true), 0);
}

TEST(SolveThin, RejectsBadSchedule) {
    ThinProblem p = prototype(33);
    p.schedule = {{100.0, 0.1}, {10.0, 0.0}};
    EXPECT_THROW(solve_thin(p), ConfigError);
    p.schedule.clear();
    EXPECT_THROW(solve_thin(p), ConfigError);
}

TEST(SigmaW, LinearAndConstant) {
    const Grid g(17, 9, 0.125, {-1.0, 0.0});
    const std::vector<double> s1 = sigma_W(ScalarField::sample(g, [](Vec2 p) { return p.y; }), {0.0, 1.0});
    const std::vector<double> s0 = sigma_W(ScalarField(g, 2.0), {0.6, 0.8});
    for (std::size_t i = 0; i < s1.size(); ++i) {
        EXPECT_NEAR(s1[i], 1.0, 1e-12);
        EXPECT_NEAR(s0[i], 0.0, 1e-12);
    }
}

TEST(SigmaW, SignoriniProfile) {
    const int n = 129;
    const Grid g(n, (n + 1) / 2, 2.0 / (n - 1), {-1.0, 0.0});
    const std::vector<double> s = sigma_W(ScalarField::sample(g, signorini), {0.0, 1.0});
    const double tol = 2.0 * std::sqrt(g.h());
    for (int i = 1; i + 1 < g.nx(); ++i) {
        const double x = g.node(i, 0).x;
        const double expect = x < 0.0 ? -1.5 * std::sqrt(-x) : 0.0;
        EXPECT_NEAR(s[static_cast<std::size_t>(i)], expect, tol) << x;
    }
}

TEST(ContactSet, Examples) {
    const Grid g(17, 9, 0.125, {-1.0, 0.0});
    const std::vector<bool> all = contact_set(ScalarField(g, 0.0));
    EXPECT_EQ(std::count(all.begin(), all.end(), true), g.nx());
    const std::vector<bool> none = contact_set(ScalarField::sample(g, [](Vec2 p) { return 1.0 + p.y; }));
    EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
    const std::vector<bool> half = contact_set(ScalarField::sample(g, signorini));
    for (int i = 0; i < g.nx(); ++i) EXPECT_EQ(half[static_cast<std::size_t>(i)], g.node(i, 0).x <= 0.0);
}

TEST(TangentialSemiconvexity, Examples) {
    const Grid g(33, 17, 1.0 / 16, {-1.0, 0.0});
    EXPECT_NEAR(tangential_semiconvexity(ScalarField::sample(g, [](Vec2 p) { return 1.0 + p.x - p.y; })), 0.0, 1e-10);
    const ScalarField q = ScalarField::sample(g, [](Vec2 p) { return p.x * p.x; });
    EXPECT_NEAR(tangential_semiconvexity(q) * q.max_abs(), 2.0, 1e-9);
    double prev = 0.0;
    for (int n : {65, 129}) {
        const Grid gs(n, (n + 1) / 2, 2.0 / (n - 1), {-1.0, 0.0});
        const double c = tangential_semiconvexity(ScalarField::sample(gs, signorini));
        EXPECT_TRUE(std::isfinite(c));
        EXPECT_GT(c, -1.0);
        if (prev != 0.0) {
            EXPECT_GT(c, prev - 0.1);
        }
        prev = c;
    }
}

TEST(SigmaHolderFit, SignoriniExponent) {
    const ThinSolution s = solve_thin(prototype(129));
    double edge = -1.0;
    for (std::size_t i = 1; i + 1 < s.thin_size(); ++i)
        if (s.contact[i]) edge = std::max(edge, s.thin_x[i]);
    const HolderFit f = sigma_holder_fit(s, edge + s.v.grid().h());
    EXPECT_NEAR(f.alpha, 0.5, 0.1);
    EXPECT_GE(f.annuli, 3);
}

TEST(SigmaHolderFit, NoDecayAndPreconditions) {
    ThinProblem p = prototype(33);
    p.datum = [](Vec2) { return 1.0; };
    const ThinSolution flat = solve_thin(p);
    EXPECT_EQ(sigma_holder_fit(flat, 0.0).status, "no decay to fit");
    const ThinSolution s = solve_thin(prototype(33));
    EXPECT_THROW(sigma_holder_fit(s, -0.5), PreconditionError);
}

TEST(MaximumPrinciple, UnconstrainedObliqueProblem) {
    ThinProblem p = prototype(33);
    p.W = {0.6, 0.8};
    p.delta = 0.5;
    p.datum = [](Vec2 x) { return 2.0 + std::sin(3.0 * x.x) + x.y; };
    const ScalarField v = ThinSolver(p).solve_penalized(10.0, 0.0);
    EXPECT_LE(maximum_principle_excess(v), 1e-6);
}

TEST(Reflection, FullDomainMatchesHalf) {
    const ThinProblem p = prototype(33);
    const ThinSolution s = solve_thin(p);
    EXPECT_LE(reflection_discrepancy(p, s), 1e-6);
}
