#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "socsense/revealed_prefs.hpp"
#include "support/generators.hpp"

using namespace socsense;
using namespace testsupport;

namespace {

Dataset warp_violation() {
    // each bundle strictly affordable at the other's prices
    return Dataset::single_agent({{2, 1}, {1, 2}}, {{1, 0}, {0, 1}});
}

// Every consecutive pair is weakly revealed preferred and the last bundle
// strictly prefers the first one's.
void expect_valid_cycle(const Dataset& d, const std::vector<int>& cycle, int agent = 0) {
    ASSERT_FALSE(cycle.empty());
    auto cost = [&](int t, int s) { return dot(d.prices[t], d.responses[s][agent]); };
    for (std::size_t k = 0; k + 1 < cycle.size(); ++k)
        EXPECT_GE(cost(cycle[k], cycle[k]), cost(cycle[k], cycle[k + 1]) - 1e-9 * (1 + cost(cycle[k], cycle[k])));
    const int last = cycle.back(), first = cycle.front();
    EXPECT_GT(cost(last, last), cost(last, first));
}

double budget_of(const Dataset& d, int t) { return dot(d.prices[t], d.responses[t][0]); }

} // namespace

TEST(Garp, SingleObservationPasses) {
    EXPECT_TRUE(garp_check(Dataset::single_agent({{1, 2}}, {{3, 1}})).pass);
}

TEST(Garp, SymmetricBudgetPasses) {
    EXPECT_TRUE(garp_check(Dataset::single_agent({{1, 1}, {1, 1}}, {{2, 0}, {0, 2}})).pass);
}

TEST(Garp, CobbDouglasPasses) {
    Rng rng(1);
    EXPECT_TRUE(garp_check(cobb_douglas_dataset(rng, 50, 2)).pass);
    EXPECT_TRUE(garp_check(cobb_douglas_dataset(rng, 50, 4)).pass);
}

TEST(Garp, WarpViolationHasTwoCycle) {
    const auto d = warp_violation();
    const auto g = garp_check(d);
    ASSERT_FALSE(g.pass);
    EXPECT_EQ(g.cycle.size(), 2u);
    expect_valid_cycle(d, g.cycle);
}

TEST(Garp, WitnessCyclesAreValid) {
    Rng rng(2);
    int failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = random_dataset(rng, 2 + static_cast<int>(rng.below(10)), 1 + static_cast<int>(rng.below(4)));
        const auto g = garp_check(d);
        if (g.pass) continue;
        ++failures;
        expect_valid_cycle(d, g.cycle);
    }
    EXPECT_GT(failures, 50);
}

TEST(Garp, PriceScalingInvariance) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto d = random_dataset(rng, 6, 3);
        const bool before = garp_check(d).pass;
        for (auto& p : d.prices) {
            const double k = 0.1 + 10.0 * rng.uniform();
            for (double& v : p) v *= k;
        }
        EXPECT_EQ(garp_check(d).pass, before);
    }
}

TEST(Garp, RejectsNonpositivePrices) {
    EXPECT_THROW(garp_check(Dataset::single_agent({{1, 0}}, {{1, 1}})), InvalidArgument);
    EXPECT_THROW(garp_check(Dataset::single_agent({{1, -2}}, {{1, 1}})), InvalidArgument);
}

TEST(Afriat, SingleObservation) {
    const auto c = afriat_feasible(Dataset::single_agent({{1, 2}}, {{3, 1}}));
    ASSERT_TRUE(c.feasible);
    EXPECT_EQ(c.u[0], 0.0);
    EXPECT_NEAR(c.lambda[0][0], 1.0, 1e-12);
}

TEST(Afriat, WarpViolationInfeasible) {
    const auto c = afriat_feasible(warp_violation());
    EXPECT_FALSE(c.feasible);
    ASSERT_TRUE(c.witness.has_value());
    EXPECT_EQ(c.witness->cycle.size(), 2u);
}

TEST(Afriat, EquivalentToGarpWithValidCertificates) {
    Rng rng(4);
    int pass = 0, fail = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto d = mixed_dataset(rng, trial);
        const bool garp = garp_check(d).pass;
        const auto c = afriat_feasible(d);
        ASSERT_EQ(c.feasible, garp) << "trial " << trial;
        (garp ? pass : fail)++;
        if (!c.feasible) continue;
        EXPECT_LE(max_certificate_violation(c, d), 1e-8);
        for (const auto& l : c.lambda) EXPECT_GE(l[0], c.epsilon * (1 - 1e-9));
    }
    EXPECT_GT(pass, 150);
    EXPECT_GT(fail, 50);
}

TEST(Utility, InterpolatesObservedLevels) {
    Rng rng(5);
    const auto d = cobb_douglas_dataset(rng, 20, 3);
    const auto c = afriat_feasible(d);
    ASSERT_TRUE(c.feasible);
    const auto u = build_utility(c, d);
    for (int t = 0; t < 20; ++t) EXPECT_NEAR(u(d.responses[t][0]), c.u[t], 1e-8 * (1 + std::abs(c.u[t])));
}

TEST(Utility, MonotoneAndConcave) {
    Rng rng(6);
    const auto d = cobb_douglas_dataset(rng, 15, 3);
    const auto c = afriat_feasible(d);
    ASSERT_TRUE(c.feasible);
    const auto u = build_utility(c, d);
    for (int k = 0; k < 500; ++k) {
        Vec x(3), y(3), mid(3);
        for (int j = 0; j < 3; ++j) {
            x[j] = 3 * rng.uniform();
            y[j] = 3 * rng.uniform();
            mid[j] = 0.5 * (x[j] + y[j]);
        }
        EXPECT_GE(u(mid), 0.5 * (u(x) + u(y)) - 1e-12);
        for (int j = 0; j < 3; ++j) {
            Vec xp = x;
            xp[j] += 0.01;
            EXPECT_GT(u(xp), u(x));
        }
        Vec xd = x;
        for (double& v : xd) v += 0.01;
        EXPECT_GT(u(xd), u(x));
    }
}

// grid search over each budget set never beats the observed bundle
TEST(Utility, RationalizesCobbDouglasOnGrid) {
    Rng rng(7);
    const auto d = cobb_douglas_dataset(rng, 20, 2);
    const auto c = afriat_feasible(d);
    ASSERT_TRUE(c.feasible);
    const auto u = build_utility(c, d);
    const int grid = 200;
    for (int t = 0; t < 20; ++t) {
        const double budget = budget_of(d, t);
        const double hx = budget / d.prices[t][0] / (grid - 1), hy = budget / d.prices[t][1] / (grid - 1);
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < grid; ++a)
            for (int b = 0; b < grid; ++b) {
                const Vec x{a * hx, b * hy};
                if (dot(d.prices[t], x) <= budget) best = std::max(best, u(x));
            }
        EXPECT_GE(u(d.responses[t][0]), best - 1e-9 * (1 + std::abs(best)));
    }
}

TEST(Nash, SingleAgentMatchesAfriat) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = mixed_dataset(rng, trial);
        const auto a = afriat_feasible(d);
        const auto n = nash_rationality_test(d);
        ASSERT_EQ(a.feasible, n.feasible);
        EXPECT_EQ(a.u, n.u);
        EXPECT_EQ(a.lambda, n.lambda);
    }
}

TEST(Nash, PotentialGameDataFeasible) {
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = random_potential_game(rng, 2);
        const auto d = potential_game_dataset(g, rng, 40);
        const auto c = nash_rationality_test(d);
        ASSERT_TRUE(c.feasible);
        EXPECT_LE(max_certificate_violation(c, d), 1e-8);
        for (const auto& l : c.lambda)
            for (double v : l) EXPECT_GE(v, c.epsilon * (1 - 1e-9));
    }
}

TEST(Nash, SliceGarpFailureIsInfeasible) {
    Rng rng(10);
    const auto g = random_potential_game(rng, 2);
    auto d = potential_game_dataset(g, rng, 6);
    // agent 1's first two responses replaced by a WARP violation
    d.prices[0] = {2, 1};
    d.prices[1] = {1, 2};
    d.responses[0][1] = {1, 0};
    d.responses[1][1] = {0, 1};
    d.budgets.clear();
    ASSERT_FALSE(garp_check(d, 1).pass);
    const auto c = nash_rationality_test(d);
    EXPECT_FALSE(c.feasible);
    ASSERT_TRUE(c.witness.has_value());
    EXPECT_EQ(c.witness->agent, 1);
    expect_valid_cycle(d, c.witness->cycle, 1);
}

TEST(Potential, InterpolatesAndIsConcave) {
    Rng rng(11);
    const auto g = random_potential_game(rng, 2);
    const auto d = potential_game_dataset(g, rng, 20);
    const auto c = nash_rationality_test(d);
    ASSERT_TRUE(c.feasible);
    const auto v = build_potential(c, d);
    for (int t = 0; t < 20; ++t) {
        const Vec z{d.responses[t][0][0], d.responses[t][0][1], d.responses[t][1][0], d.responses[t][1][1]};
        EXPECT_NEAR(v(z), c.u[t], 1e-8 * (1 + std::abs(c.u[t])));
    }
    for (int k = 0; k < 300; ++k) {
        Vec a(4), b(4), mid(4);
        for (int j = 0; j < 4; ++j) {
            a[j] = 2 * rng.uniform();
            b[j] = 2 * rng.uniform();
            mid[j] = 0.5 * (a[j] + b[j]);
        }
        EXPECT_GE(v(mid), 0.5 * (v(a) + v(b)) - 1e-12);
    }
}

TEST(Predict, ObservedProbeReachesObservedLevel) {
    Rng rng(12);
    const auto g = random_potential_game(rng, 2);
    const auto d = potential_game_dataset(g, rng, 15);
    const auto c = nash_rationality_test(d);
    ASSERT_TRUE(c.feasible);
    for (int t = 0; t < 15; ++t) {
        const auto p = predict_response(c, d, d.prices[t], d.budgets[t]);
        EXPECT_GE(p.value, c.u[t] - 1e-8 * (1 + std::abs(c.u[t])));
        for (int i = 0; i < 2; ++i) EXPECT_LE(dot(d.prices[t], p.responses[i]), d.budgets[t][i] * (1 + 1e-9));
    }
}

TEST(Predict, SinglePlaneSaturatesBudget) {
    const auto d = Dataset::single_agent({{1, 2}}, {{1, 1}});
    const auto c = afriat_feasible(d);
    ASSERT_TRUE(c.feasible);
    const Vec price{0.5, 1.5};
    const double budget = 4.0;
    const auto p = predict_response(c, d, price, std::vector<double>{budget});
    EXPECT_NEAR(dot(price, p.responses[0]), budget, 1e-9);
}

TEST(Predict, RejectsBadProbe) {
    const auto d = Dataset::single_agent({{1, 2}}, {{1, 1}});
    const auto c = afriat_feasible(d);
    EXPECT_THROW(predict_response(c, d, std::vector<double>{0.0, 1.0}, std::vector<double>{1.0}), InvalidArgument);
    EXPECT_THROW(predict_response(c, d, std::vector<double>{1.0, 1.0}, std::vector<double>{-1.0}), InvalidArgument);
    EXPECT_THROW(predict_response(c, d, std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 1.0}), InvalidArgument);
}

TEST(Mrs, SingleObservationIsPriceRatio) {
    const auto d = Dataset::single_agent({{3, 2}}, {{1, 1}});
    const auto v = build_utility(afriat_feasible(d), d);
    Rng rng(13);
    for (int k = 0; k < 20; ++k) {
        const Vec z{3 * rng.uniform(), 3 * rng.uniform()};
        const auto r = marginal_rate_substitution(v, z, 0, 0, 1, 2);
        EXPECT_NEAR(r.ratio, 1.5, 1e-12);
        EXPECT_TRUE(r.smooth);
    }
}

TEST(Mrs, PriceScalingInvariance) {
    Rng rng(14);
    auto d = cobb_douglas_dataset(rng, 10, 2);
    const auto v1 = build_utility(afriat_feasible(d), d);
    for (auto& p : d.prices)
        for (double& x : p) x *= 3.7;
    const auto v2 = build_utility(afriat_feasible(d), d);
    for (int t = 0; t < 10; ++t) {
        const auto a = marginal_rate_substitution(v1, d.responses[t][0], 0, 0, 1, 2);
        const auto b = marginal_rate_substitution(v2, d.responses[t][0], 0, 0, 1, 2);
        EXPECT_NEAR(a.ratio, b.ratio, 1e-9 * a.ratio);
    }
}

TEST(Mrs, HigherFirstGoodPricesGiveRatioAboveOne) {
    Rng rng(15);
    std::vector<Vec> ps, xs;
    const Vec a{0.5, 0.5};
    for (int t = 0; t < 20; ++t) {
        const Vec p{1.5 + rng.uniform(), 0.5 + rng.uniform()};
        xs.push_back(cobb_douglas_demand(a, p, 2.0));
        ps.push_back(p);
    }
    const auto d = Dataset::single_agent(ps, xs);
    const auto v = build_utility(afriat_feasible(d), d);
    for (int t = 0; t < 20; ++t) EXPECT_GT(marginal_rate_substitution(v, d.responses[t][0], 0, 0, 1, 2).ratio, 1.0);
}
