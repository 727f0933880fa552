#include <doctest.h>

#include <cmath>

#include "wisp/exact.hpp"

using namespace wisp;
using namespace wisp::exact;

namespace {
const ServiceParams kUnit{5.0, 5.0, 60};  // rho = 1
}

TEST_CASE("stationary distribution closed form at rho=1") {
    // Threshold 0 gives a truncated Poisson(1).
    auto d0 = stationary_dist(kUnit, 0);
    CHECK(d0.at(0) == doctest::Approx(0.3678794412).epsilon(1e-6));
    CHECK(d0.at(1) == doctest::Approx(0.3678794412).epsilon(1e-6));
    CHECK(d0.at(2) == doctest::Approx(0.1839397206).epsilon(1e-6));
    auto d1 = stationary_dist(kUnit, 1);
    CHECK(d1.at(1) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-6));
}

TEST_CASE("stationary distribution puts no mass below the threshold") {
    for (int R : {0, 1, 3, 7}) {
        auto d = stationary_dist({7.0, 3.0, 40}, R);
        for (int s = 0; s < R; ++s) CHECK(d.at(s) == 0.0);
        double sum = 0.0;
        for (double q : d.probs) {
            CHECK(q >= 0.0);
            sum += q;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("closed form matches the balance-equation solve") {
    for (double rho : {0.5, 1.0, 2.0, 3.0}) {
        ServiceParams p{rho * 5.0, 5.0, 60};
        for (int R : {0, 1, 3, 5}) {
            auto a = stationary_dist(p, R);
            auto b = stationary_solve(p, R);
            double worst = 0.0;
            for (int s = 0; s <= p.s_max; ++s) worst = std::max(worst, std::abs(a.at(s) - b.at(s)));
            CHECK(worst < 1e-9);
        }
    }
}

TEST_CASE("stationary_dist rejects a degenerate support") {
    CHECK_THROWS_AS(stationary_dist(kUnit, 60), ConfigError);
    CHECK_THROWS_AS(stationary_dist(kUnit, -1), ConfigError);
}

TEST_CASE("expected cost under threshold policies at rho=1") {
    CHECK(expected_cost(kUnit, 0) == doctest::Approx(0.2).epsilon(1e-9));
    const double e = std::exp(1.0);
    CHECK(expected_cost(kUnit, 1) == doctest::Approx(e / (e - 1.0) / 5.0).epsilon(1e-9));
    SUBCASE("strictly increasing in the threshold") {
        for (int R = 0; R < 20; ++R) CHECK(expected_cost(kUnit, R) < expected_cost(kUnit, R + 1));
    }
}

TEST_CASE("passive mass sits at the threshold state and grows with it") {
    const double e = std::exp(1.0);
    CHECK(passive_mass(kUnit, 0) == doctest::Approx(1.0 / e).epsilon(1e-9));
    CHECK(passive_mass(kUnit, 1) == doctest::Approx(1.0 / (e - 1.0)).epsilon(1e-9));
    for (double rho : {0.5, 1.0, 2.5}) {
        ServiceParams p{rho * 4.0, 4.0, 50};
        for (int R = 0; R < p.s_max - 2; ++R)
            CHECK(passive_mass(p, R) < passive_mass(p, R + 1));
    }
}

TEST_CASE("subsidized threshold cost") {
    SUBCASE("no subsidy reduces to the expected cost") {
        CHECK(threshold_avg_cost(kUnit, 2, 0.0) == doctest::Approx(expected_cost(kUnit, 2)));
    }
    SUBCASE("affine in the subsidy with slope -passive_mass") {
        const double h0 = threshold_avg_cost(kUnit, 3, 0.0);
        const double h1 = threshold_avg_cost(kUnit, 3, 1.0);
        const double h2 = threshold_avg_cost(kUnit, 3, 2.0);
        CHECK(h1 - h0 == doctest::Approx(-passive_mass(kUnit, 3)).epsilon(1e-12));
        CHECK(h2 - h1 == doctest::Approx(h1 - h0).epsilon(1e-12));
    }
    SUBCASE("worked value at rho=1") {
        CHECK(threshold_avg_cost(kUnit, 0, 1.0) ==
              doctest::Approx(0.2 - 0.3678794412).epsilon(1e-6));
    }
}

TEST_CASE("best threshold") {
    SUBCASE("no subsidy: serve always") {
        CHECK(best_threshold(kUnit, 0.0).threshold == 0);
    }
    SUBCASE("non-decreasing in the subsidy") {
        int prev = 0;
        for (int i = 0; i <= 60; ++i) {
            const double w = 0.1 * i;
            const int r = best_threshold(kUnit, w).threshold;
            CHECK(r >= prev);
            prev = r;
        }
    }
    SUBCASE("huge subsidy: as passive as the support allows") {
        ServiceParams p{5.0, 5.0, 12};
        CHECK(best_threshold(p, 100.0 * cost(p, p.s_max)).threshold == p.s_max - 1);
    }
}

TEST_CASE("subsidized single-service solve has threshold structure") {
    for (double rho : {0.5, 1.0, 2.0}) {
        ServiceParams p{rho * 5.0, 5.0, 30};
        for (double w : {0.0, 0.3, 0.8, 2.0}) {
            auto sol = solve_single_service(p, w);
            CHECK(sol.threshold_structured);
            // The detected threshold agrees with the stationary-analysis one.
            CHECK(sol.threshold == best_threshold(p, w).threshold);
        }
    }
}

TEST_CASE("joint value iteration") {
    SystemConfig cfg;
    cfg.capacity = 1;
    cfg.services = {{5.0, 5.0, 14}, {5.0, 5.0, 14}};
    auto dp = value_iteration(cfg, {1e-9, 1000000, 100000000});

    SUBCASE("symmetric instance gives a swap-symmetric solution") {
        StateSpace space(cfg);
        std::vector<int> q;
        const double uni = 2 * 5.0 + 2 * 5.0 * 14;
        for (long long x = 0; x < space.size(); ++x) {
            space.decode(x, q);
            const long long y = space.encode({q[1], q[0]});
            CHECK(dp.value[static_cast<std::size_t>(x)] ==
                  doctest::Approx(dp.value[static_cast<std::size_t>(y)]).epsilon(1e-7));
            // Action symmetry away from exact ties (ties break on service id,
            // which is not swap-invariant).
            const double vx = dp.value[static_cast<std::size_t>(x)];
            double delta[2];
            for (int i = 0; i < 2; ++i)
                delta[i] = q[static_cast<std::size_t>(i)] > 0
                               ? 5.0 * q[static_cast<std::size_t>(i)] / uni *
                                     (dp.value[static_cast<std::size_t>(x - space.stride(i))] - vx)
                               : 0.0;
            if (std::abs(delta[0] - delta[1]) < 1e-9) continue;
            const auto& ax = dp.action[static_cast<std::size_t>(x)];
            const auto& ay = dp.action[static_cast<std::size_t>(y)];
            CHECK(ax.active[0] == ay.active[1]);
            CHECK(ax.active[1] == ay.active[0]);
        }
    }
    SUBCASE("action map is K-feasible everywhere") {
        for (const auto& a : dp.action) CHECK(a.count() <= cfg.capacity);
    }
    SUBCASE("policy evaluation of the optimal policy reproduces the optimal cost") {
        StateSpace space(cfg);
        auto pc = exact_policy_cost(cfg, [&](const SystemState& s) {
            return dp.action[static_cast<std::size_t>(space.encode(s.queues))];
        });
        CHECK(pc.average_cost == doctest::Approx(dp.average_cost).epsilon(1e-6));
    }
}

TEST_CASE("value iteration budget errors") {
    SystemConfig cfg;
    cfg.capacity = 1;
    cfg.services = {{5.0, 5.0, 30}, {5.0, 5.0, 30}};
    SUBCASE("state space larger than the work budget") {
        CHECK_THROWS_AS(value_iteration(cfg, {1e-9, 100, 500}), ResourceError);
    }
    SUBCASE("budget exhausted mid-solve") {
        CHECK_THROWS_AS(value_iteration(cfg, {1e-12, 1000000, 5000}), ResourceError);
    }
    SUBCASE("iteration cap") {
        CHECK_THROWS_AS(value_iteration(cfg, {1e-12, 3, 100000000}), ConvergenceError);
    }
}

TEST_CASE("policy cost of a single served service plus a parked one") {
    // Service 1 follows a threshold policy; service 2 is never placed, so its
    // queue absorbs at its bound and contributes a constant cost.
    SystemConfig cfg;
    cfg.capacity = 1;
    cfg.services = {{5.0, 5.0, 40}, {9.0, 2.0, 3}};
    for (int R : {0, 2}) {
        auto pc = exact_policy_cost(cfg, [&](const SystemState& s) {
            PlacementAction a = PlacementAction::none(2);
            a.active[0] = s.queues[0] > R ? 1 : 0;
            return a;
        });
        const double expected = expected_cost(cfg.services[0], R) + cost(cfg.services[1], 3);
        CHECK(pc.average_cost == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("relaxed problem") {
    SUBCASE("slack constraint returns the always-serve value") {
        SystemConfig cfg;
        cfg.capacity = 1;
        cfg.services = {{0.5, 10.0, 20}, {0.5, 10.0, 20}};  // nearly always idle
        auto r = relaxed_value(cfg);
        CHECK(r.subsidy == 0.0);
        CHECK(r.value ==
              doctest::Approx(expected_cost(cfg.services[0], 0) + expected_cost(cfg.services[1], 0)));
    }
    SUBCASE("lower-bounds the exact optimum and any feasible policy") {
        SystemConfig cfg;
        cfg.capacity = 1;
        cfg.services = {{5.0, 5.0, 14}, {10.0, 5.0, 18}};
        auto r = relaxed_value(cfg);
        auto dp = value_iteration(cfg, {1e-9, 1000000, 200000000});
        CHECK(r.value <= dp.average_cost + 1e-9);
        auto pc = exact_policy_cost(cfg, [&](const SystemState& s) {
            PlacementAction a = PlacementAction::none(2);
            if (s.queues[0] >= s.queues[1] && s.queues[0] > 0)
                a.active[0] = 1;
            else if (s.queues[1] > 0)
                a.active[1] = 1;
            return a;
        });
        CHECK(r.value <= pc.average_cost + 1e-9);
    }
    SUBCASE("symmetric services get equal thresholds") {
        SystemConfig cfg;
        cfg.capacity = 1;
        cfg.services = {{5.0, 5.0, 20}, {5.0, 5.0, 20}};
        auto r = relaxed_value(cfg);
        CHECK(r.thresholds[0] == r.thresholds[1]);
    }
    SUBCASE("unmeetable constraint is flagged") {
        SystemConfig cfg;
        cfg.capacity = 1;
        cfg.services = {{50.0, 1.0, 4}, {50.0, 1.0, 4}, {50.0, 1.0, 4}};
        auto r = relaxed_value(cfg);
        CHECK_FALSE(r.bracketed);
    }
}
