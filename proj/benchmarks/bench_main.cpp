#include <benchmark/benchmark.h>

#include "wisp/exact.hpp"
#include "wisp/qlearn.hpp"
#include "wisp/sim.hpp"
#include "wisp/whittle.hpp"

namespace {

using namespace wisp;

void BM_StationaryDist(benchmark::State& state) {
    ServiceParams p{5.0, 5.0, static_cast<int>(state.range(0))};
    for (auto _ : state) {
        auto d = exact::stationary_dist(p, 2);
        benchmark::DoNotOptimize(d.probs.data());
    }
}
BENCHMARK(BM_StationaryDist)->Arg(30)->Arg(60)->Arg(120);

void BM_WhittleTable(benchmark::State& state) {
    ServiceParams p{5.0, 5.0, static_cast<int>(state.range(0))};
    for (auto _ : state) {
        auto t = whittle::whittle_table(p);
        benchmark::DoNotOptimize(t.index.data());
    }
}
BENCHMARK(BM_WhittleTable)->Arg(20)->Arg(60);

void BM_ValueIteration(benchmark::State& state) {
    SystemConfig cfg;
    cfg.capacity = 1;
    const int sm = static_cast<int>(state.range(0));
    cfg.services = {{5.0, 5.0, sm}, {5.0, 5.0, sm}};
    for (auto _ : state) {
        auto dp = exact::value_iteration(cfg, {1e-6, 1000000, 2000000000});
        benchmark::DoNotOptimize(dp.average_cost);
    }
    state.SetComplexityN((sm + 1) * (sm + 1));
}
BENCHMARK(BM_ValueIteration)->Arg(10)->Arg(15)->Arg(20)->Complexity();

void BM_PolicyCost(benchmark::State& state) {
    SystemConfig cfg;
    cfg.capacity = 1;
    const int sm = static_cast<int>(state.range(0));
    cfg.services = {{5.0, 5.0, sm}, {5.0, 5.0, sm}};
    std::vector<whittle::WhittleTable> tabs;
    for (const auto& p : cfg.services) tabs.push_back(whittle::whittle_table(p));
    for (auto _ : state) {
        auto pc = exact::exact_policy_cost(cfg, [&](const SystemState& s) {
            return whittle::index_rule_action(tabs, s, cfg.capacity);
        });
        benchmark::DoNotOptimize(pc.average_cost);
    }
}
BENCHMARK(BM_PolicyCost)->Arg(15)->Arg(25);

void BM_SimStep(benchmark::State& state) {
    SystemConfig cfg;
    cfg.capacity = 2;
    const int n = static_cast<int>(state.range(0));
    for (int i = 0; i < n; ++i) cfg.services.push_back({5.0 + i, 5.0, 20});
    std::vector<whittle::WhittleTable> tabs;
    for (const auto& p : cfg.services) tabs.push_back(whittle::whittle_table(p));
    Rng rng(1);
    SystemState st = SystemState::zeros(n);
    for (auto _ : state) {
        auto a = whittle::index_rule_action(tabs, st, cfg.capacity);
        double sojourn = 0.0;
        sim::step_inplace(cfg, st, a, rng, sojourn);
        benchmark::DoNotOptimize(sojourn);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimStep)->Arg(4)->Arg(16)->Arg(64);

void BM_EmbeddedQLearning(benchmark::State& state) {
    ServiceParams p{5.0, 5.0, 5};
    for (auto _ : state) {
        Rng rng(7);
        auto res = qlearn::run_q_whittle(p, 10, 100, {}, rng);
        benchmark::DoNotOptimize(res.index.data());
    }
}
BENCHMARK(BM_EmbeddedQLearning);

void BM_RelaxedValue(benchmark::State& state) {
    SystemConfig cfg;
    cfg.capacity = 5;
    for (int i = 0; i < 10; ++i) cfg.services.push_back({10.0 + 2.0 * i, 5.0, 12});
    for (auto _ : state) {
        auto r = exact::relaxed_value(cfg);
        benchmark::DoNotOptimize(r.value);
    }
}
BENCHMARK(BM_RelaxedValue);

}  // namespace

BENCHMARK_MAIN();
