#include "wisp/sim.hpp"

#include <cmath>
#include <string>

#include "wisp/errors.hpp"

namespace wisp::sim {

namespace {

// Samples the next event: walks births (by service id), then deaths.
Event pick_event(const SystemConfig& cfg, const SystemState& state, const PlacementAction& action,
                 double total, Rng& rng) {
    double u = rng.uniform01() * total;
    for (int i = 0; i < cfg.size(); ++i) {
        auto r = rates(cfg.services[static_cast<std::size_t>(i)], state.queues[static_cast<std::size_t>(i)],
                       action.active[static_cast<std::size_t>(i)] != 0);
        if (r.birth > 0) {
            u -= r.birth;
            if (u < 0) return {i, EventKind::Arrival};
        }
    }
    for (int i = 0; i < cfg.size(); ++i) {
        auto r = rates(cfg.services[static_cast<std::size_t>(i)], state.queues[static_cast<std::size_t>(i)],
                       action.active[static_cast<std::size_t>(i)] != 0);
        if (r.death > 0) {
            u -= r.death;
            if (u < 0) return {i, EventKind::Departure};
        }
    }
    // Numerical edge of the partition: last positive-rate death, else arrival.
    for (int i = cfg.size() - 1; i >= 0; --i) {
        auto r = rates(cfg.services[static_cast<std::size_t>(i)], state.queues[static_cast<std::size_t>(i)],
                       action.active[static_cast<std::size_t>(i)] != 0);
        if (r.death > 0) return {i, EventKind::Departure};
        if (r.birth > 0) return {i, EventKind::Arrival};
    }
    throw DeadStateError("pick_event: no positive rate");
}

double cost_rate(const SystemConfig& cfg, const SystemState& state) {
    double c = 0.0;
    for (int i = 0; i < cfg.size(); ++i)
        c += cost(cfg.services[static_cast<std::size_t>(i)], state.queues[static_cast<std::size_t>(i)]);
    return c;
}

}  // namespace

Event step_inplace(const SystemConfig& cfg, SystemState& state, const PlacementAction& action,
                   Rng& rng, double& sojourn) {
    const double total = total_rate(cfg, state, action);
    if (total <= 0.0)
        throw DeadStateError("step: all queues truncated and no active service; no event possible");
    sojourn = rng.exponential(total);
    const Event ev = pick_event(cfg, state, action, total, rng);
    if (ev.kind == EventKind::Arrival)
        ++state.queues[static_cast<std::size_t>(ev.service)];
    else
        --state.queues[static_cast<std::size_t>(ev.service)];
    return ev;
}

StepResult step(const SystemConfig& cfg, const SystemState& state, const PlacementAction& action,
                Rng& rng) {
    StepResult r;
    r.state = state;
    r.event = step_inplace(cfg, r.state, action, rng, r.sojourn);
    return r;
}

RunSummary run_policy(const SystemConfig& cfg, const PolicyFn& policy, long long total_events,
                      Rng& rng, const TraceSink& sink) {
    cfg.validate();
    if (total_events < 1) throw ConfigError("run_policy: total_events must be >= 1");

    const int n = cfg.size();
    RunSummary out;
    out.mean_queue.assign(static_cast<std::size_t>(n), 0.0);
    out.throughput.assign(static_cast<std::size_t>(n), 0.0);

    SystemState state = SystemState::zeros(n);
    SimClock clock;
    double cost_integral = 0.0;
    std::vector<double> queue_integral(static_cast<std::size_t>(n), 0.0);
    std::vector<long long> deliveries(static_cast<std::size_t>(n), 0);

    for (long long e = 0; e < total_events; ++e) {
        PlacementAction action = policy(state);
        if (action.size() != n || action.count() > cfg.capacity)
            throw ProtocolError("run_policy: policy returned an infeasible action");
        const double c = cost_rate(cfg, state);
        double sojourn = 0.0;
        SystemState pre = state;
        const Event ev = step_inplace(cfg, state, action, rng, sojourn);
        cost_integral += c * sojourn;
        for (int i = 0; i < n; ++i)
            queue_integral[static_cast<std::size_t>(i)] += pre.queues[static_cast<std::size_t>(i)] * sojourn;
        if (ev.kind == EventKind::Departure) ++deliveries[static_cast<std::size_t>(ev.service)];
        if (sink) sink(clock, pre, action, ev, sojourn, c);
        clock.time += sojourn;
        ++clock.events;
    }

    out.total_time = clock.time;
    out.events = clock.events;
    out.time_average_cost = cost_integral / clock.time;
    for (int i = 0; i < n; ++i) {
        out.mean_queue[static_cast<std::size_t>(i)] = queue_integral[static_cast<std::size_t>(i)] / clock.time;
        out.throughput[static_cast<std::size_t>(i)] =
            static_cast<double>(deliveries[static_cast<std::size_t>(i)]) / clock.time;
    }
    out.final_state = state;
    return out;
}

EpisodicResult run_episodic(const SystemConfig& cfg, EpisodicLearner& learner,
                            const EpisodeSchedule& schedule, Rng& rng,
                            double benchmark_episode_cost) {
    cfg.validate();
    if (schedule.horizon_events < 1) throw ConfigError("run_episodic: horizon must be >= 1");

    const int n = cfg.size();
    EpisodicResult res;
    res.benchmark = benchmark_episode_cost;
    res.episode_cost.reserve(static_cast<std::size_t>(schedule.episodes));
    res.cumulative_regret.reserve(static_cast<std::size_t>(schedule.episodes));
    double cum = 0.0;

    for (int k = 0; k < schedule.episodes; ++k) {
        SystemState state = SystemState::zeros(n);
        learner.begin_episode(k);
        double ep_cost = 0.0;
        for (int h = 0; h < schedule.horizon_events; ++h) {
            PlacementAction action = learner.policy(state);
            if (action.size() != n || action.count() > cfg.capacity)
                throw ProtocolError("run_episodic: infeasible action from learner in episode " +
                                    std::to_string(k));
            const double c = cost_rate(cfg, state);
            double sojourn = 0.0;
            SystemState pre = state;
            const Event ev = step_inplace(cfg, state, action, rng, sojourn);
            ep_cost += c * sojourn;
            learner.observe(pre, action, ev, sojourn);
        }
        res.episode_cost.push_back(ep_cost);
        cum += ep_cost - benchmark_episode_cost;
        res.cumulative_regret.push_back(cum);
    }
    return res;
}

double estimate_episode_benchmark(const SystemConfig& cfg, const PolicyFn& policy,
                                  int horizon_events, int episodes, Rng& rng) {
    cfg.validate();
    const int n = cfg.size();
    double total = 0.0;
    for (int k = 0; k < episodes; ++k) {
        SystemState state = SystemState::zeros(n);
        double ep_cost = 0.0;
        for (int h = 0; h < horizon_events; ++h) {
            PlacementAction action = policy(state);
            const double c = cost_rate(cfg, state);
            double sojourn = 0.0;
            step_inplace(cfg, state, action, rng, sojourn);
            ep_cost += c * sojourn;
        }
        total += ep_cost;
    }
    return total / static_cast<double>(episodes);
}

}  // namespace wisp::sim
