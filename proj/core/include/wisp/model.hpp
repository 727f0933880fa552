#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wisp/errors.hpp"

namespace wisp {

/// One service class: Poisson request arrivals at rate `lambda`, exponential
/// per-customer delivery at rate `mu` (so a queue of s customers drains at
/// rate mu*s while the service is placed), and a truncation bound `s_max`
/// beyond which arrivals are dropped.
struct ServiceParams {
    double lambda = 1.0;
    double mu = 1.0;
    int s_max = 2;

    void validate() const {
        if (!(lambda > 0)) throw ConfigError("ServiceParams: lambda must be > 0");
        if (!(mu > 0)) throw ConfigError("ServiceParams: mu must be > 0");
        if (s_max < 2) throw ConfigError("ServiceParams: s_max must be >= 2");
    }
};

/// The edge system: N services sharing a server that can host at most K of
/// them at any instant.
struct SystemConfig {
    std::vector<ServiceParams> services;
    int capacity = 1;

    int size() const { return static_cast<int>(services.size()); }

    void validate() const {
        if (services.empty()) throw ConfigError("SystemConfig: no services");
        for (const auto& s : services) s.validate();
        if (capacity < 1 || capacity >= size())
            throw ConfigError("SystemConfig: capacity must satisfy 1 <= K < N, got K=" +
                              std::to_string(capacity) + " N=" + std::to_string(size()));
    }
};

/// Joint queue-length vector.
struct SystemState {
    std::vector<int> queues;

    static SystemState zeros(int n) { return SystemState{std::vector<int>(n, 0)}; }
    int size() const { return static_cast<int>(queues.size()); }
    bool operator==(const SystemState&) const = default;
};

/// Placement decision; at most K entries may be set.
struct PlacementAction {
    std::vector<std::uint8_t> active;

    static PlacementAction none(int n) { return PlacementAction{std::vector<std::uint8_t>(n, 0)}; }
    int size() const { return static_cast<int>(active.size()); }
    int count() const {
        int c = 0;
        for (auto a : active) c += a;
        return c;
    }
    bool operator==(const PlacementAction&) const = default;
};

/// Instantaneous cost rate of holding s outstanding requests. By Little's
/// law, s/lambda is the mean sojourn contribution, so minimizing its time
/// average minimizes mean latency. Action-independent.
inline double cost(const ServiceParams& p, int s) { return static_cast<double>(s) / p.lambda; }

struct BirthDeathRates {
    double birth = 0.0;
    double death = 0.0;
};

/// Transition rates of one service's queue: arrivals at rate lambda (dropped
/// at the truncation bound), departures at rate mu*s while placed.
inline BirthDeathRates rates(const ServiceParams& p, int s, bool active) {
    BirthDeathRates r;
    r.birth = (s < p.s_max) ? p.lambda : 0.0;
    r.death = (active && s > 0) ? p.mu * static_cast<double>(s) : 0.0;
    return r;
}

/// Sum of all transition rates out of `state` under `action`.
inline double total_rate(const SystemConfig& cfg, const SystemState& state,
                         const PlacementAction& action) {
    double t = 0.0;
    for (int i = 0; i < cfg.size(); ++i) {
        auto r = rates(cfg.services[i], state.queues[i], action.active[i] != 0);
        t += r.birth + r.death;
    }
    return t;
}

}  // namespace wisp
