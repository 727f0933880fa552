#pragma once

#include <functional>
#include <vector>

#include "wisp/model.hpp"
#include "wisp/rng.hpp"

namespace wisp::sim {

enum class EventKind : std::uint8_t { Arrival, Departure };

struct Event {
    int service = -1;
    EventKind kind = EventKind::Arrival;
};

/// Continuous simulation clock: elapsed time plus event counter.
struct SimClock {
    double time = 0.0;
    long long events = 0;
};

/// Episode layout used by the learning loops: fixed number of state-change
/// events per episode, queues reset to zero at each episode start.
struct EpisodeSchedule {
    int horizon_events = 1;
    int episodes = 1;
};

struct StepResult {
    SystemState state;  // post-transition
    Event event;
    double sojourn = 0.0;
};

/// One transition of the joint chain by competing exponentials: the sojourn is
/// Exponential(total rate) and the event is chosen proportionally to its rate.
/// Throws DeadStateError when no transition is possible.
StepResult step(const SystemConfig& cfg, const SystemState& state, const PlacementAction& action,
                Rng& rng);

/// In-place variant used by the hot loops; returns the event, advances `state`
/// and writes the sojourn.
Event step_inplace(const SystemConfig& cfg, SystemState& state, const PlacementAction& action,
                   Rng& rng, double& sojourn);

using PolicyFn = std::function<PlacementAction(const SystemState&)>;

/// Observer invoked once per event with the pre-transition state and action.
using TraceSink = std::function<void(const SimClock&, const SystemState&, const PlacementAction&,
                                     Event, double /*sojourn*/, double /*cost_rate*/)>;

struct RunSummary {
    double time_average_cost = 0.0;
    double total_time = 0.0;
    long long events = 0;
    std::vector<double> mean_queue;  // time-averaged queue length per service
    std::vector<double> throughput;  // deliveries per unit time per service
    SystemState final_state;
};

/// Runs a stationary policy for `total_events` transitions from the zero state
/// and integrates cost * sojourn.
RunSummary run_policy(const SystemConfig& cfg, const PolicyFn& policy, long long total_events,
                      Rng& rng, const TraceSink& sink = nullptr);

/// Learner driven by run_episodic: queried once per episode for the policy it
/// wants to play, then fed every transition.
class EpisodicLearner {
  public:
    virtual ~EpisodicLearner() = default;
    virtual void begin_episode(int episode) = 0;
    virtual PlacementAction policy(const SystemState& state) = 0;
    virtual void observe(const SystemState& pre, const PlacementAction& action, Event event,
                         double sojourn) = 0;
};

struct EpisodicResult {
    std::vector<double> episode_cost;      // integrated cost per episode
    std::vector<double> cumulative_regret; // running sum of (episode cost - benchmark)
    double benchmark = 0.0;
};

/// Episodic loop: reset to zeros, ask the learner for its episode policy, run
/// `horizon_events` transitions, accumulate cost * sojourn. Regret is measured
/// against `benchmark_episode_cost` (see estimate_episode_benchmark).
/// Throws ProtocolError naming the episode if the learner emits an infeasible
/// action.
EpisodicResult run_episodic(const SystemConfig& cfg, EpisodicLearner& learner,
                            const EpisodeSchedule& schedule, Rng& rng,
                            double benchmark_episode_cost);

/// Monte-Carlo estimate of the expected integrated cost of one episode under a
/// fixed policy, averaged over `episodes` independent episodes.
double estimate_episode_benchmark(const SystemConfig& cfg, const PolicyFn& policy,
                                  int horizon_events, int episodes, Rng& rng);

}  // namespace wisp::sim
