#pragma once

#include <array>
#include <vector>

#include "wisp/model.hpp"
#include "wisp/rng.hpp"

namespace wisp::qlearn {

/// Fast (per-transition) and slow (per-episode) step sizes. A non-finite tau
/// means a constant schedule; otherwise the step decays hyperbolically, which
/// satisfies the usual square-summability requirements.
struct RateSchedules {
    double alpha0 = 0.01;
    double alpha_tau = 0.0;  // 0 = constant
    double gamma0 = 0.005;
    double gamma_tau = 0.0;

    double alpha(long long t) const {
        return alpha_tau > 0 ? alpha0 / (1.0 + static_cast<double>(t) / alpha_tau) : alpha0;
    }
    double gamma(long long k) const {
        return gamma_tau > 0 ? gamma0 / (1.0 + static_cast<double>(k) / gamma_tau) : gamma0;
    }
    void validate() const;
};

using QTable = std::vector<std::array<double, 2>>;  // [state][action], zero-initialized

/// The two tables learned for one target state s: `lower` follows the policy
/// that is active from s upward, `upper` the one active from s+1 upward. Only
/// the entries the respective policy visits are ever written.
struct QTablePair {
    int target_state = 0;
    QTable lower;  // threshold s   (active iff state >= s)
    QTable upper;  // threshold s+1 (active iff state >= s+1)

    QTablePair(int target, int s_max)
        : target_state(target),
          lower(static_cast<std::size_t>(s_max + 1), {0.0, 0.0}),
          upper(static_cast<std::size_t>(s_max + 1), {0.0, 0.0}) {}
};

/// One step of the per-service chain under the uniformized kernel with
/// uniform rate lambda + mu*s_max: up with probability lambda/rate (unless
/// truncated), down with probability mu*s*a/rate, else stay.
int embedded_transition(const ServiceParams& p, int s, bool active, Rng& rng);

/// Temporal-difference update for a fixed threshold policy (active iff
/// s >= threshold). Passive updates are subsidized by `subsidy`. The action
/// must match the policy's prescription at s; the bootstrap follows the
/// policy at the next state. Untouched entries stay untouched.
void q_update(QTable& table, int threshold, int s, bool active, int s_next, double cost_value,
              double subsidy, double alpha);

/// Slow-timescale index iterate toward the upper/lower table indifference.
inline double whittle_iterate(double w, double q_upper_passive, double q_lower_active,
                              double gamma) {
    return (1.0 - gamma) * w + gamma * (q_upper_passive - q_lower_active);
}

struct QWhittleOptions {
    /// Re-anchor both tables at the reference state 0 after every update.
    /// Bounds the iterates when the plain recursion drifts.
    bool relative_value = false;
};

struct LearnedIndexResult {
    std::vector<double> index;               // per state, 0..s_max-1
    std::vector<std::vector<double>> trace;  // [episode][state]
};

/// Per-service index learning: for each target state, run the two-chain
/// episodic recursion for `episodes` episodes of `horizon` transitions each
/// (both chains restart from 0 every episode) and update the index iterate at
/// episode boundaries.
LearnedIndexResult run_q_whittle(const ServiceParams& p, int episodes, int horizon,
                                 const RateSchedules& schedules, Rng& rng,
                                 const QWhittleOptions& options = {});

/// Conventional single-table baseline: one chain, epsilon-greedy behavior over
/// both actions, every index iterate updated per step with the within-table
/// indifference gradient. `greedy_with_prob_epsilon` selects which branch of
/// the exploration coin is greedy.
LearnedIndexResult run_epsilon_greedy_baseline(const ServiceParams& p, int episodes, int horizon,
                                               const RateSchedules& schedules,
                                               double epsilon_explore,
                                               bool greedy_with_prob_epsilon, Rng& rng);

/// Splits service ids into ceil(N/K) groups of size <= K; groups learn
/// sequentially on the server while members of a group learn concurrently.
std::vector<std::vector<int>> group_scheduler(int n_services, int capacity);

}  // namespace wisp::qlearn
