#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "wisp/exact.hpp"
#include "wisp/model.hpp"
#include "wisp/rng.hpp"
#include "wisp/sim.hpp"
#include "wisp/whittle.hpp"

namespace wisp::ucb {

/// One hypothesis about the system: per-service mean inter-arrival and mean
/// delivery times. Mean-time parametrization keeps the empirical estimators
/// unbiased.
struct CandidateParams {
    std::vector<std::pair<double, double>> mean_times;  // (1/lambda, 1/mu) per service

    std::vector<ServiceParams> to_rates(const SystemConfig& base) const;
};

struct CandidateSet {
    std::vector<CandidateParams> candidates;
    int truth_index = -1;  // position of the true parameter in synthetic runs, -1 if unknown

    void validate(int n_services) const;
    /// Smallest rate appearing anywhere in the set (= 1 / largest mean time).
    double min_rate() const;
};

/// Confidence/optimism constants. `theorem_instantiation` reproduces the
/// analysis defaults (delta = epsilon = 1/T, b = 2); experiments typically
/// override epsilon/delta/b with looser values so the ball can shrink at small
/// horizons. tau_h must satisfy tau_h >= -log(epsilon) / min rate.
struct UcbConfig {
    double delta = 0.1;
    double b = 2.0;
    double epsilon = 0.5;
    double tau_h = 0.0;
    double k1 = 0.0;  // 2 * tau_h^2
    long long horizon_events = 0;

    static UcbConfig theorem_instantiation(long long total_events, double min_rate);
    static UcbConfig with(double delta, double b, double epsilon, long long total_events,
                          double min_rate);
    void validate(double min_rate) const;
    double log_factor(int n_services) const;
};

/// Running empirical means of inter-arrival and delivery times. Delivery-time
/// samples are queue-weighted active exposure between consecutive departures,
/// which estimates 1/mu without bias under state-dependent delivery rates.
/// Both probe intervals keep running across episode resets: the arrival
/// process is exogenous, and the departure intensity per unit of exposure is
/// mu regardless of which customers are waiting, so intervals spanning resets
/// are still exponential. Cutting them at episode boundaries would censor
/// away the long gaps once episodes are short.
class EstimatorState {
  public:
    explicit EstimatorState(int n_services);

    void observe(const SystemState& pre, const PlacementAction& action, sim::Event event,
                 double sojourn);

    long long arrival_count(int i) const { return arrival_count_[static_cast<std::size_t>(i)]; }
    long long delivery_count(int i) const { return delivery_count_[static_cast<std::size_t>(i)]; }
    double mean_arrival_time(int i) const;
    double mean_delivery_time(int i) const;
    int services() const { return static_cast<int>(arrival_count_.size()); }

  private:
    std::vector<double> arrival_time_sum_, delivery_exposure_sum_;
    std::vector<long long> arrival_count_, delivery_count_;
    std::vector<double> since_last_arrival_, exposure_;
};

struct ConfidenceBall {
    std::vector<std::pair<double, double>> radii;  // (arrival, delivery) per service; inf if no samples
    std::vector<int> members;                      // candidate indices inside every interval
};

ConfidenceBall confidence_ball(const EstimatorState& est, const UcbConfig& cfg,
                               const CandidateSet& candidates);

/// Optimistic selection: the member with the smallest relaxed-problem value
/// (ties to the earlier candidate); uniform draw over the whole set when the
/// ball is empty.
int optimistic_param(const ConfidenceBall& ball, const std::vector<double>& relaxed_values,
                     Rng& rng);

/// Suboptimality gap diagnostic: relaxed value of the truth minus the largest
/// relaxed value among candidates with a different cost. Empty when every
/// candidate is cost-equivalent to the truth.
std::optional<double> candidate_gap(const SystemConfig& cfg, const CandidateSet& candidates,
                                    int truth_index);

/// Episodic learner implementing the optimistic index policy.
class UcbWhittleLearner : public sim::EpisodicLearner {
  public:
    UcbWhittleLearner(const SystemConfig& cfg, CandidateSet candidates, UcbConfig ucb_cfg,
                      Rng selection_rng);

    void begin_episode(int episode) override;
    PlacementAction policy(const SystemState& state) override;
    void observe(const SystemState& pre, const PlacementAction& action, sim::Event event,
                 double sojourn) override;

    const std::vector<int>& selected_history() const { return selected_; }
    const std::vector<double>& relaxed_values() const { return relaxed_values_; }
    const std::vector<whittle::WhittleTable>& tables_for(int candidate) const {
        return tables_[static_cast<std::size_t>(candidate)];
    }
    const EstimatorState& estimates() const { return est_; }
    const CandidateSet& candidates() const { return candidates_; }

  private:
    SystemConfig cfg_;
    CandidateSet candidates_;
    UcbConfig ucb_cfg_;
    Rng rng_;
    EstimatorState est_;
    std::vector<double> relaxed_values_;
    std::vector<std::vector<whittle::WhittleTable>> tables_;  // per candidate, per service
    std::vector<int> selected_;
    int current_ = 0;
};

struct UcbRunResult {
    sim::EpisodicResult episodic;
    std::vector<int> selected;          // candidate id per episode
    std::vector<double> relaxed_values; // per candidate
    double benchmark = 0.0;
};

/// Full loop: estimate the benchmark from the true-parameter index policy,
/// then run the learner for `schedule.episodes` episodes.
UcbRunResult run_ucb_whittle(const SystemConfig& cfg, const CandidateSet& candidates,
                             const UcbConfig& ucb_cfg, const sim::EpisodeSchedule& schedule,
                             std::uint64_t seed, int benchmark_episodes);

}  // namespace wisp::ucb
