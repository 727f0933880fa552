#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "wisp/model.hpp"

namespace wisp::exact {

/// Single-service threshold policy: passive (not placed) for s <= threshold,
/// active for s > threshold. threshold = -1 means always active.
struct ThresholdPolicy {
    int threshold = 0;
    bool active_at(int s) const { return s > threshold; }
};

/// Stationary distribution of a threshold policy, supported on
/// {offset, ..., s_max} after truncation and renormalization.
struct StationaryDist {
    int offset = 0;
    std::vector<double> probs;  // probs[k] = P(S = offset + k)

    int s_max() const { return offset + static_cast<int>(probs.size()) - 1; }
    double at(int s) const {
        int k = s - offset;
        if (k < 0 || k >= static_cast<int>(probs.size())) return 0.0;
        return probs[static_cast<std::size_t>(k)];
    }
    double mean() const;
};

/// Closed-form stationary distribution of the birth-death chain under a
/// threshold policy: q(R+l) proportional to (lambda/mu)^l / prod_{k=1..l}(R+k).
/// Requires 0 <= R <= s_max - 1.
StationaryDist stationary_dist(const ServiceParams& p, int R);

/// Same distribution via the balance-equation linear solve on the truncated
/// chain. Independent of the closed form; used as its cross-check.
StationaryDist stationary_solve(const ServiceParams& p, int R);

/// Stationary mean of cost(p, S) under the threshold-R policy.
double expected_cost(const ServiceParams& p, int R);

/// Stationary probability of being passive under threshold R; all passive
/// mass sits in state R (lower states are transient).
double passive_mass(const ServiceParams& p, int R);

/// Average subsidized cost h^R(W) = expected_cost(R) - W * passive_mass(R).
double threshold_avg_cost(const ServiceParams& p, int R, double subsidy);

/// Minimizer of h^R(W) over R in {0, ..., s_max-1}; ties go to the smaller R.
ThresholdPolicy best_threshold(const ServiceParams& p, double subsidy);

/// Per-service table of expected costs and passive masses over all thresholds,
/// for callers that scan many subsidies (dual search, index construction).
struct ThresholdProfile {
    std::vector<double> expected_cost;  // [R], R = 0..s_max-1
    std::vector<double> passive_mass;   // [R]
    int best(double subsidy) const;
};
ThresholdProfile threshold_profile(const ServiceParams& p);

// ---------------------------------------------------------------------------
// Subsidized single-service MDP, solved exactly.
// ---------------------------------------------------------------------------

struct SingleServiceSolution {
    double average_cost = 0.0;
    std::vector<double> value;         // relative values, value[0] = 0
    std::vector<std::uint8_t> active;  // optimal action per state
    int threshold = 0;                 // -1..s_max-1 when threshold_structured
    bool threshold_structured = false;
    long long iterations = 0;
};

struct SolveOptions {
    double tol = 1e-10;
    long long max_iterations = 2'000'000;
};

/// Relative value iteration for one service under passivity subsidy W:
/// cost rate is cost(p, s) - W when passive. Uniformized at lambda + mu*s_max.
SingleServiceSolution solve_single_service(const ServiceParams& p, double subsidy,
                                           const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Coupled system, exact solves on the truncated joint space.
// ---------------------------------------------------------------------------

/// Mixed-radix indexing of the joint queue-length space.
class StateSpace {
  public:
    explicit StateSpace(const SystemConfig& cfg);
    long long size() const { return size_; }
    long long encode(const std::vector<int>& queues) const;
    void decode(long long index, std::vector<int>& queues) const;
    long long stride(int service) const { return strides_[static_cast<std::size_t>(service)]; }
    int dim(int service) const { return dims_[static_cast<std::size_t>(service)]; }

  private:
    std::vector<int> dims_;
    std::vector<long long> strides_;
    long long size_ = 0;
};

struct ValueIterationOptions {
    double tol = 1e-9;                    // span of successive per-step values
    long long max_iterations = 1'000'000;
    long long work_budget = 10'000'000;   // states * iterations
};

struct DpSolution {
    double average_cost = 0.0;
    std::vector<double> value;            // relative value per encoded state
    std::vector<PlacementAction> action;  // minimizing K-feasible action per state
    long long iterations = 0;
    double final_span = 0.0;
};

/// Relative value iteration for the joint average-cost problem, uniformized at
/// sum(lambda_i) + sum(mu_i * s_max_i). The inner minimization decomposes:
/// activating service i changes the Bellman backup by mu_i*S_i*(V(S-e_i)-V(S)),
/// so the best K-feasible action keeps the (at most K) most negative terms.
DpSolution value_iteration(const SystemConfig& cfg, const ValueIterationOptions& opts = {});

using PolicyFn = std::function<PlacementAction(const SystemState&)>;

struct PolicyCost {
    double average_cost = 0.0;
    std::vector<double> stationary;  // per encoded state
    double boundary_mass = 0.0;      // stationary mass on states with any queue at s_max
};

/// Average cost of a fixed stationary policy: stationary solve of the
/// policy-induced chain. Throws ConfigError naming the closed classes if the
/// chain has more than one (the average cost would depend on the start state).
PolicyCost exact_policy_cost(const SystemConfig& cfg, const PolicyFn& policy);

struct RelaxedSolution {
    double value = 0.0;              // sum of expected costs at the chosen thresholds
    double subsidy = 0.0;            // dual variable at the constraint crossing
    std::vector<int> thresholds;     // per-service threshold at `subsidy`
    double expected_active = 0.0;    // sum_i (1 - passive_mass_i) at those thresholds
    bool bracketed = true;           // false if no subsidy meets the capacity constraint
};

/// Value of the capacity-relaxed problem (time-average placement constraint).
/// Searches the smallest subsidy whose expected active count drops to K and
/// evaluates just below the crossing, which keeps the result a lower bound.
RelaxedSolution relaxed_value(const SystemConfig& cfg);

/// Same, with the service rates replaced by `theta` (s_max kept from cfg).
RelaxedSolution relaxed_value(const SystemConfig& cfg, const std::vector<ServiceParams>& theta);

}  // namespace wisp::exact
