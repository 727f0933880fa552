#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wisp/exact.hpp"
#include "wisp/model.hpp"
#include "wisp/qlearn.hpp"
#include "wisp/sim.hpp"
#include "wisp/ucb.hpp"

namespace wisp::scenario {

enum class Kind { Table1, SwitchingCurve, Convergence, MseVsN, Custom };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

/// Candidate-set description; expanded to a flat list at build time.
struct CandidateSpec {
    // Cartesian product over per-service lambda values (mu fixed at truth).
    std::vector<std::vector<double>> lambda_grid;
    // Or multiplicative factors applied jointly to all services' rates.
    std::vector<double> lambda_scales, mu_scales;
    // Or an explicit list of (mean arrival time, mean delivery time) rows.
    std::vector<std::vector<std::pair<double, double>>> explicit_mean_times;
    int explicit_truth_index = -1;

    bool empty() const {
        return lambda_grid.empty() && lambda_scales.empty() && explicit_mean_times.empty();
    }
    ucb::CandidateSet build(const SystemConfig& truth) const;
};

struct UcbSection {
    double delta = 0.05;
    double b = 2.0;
    double epsilon = 0.62;
};

struct QlearnSection {
    qlearn::RateSchedules schedules;
    bool relative_value = false;
    double epsilon_explore = 0.5;
    bool greedy_with_prob_epsilon = true;
};

struct Table1Section {
    double mu = 5.0;
    std::vector<double> ratios = {1, 2, 3, 4, 5, 6, 7};
    std::vector<int> s_max_offsets = {0, -8, 8};  // sensitivity to the truncation knob
};

struct SwitchingSection {
    double mu = 5.0;
    double rho1 = 4.0;
    double rho2 = 6.0;
    int s_max = 30;
};

struct ConvergenceSection {
    double tolerance = 0.10;
    int seeds = 10;
};

struct MseSection {
    std::vector<int> n_values = {10, 20, 30, 40, 50};
    std::vector<double> type_lambdas = {10, 15, 20, 25, 30};
    double mu = 5.0;
    // Deep enough that the loads above rarely hit the truncation bound
    // (blocked arrivals are unobservable and bias the rate estimates), yet
    // shallow enough that every threshold policy's states stay reachable
    // within one episode.
    int s_max = 12;
    int train_episodes = 150;
    int eval_replications = 48;
    int eval_episodes = 40;
    // Per-type arrival-rate factors spanned by the candidate set (Cartesian
    // across types, truth = all-ones).
    std::vector<double> candidate_factors = {1.0 / 3.0, 1.0, 3.0};
};

struct Scenario {
    std::string name = "scenario";
    Kind kind = Kind::Custom;
    std::uint64_t seed = 1;
    int replications = 10;
    int threads = 0;  // 0 = hardware concurrency
    std::filesystem::path out_dir = "out";

    SystemConfig system;
    sim::EpisodeSchedule schedule{100, 200};
    int benchmark_episodes = 200;
    exact::ValueIterationOptions solver;
    UcbSection ucb;
    CandidateSpec candidates;
    QlearnSection qlearn;

    Table1Section table1;
    SwitchingSection switching;
    ConvergenceSection convergence;
    MseSection mse;

    /// Stable hash of the fully-resolved scenario (defaults baked in).
    std::uint64_t hash() const;
    std::string canonical_json() const;
};

/// Parses and validates a scenario file; error messages name the offending
/// field. Unknown experiment kinds list the valid options.
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(const std::string& text);

/// Built-in defaults reproducing the canonical experiment of each kind.
Scenario default_scenario(Kind kind);

}  // namespace wisp::scenario
