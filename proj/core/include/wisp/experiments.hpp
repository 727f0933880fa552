#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wisp/scenario.hpp"
#include "wisp/whittle.hpp"

namespace wisp::experiments {

/// Runs fn(0..n-1) on a small worker pool; results must be written into
/// per-index slots so the outcome is independent of the thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Machine-readable experiment output: named files plus a JSON summary that
/// embeds the scenario hash and seed. Re-running the same scenario reproduces
/// every byte.
struct ResultBundle {
    std::string name;
    std::vector<std::pair<std::string, std::string>> files;  // filename -> content
    std::string summary_json;

    void add_file(std::string filename, std::string content) {
        files.emplace_back(std::move(filename), std::move(content));
    }
};

/// Writes all files plus summary.json under dir/name; atomic per file.
std::vector<std::filesystem::path> emit_results(const ResultBundle& bundle,
                                                const std::filesystem::path& dir);

// ---------------------------------------------------------------------------

struct Table1Row {
    double ratio = 0.0;
    int s_max = 0;
    double optimal_cost = 0.0;
    double whittle_cost = 0.0;
    double gap_percent = 0.0;
    double boundary_mass = 0.0;  // stationary mass at the truncation boundary
    long long vi_iterations = 0;
    bool primary = true;  // false for truncation-sensitivity rows
};

struct Table1Result {
    std::vector<Table1Row> rows;
    ResultBundle bundle;
};

/// Optimality gap of the index rule against the exact average-cost optimum on
/// two identical services, across load ratios; extra rows probe the
/// truncation bound.
Table1Result run_table1(const scenario::Scenario& sc);

struct SwitchingCurveResult {
    int s_max = 0;
    std::vector<int> optimal_serve;  // encoded joint state -> served service (-1 none)
    std::vector<int> index_serve;
    double agreement = 0.0;  // fraction of joint states with the same choice
    double optimal_cost = 0.0;
    double whittle_cost = 0.0;
    ResultBundle bundle;
};

/// Serve-region maps of the exact optimal policy and the index rule on the
/// two-service asymmetric instance.
SwitchingCurveResult run_switching_curve(const scenario::Scenario& sc);

struct AlgoTrace {
    std::string name;
    std::vector<std::vector<double>> median_trace;  // [episode][state]
    std::vector<double> final_median;               // [state]
    int episodes_to_tolerance = -1;                 // -1 = not reached
};

struct ConvergenceResult {
    std::vector<double> truth;  // closed-form per-state indices
    double tolerance = 0.0;
    std::vector<AlgoTrace> algos;  // ucb, q-whittle, baseline
    ResultBundle bundle;
};

/// Index-iterate traces of the three learners on the common single-class
/// setup, plus episodes-to-tolerance against the closed form.
ConvergenceResult run_convergence(const scenario::Scenario& sc);

struct MsePoint {
    int n = 0;
    double ucb = 0.0;
    double qlearn = 0.0;
    double baseline = 0.0;
};

struct MseResult {
    std::vector<MsePoint> points;
    ResultBundle bundle;
};

/// Mean squared per-service cost difference between each learned-index policy
/// and the true-index policy, paired by replication seed, as the number of
/// services grows with K = N/2.
MseResult run_mse_vs_n(const scenario::Scenario& sc);

// --- CLI-facing helpers -----------------------------------------------------

/// Index tables for every service: CSV columns service_id, state, index,
/// provenance.
std::string whittle_table_csv(const SystemConfig& cfg);

struct UcbRunArtifacts {
    ucb::UcbRunResult run;
    ResultBundle bundle;
    double truth_frequency_tail = 0.0;  // selection frequency of the truth after episode 120
};
UcbRunArtifacts run_learn_ucb(const scenario::Scenario& sc);

struct QLearnArtifacts {
    std::vector<qlearn::LearnedIndexResult> per_service;
    ResultBundle bundle;
};
QLearnArtifacts run_learn_q(const scenario::Scenario& sc, bool baseline);

}  // namespace wisp::experiments
