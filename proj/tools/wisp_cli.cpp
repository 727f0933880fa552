// wisp: Whittle-index service placement toolkit.
//
// Subcommands cover the exact analytics (whittle-table, optimal), the
// event-driven simulator (simulate), the learners (learn-ucb, learn-q,
// baseline) and the canned experiments (table1, switching-curve, convergence,
// mse-vs-n). All outputs are deterministic given --seed.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>

#include "wisp/errors.hpp"
#include "wisp/experiments.hpp"
#include "wisp/io.hpp"
#include "wisp/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitResource = 3;
constexpr int kExitRuntime = 4;

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    int threads = 0;
    std::string format = "csv";
};

wisp::scenario::Scenario load_scenario(const GlobalOpts& g, wisp::scenario::Kind fallback_kind) {
    wisp::scenario::Scenario sc = g.config_path.empty()
                                      ? wisp::scenario::default_scenario(fallback_kind)
                                      : wisp::scenario::parse_scenario(g.config_path);
    if (g.seed_set) sc.seed = g.seed;
    if (!g.out_dir.empty()) sc.out_dir = g.out_dir;
    if (g.threads > 0) sc.threads = g.threads;
    return sc;
}

void report_files(const std::vector<std::filesystem::path>& files) {
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
}

// With --format json the run's summary document goes to stdout as-is.
void report_summary(const GlobalOpts& g, const wisp::experiments::ResultBundle& bundle) {
    if (g.format == "json" && !bundle.summary_json.empty()) std::cout << bundle.summary_json;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Whittle-index service placement toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--config", g.config_path, "Scenario file (JSON)");
    auto* seed_opt = app.add_option("--seed", g.seed, "Override the scenario seed");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads for replications (0 = auto)");
    app.add_option("--format", g.format, "Output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* cmd_table = app.add_subcommand("whittle-table", "Dump per-service index tables");
    auto* cmd_optimal = app.add_subcommand("optimal", "Exact average-cost solve and action map");
    auto* cmd_sim = app.add_subcommand("simulate", "Run the index policy in the event simulator");
    long long sim_events = 100000;
    std::string sim_trace;
    cmd_sim->add_option("--events", sim_events, "Number of state-change events");
    cmd_sim->add_option("--trace", sim_trace, "Write a per-event trace CSV to this file");
    auto* cmd_ucb = app.add_subcommand("learn-ucb", "Optimistic candidate-set index learning");
    auto* cmd_q = app.add_subcommand("learn-q", "Two-timescale per-state index learning");
    auto* cmd_base = app.add_subcommand("baseline", "Single-table exploration baseline");
    auto* cmd_t1 = app.add_subcommand("table1", "Index-rule optimality gap across load ratios");
    auto* cmd_sw = app.add_subcommand("switching-curve", "Serve regions: optimal vs index rule");
    auto* cmd_conv = app.add_subcommand("convergence", "Learner index traces vs closed form");
    auto* cmd_mse = app.add_subcommand("mse-vs-n", "Learned-policy cost MSE as N grows");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        using wisp::scenario::Kind;
        namespace ex = wisp::experiments;

        if (*cmd_table) {
            auto sc = load_scenario(g, Kind::Custom);
            ex::ResultBundle b;
            b.name = sc.name;
            b.add_file("whittle_table.csv", ex::whittle_table_csv(sc.system));
            b.summary_json = "{\"scenario_hash\": \"" + std::to_string(sc.hash()) +
                             "\", \"seed\": " + std::to_string(sc.seed) + "}\n";
            report_files(ex::emit_results(b, sc.out_dir));
            report_summary(g, b);
        } else if (*cmd_optimal) {
            auto sc = load_scenario(g, Kind::Custom);
            const auto dp = wisp::exact::value_iteration(sc.system, sc.solver);
            wisp::exact::StateSpace space(sc.system);
            wisp::io::Csv csv({"state", "value", "action"});
            std::vector<int> q;
            for (long long x = 0; x < space.size(); ++x) {
                space.decode(x, q);
                std::string qs, as;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    qs += (i ? "|" : "") + std::to_string(q[i]);
                    as += (i ? "|" : "") +
                          std::to_string(static_cast<int>(dp.action[static_cast<std::size_t>(x)].active[i]));
                }
                csv.cell(qs).cell(dp.value[static_cast<std::size_t>(x)]).cell(as);
                csv.end_row();
            }
            ex::ResultBundle b;
            b.name = sc.name;
            b.add_file("optimal_policy.csv", csv.str());
            b.summary_json = "{\"average_cost\": " + wisp::io::format_double(dp.average_cost) +
                             ", \"iterations\": " + std::to_string(dp.iterations) +
                             ", \"scenario_hash\": \"" + std::to_string(sc.hash()) +
                             "\", \"seed\": " + std::to_string(sc.seed) + "}\n";
            report_files(ex::emit_results(b, sc.out_dir));
            std::cout << "average_cost " << wisp::io::format_double(dp.average_cost) << "\n";
        } else if (*cmd_sim) {
            auto sc = load_scenario(g, Kind::Custom);
            std::vector<wisp::whittle::WhittleTable> tabs;
            for (const auto& p : sc.system.services) tabs.push_back(wisp::whittle::whittle_table(p));
            auto policy = [&](const wisp::SystemState& s) {
                return wisp::whittle::index_rule_action(tabs, s, sc.system.capacity);
            };
            wisp::Rng rng = wisp::Rng::derive(sc.seed, 0x51);
            std::string trace_buf;
            wisp::sim::TraceSink sink = nullptr;
            std::unique_ptr<wisp::io::Csv> trace_csv;
            if (!sim_trace.empty()) {
                trace_csv = std::make_unique<wisp::io::Csv>(std::vector<std::string>{
                    "event_index", "time", "service", "event_type", "state_after"});
                sink = [&](const wisp::sim::SimClock& clock, const wisp::SystemState& pre,
                           const wisp::PlacementAction&, wisp::sim::Event ev, double sojourn,
                           double) {
                    std::string after;
                    for (int i = 0; i < static_cast<int>(pre.queues.size()); ++i) {
                        int v = pre.queues[static_cast<std::size_t>(i)];
                        if (i == ev.service) v += ev.kind == wisp::sim::EventKind::Arrival ? 1 : -1;
                        after += (i ? "|" : "") + std::to_string(v);
                    }
                    trace_csv->cell(clock.events).cell(clock.time + sojourn).cell(ev.service)
                        .cell(std::string(ev.kind == wisp::sim::EventKind::Arrival ? "arrival"
                                                                                   : "departure"))
                        .cell(after);
                    trace_csv->end_row();
                };
            }
            const auto sum = wisp::sim::run_policy(sc.system, policy, sim_events, rng, sink);
            ex::ResultBundle b;
            b.name = sc.name;
            wisp::io::Csv csv({"service_id", "mean_queue", "throughput"});
            for (int i = 0; i < sc.system.size(); ++i) {
                csv.cell(i).cell(sum.mean_queue[static_cast<std::size_t>(i)])
                    .cell(sum.throughput[static_cast<std::size_t>(i)]);
                csv.end_row();
            }
            b.add_file("simulate_summary.csv", csv.str());
            if (trace_csv) b.add_file(sim_trace, trace_csv->str());
            b.summary_json = "{\"time_average_cost\": " +
                             wisp::io::format_double(sum.time_average_cost) +
                             ", \"events\": " + std::to_string(sum.events) +
                             ", \"scenario_hash\": \"" + std::to_string(sc.hash()) +
                             "\", \"seed\": " + std::to_string(sc.seed) + "}\n";
            report_files(ex::emit_results(b, sc.out_dir));
            std::cout << "time_average_cost " << wisp::io::format_double(sum.time_average_cost)
                      << "\n";
        } else if (*cmd_ucb) {
            auto sc = load_scenario(g, Kind::Convergence);
            auto art = ex::run_learn_ucb(sc);
            report_files(ex::emit_results(art.bundle, sc.out_dir));
            report_summary(g, art.bundle);
            std::cout << "truth_frequency_after_120 "
                      << wisp::io::format_double(art.truth_frequency_tail) << "\n";
        } else if (cmd_q->parsed() || cmd_base->parsed()) {
            auto sc = load_scenario(g, Kind::Convergence);
            auto art = ex::run_learn_q(sc, cmd_base->parsed());
            report_files(ex::emit_results(art.bundle, sc.out_dir));
            report_summary(g, art.bundle);
        } else if (*cmd_t1) {
            auto sc = load_scenario(g, Kind::Table1);
            auto res = ex::run_table1(sc);
            report_files(ex::emit_results(res.bundle, sc.out_dir));
            report_summary(g, res.bundle);
            for (const auto& r : res.rows)
                if (r.primary)
                    std::cout << "ratio " << r.ratio << " gap% "
                              << wisp::io::format_double(r.gap_percent) << "\n";
        } else if (*cmd_sw) {
            auto sc = load_scenario(g, Kind::SwitchingCurve);
            auto res = ex::run_switching_curve(sc);
            report_files(ex::emit_results(res.bundle, sc.out_dir));
            report_summary(g, res.bundle);
            std::cout << "agreement " << wisp::io::format_double(res.agreement) << "\n";
        } else if (*cmd_conv) {
            auto sc = load_scenario(g, Kind::Convergence);
            auto res = ex::run_convergence(sc);
            report_files(ex::emit_results(res.bundle, sc.out_dir));
            report_summary(g, res.bundle);
            for (const auto& a : res.algos)
                std::cout << a.name << " episodes_to_tolerance " << a.episodes_to_tolerance << "\n";
        } else if (*cmd_mse) {
            auto sc = load_scenario(g, Kind::MseVsN);
            auto res = ex::run_mse_vs_n(sc);
            report_files(ex::emit_results(res.bundle, sc.out_dir));
            report_summary(g, res.bundle);
            for (const auto& p : res.points)
                std::cout << "n " << p.n << " ucb " << wisp::io::format_double(p.ucb) << " qlearn "
                          << wisp::io::format_double(p.qlearn) << " baseline "
                          << wisp::io::format_double(p.baseline) << "\n";
        }
        return kExitOk;
    } catch (const wisp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const wisp::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return kExitResource;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
