#include "wisp/experiments.hpp"

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include <json.hpp>
#endif

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "wisp/errors.hpp"
#include "wisp/io.hpp"

namespace wisp::experiments {

using json = nlohmann::json;

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<std::filesystem::path> emit_results(const ResultBundle& bundle,
                                                const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    const auto base = dir / bundle.name;
    for (const auto& [filename, content] : bundle.files) {
        const auto path = base / filename;
        io::write_file_atomic(path, content);
        written.push_back(path);
    }
    if (!bundle.summary_json.empty()) {
        const auto path = base / "summary.json";
        io::write_file_atomic(path, bundle.summary_json);
        written.push_back(path);
    }
    return written;
}

namespace {

json summary_header(const scenario::Scenario& sc) {
    json j;
    j["scenario_hash"] = std::to_string(sc.hash());
    j["seed"] = sc.seed;
    j["kind"] = scenario::kind_name(sc.kind);
    j["name"] = sc.name;
    return j;
}

std::vector<whittle::WhittleTable> tables_for(const SystemConfig& cfg) {
    std::vector<whittle::WhittleTable> t;
    t.reserve(cfg.services.size());
    for (const auto& p : cfg.services) t.push_back(whittle::whittle_table(p));
    return t;
}

exact::PolicyFn index_policy(const SystemConfig& cfg,
                             std::shared_ptr<std::vector<whittle::WhittleTable>> tables) {
    const int k = cfg.capacity;
    return [tables, k](const SystemState& s) {
        return whittle::index_rule_action(*tables, s, k);
    };
}

int auto_s_max(double rho) {
    return static_cast<int>(std::ceil(rho + 8.0 * std::sqrt(rho) + 10.0));
}

}  // namespace

Table1Result run_table1(const scenario::Scenario& sc) {
    Table1Result out;
    std::vector<std::pair<double, int>> grid;  // (ratio, s_max); first offset of each ratio is primary
    for (double ratio : sc.table1.ratios)
        for (int off : sc.table1.s_max_offsets)
            grid.emplace_back(ratio, std::max(4, auto_s_max(ratio) + off));
    const std::size_t per = sc.table1.s_max_offsets.size();
    out.rows.resize(grid.size());

    parallel_for(static_cast<int>(grid.size()), sc.threads, [&](int gi) {
        const auto [ratio, sm] = grid[static_cast<std::size_t>(gi)];
        SystemConfig cfg;
        cfg.capacity = 1;
        const double mu = sc.table1.mu;
        cfg.services = {{ratio * mu, mu, sm}, {ratio * mu, mu, sm}};
        auto solve = sc.solver;
        const auto dp = exact::value_iteration(cfg, solve);
        auto tabs = std::make_shared<std::vector<whittle::WhittleTable>>(tables_for(cfg));
        const auto pc = exact::exact_policy_cost(cfg, index_policy(cfg, tabs));
        Table1Row row;
        row.ratio = ratio;
        row.s_max = sm;
        row.optimal_cost = dp.average_cost;
        row.whittle_cost = pc.average_cost;
        row.gap_percent = 100.0 * (pc.average_cost - dp.average_cost) / dp.average_cost;
        row.boundary_mass = pc.boundary_mass;
        row.vi_iterations = dp.iterations;
        row.primary = (static_cast<std::size_t>(gi) % per) == 0;
        out.rows[static_cast<std::size_t>(gi)] = row;
    });

    io::Csv csv({"ratio", "s_max", "primary", "optimal_cost", "whittle_cost", "gap_percent",
                 "boundary_mass", "vi_iterations"});
    for (const auto& r : out.rows) {
        csv.cell(r.ratio).cell(r.s_max).cell(static_cast<long long>(r.primary))
            .cell(r.optimal_cost).cell(r.whittle_cost).cell(r.gap_percent)
            .cell(r.boundary_mass).cell(r.vi_iterations);
        csv.end_row();
    }
    out.bundle.name = sc.name;
    out.bundle.add_file("table1.csv", csv.str());
    json j = summary_header(sc);
    j["gap_percent_primary"] = json::array();
    for (const auto& r : out.rows)
        if (r.primary) j["gap_percent_primary"].push_back(r.gap_percent);
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

SwitchingCurveResult run_switching_curve(const scenario::Scenario& sc) {
    SwitchingCurveResult out;
    const double mu = sc.switching.mu;
    const int sm = sc.switching.s_max;
    SystemConfig cfg;
    cfg.capacity = 1;
    cfg.services = {{sc.switching.rho1 * mu, mu, sm}, {sc.switching.rho2 * mu, mu, sm}};
    cfg.validate();
    out.s_max = sm;

    const auto dp = exact::value_iteration(cfg, sc.solver);
    auto tabs = std::make_shared<std::vector<whittle::WhittleTable>>(tables_for(cfg));
    const auto pc = exact::exact_policy_cost(cfg, index_policy(cfg, tabs));
    out.optimal_cost = dp.average_cost;
    out.whittle_cost = pc.average_cost;

    exact::StateSpace space(cfg);
    out.optimal_serve.assign(static_cast<std::size_t>(space.size()), -1);
    out.index_serve.assign(static_cast<std::size_t>(space.size()), -1);
    std::vector<int> q;
    long long agree = 0;
    for (long long x = 0; x < space.size(); ++x) {
        space.decode(x, q);
        const auto& da = dp.action[static_cast<std::size_t>(x)];
        for (int i = 0; i < cfg.size(); ++i)
            if (da.active[static_cast<std::size_t>(i)]) out.optimal_serve[static_cast<std::size_t>(x)] = i;
        const auto ia = whittle::index_rule_action(*tabs, SystemState{q}, cfg.capacity);
        for (int i = 0; i < cfg.size(); ++i)
            if (ia.active[static_cast<std::size_t>(i)]) out.index_serve[static_cast<std::size_t>(x)] = i;
        if (out.optimal_serve[static_cast<std::size_t>(x)] == out.index_serve[static_cast<std::size_t>(x)]) ++agree;
    }
    out.agreement = static_cast<double>(agree) / static_cast<double>(space.size());

    io::Csv csv({"s1", "s2", "optimal_serve", "index_serve", "agree"});
    for (long long x = 0; x < space.size(); ++x) {
        space.decode(x, q);
        csv.cell(q[0]).cell(q[1]).cell(out.optimal_serve[static_cast<std::size_t>(x)])
            .cell(out.index_serve[static_cast<std::size_t>(x)])
            .cell(static_cast<long long>(out.optimal_serve[static_cast<std::size_t>(x)] ==
                                         out.index_serve[static_cast<std::size_t>(x)]));
        csv.end_row();
    }
    out.bundle.name = sc.name;
    out.bundle.add_file("switching_curve.csv", csv.str());
    json j = summary_header(sc);
    j["agreement"] = out.agreement;
    j["optimal_cost"] = out.optimal_cost;
    j["whittle_cost"] = out.whittle_cost;
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

namespace {

std::vector<std::vector<double>> median_over_seeds(
    const std::vector<std::vector<std::vector<double>>>& per_seed) {
    // per_seed[seed][episode][state] -> median over seeds
    const std::size_t eps = per_seed.front().size();
    const std::size_t states = per_seed.front().front().size();
    std::vector<std::vector<double>> med(eps, std::vector<double>(states, 0.0));
    std::vector<double> tmp(per_seed.size());
    for (std::size_t e = 0; e < eps; ++e) {
        for (std::size_t s = 0; s < states; ++s) {
            for (std::size_t r = 0; r < per_seed.size(); ++r) tmp[r] = per_seed[r][e][s];
            std::nth_element(tmp.begin(), tmp.begin() + static_cast<long>(tmp.size() / 2), tmp.end());
            med[e][s] = tmp[tmp.size() / 2];
        }
    }
    return med;
}

int episodes_to_tolerance(const std::vector<std::vector<double>>& trace,
                          const std::vector<double>& truth, double tol) {
    // First episode after which every state stays within tolerance. State 0's
    // reference index is 0, so it is measured against tol * truth[1].
    const double floor0 = truth.size() > 1 ? tol * truth[1] : tol;
    int k_ok = -1;
    for (int k = 0; k < static_cast<int>(trace.size()); ++k) {
        bool ok = true;
        for (std::size_t s = 0; s < truth.size() && ok; ++s) {
            const double err = std::abs(trace[static_cast<std::size_t>(k)][s] - truth[s]);
            ok = truth[s] > 0 ? (err <= tol * truth[s]) : (err <= floor0);
        }
        if (ok && k_ok < 0) k_ok = k;
        if (!ok) k_ok = -1;
    }
    return k_ok;
}

}  // namespace

ConvergenceResult run_convergence(const scenario::Scenario& sc) {
    ConvergenceResult out;
    out.tolerance = sc.convergence.tolerance;
    const auto& svc = sc.system.services.front();
    const auto truth_table = whittle::whittle_table(svc);
    out.truth = truth_table.index;
    const int episodes = sc.schedule.episodes;
    const int H = sc.schedule.horizon_events;
    const int seeds = sc.convergence.seeds;
    const int n_states = svc.s_max;

    // Per-seed traces for the three algorithms.
    std::vector<std::vector<std::vector<double>>> tr_q(static_cast<std::size_t>(seeds)),
        tr_base(static_cast<std::size_t>(seeds)), tr_ucb(static_cast<std::size_t>(seeds));

    const auto candidates = sc.candidates.build(sc.system);
    parallel_for(seeds, sc.threads, [&](int r) {
        const auto tag = static_cast<std::uint64_t>(r);
        {
            Rng rng = Rng::derive(sc.seed, 0x10000 + tag);
            tr_q[static_cast<std::size_t>(r)] =
                qlearn::run_q_whittle(svc, episodes, H, sc.qlearn.schedules, rng,
                                      {sc.qlearn.relative_value})
                    .trace;
        }
        {
            Rng rng = Rng::derive(sc.seed, 0x20000 + tag);
            tr_base[static_cast<std::size_t>(r)] =
                qlearn::run_epsilon_greedy_baseline(svc, episodes, H, sc.qlearn.schedules,
                                                    sc.qlearn.epsilon_explore,
                                                    sc.qlearn.greedy_with_prob_epsilon, rng)
                    .trace;
        }
        {
            const auto total = static_cast<long long>(episodes) * H;
            const auto ucb_cfg = ucb::UcbConfig::with(sc.ucb.delta, sc.ucb.b, sc.ucb.epsilon,
                                                      total, candidates.min_rate());
            auto run = ucb::run_ucb_whittle(sc.system, candidates, ucb_cfg,
                                            {H, episodes}, sc.seed + 977 * tag,
                                            /*benchmark_episodes=*/64);
            // Trace of the implemented per-episode table for service 0.
            std::vector<std::vector<double>> cand_tables;
            for (const auto& cp : candidates.candidates)
                cand_tables.push_back(whittle::whittle_table(cp.to_rates(sc.system)[0]).index);
            std::vector<std::vector<double>> t(static_cast<std::size_t>(episodes),
                                               std::vector<double>(static_cast<std::size_t>(n_states)));
            for (int k = 0; k < episodes; ++k) {
                const auto& tab = cand_tables[static_cast<std::size_t>(run.selected[static_cast<std::size_t>(k)])];
                for (int s = 0; s < n_states; ++s)
                    t[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] = tab[static_cast<std::size_t>(s)];
            }
            tr_ucb[static_cast<std::size_t>(r)] = std::move(t);
        }
    });

    auto pack = [&](std::string name, std::vector<std::vector<std::vector<double>>>& per_seed) {
        AlgoTrace a;
        a.name = std::move(name);
        a.median_trace = median_over_seeds(per_seed);
        a.final_median = a.median_trace.back();
        a.episodes_to_tolerance = episodes_to_tolerance(a.median_trace, out.truth, out.tolerance);
        return a;
    };
    out.algos.push_back(pack("ucb-whittle", tr_ucb));
    out.algos.push_back(pack("q-whittle", tr_q));
    out.algos.push_back(pack("baseline", tr_base));

    io::Csv csv({"algorithm", "episode", "state", "median_index", "truth"});
    for (const auto& a : out.algos) {
        for (std::size_t e = 0; e < a.median_trace.size(); ++e)
            for (std::size_t s = 0; s < a.median_trace[e].size(); ++s) {
                csv.cell(a.name).cell(static_cast<long long>(e)).cell(static_cast<long long>(s))
                    .cell(a.median_trace[e][s]).cell(out.truth[s]);
                csv.end_row();
            }
    }
    out.bundle.name = sc.name;
    out.bundle.add_file("convergence_trace.csv", csv.str());
    json j = summary_header(sc);
    j["tolerance"] = out.tolerance;
    for (const auto& a : out.algos) j["episodes_to_tolerance"][a.name] = a.episodes_to_tolerance;
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

namespace {

struct TypedSystem {
    SystemConfig cfg;
    std::vector<int> type_of;  // service -> type
};

TypedSystem build_typed_system(const scenario::MseSection& mse, int n) {
    TypedSystem ts;
    const int t_count = static_cast<int>(mse.type_lambdas.size());
    ts.cfg.capacity = std::max(1, n / 2);
    for (int i = 0; i < n; ++i) {
        const int t = i % t_count;
        ts.type_of.push_back(t);
        ts.cfg.services.push_back({mse.type_lambdas[static_cast<std::size_t>(t)], mse.mu, mse.s_max});
    }
    ts.cfg.validate();
    return ts;
}

}  // namespace

MseResult run_mse_vs_n(const scenario::Scenario& sc) {
    MseResult out;
    const auto& mse = sc.mse;
    const int t_count = static_cast<int>(mse.type_lambdas.size());
    out.points.resize(mse.n_values.size());

    for (std::size_t ni = 0; ni < mse.n_values.size(); ++ni) {
        const int n = mse.n_values[ni];
        TypedSystem ts = build_typed_system(mse, n);
        // Per-bandit learners use the fixed per-episode horizon; the
        // system-level episodes scale with the fleet so they span comparable
        // time (and give each service comparable data) at every N.
        const int H = sc.schedule.horizon_events;
        const int H_sys = H * std::max(1, n / 10);

        // True index tables per service.
        auto truth_tabs = std::make_shared<std::vector<whittle::WhittleTable>>(tables_for(ts.cfg));

        // --- UCB training: per-type lambda factor grid, mu known. ---
        ucb::CandidateSet cands;
        {
            const std::vector<double>& factors = mse.candidate_factors;
            const int base = static_cast<int>(factors.size());
            const int combos = static_cast<int>(std::pow(base, t_count));
            for (int idx = 0; idx < combos; ++idx) {
                int rem = idx;
                std::vector<double> f(static_cast<std::size_t>(t_count));
                bool is_truth = true;
                for (int t = 0; t < t_count; ++t) {
                    const int z = rem % base;
                    f[static_cast<std::size_t>(t)] = factors[static_cast<std::size_t>(z)];
                    is_truth &= std::abs(factors[static_cast<std::size_t>(z)] - 1.0) < 1e-12;
                    rem /= base;
                }
                ucb::CandidateParams cp;
                for (int i = 0; i < n; ++i) {
                    const auto& svc = ts.cfg.services[static_cast<std::size_t>(i)];
                    const double lam = svc.lambda * f[static_cast<std::size_t>(ts.type_of[static_cast<std::size_t>(i)])];
                    cp.mean_times.emplace_back(1.0 / lam, 1.0 / svc.mu);
                }
                if (is_truth) cands.truth_index = static_cast<int>(cands.candidates.size());
                cands.candidates.push_back(std::move(cp));
            }
        }
        const auto total = static_cast<long long>(mse.train_episodes) * H_sys;
        const auto ucb_cfg =
            ucb::UcbConfig::with(sc.ucb.delta, sc.ucb.b, sc.ucb.epsilon, total, cands.min_rate());
        ucb::UcbWhittleLearner ucb_learner(ts.cfg, cands, ucb_cfg,
                                           Rng::derive(sc.seed, 0x700 + static_cast<std::uint64_t>(n)));
        {
            Rng rng = Rng::derive(sc.seed, 0x800 + static_cast<std::uint64_t>(n));
            sim::run_episodic(ts.cfg, ucb_learner, {H_sys, mse.train_episodes}, rng, 0.0);
        }
        const int chosen = ucb_learner.selected_history().back();
        auto ucb_tabs = std::make_shared<std::vector<whittle::WhittleTable>>(
            ucb_learner.tables_for(chosen));

        // --- Per-service index learning (grouped onto the server). ---
        auto q_tabs = std::make_shared<std::vector<whittle::WhittleTable>>(*truth_tabs);
        auto base_tabs = std::make_shared<std::vector<whittle::WhittleTable>>(*truth_tabs);
        const auto groups = qlearn::group_scheduler(n, ts.cfg.capacity);
        std::vector<int> order;
        for (const auto& g : groups) order.insert(order.end(), g.begin(), g.end());
        parallel_for(n, sc.threads, [&](int oi) {
            const int i = order[static_cast<std::size_t>(oi)];
            const auto& svc = ts.cfg.services[static_cast<std::size_t>(i)];
            Rng rq = Rng::derive(sc.seed, 0x900'000 + static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(i));
            auto learned = qlearn::run_q_whittle(svc, mse.train_episodes, H, sc.qlearn.schedules,
                                                 rq, {sc.qlearn.relative_value});
            auto& qt = (*q_tabs)[static_cast<std::size_t>(i)];
            qt.index = learned.index;  // ranked as learned, crossovers included
            Rng rb = Rng::derive(sc.seed, 0xA00'000 + static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(i));
            auto base = qlearn::run_epsilon_greedy_baseline(svc, mse.train_episodes, H,
                                                            sc.qlearn.schedules,
                                                            sc.qlearn.epsilon_explore,
                                                            sc.qlearn.greedy_with_prob_epsilon, rb);
            auto& bt = (*base_tabs)[static_cast<std::size_t>(i)];
            bt.index = base.index;
        });

        // --- Paired evaluation: same event randomness per replication. ---
        struct Acc {
            double ucb = 0, q = 0, base = 0;
        };
        std::vector<Acc> acc(static_cast<std::size_t>(mse.eval_replications));
        parallel_for(mse.eval_replications, sc.threads, [&](int r) {
            // Long-run per-service average cost from one continuous run, with
            // a burn-in quarter discarded. Every policy replays the same event
            // randomness within a replication, so the differences are paired.
            const long long total_events = static_cast<long long>(mse.eval_episodes) * H_sys;
            const long long burn_in = total_events / 4;
            auto eval = [&](const exact::PolicyFn& pol) {
                Rng rng = Rng::derive(sc.seed, 0xE00'000 + static_cast<std::uint64_t>(n) * 4096 +
                                                   static_cast<std::uint64_t>(r));
                SystemState st = SystemState::zeros(n);
                double cost_integral = 0.0, time = 0.0;
                for (long long e = 0; e < total_events; ++e) {
                    PlacementAction a = pol(st);
                    double sojourn = 0.0;
                    double c = 0.0;
                    for (int i = 0; i < n; ++i)
                        c += cost(ts.cfg.services[static_cast<std::size_t>(i)], st.queues[static_cast<std::size_t>(i)]);
                    sim::step_inplace(ts.cfg, st, a, rng, sojourn);
                    if (e >= burn_in) {
                        cost_integral += c * sojourn;
                        time += sojourn;
                    }
                }
                return cost_integral / time / static_cast<double>(n);
            };
            const double c_true = eval(index_policy(ts.cfg, truth_tabs));
            const double c_ucb = eval(index_policy(ts.cfg, ucb_tabs));
            const double c_q = eval(index_policy(ts.cfg, q_tabs));
            const double c_base = eval(index_policy(ts.cfg, base_tabs));
            auto& a = acc[static_cast<std::size_t>(r)];
            a.ucb = c_ucb - c_true;
            a.q = c_q - c_true;
            a.base = c_base - c_true;
        });

        MsePoint pt;
        pt.n = n;
        for (const auto& a : acc) {
            pt.ucb += a.ucb * a.ucb;
            pt.qlearn += a.q * a.q;
            pt.baseline += a.base * a.base;
        }
        const auto rcount = static_cast<double>(mse.eval_replications);
        pt.ucb /= rcount;
        pt.qlearn /= rcount;
        pt.baseline /= rcount;
        out.points[ni] = pt;
    }

    io::Csv csv({"n", "mse_ucb", "mse_qlearn", "mse_baseline"});
    for (const auto& p : out.points) {
        csv.cell(p.n).cell(p.ucb).cell(p.qlearn).cell(p.baseline);
        csv.end_row();
    }
    out.bundle.name = sc.name;
    out.bundle.add_file("mse_vs_n.csv", csv.str());
    json j = summary_header(sc);
    j["mse_formula"] =
        "mean over replications of squared (long-run per-service time-average cost of the "
        "learned-index policy minus the true-index policy), paired by replication seed with a "
        "quarter of the run discarded as burn-in";
    for (const auto& p : out.points) {
        j["points"].push_back({{"n", p.n}, {"ucb", p.ucb}, {"qlearn", p.qlearn}, {"baseline", p.baseline}});
    }
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

std::string whittle_table_csv(const SystemConfig& cfg) {
    io::Csv csv({"service_id", "state", "index", "provenance"});
    for (int i = 0; i < cfg.size(); ++i) {
        const auto t = whittle::whittle_table(cfg.services[static_cast<std::size_t>(i)]);
        for (int s = 0; s < t.size(); ++s) {
            csv.cell(i).cell(s).cell(t.index[static_cast<std::size_t>(s)])
                .cell(std::string(t.provenance[static_cast<std::size_t>(s)] == whittle::Provenance::ClosedForm
                                      ? "closed-form"
                                      : "fallback"));
            csv.end_row();
        }
    }
    return csv.str();
}

UcbRunArtifacts run_learn_ucb(const scenario::Scenario& sc) {
    UcbRunArtifacts out;
    const auto candidates = sc.candidates.build(sc.system);
    const auto total = static_cast<long long>(sc.schedule.episodes) * sc.schedule.horizon_events;
    const auto cfg = ucb::UcbConfig::with(sc.ucb.delta, sc.ucb.b, sc.ucb.epsilon, total,
                                          candidates.min_rate());
    out.run = ucb::run_ucb_whittle(sc.system, candidates, cfg, sc.schedule, sc.seed,
                                   sc.benchmark_episodes);

    int tail_hits = 0, tail_total = 0;
    for (std::size_t k = 0; k < out.run.selected.size(); ++k) {
        if (static_cast<int>(k) < 120) continue;
        ++tail_total;
        if (out.run.selected[k] == candidates.truth_index) ++tail_hits;
    }
    out.truth_frequency_tail = tail_total ? static_cast<double>(tail_hits) / tail_total : 0.0;

    io::Csv csv({"episode", "selected_candidate_id", "episode_cost", "cumulative_regret"});
    for (std::size_t k = 0; k < out.run.selected.size(); ++k) {
        csv.cell(static_cast<long long>(k)).cell(out.run.selected[k])
            .cell(out.run.episodic.episode_cost[k]).cell(out.run.episodic.cumulative_regret[k]);
        csv.end_row();
    }
    io::Csv cand_csv({"candidate_id", "service_id", "mean_arrival_time", "mean_delivery_time",
                      "relaxed_value", "is_truth"});
    for (std::size_t c = 0; c < candidates.candidates.size(); ++c) {
        const auto& cand = candidates.candidates[c];
        for (std::size_t i = 0; i < cand.mean_times.size(); ++i) {
            cand_csv.cell(static_cast<long long>(c)).cell(static_cast<long long>(i))
                .cell(cand.mean_times[i].first).cell(cand.mean_times[i].second)
                .cell(out.run.relaxed_values[c])
                .cell(static_cast<long long>(static_cast<int>(c) == candidates.truth_index));
            cand_csv.end_row();
        }
    }
    out.bundle.name = sc.name;
    out.bundle.add_file("ucb_episodes.csv", csv.str());
    out.bundle.add_file("ucb_candidates.csv", cand_csv.str());
    json j = summary_header(sc);
    j["benchmark_episode_cost"] = out.run.benchmark;
    j["truth_frequency_after_120"] = out.truth_frequency_tail;
    const auto gap = ucb::candidate_gap(sc.system, candidates, candidates.truth_index);
    if (gap)
        j["candidate_gap"] = *gap;
    else
        j["candidate_gap"] = "undefined (all candidates cost-equivalent)";
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

QLearnArtifacts run_learn_q(const scenario::Scenario& sc, bool baseline) {
    QLearnArtifacts out;
    const int H = sc.schedule.horizon_events;
    out.per_service.resize(sc.system.services.size());
    parallel_for(sc.system.size(), sc.threads, [&](int i) {
        const auto& svc = sc.system.services[static_cast<std::size_t>(i)];
        Rng rng = Rng::derive(sc.seed, 0x3000 + static_cast<std::uint64_t>(i));
        out.per_service[static_cast<std::size_t>(i)] =
            baseline ? qlearn::run_epsilon_greedy_baseline(svc, sc.schedule.episodes, H,
                                                           sc.qlearn.schedules,
                                                           sc.qlearn.epsilon_explore,
                                                           sc.qlearn.greedy_with_prob_epsilon, rng)
                     : qlearn::run_q_whittle(svc, sc.schedule.episodes, H, sc.qlearn.schedules,
                                             rng, {sc.qlearn.relative_value});
    });

    io::Csv trace({"service_id", "target_state", "episode", "index_iterate"});
    for (int i = 0; i < sc.system.size(); ++i) {
        const auto& r = out.per_service[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < r.trace.size(); ++k)
            for (std::size_t s = 0; s < r.trace[k].size(); ++s) {
                trace.cell(i).cell(static_cast<long long>(s)).cell(static_cast<long long>(k))
                    .cell(r.trace[k][s]);
                trace.end_row();
            }
    }
    io::Csv final_csv({"service_id", "state", "index", "provenance"});
    for (int i = 0; i < sc.system.size(); ++i) {
        const auto& r = out.per_service[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < r.index.size(); ++s) {
            final_csv.cell(i).cell(static_cast<long long>(s)).cell(r.index[s])
                .cell(std::string("learned"));
            final_csv.end_row();
        }
    }
    out.bundle.name = sc.name;
    out.bundle.add_file(baseline ? "baseline_trace.csv" : "qwhittle_trace.csv", trace.str());
    out.bundle.add_file(baseline ? "baseline_table.csv" : "qwhittle_table.csv", final_csv.str());
    json j = summary_header(sc);
    j["algorithm"] = baseline ? "epsilon-greedy-baseline" : "q-whittle";
    out.bundle.summary_json = j.dump(2) + "\n";
    return out;
}

}  // namespace wisp::experiments
