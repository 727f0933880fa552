#include "wisp/scenario.hpp"

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include <json.hpp>  // vendored single-header copy of the same library
#endif

#include <cmath>
#include <fstream>
#include <sstream>

#include "wisp/errors.hpp"
#include "wisp/io.hpp"

namespace wisp::scenario {

using json = nlohmann::json;

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::Table1: return "table1";
        case Kind::SwitchingCurve: return "switching-curve";
        case Kind::Convergence: return "convergence";
        case Kind::MseVsN: return "mse-vs-n";
        case Kind::Custom: return "custom";
    }
    return "custom";
}

Kind kind_from_name(const std::string& name) {
    if (name == "table1") return Kind::Table1;
    if (name == "switching-curve") return Kind::SwitchingCurve;
    if (name == "convergence") return Kind::Convergence;
    if (name == "mse-vs-n") return Kind::MseVsN;
    if (name == "custom") return Kind::Custom;
    throw ConfigError("kind: unknown experiment kind '" + name +
                      "'; options: table1, switching-curve, convergence, mse-vs-n, custom");
}

ucb::CandidateSet CandidateSpec::build(const SystemConfig& truth) const {
    ucb::CandidateSet set;
    const int n = truth.size();

    if (!explicit_mean_times.empty()) {
        for (const auto& row : explicit_mean_times) {
            ucb::CandidateParams c;
            c.mean_times = row;
            set.candidates.push_back(std::move(c));
        }
        set.truth_index = explicit_truth_index;
    } else if (!lambda_grid.empty()) {
        if (static_cast<int>(lambda_grid.size()) != n)
            throw ConfigError("candidates.lambda_grid: need one value list per service");
        std::size_t total = 1;
        for (const auto& g : lambda_grid) {
            if (g.empty()) throw ConfigError("candidates.lambda_grid: empty list");
            total *= g.size();
            if (total > 100000) throw ConfigError("candidates.lambda_grid: grid too large");
        }
        std::vector<std::size_t> pick(static_cast<std::size_t>(n), 0);
        for (std::size_t idx = 0; idx < total; ++idx) {
            ucb::CandidateParams c;
            bool is_truth = true;
            std::size_t rem = idx;
            for (int i = 0; i < n; ++i) {
                const auto& g = lambda_grid[static_cast<std::size_t>(i)];
                const double lam = g[rem % g.size()];
                rem /= g.size();
                is_truth &= std::abs(lam - truth.services[static_cast<std::size_t>(i)].lambda) < 1e-12;
                c.mean_times.emplace_back(1.0 / lam, 1.0 / truth.services[static_cast<std::size_t>(i)].mu);
            }
            if (is_truth) set.truth_index = static_cast<int>(set.candidates.size());
            set.candidates.push_back(std::move(c));
        }
    } else if (!lambda_scales.empty()) {
        const std::vector<double> ms = mu_scales.empty() ? std::vector<double>{1.0} : mu_scales;
        for (double cl : lambda_scales) {
            for (double cm : ms) {
                ucb::CandidateParams c;
                for (const auto& s : truth.services)
                    c.mean_times.emplace_back(1.0 / (cl * s.lambda), 1.0 / (cm * s.mu));
                if (std::abs(cl - 1.0) < 1e-12 && std::abs(cm - 1.0) < 1e-12)
                    set.truth_index = static_cast<int>(set.candidates.size());
                set.candidates.push_back(std::move(c));
            }
        }
    } else {
        throw ConfigError("candidates: no candidate specification given");
    }
    set.validate(n);
    return set;
}

namespace {

[[noreturn]] void missing(const std::string& field) {
    throw ConfigError("scenario: missing required field '" + field + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("scenario: field '" + key + "' has the wrong type");
    }
}

SystemConfig parse_system(const json& j) {
    SystemConfig cfg;
    if (!j.contains("capacity")) missing("system.capacity");
    cfg.capacity = j.at("capacity").get<int>();
    if (!j.contains("services")) missing("system.services");
    for (const auto& s : j.at("services")) {
        ServiceParams p;
        if (!s.contains("lambda")) missing("system.services[].lambda");
        if (!s.contains("mu")) missing("system.services[].mu");
        if (!s.contains("s_max")) missing("system.services[].s_max");
        p.lambda = s.at("lambda").get<double>();
        p.mu = s.at("mu").get<double>();
        p.s_max = s.at("s_max").get<int>();
        cfg.services.push_back(p);
    }
    cfg.validate();
    return cfg;
}

json system_to_json(const SystemConfig& cfg) {
    json j;
    j["capacity"] = cfg.capacity;
    j["services"] = json::array();
    for (const auto& s : cfg.services)
        j["services"].push_back({{"lambda", s.lambda}, {"mu", s.mu}, {"s_max", s.s_max}});
    return j;
}

Scenario from_json(const json& j) {
    Kind kind = Kind::Custom;
    if (j.contains("kind")) kind = kind_from_name(j.at("kind").get<std::string>());
    Scenario sc = default_scenario(kind);

    sc.name = get_or<std::string>(j, "name", sc.name);
    sc.seed = get_or<std::uint64_t>(j, "seed", sc.seed);
    sc.replications = get_or<int>(j, "replications", sc.replications);
    sc.threads = get_or<int>(j, "threads", sc.threads);
    if (j.contains("out_dir")) sc.out_dir = j.at("out_dir").get<std::string>();

    if (j.contains("system")) sc.system = parse_system(j.at("system"));

    if (j.contains("episodes")) {
        const auto& e = j.at("episodes");
        sc.schedule.horizon_events = get_or<int>(e, "horizon_events", sc.schedule.horizon_events);
        sc.schedule.episodes = get_or<int>(e, "count", sc.schedule.episodes);
        sc.benchmark_episodes = get_or<int>(e, "benchmark_episodes", sc.benchmark_episodes);
        if (sc.schedule.horizon_events < 1) throw ConfigError("episodes.horizon_events: must be >= 1");
        if (sc.schedule.episodes < 1) throw ConfigError("episodes.count: must be >= 1");
    }

    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        sc.solver.tol = get_or<double>(s, "tol", sc.solver.tol);
        sc.solver.max_iterations = get_or<long long>(s, "max_iterations", sc.solver.max_iterations);
        sc.solver.work_budget = get_or<long long>(s, "work_budget", sc.solver.work_budget);
    }

    if (j.contains("ucb")) {
        const auto& u = j.at("ucb");
        sc.ucb.delta = get_or<double>(u, "delta", sc.ucb.delta);
        sc.ucb.b = get_or<double>(u, "b", sc.ucb.b);
        sc.ucb.epsilon = get_or<double>(u, "epsilon", sc.ucb.epsilon);
    }

    if (j.contains("candidates") && j.at("candidates").is_object() && !j.at("candidates").empty()) {
        const auto& c = j.at("candidates");
        CandidateSpec spec;
        if (c.contains("lambda_grid"))
            spec.lambda_grid = c.at("lambda_grid").get<std::vector<std::vector<double>>>();
        if (c.contains("lambda_scales"))
            spec.lambda_scales = c.at("lambda_scales").get<std::vector<double>>();
        if (c.contains("mu_scales")) spec.mu_scales = c.at("mu_scales").get<std::vector<double>>();
        if (c.contains("explicit")) {
            for (const auto& row : c.at("explicit")) {
                std::vector<std::pair<double, double>> cand;
                for (const auto& pr : row)
                    cand.emplace_back(pr.at(0).get<double>(), pr.at(1).get<double>());
                spec.explicit_mean_times.push_back(std::move(cand));
            }
            spec.explicit_truth_index = get_or<int>(c, "truth_index", -1);
        }
        if (spec.empty()) throw ConfigError("candidates: no recognized specification");
        sc.candidates = std::move(spec);
    }

    if (j.contains("qlearn")) {
        const auto& q = j.at("qlearn");
        sc.qlearn.schedules.alpha0 = get_or<double>(q, "alpha", sc.qlearn.schedules.alpha0);
        sc.qlearn.schedules.alpha_tau = get_or<double>(q, "alpha_tau", sc.qlearn.schedules.alpha_tau);
        sc.qlearn.schedules.gamma0 = get_or<double>(q, "gamma", sc.qlearn.schedules.gamma0);
        sc.qlearn.schedules.gamma_tau = get_or<double>(q, "gamma_tau", sc.qlearn.schedules.gamma_tau);
        sc.qlearn.relative_value = get_or<bool>(q, "relative_value", sc.qlearn.relative_value);
        sc.qlearn.epsilon_explore = get_or<double>(q, "epsilon_explore", sc.qlearn.epsilon_explore);
        sc.qlearn.greedy_with_prob_epsilon =
            get_or<bool>(q, "greedy_with_prob_epsilon", sc.qlearn.greedy_with_prob_epsilon);
        sc.qlearn.schedules.validate();
    }

    if (j.contains("table1")) {
        const auto& t = j.at("table1");
        sc.table1.mu = get_or<double>(t, "mu", sc.table1.mu);
        if (t.contains("ratios")) sc.table1.ratios = t.at("ratios").get<std::vector<double>>();
        if (t.contains("s_max_offsets"))
            sc.table1.s_max_offsets = t.at("s_max_offsets").get<std::vector<int>>();
    }
    if (j.contains("switching")) {
        const auto& s = j.at("switching");
        sc.switching.mu = get_or<double>(s, "mu", sc.switching.mu);
        sc.switching.rho1 = get_or<double>(s, "rho1", sc.switching.rho1);
        sc.switching.rho2 = get_or<double>(s, "rho2", sc.switching.rho2);
        sc.switching.s_max = get_or<int>(s, "s_max", sc.switching.s_max);
    }
    if (j.contains("convergence")) {
        const auto& c = j.at("convergence");
        sc.convergence.tolerance = get_or<double>(c, "tolerance", sc.convergence.tolerance);
        sc.convergence.seeds = get_or<int>(c, "seeds", sc.convergence.seeds);
    }
    if (j.contains("mse")) {
        const auto& m = j.at("mse");
        if (m.contains("n_values")) sc.mse.n_values = m.at("n_values").get<std::vector<int>>();
        if (m.contains("type_lambdas"))
            sc.mse.type_lambdas = m.at("type_lambdas").get<std::vector<double>>();
        sc.mse.mu = get_or<double>(m, "mu", sc.mse.mu);
        sc.mse.s_max = get_or<int>(m, "s_max", sc.mse.s_max);
        sc.mse.train_episodes = get_or<int>(m, "train_episodes", sc.mse.train_episodes);
        sc.mse.eval_replications = get_or<int>(m, "eval_replications", sc.mse.eval_replications);
        sc.mse.eval_episodes = get_or<int>(m, "eval_episodes", sc.mse.eval_episodes);
        if (m.contains("candidate_factors"))
            sc.mse.candidate_factors = m.at("candidate_factors").get<std::vector<double>>();
    }

    if (sc.replications < 1) throw ConfigError("replications: must be >= 1");
    return sc;
}

json to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    j["kind"] = kind_name(sc.kind);
    j["seed"] = sc.seed;
    j["replications"] = sc.replications;
    j["system"] = system_to_json(sc.system);
    j["episodes"] = {{"horizon_events", sc.schedule.horizon_events},
                     {"count", sc.schedule.episodes},
                     {"benchmark_episodes", sc.benchmark_episodes}};
    j["solver"] = {{"tol", sc.solver.tol},
                   {"max_iterations", sc.solver.max_iterations},
                   {"work_budget", sc.solver.work_budget}};
    j["ucb"] = {{"delta", sc.ucb.delta}, {"b", sc.ucb.b}, {"epsilon", sc.ucb.epsilon}};
    if (!sc.candidates.empty()) {
        json cands = json::object();
        if (!sc.candidates.lambda_grid.empty()) cands["lambda_grid"] = sc.candidates.lambda_grid;
        if (!sc.candidates.lambda_scales.empty()) {
            cands["lambda_scales"] = sc.candidates.lambda_scales;
            cands["mu_scales"] = sc.candidates.mu_scales;
        }
        if (!sc.candidates.explicit_mean_times.empty()) {
            json rows = json::array();
            for (const auto& row : sc.candidates.explicit_mean_times) {
                json r = json::array();
                for (auto [a, d] : row) r.push_back({a, d});
                rows.push_back(r);
            }
            cands["explicit"] = rows;
            cands["truth_index"] = sc.candidates.explicit_truth_index;
        }
        j["candidates"] = cands;
    }
    j["qlearn"] = {{"alpha", sc.qlearn.schedules.alpha0},
                   {"alpha_tau", sc.qlearn.schedules.alpha_tau},
                   {"gamma", sc.qlearn.schedules.gamma0},
                   {"gamma_tau", sc.qlearn.schedules.gamma_tau},
                   {"relative_value", sc.qlearn.relative_value},
                   {"epsilon_explore", sc.qlearn.epsilon_explore},
                   {"greedy_with_prob_epsilon", sc.qlearn.greedy_with_prob_epsilon}};
    j["table1"] = {{"mu", sc.table1.mu}, {"ratios", sc.table1.ratios},
                   {"s_max_offsets", sc.table1.s_max_offsets}};
    j["switching"] = {{"mu", sc.switching.mu},
                      {"rho1", sc.switching.rho1},
                      {"rho2", sc.switching.rho2},
                      {"s_max", sc.switching.s_max}};
    j["convergence"] = {{"tolerance", sc.convergence.tolerance}, {"seeds", sc.convergence.seeds}};
    j["mse"] = {{"n_values", sc.mse.n_values},
                {"type_lambdas", sc.mse.type_lambdas},
                {"mu", sc.mse.mu},
                {"s_max", sc.mse.s_max},
                {"train_episodes", sc.mse.train_episodes},
                {"eval_replications", sc.mse.eval_replications},
                {"eval_episodes", sc.mse.eval_episodes},
                {"candidate_factors", sc.mse.candidate_factors}};
    return j;
}

}  // namespace

std::string Scenario::canonical_json() const { return to_json(*this).dump(); }

std::uint64_t Scenario::hash() const { return io::fnv1a(canonical_json()); }

Scenario parse_scenario_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
    }
    return from_json(j);
}

Scenario parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scenario: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

Scenario default_scenario(Kind kind) {
    Scenario sc;
    sc.kind = kind;
    switch (kind) {
        case Kind::Table1: {
            sc.name = "table1";
            sc.system.capacity = 1;
            sc.system.services = {{5.0, 5.0, 20}, {5.0, 5.0, 20}};
            sc.solver.work_budget = 200'000'000;
            break;
        }
        case Kind::SwitchingCurve: {
            sc.name = "switching-curve";
            sc.system.capacity = 1;
            sc.system.services = {{20.0, 5.0, 30}, {30.0, 5.0, 30}};
            sc.solver.work_budget = 400'000'000;
            break;
        }
        case Kind::Convergence: {
            sc.name = "convergence";
            sc.system.capacity = 1;
            sc.system.services = {{5.0, 5.0, 5}, {5.0, 5.0, 5}};
            sc.schedule = {100, 260};
            sc.benchmark_episodes = 2000;
            sc.candidates.lambda_grid = {{4.0, 5.0, 6.0}, {4.0, 5.0, 6.0}};
            break;
        }
        case Kind::MseVsN: {
            sc.name = "mse-vs-n";
            sc.system.capacity = 1;  // rebuilt per N by the runner
            sc.system.services = {{10.0, 5.0, 5}, {15.0, 5.0, 5}};
            sc.schedule = {100, 150};
            sc.ucb.epsilon = 0.7;  // ball tight enough to resolve the factor grid
            break;
        }
        case Kind::Custom: {
            sc.name = "custom";
            sc.system.capacity = 1;
            sc.system.services = {{5.0, 5.0, 20}, {10.0, 5.0, 20}};
            break;
        }
    }
    return sc;
}

}  // namespace wisp::scenario
