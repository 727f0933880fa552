#include "wisp/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wisp/errors.hpp"

namespace wisp::ucb {

std::vector<ServiceParams> CandidateParams::to_rates(const SystemConfig& base) const {
    if (mean_times.size() != base.services.size())
        throw ConfigError("CandidateParams: size mismatch with system");
    std::vector<ServiceParams> out(base.services.begin(), base.services.end());
    for (std::size_t i = 0; i < mean_times.size(); ++i) {
        out[i].lambda = 1.0 / mean_times[i].first;
        out[i].mu = 1.0 / mean_times[i].second;
    }
    return out;
}

void CandidateSet::validate(int n_services) const {
    if (candidates.empty()) throw ConfigError("CandidateSet: empty");
    for (const auto& c : candidates) {
        if (static_cast<int>(c.mean_times.size()) != n_services)
            throw ConfigError("CandidateSet: candidate arity mismatch");
        for (auto [ml, mm] : c.mean_times)
            if (!(ml > 0) || !(mm > 0)) throw ConfigError("CandidateSet: mean times must be > 0");
    }
    if (truth_index >= static_cast<int>(candidates.size()))
        throw ConfigError("CandidateSet: truth index out of range");
}

double CandidateSet::min_rate() const {
    double max_mean = 0.0;
    for (const auto& c : candidates)
        for (auto [ml, mm] : c.mean_times) max_mean = std::max({max_mean, ml, mm});
    return 1.0 / max_mean;
}

UcbConfig UcbConfig::theorem_instantiation(long long total_events, double min_rate) {
    const double t = static_cast<double>(total_events);
    return with(1.0 / t, 2.0, 1.0 / t, total_events, min_rate);
}

UcbConfig UcbConfig::with(double delta, double b, double epsilon, long long total_events,
                          double min_rate) {
    UcbConfig c;
    c.delta = delta;
    c.b = b;
    c.epsilon = epsilon;
    c.horizon_events = total_events;
    c.tau_h = -std::log(epsilon) / min_rate;
    c.k1 = 2.0 * c.tau_h * c.tau_h;
    c.validate(min_rate);
    return c;
}

void UcbConfig::validate(double min_rate) const {
    if (!(delta > 0 && delta < 1)) throw ConfigError("UcbConfig: delta must be in (0,1)");
    if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("UcbConfig: epsilon must be in (0,1)");
    if (!(b > 1)) throw ConfigError("UcbConfig: b must be > 1");
    if (horizon_events < 1) throw ConfigError("UcbConfig: horizon must be >= 1");
    if (tau_h + 1e-12 < -std::log(epsilon) / min_rate)
        throw ConfigError("UcbConfig: tau_h below the concentration threshold");
    if (!(k1 > 0)) throw ConfigError("UcbConfig: k1 must be > 0");
}

double UcbConfig::log_factor(int n_services) const {
    return std::log(static_cast<double>(n_services) *
                    std::pow(static_cast<double>(horizon_events), b) / delta);
}

EstimatorState::EstimatorState(int n_services)
    : arrival_time_sum_(static_cast<std::size_t>(n_services), 0.0),
      delivery_exposure_sum_(static_cast<std::size_t>(n_services), 0.0),
      arrival_count_(static_cast<std::size_t>(n_services), 0),
      delivery_count_(static_cast<std::size_t>(n_services), 0),
      since_last_arrival_(static_cast<std::size_t>(n_services), 0.0),
      exposure_(static_cast<std::size_t>(n_services), 0.0) {}

void EstimatorState::observe(const SystemState& pre, const PlacementAction& action,
                             sim::Event event, double sojourn) {
    const int n = services();
    for (int i = 0; i < n; ++i) {
        since_last_arrival_[static_cast<std::size_t>(i)] += sojourn;
        if (action.active[static_cast<std::size_t>(i)])
            exposure_[static_cast<std::size_t>(i)] +=
                sojourn * static_cast<double>(pre.queues[static_cast<std::size_t>(i)]);
    }
    const auto i = static_cast<std::size_t>(event.service);
    if (event.kind == sim::EventKind::Arrival) {
        arrival_time_sum_[i] += since_last_arrival_[i];
        ++arrival_count_[i];
        since_last_arrival_[i] = 0.0;
    } else {
        delivery_exposure_sum_[i] += exposure_[i];
        ++delivery_count_[i];
        exposure_[i] = 0.0;
    }
}

double EstimatorState::mean_arrival_time(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return arrival_count_[k] ? arrival_time_sum_[k] / static_cast<double>(arrival_count_[k])
                             : std::numeric_limits<double>::quiet_NaN();
}

double EstimatorState::mean_delivery_time(int i) const {
    const auto k = static_cast<std::size_t>(i);
    return delivery_count_[k] ? delivery_exposure_sum_[k] / static_cast<double>(delivery_count_[k])
                              : std::numeric_limits<double>::quiet_NaN();
}

ConfidenceBall confidence_ball(const EstimatorState& est, const UcbConfig& cfg,
                               const CandidateSet& candidates) {
    const int n = est.services();
    const double lf = cfg.log_factor(n);
    constexpr double inf = std::numeric_limits<double>::infinity();

    ConfidenceBall ball;
    ball.radii.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double ra = est.arrival_count(i)
                              ? std::sqrt(cfg.k1 / static_cast<double>(est.arrival_count(i)) * lf)
                              : inf;
        const double rd = est.delivery_count(i)
                              ? std::sqrt(cfg.k1 / static_cast<double>(est.delivery_count(i)) * lf)
                              : inf;
        ball.radii[static_cast<std::size_t>(i)] = {ra, rd};
    }
    for (int c = 0; c < static_cast<int>(candidates.candidates.size()); ++c) {
        const auto& cand = candidates.candidates[static_cast<std::size_t>(c)];
        bool inside = true;
        for (int i = 0; i < n && inside; ++i) {
            const auto [ra, rd] = ball.radii[static_cast<std::size_t>(i)];
            if (est.arrival_count(i) &&
                std::abs(cand.mean_times[static_cast<std::size_t>(i)].first - est.mean_arrival_time(i)) > ra)
                inside = false;
            if (est.delivery_count(i) &&
                std::abs(cand.mean_times[static_cast<std::size_t>(i)].second - est.mean_delivery_time(i)) > rd)
                inside = false;
        }
        if (inside) ball.members.push_back(c);
    }
    return ball;
}

int optimistic_param(const ConfidenceBall& ball, const std::vector<double>& relaxed_values,
                     Rng& rng) {
    if (ball.members.empty())
        return static_cast<int>(rng.below(relaxed_values.size()));
    int best = ball.members.front();
    for (int c : ball.members)
        if (relaxed_values[static_cast<std::size_t>(c)] <
            relaxed_values[static_cast<std::size_t>(best)] - 1e-15)
            best = c;
    return best;
}

std::optional<double> candidate_gap(const SystemConfig& cfg, const CandidateSet& candidates,
                                    int truth_index) {
    if (truth_index < 0 || truth_index >= static_cast<int>(candidates.candidates.size()))
        throw ConfigError("candidate_gap: truth index out of range");
    const double truth_value =
        exact::relaxed_value(cfg, candidates.candidates[static_cast<std::size_t>(truth_index)].to_rates(cfg)).value;
    std::optional<double> worst;
    for (const auto& cand : candidates.candidates) {
        const double v = exact::relaxed_value(cfg, cand.to_rates(cfg)).value;
        if (std::abs(v - truth_value) <= 1e-9 * std::max(1.0, std::abs(truth_value))) continue;
        if (!worst || v > *worst) worst = v;
    }
    if (!worst) return std::nullopt;
    return truth_value - *worst;
}

UcbWhittleLearner::UcbWhittleLearner(const SystemConfig& cfg, CandidateSet candidates,
                                     UcbConfig ucb_cfg, Rng selection_rng)
    : cfg_(cfg),
      candidates_(std::move(candidates)),
      ucb_cfg_(ucb_cfg),
      rng_(selection_rng),
      est_(cfg.size()) {
    candidates_.validate(cfg_.size());
    ucb_cfg_.validate(candidates_.min_rate());
    relaxed_values_.reserve(candidates_.candidates.size());
    tables_.reserve(candidates_.candidates.size());
    for (const auto& cand : candidates_.candidates) {
        auto theta = cand.to_rates(cfg_);
        relaxed_values_.push_back(exact::relaxed_value(cfg_, theta).value);
        std::vector<whittle::WhittleTable> tabs;
        tabs.reserve(theta.size());
        for (const auto& p : theta) tabs.push_back(whittle::whittle_table(p));
        tables_.push_back(std::move(tabs));
    }
}

void UcbWhittleLearner::begin_episode(int) {
    const auto ball = confidence_ball(est_, ucb_cfg_, candidates_);
    current_ = optimistic_param(ball, relaxed_values_, rng_);
    selected_.push_back(current_);
}

PlacementAction UcbWhittleLearner::policy(const SystemState& state) {
    return whittle::index_rule_action(tables_[static_cast<std::size_t>(current_)], state,
                                      cfg_.capacity);
}

void UcbWhittleLearner::observe(const SystemState& pre, const PlacementAction& action,
                                sim::Event event, double sojourn) {
    est_.observe(pre, action, event, sojourn);
}

UcbRunResult run_ucb_whittle(const SystemConfig& cfg, const CandidateSet& candidates,
                             const UcbConfig& ucb_cfg, const sim::EpisodeSchedule& schedule,
                             std::uint64_t seed, int benchmark_episodes) {
    cfg.validate();
    candidates.validate(cfg.size());

    // Benchmark: index policy of the true parameters, long Monte-Carlo pre-run.
    std::vector<whittle::WhittleTable> truth_tables;
    for (const auto& p : cfg.services) truth_tables.push_back(whittle::whittle_table(p));
    auto truth_policy = [&](const SystemState& s) {
        return whittle::index_rule_action(truth_tables, s, cfg.capacity);
    };
    Rng bench_rng = Rng::derive(seed, /*tag=*/0xBEB);
    const double benchmark = sim::estimate_episode_benchmark(cfg, truth_policy,
                                                             schedule.horizon_events,
                                                             benchmark_episodes, bench_rng);

    UcbWhittleLearner learner(cfg, candidates, ucb_cfg, Rng::derive(seed, /*tag=*/0x5E1));
    Rng sim_rng = Rng::derive(seed, /*tag=*/0x51A);
    UcbRunResult out;
    out.episodic = sim::run_episodic(cfg, learner, schedule, sim_rng, benchmark);
    out.selected = learner.selected_history();
    out.relaxed_values = learner.relaxed_values();
    out.benchmark = benchmark;
    return out;
}

}  // namespace wisp::ucb
