#include "wisp/qlearn.hpp"

#include <cmath>
#include <string>

#include "wisp/errors.hpp"

namespace wisp::qlearn {

void RateSchedules::validate() const {
    if (!(alpha0 > 0) || !(gamma0 > 0))
        throw ConfigError("RateSchedules: step sizes must be positive");
    if (alpha_tau < 0 || gamma_tau < 0)
        throw ConfigError("RateSchedules: decay constants must be >= 0");
}

int embedded_transition(const ServiceParams& p, int s, bool active, Rng& rng) {
    if (s < 0 || s > p.s_max) throw ConfigError("embedded_transition: state out of range");
    const double uni = p.lambda + p.mu * static_cast<double>(p.s_max);
    const double p_up = (s < p.s_max) ? p.lambda / uni : 0.0;
    const double p_dn = active ? p.mu * static_cast<double>(s) / uni : 0.0;
    const double u = rng.uniform01();
    if (u < p_up) return s + 1;
    if (u < p_up + p_dn) return s - 1;
    return s;
}

void q_update(QTable& table, int threshold, int s, bool active, int s_next, double cost_value,
              double subsidy, double alpha) {
    const bool prescribed = s >= threshold;
    if (active != prescribed)
        throw ProtocolError("q_update: action " + std::to_string(active) +
                            " inconsistent with threshold " + std::to_string(threshold) +
                            " at state " + std::to_string(s));
    const int a_next = s_next >= threshold ? 1 : 0;
    const double boot = table[static_cast<std::size_t>(s_next)][static_cast<std::size_t>(a_next)];
    const std::size_t a = active ? 1 : 0;
    const double target = (active ? cost_value : cost_value - subsidy) + boot;
    auto& q = table[static_cast<std::size_t>(s)][a];
    q = (1.0 - alpha) * q + alpha * target;
}

namespace {

void reanchor(QTable& table, int threshold) {
    const std::size_t a0 = 0 >= threshold ? 1 : 0;
    const double ref = table[0][a0];
    if (ref == 0.0) return;
    for (auto& row : table) {
        row[0] -= ref;
        row[1] -= ref;
    }
}

}  // namespace

LearnedIndexResult run_q_whittle(const ServiceParams& p, int episodes, int horizon,
                                 const RateSchedules& schedules, Rng& rng,
                                 const QWhittleOptions& options) {
    p.validate();
    schedules.validate();
    if (episodes < 1 || horizon < 1)
        throw ConfigError("run_q_whittle: episodes and horizon must be >= 1");

    const int n_targets = p.s_max;  // target states 0..s_max-1
    LearnedIndexResult res;
    res.index.assign(static_cast<std::size_t>(n_targets), 0.0);
    res.trace.assign(static_cast<std::size_t>(episodes),
                     std::vector<double>(static_cast<std::size_t>(n_targets), 0.0));

    for (int target = 0; target < n_targets; ++target) {
        QTablePair pair(target, p.s_max);
        const int r_lower = target;      // active iff s >= target
        const int r_upper = target + 1;  // active iff s >= target+1
        double w = 0.0;
        long long t = 0;

        for (int k = 0; k < episodes; ++k) {
            w = whittle_iterate(w, pair.upper[static_cast<std::size_t>(target)][0],
                                pair.lower[static_cast<std::size_t>(target)][1],
                                schedules.gamma(k));
            res.trace[static_cast<std::size_t>(k)][static_cast<std::size_t>(target)] = w;

            int x_lower = 0, x_upper = 0;
            for (int h = 0; h < horizon; ++h, ++t) {
                const double alpha = schedules.alpha(t);
                {
                    const bool a = x_lower >= r_lower;
                    const int nx = embedded_transition(p, x_lower, a, rng);
                    q_update(pair.lower, r_lower, x_lower, a, nx, cost(p, x_lower), w, alpha);
                    if (options.relative_value) reanchor(pair.lower, r_lower);
                    x_lower = nx;
                }
                {
                    const bool a = x_upper >= r_upper;
                    const int nx = embedded_transition(p, x_upper, a, rng);
                    q_update(pair.upper, r_upper, x_upper, a, nx, cost(p, x_upper), w, alpha);
                    if (options.relative_value) reanchor(pair.upper, r_upper);
                    x_upper = nx;
                }
            }
        }
        res.index[static_cast<std::size_t>(target)] = w;
    }
    return res;
}

LearnedIndexResult run_epsilon_greedy_baseline(const ServiceParams& p, int episodes, int horizon,
                                               const RateSchedules& schedules,
                                               double epsilon_explore,
                                               bool greedy_with_prob_epsilon, Rng& rng) {
    p.validate();
    schedules.validate();
    if (!(epsilon_explore > 0 && epsilon_explore < 1))
        throw ConfigError("run_epsilon_greedy_baseline: epsilon must be in (0,1)");

    const int n_targets = p.s_max;
    QTable q(static_cast<std::size_t>(p.s_max + 1), {0.0, 0.0});
    std::vector<double> w(static_cast<std::size_t>(n_targets), 0.0);

    LearnedIndexResult res;
    res.trace.assign(static_cast<std::size_t>(episodes),
                     std::vector<double>(static_cast<std::size_t>(n_targets), 0.0));

    auto subsidy_at = [&](int s) {
        return w[static_cast<std::size_t>(std::min(s, n_targets - 1))];
    };

    long long t = 0;
    for (int k = 0; k < episodes; ++k) {
        res.trace[static_cast<std::size_t>(k)] = w;
        int x = 0;
        for (int h = 0; h < horizon; ++h, ++t) {
            const double alpha = schedules.alpha(t);
            const double gamma = schedules.gamma(k);
            // Behavior: one branch of the coin is greedy, the other uniform.
            bool greedy_branch = rng.uniform01() < epsilon_explore;
            if (!greedy_with_prob_epsilon) greedy_branch = !greedy_branch;
            bool a;
            const double q0 = q[static_cast<std::size_t>(x)][0];
            const double q1 = q[static_cast<std::size_t>(x)][1];
            if (greedy_branch) {
                if (std::abs(q0 - q1) < 1e-12)
                    a = rng.uniform01() < 0.5;
                else
                    a = q1 < q0;
            } else {
                a = rng.uniform01() < 0.5;
            }
            const int nx = embedded_transition(p, x, a, rng);
            const double boot = std::min(q[static_cast<std::size_t>(nx)][0],
                                         q[static_cast<std::size_t>(nx)][1]);
            const double target =
                cost(p, x) - (a ? 0.0 : subsidy_at(x)) + boot;
            auto& cell = q[static_cast<std::size_t>(x)][a ? 1 : 0];
            cell = (1.0 - alpha) * cell + alpha * target;
            // Slow-timescale indifference gradient at the visited state.
            if (x < n_targets)
                w[static_cast<std::size_t>(x)] +=
                    gamma * (q[static_cast<std::size_t>(x)][0] - q[static_cast<std::size_t>(x)][1]);
            x = nx;
        }
    }
    res.index = w;
    return res;
}

std::vector<std::vector<int>> group_scheduler(int n_services, int capacity) {
    if (n_services < 1 || capacity < 1)
        throw ConfigError("group_scheduler: need n_services >= 1 and capacity >= 1");
    std::vector<std::vector<int>> groups;
    for (int start = 0; start < n_services; start += capacity) {
        std::vector<int> g;
        for (int i = start; i < std::min(start + capacity, n_services); ++i) g.push_back(i);
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace wisp::qlearn
