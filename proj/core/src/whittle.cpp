#include "wisp/whittle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wisp/errors.hpp"

namespace wisp::whittle {

namespace {
constexpr double kDenominatorFloor = 1e-14;
}

double whittle_index_raw(const ServiceParams& p, int R) {
    if (R < 0 || R > p.s_max - 2)
        throw ConfigError("whittle_index_raw: threshold " + std::to_string(R) + " outside [0, " +
                          std::to_string(p.s_max - 2) + "]");
    const double num = exact::expected_cost(p, R + 1) - exact::expected_cost(p, R);
    const double den = exact::passive_mass(p, R + 1) - exact::passive_mass(p, R);
    if (den <= kDenominatorFloor)
        throw ConvergenceError("whittle_index_raw: degenerate passive-mass increment at R=" +
                                   std::to_string(R),
                               den);
    return num / den;
}

namespace {

struct Marginals {
    // Expected cost and passive mass per threshold, with the always-active
    // policy (threshold -1) prepended: it induces the same chain as threshold
    // 0, so its expected cost matches and it carries no passive mass.
    exact::ThresholdProfile prof;
    double ec(int R) const {
        return R < 0 ? prof.expected_cost[0] : prof.expected_cost[static_cast<std::size_t>(R)];
    }
    double pm(int R) const {
        return R < 0 ? 0.0 : prof.passive_mass[static_cast<std::size_t>(R)];
    }
};

std::vector<double> raw_table(const Marginals& m, int n) {
    std::vector<double> raw(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const double den = m.pm(s) - m.pm(s - 1);
        if (den <= kDenominatorFloor)
            throw ConvergenceError("whittle_table: degenerate passive-mass increment", den);
        raw[static_cast<std::size_t>(s)] = (m.ec(s) - m.ec(s - 1)) / den;
    }
    return raw;
}

// Adaptive walk: from the current threshold, pick the later threshold with the
// smallest marginal ratio and assign that ratio to every state jumped over.
// Single steps reproduce the raw closed form.
WhittleTable fallback_walk(const Marginals& m, int n) {
    WhittleTable t;
    t.monotone_closed_form = false;
    t.index.assign(static_cast<std::size_t>(n), 0.0);
    t.provenance.assign(static_cast<std::size_t>(n), Provenance::Fallback);
    int cur = -1;
    while (cur < n - 1) {
        int arg = cur + 1;
        double best = std::numeric_limits<double>::infinity();
        for (int cand = cur + 1; cand < n; ++cand) {
            const double den = m.pm(cand) - m.pm(cur);
            if (den <= kDenominatorFloor) continue;
            const double ratio = (m.ec(cand) - m.ec(cur)) / den;
            if (ratio < best - 1e-15) {
                best = ratio;
                arg = cand;
            }
        }
        for (int s = cur + 1; s <= arg; ++s) {
            t.index[static_cast<std::size_t>(s)] = best;
            t.provenance[static_cast<std::size_t>(s)] =
                (arg == cur + 1) ? Provenance::ClosedForm : Provenance::Fallback;
        }
        cur = arg;
    }
    if (!std::is_sorted(t.index.begin(), t.index.end()))
        throw ConvergenceError("whittle_table: fallback produced a decreasing table", 0.0);
    return t;
}

}  // namespace

WhittleTable whittle_table(const ServiceParams& p) {
    p.validate();
    const Marginals m{exact::threshold_profile(p)};
    const int n = p.s_max;  // table states 0..s_max-1
    auto raw = raw_table(m, n);
    // Truncation distorts the ratios of the last couple of thresholds (their
    // stationary support is pinned to the boundary), which can break
    // monotonicity there even when the untruncated form is monotone. The
    // envelope walk below then yields the correct crossing values.
    const bool monotone = [&] {
        for (std::size_t i = 0; i + 1 < raw.size(); ++i)
            if (raw[i + 1] < raw[i] - 1e-12 * std::max(1.0, std::abs(raw[i]))) return false;
        return true;
    }();
    if (monotone) {
        WhittleTable t;
        t.monotone_closed_form = true;
        t.index = std::move(raw);
        t.provenance.assign(static_cast<std::size_t>(n), Provenance::ClosedForm);
        return t;
    }
    return fallback_walk(m, n);
}

WhittleTable whittle_table_fallback(const ServiceParams& p) {
    p.validate();
    const Marginals m{exact::threshold_profile(p)};
    return fallback_walk(m, p.s_max);
}

IndexabilityReport verify_indexability(const ServiceParams& p, const std::vector<double>& w_grid) {
    IndexabilityReport rep;
    if (!std::is_sorted(w_grid.begin(), w_grid.end()))
        throw ConfigError("verify_indexability: subsidy grid must be sorted ascending");
    const auto prof = exact::threshold_profile(p);
    int prev_R = -1;
    double prev_w = 0.0;
    for (double w : w_grid) {
        const int R = prof.best(w);
        if (R < prev_R) {
            rep.indexable = false;
            rep.offending_subsidies = {prev_w, w};
            rep.offending_thresholds = {prev_R, R};
            return rep;
        }
        prev_R = R;
        prev_w = w;
    }
    return rep;
}

PlacementAction index_rule_action(const std::vector<WhittleTable>& tables, const SystemState& state,
                                  int capacity) {
    const int n = state.size();
    if (static_cast<int>(tables.size()) != n)
        throw ProtocolError("index_rule_action: one table per service required");
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int s = state.queues[static_cast<std::size_t>(i)];
        if (s <= 0) continue;  // nothing to deliver
        ranked.emplace_back(tables[static_cast<std::size_t>(i)].at(s), i);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    PlacementAction act = PlacementAction::none(n);
    const int take = std::min<int>(capacity, static_cast<int>(ranked.size()));
    for (int k = 0; k < take; ++k) act.active[static_cast<std::size_t>(ranked[static_cast<std::size_t>(k)].second)] = 1;
    return act;
}

}  // namespace wisp::whittle
