#pragma once

#include <optional>
#include <vector>

#include "wisp/exact.hpp"
#include "wisp/model.hpp"

namespace wisp::whittle {

enum class Provenance : std::uint8_t { ClosedForm, Fallback };

/// Per-service index table W(s) for s = 0..s_max-1. W(s) is the subsidy at
/// which consecutive threshold policies s-1 and s tie, i.e. the point where
/// state s becomes passive; W(0) = 0 since the two policies coincide there.
/// Non-decreasing by construction. States >= s_max clamp to the last entry.
struct WhittleTable {
    std::vector<double> index;
    std::vector<Provenance> provenance;
    bool monotone_closed_form = true;

    double at(int s) const {
        if (s <= 0) return index.front();
        const int last = static_cast<int>(index.size()) - 1;
        return index[static_cast<std::size_t>(s < last ? s : last)];
    }
    int size() const { return static_cast<int>(index.size()); }
};

/// Marginal cost-to-passivity ratio between threshold policies R and R+1:
/// (expected_cost(R+1) - expected_cost(R)) / (passive_mass(R+1) - passive_mass(R)).
/// Requires 0 <= R <= s_max-2; throws on a vanishing denominator.
double whittle_index_raw(const ServiceParams& p, int R);

/// Builds the index table. When the raw ratios are already non-decreasing the
/// table is their closed form; otherwise an adaptive comparison walk flattens
/// the non-monotone stretches (each step compares the current threshold with
/// every larger candidate and keeps the smallest ratio).
WhittleTable whittle_table(const ServiceParams& p);

/// The comparison-walk construction, unconditionally. Coincides with the raw
/// closed form entrywise whenever the latter is monotone.
WhittleTable whittle_table_fallback(const ServiceParams& p);

struct IndexabilityReport {
    bool indexable = true;
    std::optional<std::pair<double, double>> offending_subsidies;
    std::optional<std::pair<int, int>> offending_thresholds;
};

/// Checks that best_threshold(W) is non-decreasing along the sorted grid.
IndexabilityReport verify_indexability(const ServiceParams& p, const std::vector<double>& w_grid);

/// Top-K placement by current index value. Services with an empty queue are
/// never placed; ties break toward the smaller service id.
PlacementAction index_rule_action(const std::vector<WhittleTable>& tables, const SystemState& state,
                                  int capacity);

}  // namespace wisp::whittle
