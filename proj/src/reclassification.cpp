#include "nfg/reclassification.hpp"

#include <algorithm>
#include <cmath>

namespace nfg {

ReclassificationResult reclassification_matrix(const NfgModel& model_a, const NfgModel& model_b,
                                               const SurvivalDataset& data, double horizon,
                                               int risk, const RiskBins& bins,
                                               const std::optional<CohortFilter>& filter) {
    if (model_a.n_features != data.p || model_b.n_features != data.p)
        throw UsageError("models and dataset disagree on the covariate schema");
    if (horizon <= 0.0) throw UsageError("horizon must be positive");
    if (risk < 1 || risk > std::min(model_a.n_risks, model_b.n_risks))
        throw UsageError("risk index out of range");

    const Predictor pred_a(model_a);
    const Predictor pred_b(model_b);

    ReclassificationResult result;
    result.horizon = horizon;
    result.risk = risk;
    result.bins = bins;
    result.event.stratum = "event-by-horizon";
    result.event_free.stratum = "event-free-by-horizon";

    long kept = 0;
    for (int i = 0; i < data.n; ++i) {
        if (filter) {
            const double v = data.row(i)[static_cast<std::size_t>(filter->column)];
            if (v < filter->min_value) {
                ++result.excluded_filter;
                continue;
            }
        }
        const double t = data.times[static_cast<std::size_t>(i)];
        const int d = data.events[static_cast<std::size_t>(i)];
        if (t < horizon && d == 0) {
            ++result.excluded_censored;
            continue;
        }
        const bool event_by_horizon = d == risk && t <= horizon;

        const auto bin_a = classify(pred_a, data.row(i), horizon, risk, bins);
        const auto bin_b = classify(pred_b, data.row(i), horizon, risk, bins);
        auto& matrix = event_by_horizon ? result.event : result.event_free;
        ++matrix.counts[static_cast<std::size_t>(bin_a)][static_cast<std::size_t>(bin_b)];
        ++matrix.total;
        ++kept;
    }
    if (kept == 0) throw UsageError("no patients left after filtering and censoring exclusion");
    return result;
}

SubgroupBrierDiff subgroup_brier_diff(std::span<const FoldModels> folds, int group_column,
                                      std::span<const double> group_edges,
                                      std::span<const double> horizons, int risk) {
    if (folds.empty()) throw UsageError("subgroup comparison needs at least one fold");
    for (std::size_t g = 1; g < group_edges.size(); ++g)
        if (group_edges[g] <= group_edges[g - 1])
            throw UsageError("group edges must be strictly increasing");

    // groups: (-inf, e0), [e0, e1), ..., [e_last, inf)
    const std::size_t n_groups = group_edges.size() + 1;
    SubgroupBrierDiff out;
    out.horizons.assign(horizons.begin(), horizons.end());
    for (std::size_t g = 0; g < n_groups; ++g) {
        std::string label;
        if (g == 0)
            label = "< " + std::to_string(group_edges[0]);
        else if (g == group_edges.size())
            label = ">= " + std::to_string(group_edges[g - 1]);
        else
            label = "[" + std::to_string(group_edges[g - 1]) + ", " + std::to_string(group_edges[g]) + ")";
        out.group_labels.push_back(label);
    }
    out.diffs.assign(n_groups, std::vector<MetricCell>(horizons.size()));

    for (const auto& fold : folds) {
        const SurvivalDataset& data = *fold.eval_data;
        if (group_column < 0 || group_column >= data.p)
            throw UsageError("grouping column index out of range");
        const Predictor pred_a(*fold.model_a);
        const Predictor pred_b(*fold.model_b);

        std::vector<std::vector<int>> members(n_groups);
        for (int i = 0; i < data.n; ++i) {
            const double v = data.row(i)[static_cast<std::size_t>(group_column)];
            std::size_t g = 0;
            while (g < group_edges.size() && v >= group_edges[g]) ++g;
            members[g].push_back(i);
        }

        for (std::size_t g = 0; g < n_groups; ++g) {
            if (members[g].empty()) {
                for (std::size_t h = 0; h < horizons.size(); ++h)
                    out.diffs[g][h].add(std::nullopt);
                continue;
            }
            const auto cohort = data.subset(members[g]);
            const auto cens = censoring_km(cohort.times, cohort.events);
            for (std::size_t h = 0; h < horizons.size(); ++h) {
                std::vector<double> preds_a(static_cast<std::size_t>(cohort.n));
                std::vector<double> preds_b(static_cast<std::size_t>(cohort.n));
                for (int i = 0; i < cohort.n; ++i) {
                    preds_a[static_cast<std::size_t>(i)] =
                        pred_a.risk_score(cohort.row(i), horizons[h], risk);
                    preds_b[static_cast<std::size_t>(i)] =
                        pred_b.risk_score(cohort.row(i), horizons[h], risk);
                }
                const auto ba = brier_td(preds_a, cohort.times, cohort.events, risk, horizons[h], cens);
                const auto bb = brier_td(preds_b, cohort.times, cohort.events, risk, horizons[h], cens);
                if (ba && bb)
                    out.diffs[g][h].add(*ba - *bb);
                else
                    out.diffs[g][h].add(std::nullopt);
            }
        }
    }

    for (auto& row : out.diffs)
        for (auto& cell : row) cell.finalize();
    return out;
}

}  // namespace nfg
