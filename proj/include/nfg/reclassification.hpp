#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfg/metrics.hpp"
#include "nfg/model.hpp"

namespace nfg {

// Clinical risk bins at the horizon: [0, lower) low, [lower, upper)
// intermediate, [upper, 1] high. Boundaries are left-closed.
struct RiskBins {
    double lower = 0.10;
    double upper = 0.20;
};

enum class Bin : int { Low = 0, Intermediate = 1, High = 2 };

inline const char* bin_name(Bin b) {
    switch (b) {
        case Bin::Low: return "low";
        case Bin::Intermediate: return "intermediate";
        case Bin::High: return "high";
    }
    return "?";
}

inline Bin classify(double risk_at_horizon, const RiskBins& bins) {
    if (!(bins.lower > 0.0 && bins.lower < bins.upper && bins.upper < 1.0))
        throw UsageError("risk bin thresholds must satisfy 0 < lower < upper < 1");
    if (risk_at_horizon < bins.lower) return Bin::Low;
    if (risk_at_horizon < bins.upper) return Bin::Intermediate;
    return Bin::High;
}

inline Bin classify(const Predictor& predictor, std::span<const double> x, double horizon,
                    int risk, const RiskBins& bins) {
    if (horizon <= 0.0) throw UsageError("classification horizon must be positive");
    return classify(predictor.risk_score(x, horizon, risk), bins);
}

// Keep rows whose `column` value is at least `min_value` (e.g. age >= 50).
struct CohortFilter {
    int column = -1;
    double min_value = 0.0;
    std::string description;
};

struct RiskMatrix {
    std::array<std::array<long, 3>, 3> counts{};  // [model A bin][model B bin]
    long total = 0;
    std::string stratum;  // "event-by-horizon" or "event-free-by-horizon"
};

struct ReclassificationResult {
    RiskMatrix event_free;
    RiskMatrix event;
    long excluded_censored = 0;  // censored before the horizon, dropped
    long excluded_filter = 0;
    double horizon = 0.0;
    int risk = 1;
    RiskBins bins;
    std::string boundary_note = "left-closed bins: 0.10 -> intermediate, 0.20 -> high";
};

// Cross-tabulates the two models' bins, excluding patients censored before
// the horizon, split by whether the focal risk occurred by the horizon
// (competing events before the horizon count as event-free of the focal risk).
ReclassificationResult reclassification_matrix(const NfgModel& model_a, const NfgModel& model_b,
                                               const SurvivalDataset& data, double horizon,
                                               int risk, const RiskBins& bins,
                                               const std::optional<CohortFilter>& filter = {});

// Brier(model A) - Brier(model B) per subgroup per horizon. Each fold
// contributes one value per cell; means/sds aggregate over folds.
struct SubgroupBrierDiff {
    std::vector<std::string> group_labels;
    std::vector<double> horizons;
    std::vector<std::vector<MetricCell>> diffs;  // [group][horizon]
};

struct FoldModels {
    const NfgModel* model_a;
    const NfgModel* model_b;
    const SurvivalDataset* eval_data;
};

SubgroupBrierDiff subgroup_brier_diff(std::span<const FoldModels> folds, int group_column,
                                      std::span<const double> group_edges,
                                      std::span<const double> horizons, int risk);

}  // namespace nfg
