#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfg/data.hpp"

namespace nfg {

// Product-limit estimator. Evaluation is right-continuous; survival_before
// gives the value just before t, which is what IPCW weights use.
class KaplanMeier {
public:
    static KaplanMeier fit(std::span<const double> times, std::span<const int> event_indicator);

    double survival_at(double t) const;
    double survival_before(double t) const;

    const std::vector<double>& step_times() const { return times_; }
    const std::vector<double>& step_survival() const { return survival_; }
    const std::vector<int>& at_risk() const { return at_risk_; }
    const std::vector<int>& events() const { return events_; }

private:
    std::vector<double> times_;     // distinct times with at least one event
    std::vector<double> survival_;  // S at those times
    std::vector<int> at_risk_;
    std::vector<int> events_;
};

// Censoring-distribution estimator (indicator: d == 0).
KaplanMeier censoring_km(std::span<const double> times, std::span<const int> events);

// IPCW convention shared by every metric: w(u) = 1/G(u-) with G clipped at
// 0.05 (weights capped at 20). A metric becomes unavailable when G(u-) is 0
// for a needed u or when clipped weights carry more than 5% of the weight mass.
inline constexpr double kIpcwClip = 0.05;
inline constexpr double kMaxClippedShare = 0.05;

// Time-dependent concordance: P(pred_i > pred_j | d_i = r, t_i < t_j, t_i <= horizon),
// pair weight w(t_i)^2, prediction ties 0.5. nullopt = unavailable.
std::optional<double> c_index_td(std::span<const double> predictions,
                                 std::span<const double> times, std::span<const int> events,
                                 int risk, double horizon, const KaplanMeier& cens);

// Graf time-dependent Brier score:
//   (1/n) sum_i [ w(t_i) 1{d_i=r, t_i<=t} (1-F)^2 + w(t) 1{t_i>t} F^2 ]
std::optional<double> brier_td(std::span<const double> predictions,
                               std::span<const double> times, std::span<const int> events,
                               int risk, double horizon, const KaplanMeier& cens);

// Cumulative/dynamic AUC: cases {d_i=r, t_i<=t}, controls {t_j>t}, case
// weight w(t_i)^2, ties 0.5.
std::optional<double> auc_td(std::span<const double> predictions,
                             std::span<const double> times, std::span<const int> events,
                             int risk, double horizon, const KaplanMeier& cens);

struct CumulativeMetrics {
    std::optional<double> integrated_brier;
    std::optional<double> ctd_index;
};

// pred_grid[g][i] = predicted F_r(grid[g] | x_i). The integrated Brier score
// is the trapezoid over the grid normalized by its span; the overall
// time-dependent C-index compares predictions at each event subject's own
// time (step lookup into the grid).
CumulativeMetrics cumulative_metrics(const std::vector<std::vector<double>>& pred_grid,
                                     std::span<const double> grid,
                                     std::span<const double> times, std::span<const int> events,
                                     int risk, const KaplanMeier& cens);

struct EvalHorizons {
    std::vector<double> levels{0.25, 0.50, 0.75};
    std::vector<double> times;
};

// Nearest-rank quantiles of the uncensored event times (all risks pooled).
EvalHorizons event_quantiles(std::span<const double> times, std::span<const int> events,
                             std::span<const double> levels);
EvalHorizons event_quantiles(const SurvivalDataset& data);

// --- aggregated reports ------------------------------------------------------

struct MetricCell {
    std::vector<std::optional<double>> per_fold;
    std::optional<double> mean;
    std::optional<double> sd;
    int available = 0;

    void add(std::optional<double> v) { per_fold.push_back(v); }
    void finalize();
};

struct RiskReport {
    std::vector<MetricCell> c_index;  // one per horizon
    std::vector<MetricCell> brier;
    std::vector<MetricCell> auc;
    MetricCell integrated_brier;
    MetricCell ctd_index;
};

struct MetricReport {
    std::vector<double> horizons;
    std::vector<RiskReport> risks;  // index r-1
    std::vector<std::string> warnings;
    std::string ipcw_convention =
        "w(u)=1/G(u-), G clipped at 0.05, pair weight w(t_i)^2, prediction ties 0.5";

    void init(int n_risks, int n_horizons);
    void finalize();
};

}  // namespace nfg
