#include "nfg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nfg {

KaplanMeier KaplanMeier::fit(std::span<const double> times, std::span<const int> indicator) {
    if (times.empty()) throw UsageError("Kaplan-Meier needs at least one observation");
    if (times.size() != indicator.size()) throw UsageError("times/indicator length mismatch");

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return times[a] < times[b];
    });

    KaplanMeier km;
    double surv = 1.0;
    std::size_t k = 0;
    const std::size_t n = times.size();
    while (k < n) {
        const double t = times[order[k]];
        const int at_risk = static_cast<int>(n - k);
        int d = 0;
        std::size_t j = k;
        while (j < n && times[order[j]] == t) {
            if (indicator[order[j]] != 0) ++d;
            ++j;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            km.times_.push_back(t);
            km.survival_.push_back(surv);
            km.at_risk_.push_back(at_risk);
            km.events_.push_back(d);
        }
        k = j;
    }
    return km;
}

double KaplanMeier::survival_at(double t) const {
    // last step time <= t
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 1.0;
    return survival_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double KaplanMeier::survival_before(double t) const {
    // last step time strictly < t
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 1.0;
    return survival_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

KaplanMeier censoring_km(std::span<const double> times, std::span<const int> events) {
    std::vector<int> indicator(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) indicator[i] = events[i] == 0 ? 1 : 0;
    return KaplanMeier::fit(times, indicator);
}

namespace {

struct WeightTally {
    double total = 0.0;
    double clipped = 0.0;
    bool dead = false;  // G hit zero where a weight was needed

    bool unavailable() const {
        return dead || (total > 0.0 && clipped > kMaxClippedShare * total);
    }
};

void tally_mass(WeightTally& tally, double mass, bool was_clipped) {
    tally.total += mass;
    if (was_clipped) tally.clipped += mass;
}

}  // namespace

std::optional<double> c_index_td(std::span<const double> predictions,
                                 std::span<const double> times, std::span<const int> events,
                                 int risk, double horizon, const KaplanMeier& cens) {
    const std::size_t n = times.size();
    if (predictions.size() != n || events.size() != n)
        throw UsageError("c_index_td input lengths disagree");
    if (horizon <= 0.0) throw UsageError("horizon must be positive");

    WeightTally tally;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] != risk || times[i] > horizon) continue;
        const double g = cens.survival_before(times[i]);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const bool was_clipped = g < kIpcwClip;
        const double w1 = 1.0 / std::max(g, kIpcwClip);
        const double w = w1 * w1;
        for (std::size_t j = 0; j < n; ++j) {
            if (times[j] <= times[i]) continue;
            tally_mass(tally, w, was_clipped);
            den += w;
            if (predictions[i] > predictions[j])
                num += w;
            else if (predictions[i] == predictions[j])
                num += 0.5 * w;
        }
    }
    if (tally.unavailable() || den == 0.0) return std::nullopt;
    return num / den;
}

std::optional<double> brier_td(std::span<const double> predictions,
                               std::span<const double> times, std::span<const int> events,
                               int risk, double horizon, const KaplanMeier& cens) {
    const std::size_t n = times.size();
    if (predictions.size() != n || events.size() != n)
        throw UsageError("brier_td input lengths disagree");
    if (horizon <= 0.0) throw UsageError("horizon must be positive");

    WeightTally tally;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] == risk && times[i] <= horizon) {
            const double g = cens.survival_before(times[i]);
            if (g <= 0.0) {
                tally.dead = true;
                break;
            }
            const double w = 1.0 / std::max(g, kIpcwClip);
            tally_mass(tally, w, g < kIpcwClip);
            const double err = 1.0 - predictions[i];
            sum += w * err * err;
        } else if (times[i] > horizon) {
            const double g = cens.survival_before(horizon);
            if (g <= 0.0) {
                tally.dead = true;
                break;
            }
            const double w = 1.0 / std::max(g, kIpcwClip);
            tally_mass(tally, w, g < kIpcwClip);
            sum += w * predictions[i] * predictions[i];
        }
        // everyone else (censored or competing event by the horizon) contributes 0
    }
    if (tally.unavailable()) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> auc_td(std::span<const double> predictions,
                             std::span<const double> times, std::span<const int> events,
                             int risk, double horizon, const KaplanMeier& cens) {
    const std::size_t n = times.size();
    if (predictions.size() != n || events.size() != n)
        throw UsageError("auc_td input lengths disagree");
    if (horizon <= 0.0) throw UsageError("horizon must be positive");

    WeightTally tally;
    double num = 0.0;
    double den = 0.0;
    bool any_case = false;
    bool any_control = false;
    for (std::size_t j = 0; j < n; ++j) any_control = any_control || times[j] > horizon;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] != risk || times[i] > horizon) continue;
        any_case = true;
        const double g = cens.survival_before(times[i]);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const bool was_clipped = g < kIpcwClip;
        const double w1 = 1.0 / std::max(g, kIpcwClip);
        const double w = w1 * w1;
        for (std::size_t j = 0; j < n; ++j) {
            if (times[j] <= horizon) continue;
            tally_mass(tally, w, was_clipped);
            den += w;
            if (predictions[i] > predictions[j])
                num += w;
            else if (predictions[i] == predictions[j])
                num += 0.5 * w;
        }
    }
    if (!any_case || !any_control) return std::nullopt;
    if (tally.unavailable() || den == 0.0) return std::nullopt;
    return num / den;
}

CumulativeMetrics cumulative_metrics(const std::vector<std::vector<double>>& pred_grid,
                                     std::span<const double> grid,
                                     std::span<const double> times, std::span<const int> events,
                                     int risk, const KaplanMeier& cens) {
    if (pred_grid.size() != grid.size()) throw UsageError("prediction grid/grid size mismatch");
    if (grid.size() < 2) throw UsageError("cumulative metrics need at least two grid points");
    const std::size_t n = times.size();

    CumulativeMetrics out;

    // integrated Brier: trapezoid over the grid, normalized by the span
    std::vector<double> bs(grid.size());
    bool brier_ok = true;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto v = brier_td(pred_grid[g], times, events, risk, grid[g], cens);
        if (!v) {
            brier_ok = false;
            break;
        }
        bs[g] = *v;
    }
    if (brier_ok) {
        double area = 0.0;
        for (std::size_t g = 1; g < grid.size(); ++g)
            area += 0.5 * (bs[g] + bs[g - 1]) * (grid[g] - grid[g - 1]);
        out.integrated_brier = area / (grid.back() - grid.front());
    }

    // overall Antolini C-index: predictions taken at each subject's own event
    // time via step lookup (last grid point <= t_i, or the first grid point)
    auto grid_col = [&](double t) -> std::size_t {
        const auto it = std::upper_bound(grid.begin(), grid.end(), t);
        if (it == grid.begin()) return 0;
        return static_cast<std::size_t>(it - grid.begin()) - 1;
    };

    WeightTally tally;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (events[i] != risk) continue;
        const double g = cens.survival_before(times[i]);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const bool was_clipped = g < kIpcwClip;
        const double w1 = 1.0 / std::max(g, kIpcwClip);
        const double w = w1 * w1;
        const std::size_t col = grid_col(times[i]);
        for (std::size_t j = 0; j < n; ++j) {
            if (times[j] <= times[i]) continue;
            tally_mass(tally, w, was_clipped);
            den += w;
            const double pi = pred_grid[col][i];
            const double pj = pred_grid[col][j];
            if (pi > pj)
                num += w;
            else if (pi == pj)
                num += 0.5 * w;
        }
    }
    if (!tally.unavailable() && den > 0.0) out.ctd_index = num / den;
    return out;
}

EvalHorizons event_quantiles(std::span<const double> times, std::span<const int> events,
                             std::span<const double> levels) {
    std::vector<double> event_times;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (events[i] != 0) event_times.push_back(times[i]);
    if (event_times.empty())
        throw UsageError("event quantiles need at least one uncensored event");
    std::sort(event_times.begin(), event_times.end());

    EvalHorizons horizons;
    horizons.levels.assign(levels.begin(), levels.end());
    for (double q : levels) {
        if (q <= 0.0 || q > 1.0) throw UsageError("quantile level must be in (0, 1]");
        // nearest rank: ceil(q * n), 1-based
        const auto rank = static_cast<std::size_t>(
            std::ceil(q * static_cast<double>(event_times.size())));
        horizons.times.push_back(event_times[std::max<std::size_t>(rank, 1) - 1]);
    }
    return horizons;
}

EvalHorizons event_quantiles(const SurvivalDataset& data) {
    const std::vector<double> levels{0.25, 0.50, 0.75};
    return event_quantiles(data.times, data.events, levels);
}

void MetricCell::finalize() {
    available = 0;
    double sum = 0.0;
    for (const auto& v : per_fold)
        if (v) {
            ++available;
            sum += *v;
        }
    if (available == 0) {
        mean.reset();
        sd.reset();
        return;
    }
    mean = sum / available;
    if (available == 1) {
        sd = 0.0;
        return;
    }
    double ss = 0.0;
    for (const auto& v : per_fold)
        if (v) ss += (*v - *mean) * (*v - *mean);
    sd = std::sqrt(ss / (available - 1));
}

void MetricReport::init(int n_risks, int n_horizons) {
    risks.assign(static_cast<std::size_t>(n_risks), RiskReport{});
    for (auto& r : risks) {
        r.c_index.resize(static_cast<std::size_t>(n_horizons));
        r.brier.resize(static_cast<std::size_t>(n_horizons));
        r.auc.resize(static_cast<std::size_t>(n_horizons));
    }
}

void MetricReport::finalize() {
    for (auto& r : risks) {
        for (auto& c : r.c_index) c.finalize();
        for (auto& c : r.brier) c.finalize();
        for (auto& c : r.auc) c.finalize();
        r.integrated_brier.finalize();
        r.ctd_index.finalize();
    }
}

}  // namespace nfg
