#include "nfg/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "nfg/objectives.hpp"

namespace nfg {

QuadratureRule QuadratureRule::gauss_legendre(int n) {
    if (n < 1) throw UsageError("quadrature degree must be at least 1");
    QuadratureRule rule;
    rule.degree = n;
    rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
    rule.weights.assign(static_cast<std::size_t>(n), 0.0);

    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-based initial guess for the i-th root of P_n
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
            double p0 = 1.0;
            double p1 = x;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        // recompute the derivative at the converged node for the weight
        double p0 = 1.0;
        double p1 = x;
        for (int k = 1; k < n; ++k) {
            const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
            p0 = p1;
            p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;  // ascending order
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return rule;
}

double quadrature_cif(const Predictor& predictor, std::span<const double> x, double t, int risk,
                      int degree) {
    if (t < 0.0) throw DomainError("quadrature_cif", t);
    if (t == 0.0) return 0.0;
    const auto rule = QuadratureRule::gauss_legendre(degree);
    const double half = 0.5 * t;
    double integral = 0.0;
    for (int j = 0; j < degree; ++j) {
        const double u = half * (rule.nodes[static_cast<std::size_t>(j)] + 1.0);
        const auto eval = predictor.cif(x, u);
        integral += rule.weights[static_cast<std::size_t>(j)] *
                    eval.density[static_cast<std::size_t>(risk - 1)];
    }
    return half * integral;
}

FiniteDiffReport finite_diff_check(
    const std::function<double(std::span<const double>)>& value_fn,
    std::span<const double> gradient, std::vector<double> params, double h, double abs_floor) {
    if (gradient.size() != params.size())
        throw UsageError("gradient and parameter vectors differ in length");

    FiniteDiffReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = value_fn(params);
        params[i] = saved - h;
        const double down = value_fn(params);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = gradient[i];

        const double abs_err = std::abs(analytic - numeric);
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        if (abs_err <= abs_floor) continue;
        const double denom = std::max(std::abs(analytic), std::abs(numeric));
        const double rel = denom > 0.0 ? abs_err / denom : 0.0;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = static_cast<int>(i);
            report.analytic_at_worst = analytic;
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Brute-force metric oracles. Everything below recomputes the censoring
// product-limit survival from raw loops on each call; these transcriptions are
// deliberately naive and independent of the metrics module.
// ---------------------------------------------------------------------------

namespace {

constexpr double kClip = 0.05;
constexpr double kClipShare = 0.05;

// G(u-) for the censoring distribution: product over distinct observed times
// strictly below u of (1 - censored_at / at_risk).
double censoring_survival_before(double u, std::span<const double> times,
                                 std::span<const int> events) {
    std::vector<double> distinct;
    for (double t : times)
        if (t < u && std::find(distinct.begin(), distinct.end(), t) == distinct.end())
            distinct.push_back(t);
    std::sort(distinct.begin(), distinct.end());

    double g = 1.0;
    for (double t : distinct) {
        int at_risk = 0;
        int censored = 0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (times[i] >= t) ++at_risk;
            if (times[i] == t && events[i] == 0) ++censored;
        }
        if (at_risk > 0) g *= 1.0 - static_cast<double>(censored) / static_cast<double>(at_risk);
    }
    return g;
}

struct BruteTally {
    double total = 0.0;
    double clipped = 0.0;
    bool dead = false;

    void add(double mass, bool was_clipped) {
        total += mass;
        if (was_clipped) clipped += mass;
    }
    bool unavailable() const {
        return dead || (total > 0.0 && clipped > kClipShare * total);
    }
};

std::optional<double> brute_c_index(std::span<const double> preds, std::span<const double> times,
                                    std::span<const int> events, int risk, double horizon) {
    BruteTally tally;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(events[i] == risk && times[i] <= horizon)) continue;
        const double g = censoring_survival_before(times[i], times, events);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const double w1 = 1.0 / std::max(g, kClip);
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (!(times[i] < times[j])) continue;
            tally.add(w1 * w1, g < kClip);
            den += w1 * w1;
            if (preds[i] > preds[j])
                num += w1 * w1;
            else if (preds[i] == preds[j])
                num += 0.5 * w1 * w1;
        }
    }
    if (tally.unavailable() || den == 0.0) return std::nullopt;
    return num / den;
}

std::optional<double> brute_brier(std::span<const double> preds, std::span<const double> times,
                                  std::span<const int> events, int risk, double horizon) {
    BruteTally tally;
    double sum = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] == risk && times[i] <= horizon) {
            const double g = censoring_survival_before(times[i], times, events);
            if (g <= 0.0) {
                tally.dead = true;
                break;
            }
            const double w = 1.0 / std::max(g, kClip);
            tally.add(w, g < kClip);
            sum += w * (1.0 - preds[i]) * (1.0 - preds[i]);
        } else if (times[i] > horizon) {
            const double g = censoring_survival_before(horizon, times, events);
            if (g <= 0.0) {
                tally.dead = true;
                break;
            }
            const double w = 1.0 / std::max(g, kClip);
            tally.add(w, g < kClip);
            sum += w * preds[i] * preds[i];
        }
    }
    if (tally.unavailable()) return std::nullopt;
    return sum / static_cast<double>(times.size());
}

std::optional<double> brute_auc(std::span<const double> preds, std::span<const double> times,
                                std::span<const int> events, int risk, double horizon) {
    bool any_case = false;
    bool any_control = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] == risk && times[i] <= horizon) any_case = true;
        if (times[i] > horizon) any_control = true;
    }
    if (!any_case || !any_control) return std::nullopt;

    BruteTally tally;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(events[i] == risk && times[i] <= horizon)) continue;
        const double g = censoring_survival_before(times[i], times, events);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const double w1 = 1.0 / std::max(g, kClip);
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (!(times[j] > horizon)) continue;
            tally.add(w1 * w1, g < kClip);
            den += w1 * w1;
            if (preds[i] > preds[j])
                num += w1 * w1;
            else if (preds[i] == preds[j])
                num += 0.5 * w1 * w1;
        }
    }
    if (tally.unavailable() || den == 0.0) return std::nullopt;
    return num / den;
}

}  // namespace

BruteForceMetrics brute_force_metrics(std::span<const double> predictions,
                                      std::span<const double> times, std::span<const int> events,
                                      int risk, double horizon) {
    if (times.size() > 12)
        throw UsageError("brute-force metrics enumerate pairs exhaustively; max 12 patients");
    if (predictions.size() != times.size() || events.size() != times.size())
        throw UsageError("brute-force metric input lengths disagree");
    BruteForceMetrics out;
    out.c_index = brute_c_index(predictions, times, events, risk, horizon);
    out.brier = brute_brier(predictions, times, events, risk, horizon);
    out.auc = brute_auc(predictions, times, events, risk, horizon);
    return out;
}

BruteForceCumulative brute_force_cumulative(const std::vector<std::vector<double>>& pred_grid,
                                            std::span<const double> grid,
                                            std::span<const double> times,
                                            std::span<const int> events, int risk) {
    if (times.size() > 12)
        throw UsageError("brute-force metrics enumerate pairs exhaustively; max 12 patients");
    BruteForceCumulative out;

    bool ok = true;
    std::vector<double> bs;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto v = brute_brier(pred_grid[g], times, events, risk, grid[g]);
        if (!v) {
            ok = false;
            break;
        }
        bs.push_back(*v);
    }
    if (ok && grid.size() >= 2) {
        double area = 0.0;
        for (std::size_t g = 1; g < grid.size(); ++g)
            area += 0.5 * (bs[g] + bs[g - 1]) * (grid[g] - grid[g - 1]);
        out.integrated_brier = area / (grid.back() - grid.front());
    }

    BruteTally tally;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] != risk) continue;
        const double g = censoring_survival_before(times[i], times, events);
        if (g <= 0.0) {
            tally.dead = true;
            break;
        }
        const double w1 = 1.0 / std::max(g, kClip);
        // prediction column: last grid point at or below the event time
        std::size_t col = 0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (grid[k] <= times[i]) col = k;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (!(times[i] < times[j])) continue;
            tally.add(w1 * w1, g < kClip);
            den += w1 * w1;
            if (pred_grid[col][i] > pred_grid[col][j])
                num += w1 * w1;
            else if (pred_grid[col][i] == pred_grid[col][j])
                num += 0.5 * w1 * w1;
        }
    }
    if (!tally.unavailable() && den > 0.0) out.ctd_index = num / den;
    return out;
}

// ---------------------------------------------------------------------------
// Likelihood cost benchmark
// ---------------------------------------------------------------------------

BenchReport likelihood_cost_benchmark(const NfgModel& model, const SurvivalDataset& data,
                                      std::span<const int> rows, std::span<const int> degrees) {
    if (rows.empty()) throw UsageError("benchmark needs a nonempty batch");
    const Predictor predictor(model);

    long exact_evals = 0;
    auto exact_pass = [&]() {
        double acc = 0.0;
        long evals = 0;
        for (int r : rows) {
            const double t = data.times[static_cast<std::size_t>(r)];
            const int d = data.events[static_cast<std::size_t>(r)];
            const auto eval = predictor.cif(data.row(r), t);
            ++evals;
            if (d == 0)
                acc += std::log(std::max(eval.survival, kLogFloor));
            else
                acc += std::log(std::max(eval.density[static_cast<std::size_t>(d - 1)], kLogFloor));
        }
        exact_evals = evals;
        return acc;
    };

    auto quad_pass = [&](const QuadratureRule& rule, long& evals_out) {
        double acc = 0.0;
        long evals = 0;
        for (int r : rows) {
            const double t = data.times[static_cast<std::size_t>(r)];
            const int d = data.events[static_cast<std::size_t>(r)];
            if (d != 0) {
                const auto eval = predictor.cif(data.row(r), t);
                ++evals;
                acc += std::log(std::max(eval.density[static_cast<std::size_t>(d - 1)], kLogFloor));
            } else {
                // survival reconstructed by integrating every risk's density
                double total_cif = 0.0;
                const double half = 0.5 * t;
                for (int j = 0; j < rule.degree; ++j) {
                    const double u = half * (rule.nodes[static_cast<std::size_t>(j)] + 1.0);
                    const auto eval = predictor.cif(data.row(r), u);
                    ++evals;
                    double dens = 0.0;
                    for (double v : eval.density) dens += v;
                    total_cif += rule.weights[static_cast<std::size_t>(j)] * dens;
                }
                acc += std::log(std::max(1.0 - half * total_cif, kLogFloor));
            }
        }
        evals_out = evals;
        return acc;
    };

    using Clock = std::chrono::steady_clock;
    volatile double sink = 0.0;
    auto time_it = [&](const std::function<double()>& pass, int& reps_out) {
        // grow the repetition count until the sample is large enough for the
        // timer: at least 50 repetitions and 0.05 s
        int reps = 1;
        double elapsed = 0.0;
        for (;;) {
            const auto start = Clock::now();
            for (int k = 0; k < reps; ++k) sink = sink + pass();
            elapsed = std::chrono::duration<double>(Clock::now() - start).count();
            if (reps >= 50 && elapsed >= 0.05) break;
            if (elapsed > 5.0) break;  // heavy methods: enough signal already
            reps *= 2;
        }
        reps_out = reps;
        return elapsed / reps;
    };

    BenchReport report;
    {
        BenchReport::Entry e;
        e.method = "exact";
        e.degree = 0;
        int reps = 0;
        e.seconds_per_likelihood = time_it(exact_pass, reps);
        e.repetitions = reps;
        e.model_evaluations = exact_evals;
        report.entries.push_back(e);
    }
    for (int n : degrees) {
        const auto rule = QuadratureRule::gauss_legendre(n);
        BenchReport::Entry e;
        e.method = "quadrature-" + std::to_string(n);
        e.degree = n;
        long evals = 0;
        int reps = 0;
        e.seconds_per_likelihood = time_it([&]() { return quad_pass(rule, evals); }, reps);
        e.repetitions = reps;
        e.model_evaluations = evals;
        report.entries.push_back(e);
    }
    return report;
}

double BenchReport::ratio_vs_exact(int degree) const {
    double exact = 0.0;
    double quad = 0.0;
    for (const auto& e : entries) {
        if (e.degree == 0) exact = e.seconds_per_likelihood;
        if (e.degree == degree && e.degree != 0) quad = e.seconds_per_likelihood;
    }
    if (exact <= 0.0 || quad <= 0.0) throw UsageError("benchmark entries missing for ratio");
    return quad / exact;
}

}  // namespace nfg
