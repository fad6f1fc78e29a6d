#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfg/model.hpp"

namespace nfg {

// n-point Gauss-Legendre rule on [-1, 1]; nodes/weights found by Newton
// iteration on the Legendre polynomials so any degree is available.
struct QuadratureRule {
    int degree = 0;
    std::vector<double> nodes;
    std::vector<double> weights;

    static QuadratureRule gauss_legendre(int n);
};

// Reconstructs F_r(t|x) as the quadrature of the model's own exact density
// over [0, t] — the integration-based route the model itself avoids.
double quadrature_cif(const Predictor& predictor, std::span<const double> x, double t, int risk,
                      int degree);

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    int worst_coordinate = -1;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central differences (h = 1e-5) against a supplied gradient, coordinate by
// coordinate. Differences below `abs_floor` are ignored when ranking relative
// errors, so noise around zero gradients does not dominate the report.
FiniteDiffReport finite_diff_check(
    const std::function<double(std::span<const double>)>& value_fn,
    std::span<const double> gradient, std::vector<double> params, double h = 1e-5,
    double abs_floor = 1e-7);

// Direct transcription of the metric definitions with explicit loops and its
// own product-limit computation; shares no code with the metrics module.
// Exhaustive pair enumeration, so cohorts are capped at 12 patients.
struct BruteForceMetrics {
    std::optional<double> c_index;
    std::optional<double> brier;
    std::optional<double> auc;
};

BruteForceMetrics brute_force_metrics(std::span<const double> predictions,
                                      std::span<const double> times, std::span<const int> events,
                                      int risk, double horizon);

struct BruteForceCumulative {
    std::optional<double> integrated_brier;
    std::optional<double> ctd_index;
};

BruteForceCumulative brute_force_cumulative(const std::vector<std::vector<double>>& pred_grid,
                                            std::span<const double> grid,
                                            std::span<const double> times,
                                            std::span<const int> events, int risk);

// Wall-time comparison of the exact likelihood (one density evaluation per
// patient) against a quadrature-based likelihood whose censored terms
// integrate the density with n points.
struct BenchReport {
    struct Entry {
        std::string method;
        int degree = 0;            // 0 for the exact route
        long model_evaluations = 0;  // forward passes per likelihood evaluation
        int repetitions = 0;
        double seconds_per_likelihood = 0.0;
    };
    std::vector<Entry> entries;

    double ratio_vs_exact(int degree) const;
};

BenchReport likelihood_cost_benchmark(const NfgModel& model, const SurvivalDataset& data,
                                      std::span<const int> rows, std::span<const int> degrees);

}  // namespace nfg
