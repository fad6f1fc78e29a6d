#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfg/errors.hpp"
#include "nfg/rng.hpp"

namespace nfg {

// Right-censored competing-risks cohort: covariates x_i, follow-up end t_i,
// cause d_i in [0, R] with 0 meaning censored.
struct SurvivalDataset {
    int n = 0;
    int p = 0;
    int n_risks = 0;
    std::vector<double> covariates;  // row-major [n][p]
    std::vector<double> times;
    std::vector<int> events;
    std::vector<std::string> feature_names;

    std::span<const double> row(int i) const {
        return {covariates.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(p),
                static_cast<std::size_t>(p)};
    }

    SurvivalDataset subset(std::span<const int> rows) const;
    void validate() const;
};

struct CsvSchema {
    std::string time_column = "time";
    std::string event_column = "event";
    std::vector<std::string> feature_columns;  // empty: every other column
};

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const SurvivalDataset& data, const std::string& path);

// Two-risk generator with exponential latent times whose rates depend
// non-linearly (through squared covariates) on x:
//   lambda_r(x) = exp(scale * gamma_r . (x*x) / sqrt(p))
// The censoring time is Uniform(0, c*) with c* calibrated by bisection so the
// realized censored fraction lands within +-1% of the target.
struct SyntheticSpec {
    int n = 30000;
    int p = 12;
    std::vector<double> gamma1;  // size p
    std::vector<double> gamma2;  // size p
    double nonlinearity = 1.0;
    double censoring_target = 0.5;
    std::uint64_t seed = 0;

    // gamma1 on the first half of the features, gamma2 on the second half,
    // so the two risks are driven by disjoint covariate sets.
    static SyntheticSpec defaults();
    // both risks share all covariates; used to study competing-risk bias
    static SyntheticSpec correlated();
};

SurvivalDataset generate_synthetic(const SyntheticSpec& spec);

// Latent cause-specific rates (lambda_1, lambda_2) at covariates x.
std::pair<double, double> analytic_hazards(const SyntheticSpec& spec, std::span<const double> x);

// Closed-form CIF of the generator: lambda_r/(lambda_1+lambda_2) * (1 - exp(-(lambda_1+lambda_2) t)).
double analytic_cif(const SyntheticSpec& spec, std::span<const double> x, double t, int risk);

// Draws one latent (event time, risk) pair at fixed covariates; test hook for
// generator-consistency checks.
std::pair<double, int> sample_latent(const SyntheticSpec& spec, std::span<const double> x, Rng& rng);

// Deterministic stratified fold labels in [0, k). Assignment is keyed to a
// canonical within-stratum ordering, so permuting input rows permutes labels
// with them.
std::vector<int> split_folds(const SurvivalDataset& data, int k, std::uint64_t seed);

struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<int> constant_features;  // stddev replaced by 1
};

// Per-feature mean/std over the given training rows only.
Standardization standardize(const SurvivalDataset& data, std::span<const int> rows);

}  // namespace nfg
