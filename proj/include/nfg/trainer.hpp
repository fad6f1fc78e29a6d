#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nfg/metrics.hpp"
#include "nfg/model.hpp"
#include "nfg/objectives.hpp"

namespace nfg {

struct HyperParams {
    double learning_rate = 1e-3;
    int batch_size = 250;
    double dropout = 0.0;
    int layers = 2;
    int nodes = 25;
};

// Random-search grid; the large-data profile swaps the batch sizes.
struct HyperGrid {
    std::vector<double> learning_rates{1e-3, 1e-4};
    std::vector<int> batch_sizes{100, 250};
    std::vector<double> dropouts{0.0, 0.25, 0.5, 0.75};
    std::vector<int> layer_counts{1, 2, 3, 4};
    std::vector<int> node_counts{25, 50};

    static HyperGrid standard() { return {}; }
    static HyperGrid large_data() {
        HyperGrid g;
        g.batch_sizes = {1000, 5000};
        return g;
    }

    HyperParams sample(Rng& rng) const;
};

struct TrainConfig {
    int max_epochs = 1000;
    int patience = 50;           // epochs without validation improvement
    double val_fraction = 0.10;  // early-stopping subset of the training data
    std::uint64_t seed = 0;
    Variant variant = Variant::Nfg;
    int n_risks = 0;  // 0: taken from the dataset
};

struct EpochRecord {
    int epoch = 0;
    double train_nll = 0.0;
    double val_nll = 0.0;
    int floored_terms = 0;
};

struct TrainResult {
    NfgModel model;
    std::vector<EpochRecord> log;
    int best_epoch = -1;
    double best_val_nll = 0.0;
};

// Adam with the usual bias correction; beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t n_params = 0) { resize(n_params); }
    void resize(std::size_t n_params) {
        m.assign(n_params, 0.0);
        v.assign(n_params, 0.0);
        step = 0;
    }
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double learning_rate);

// Minibatch Adam with early stopping on a stratified 10% split and
// best-epoch restoration. Deterministic given cfg.seed.
TrainResult train(const SurvivalDataset& data, const HyperParams& hp, const TrainConfig& cfg);

struct TrialRecord {
    int index = 0;
    HyperParams hp;
    double val_nll = 0.0;
    int best_epoch = -1;
};

struct SearchResult {
    HyperParams best;
    int best_trial = -1;
    std::vector<TrialRecord> trials;
};

// Uniform sampling (with replacement) from the grid; the winner minimizes the
// early-stopping validation NLL, ties going to the earliest trial.
SearchResult random_search(const SurvivalDataset& data, int n_trials, const TrainConfig& cfg,
                           const HyperGrid& grid, Rng& rng);

struct CvConfig {
    int k = 5;
    std::uint64_t seed = 0;
    Variant variant = Variant::Nfg;
    int n_risks = 0;
    int n_trials = 0;  // 0: train with fixed_hp, no search
    HyperParams fixed_hp{};
    HyperGrid grid = HyperGrid::standard();
    int max_epochs = 1000;
    int patience = 50;
    int jobs = 1;
    std::vector<double> horizons;      // empty: q25/q50/q75 of uncensored event times
    int cumulative_grid_points = 100;  // grid for the integrated metrics
};

struct FoldOutcome {
    int fold = 0;
    HyperParams hp;
    double val_nll = 0.0;
    std::vector<std::string> warnings;
    NfgModel model;
};

struct CvResult {
    EvalHorizons horizons;
    MetricReport report;
    std::vector<FoldOutcome> folds;
};

// Stratified k-fold cross-validation: per fold, optional random search on the
// training split, retrain, evaluate on the held-out fold, then aggregate
// "mean (sd)" cells per risk and horizon.
CvResult cross_validate(const SurvivalDataset& data, const CvConfig& cfg);

// Evaluation of one fitted model on a cohort (fold or held-out set).
MetricReport evaluate_model(const NfgModel& model, const SurvivalDataset& data,
                            std::span<const double> horizons, int cumulative_grid_points = 100);

}  // namespace nfg
