#include "nfg/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace nfg {

HyperParams HyperGrid::sample(Rng& rng) const {
    auto pick = [&rng](const auto& pool) {
        if (pool.empty()) throw UsageError("hyperparameter grid dimension is empty");
        return pool[static_cast<std::size_t>(rng.below(pool.size()))];
    };
    HyperParams hp;
    hp.learning_rate = pick(learning_rates);
    hp.batch_size = pick(batch_sizes);
    hp.dropout = pick(dropouts);
    hp.layers = pick(layer_counts);
    hp.nodes = pick(node_counts);
    return hp;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double learning_rate) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw UsageError("adam state/parameter/gradient sizes disagree");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

namespace {

// Stratified split of [0, n) into validation (about `fraction`) and the rest.
void validation_split(const SurvivalDataset& data, double fraction, std::uint64_t seed,
                      std::vector<int>& train_rows, std::vector<int>& val_rows) {
    const int k = std::max(2, static_cast<int>(std::lround(1.0 / fraction)));
    if (data.n < k) {
        // cohort too small to carve a split: validate on the training rows
        for (int i = 0; i < data.n; ++i) {
            train_rows.push_back(i);
            val_rows.push_back(i);
        }
        return;
    }
    const auto folds = split_folds(data, k, seed);
    for (int i = 0; i < data.n; ++i)
        (folds[static_cast<std::size_t>(i)] == 0 ? val_rows : train_rows).push_back(i);
}

}  // namespace

TrainResult train(const SurvivalDataset& data, const HyperParams& hp, const TrainConfig& cfg) {
    data.validate();
    const int n_risks = cfg.n_risks > 0 ? cfg.n_risks : data.n_risks;
    if (n_risks < 1) throw UsageError("dataset carries no events; specify the risk count");
    if (cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
        throw UsageError("validation fraction must be in (0, 1)");

    std::vector<int> train_rows;
    std::vector<int> val_rows;
    validation_split(data, cfg.val_fraction, mix_seed(cfg.seed, 1), train_rows, val_rows);

    NfgConfig arch;
    arch.n_features = data.p;
    arch.n_risks = n_risks;
    arch.variant = cfg.variant;
    arch.layers = hp.layers;
    arch.nodes = hp.nodes;
    arch.dropout = hp.dropout;

    Rng init_rng(mix_seed(cfg.seed, 2));
    NfgModel model = init_model(arch, init_rng);
    fit_normalization(model, data, train_rows);

    const auto ptrs = parameter_pointers(model);
    std::vector<double> flat = flatten_parameters(model);
    AdamState adam(flat.size());
    Rng epoch_rng(mix_seed(cfg.seed, 3));

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_flat = flat;
    int since_best = 0;

    Tape tape;
    Gradient grad;
    const int batch_size = std::max(1, hp.batch_size);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        epoch_rng.shuffle(train_rows);
        double epoch_nll = 0.0;
        int epoch_floored = 0;
        for (std::size_t start = 0; start < train_rows.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(train_rows.size(), start + static_cast<std::size_t>(batch_size));
            std::span<const int> batch{train_rows.data() + start, stop - start};

            for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = flat[i];
            tape.reset();
            const auto staged = stage(tape, model);
            const auto breakdown = training_nll(tape, staged, data, batch, true, &epoch_rng);
            if (!std::isfinite(breakdown.total_nll)) {
                double norm = 0.0;
                for (double p : flat) norm += p * p;
                throw TrainingError(epoch, static_cast<int>(start / static_cast<std::size_t>(batch_size)),
                                    std::sqrt(norm));
            }
            epoch_nll += breakdown.total_nll;
            epoch_floored += breakdown.floored_terms;

            backward(breakdown.loss, grad);
            const auto flat_grad = collect_gradient(staged, grad);
            adam_step(adam, flat, flat_grad, hp.learning_rate);
        }

        for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = flat[i];
        const auto val = training_nll_value(model, data, val_rows);

        EpochRecord record;
        record.epoch = epoch;
        record.train_nll = epoch_nll;
        record.val_nll = val.total_nll;
        record.floored_terms = epoch_floored + val.floored_terms;
        result.log.push_back(record);

        if (val.total_nll < best_val) {
            best_val = val.total_nll;
            best_flat = flat;
            result.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > cfg.patience) break;
        }
    }

    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = best_flat[i];
    result.best_val_nll = best_val;
    result.model = std::move(model);
    return result;
}

SearchResult random_search(const SurvivalDataset& data, int n_trials, const TrainConfig& cfg,
                           const HyperGrid& grid, Rng& rng) {
    if (n_trials < 1) throw UsageError("random search needs at least one trial");

    SearchResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < n_trials; ++trial) {
        TrialRecord record;
        record.index = trial;
        record.hp = grid.sample(rng);

        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(trial));
        const auto trained = train(data, record.hp, trial_cfg);
        record.val_nll = trained.best_val_nll;
        record.best_epoch = trained.best_epoch;
        result.trials.push_back(record);

        if (record.val_nll < best) {
            best = record.val_nll;
            result.best = record.hp;
            result.best_trial = trial;
        }
    }
    return result;
}

MetricReport evaluate_model(const NfgModel& model, const SurvivalDataset& data,
                            std::span<const double> horizons, int cumulative_grid_points) {
    if (data.p != model.n_features)
        throw UsageError("dataset has " + std::to_string(data.p) + " features, model expects " +
                         std::to_string(model.n_features));

    MetricReport report;
    report.horizons.assign(horizons.begin(), horizons.end());
    report.init(model.n_risks, static_cast<int>(horizons.size()));

    const Predictor predictor(model);
    const auto cens = censoring_km(data.times, data.events);

    double max_event_time = 0.0;
    for (int i = 0; i < data.n; ++i)
        if (data.events[static_cast<std::size_t>(i)] != 0)
            max_event_time = std::max(max_event_time, data.times[static_cast<std::size_t>(i)]);
    if (max_event_time <= 0.0)
        for (int i = 0; i < data.n; ++i)
            max_event_time = std::max(max_event_time, data.times[static_cast<std::size_t>(i)]);

    std::vector<double> grid;
    for (int g = 1; g <= cumulative_grid_points; ++g)
        grid.push_back(max_event_time * static_cast<double>(g) /
                       static_cast<double>(cumulative_grid_points));

    for (int risk = 1; risk <= model.n_risks; ++risk) {
        auto& cells = report.risks[static_cast<std::size_t>(risk - 1)];

        bool has_events = false;
        for (int i = 0; i < data.n; ++i)
            if (data.events[static_cast<std::size_t>(i)] == risk) has_events = true;
        if (!has_events) {
            report.warnings.push_back("no events of risk " + std::to_string(risk) +
                                      "; metrics unavailable");
            for (std::size_t h = 0; h < horizons.size(); ++h) {
                cells.c_index[h].add(std::nullopt);
                cells.brier[h].add(std::nullopt);
                cells.auc[h].add(std::nullopt);
            }
            cells.integrated_brier.add(std::nullopt);
            cells.ctd_index.add(std::nullopt);
            continue;
        }

        for (std::size_t h = 0; h < horizons.size(); ++h) {
            std::vector<double> preds(static_cast<std::size_t>(data.n));
            for (int i = 0; i < data.n; ++i)
                preds[static_cast<std::size_t>(i)] = predictor.risk_score(data.row(i), horizons[h], risk);
            cells.c_index[h].add(c_index_td(preds, data.times, data.events, risk, horizons[h], cens));
            cells.brier[h].add(brier_td(preds, data.times, data.events, risk, horizons[h], cens));
            cells.auc[h].add(auc_td(preds, data.times, data.events, risk, horizons[h], cens));
        }

        std::vector<std::vector<double>> pred_grid(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            pred_grid[g].resize(static_cast<std::size_t>(data.n));
            for (int i = 0; i < data.n; ++i)
                pred_grid[g][static_cast<std::size_t>(i)] =
                    predictor.risk_score(data.row(i), grid[g], risk);
        }
        const auto cumulative =
            cumulative_metrics(pred_grid, grid, data.times, data.events, risk, cens);
        cells.integrated_brier.add(cumulative.integrated_brier);
        cells.ctd_index.add(cumulative.ctd_index);
    }

    report.finalize();
    return report;
}

namespace {

void merge_fold_metrics(MetricReport& into, const MetricReport& fold) {
    for (std::size_t r = 0; r < into.risks.size(); ++r) {
        auto& dst = into.risks[r];
        const auto& src = fold.risks[r];
        for (std::size_t h = 0; h < dst.c_index.size(); ++h) {
            dst.c_index[h].add(src.c_index[h].per_fold.at(0));
            dst.brier[h].add(src.brier[h].per_fold.at(0));
            dst.auc[h].add(src.auc[h].per_fold.at(0));
        }
        dst.integrated_brier.add(src.integrated_brier.per_fold.at(0));
        dst.ctd_index.add(src.ctd_index.per_fold.at(0));
    }
    for (const auto& w : fold.warnings) into.warnings.push_back(w);
}

}  // namespace

CvResult cross_validate(const SurvivalDataset& data, const CvConfig& cfg) {
    data.validate();
    if (cfg.k < 2) throw UsageError("cross-validation needs k >= 2");
    if (data.n < cfg.k) throw UsageError("fewer rows than folds");
    const int n_risks = cfg.n_risks > 0 ? cfg.n_risks : data.n_risks;
    if (n_risks < 1) throw UsageError("dataset carries no events; specify the risk count");

    CvResult result;
    if (cfg.horizons.empty()) {
        result.horizons = event_quantiles(data);
    } else {
        result.horizons.levels.clear();
        result.horizons.times = cfg.horizons;
    }
    result.report.horizons = result.horizons.times;
    result.report.init(n_risks, static_cast<int>(result.horizons.times.size()));

    const auto folds = split_folds(data, cfg.k, mix_seed(cfg.seed, 11));

    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(cfg.k));
    std::vector<MetricReport> fold_reports(static_cast<std::size_t>(cfg.k));

    auto run_fold = [&](int fold) {
        std::vector<int> train_rows;
        std::vector<int> test_rows;
        for (int i = 0; i < data.n; ++i)
            (folds[static_cast<std::size_t>(i)] == fold ? test_rows : train_rows).push_back(i);

        const auto train_data = data.subset(train_rows);
        const auto test_data = data.subset(test_rows);

        TrainConfig tcfg;
        tcfg.max_epochs = cfg.max_epochs;
        tcfg.patience = cfg.patience;
        tcfg.seed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(fold));
        tcfg.variant = cfg.variant;
        tcfg.n_risks = n_risks;

        FoldOutcome outcome;
        outcome.fold = fold;
        outcome.hp = cfg.fixed_hp;
        if (cfg.n_trials > 0) {
            Rng search_rng(mix_seed(cfg.seed, 500 + static_cast<std::uint64_t>(fold)));
            const auto search = random_search(train_data, cfg.n_trials, tcfg, cfg.grid, search_rng);
            outcome.hp = search.best;
        }

        auto trained = train(train_data, outcome.hp, tcfg);
        outcome.val_nll = trained.best_val_nll;

        auto report = evaluate_model(trained.model, test_data, result.horizons.times,
                                     cfg.cumulative_grid_points);
        for (auto& w : report.warnings) w = "fold " + std::to_string(fold) + ": " + w;
        fold_reports[static_cast<std::size_t>(fold)] = std::move(report);
        outcome.warnings = fold_reports[static_cast<std::size_t>(fold)].warnings;
        outcome.model = std::move(trained.model);
        outcomes[static_cast<std::size_t>(fold)] = std::move(outcome);
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (int fold = 0; fold < cfg.k; ++fold) run_fold(fold);
    } else {
        std::vector<std::thread> workers;
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int w = 0; w < std::min(jobs, cfg.k); ++w)
            workers.emplace_back([&]() {
                for (;;) {
                    const int fold = next.fetch_add(1);
                    if (fold >= cfg.k) return;
                    try {
                        run_fold(fold);
                    } catch (...) {
                        const std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& t : workers) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (int fold = 0; fold < cfg.k; ++fold)
        merge_fold_metrics(result.report, fold_reports[static_cast<std::size_t>(fold)]);
    result.report.finalize();
    result.folds = std::move(outcomes);
    return result;
}

}  // namespace nfg
