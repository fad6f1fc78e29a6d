// Command-line front end: generate / train / evaluate / cv / reclassify / benchmark.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nfg/checkpoint.hpp"
#include "nfg/report.hpp"
#include "nfg/version.hpp"

namespace fs = std::filesystem;
using namespace nfg;

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    int jobs = 1;
    std::string data_path;
    std::string time_col = "time";
    std::string event_col = "event";
    std::string variant = "nfg";
    int risks = 0;
};

Variant parse_variant(const std::string& name) {
    if (name == "nfg") return Variant::Nfg;
    if (name == "monofg") return Variant::MonoFg;
    if (name == "cause-specific") return Variant::CauseSpecific;
    throw UsageError("unknown variant '" + name + "' (expected nfg, monofg, cause-specific)");
}

// --config supplies defaults; explicitly passed flags win.
void apply_config_file(CLI::App& app, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    Json config = Json::parse(in, nullptr, true, true);
    for (const auto& [key, value] : config.items()) {
        CLI::Option* opt = app.get_option_no_throw("--" + key);
        if (opt == nullptr || opt->count() > 0) continue;
        if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ',';
                joined += v.dump();
            }
            opt->add_result(joined);
        } else if (value.is_string()) {
            opt->add_result(value.get<std::string>());
        } else {
            opt->add_result(value.dump());
        }
    }
}

std::string default_out_dir(const Json& resolved_config) {
    const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    const std::string dump = resolved_config.dump();
    return "runs/" + std::to_string(stamp) + "-" +
           hex64(fnv1a(dump.data(), dump.size())).substr(0, 8);
}

fs::path prepare_out_dir(std::string& out_dir, const Json& resolved_config) {
    if (out_dir.empty()) out_dir = default_out_dir(resolved_config);
    fs::create_directories(out_dir);
    return {out_dir};
}

SurvivalDataset load_dataset(const CommonArgs& args) {
    if (args.data_path.empty()) throw UsageError("--data is required");
    CsvSchema schema;
    schema.time_column = args.time_col;
    schema.event_column = args.event_col;
    auto data = load_csv(args.data_path, schema);
    if (args.risks > 0) {
        if (args.risks < data.n_risks)
            throw UsageError("--risks " + std::to_string(args.risks) +
                             " is below the largest event label " + std::to_string(data.n_risks));
        data.n_risks = args.risks;
    }
    return data;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

int feature_index(const SurvivalDataset& data, const std::string& name) {
    for (std::size_t i = 0; i < data.feature_names.size(); ++i)
        if (data.feature_names[i] == name) return static_cast<int>(i);
    throw UsageError("feature column '" + name + "' not found");
}

std::string text_header(const Json& envelope) {
    std::string out;
    out += "# nfg " + std::string(kToolVersion) + "\n";
    out += "# seed " + envelope["seed"].dump() + "\n";
    out += "# config " + envelope["config"].dump() + "\n";
    out += "# inputs " + envelope["input_hashes"].dump() + "\n";
    return out;
}

// --- subcommand payloads -----------------------------------------------------

int cmd_generate(CommonArgs& common, int n, double censoring, bool correlated) {
    SyntheticSpec spec = correlated ? SyntheticSpec::correlated() : SyntheticSpec::defaults();
    spec.n = n;
    spec.censoring_target = censoring;
    spec.seed = common.seed;

    Json config{{"command", "generate"}, {"n", n},       {"censoring", censoring},
                {"correlated", correlated}, {"seed", common.seed}};
    const auto out = prepare_out_dir(common.out_dir, config);

    const auto data = generate_synthetic(spec);
    save_csv(data, (out / "cohort.csv").string());

    Json manifest = reproducibility_envelope(config, common.seed, {(out / "cohort.csv").string()});
    manifest["rows"] = data.n;
    manifest["features"] = data.p;
    manifest["risks"] = data.n_risks;
    write_json_file((out / "manifest.json").string(), manifest);
    std::cout << "wrote " << (out / "cohort.csv").string() << " (" << data.n << " rows)\n";
    return 0;
}

int cmd_train(CommonArgs& common, const HyperParams& hp, int epochs, int patience) {
    Json config{{"command", "train"},   {"data", common.data_path}, {"variant", common.variant},
                {"risks", common.risks}, {"epochs", epochs},        {"patience", patience},
                {"seed", common.seed},  {"hyperparams", to_json(hp)}};
    const auto out = prepare_out_dir(common.out_dir, config);

    const auto data = load_dataset(common);
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.patience = patience;
    cfg.seed = common.seed;
    cfg.variant = parse_variant(common.variant);
    cfg.n_risks = common.risks;

    const auto result = train(data, hp, cfg);
    checkpoint_save(result.model, (out / "checkpoint.nfg").string());

    // line-delimited training log: one record per epoch
    std::ofstream log((out / "train_log.jsonl").string());
    for (const auto& rec : result.log) {
        Json j{{"epoch", rec.epoch},
               {"train_nll", rec.train_nll},
               {"val_nll", rec.val_nll},
               {"floored_terms", rec.floored_terms}};
        log << j.dump() << '\n';
    }

    Json manifest = reproducibility_envelope(config, common.seed, {common.data_path});
    manifest["best_epoch"] = result.best_epoch;
    manifest["best_val_nll"] = result.best_val_nll;
    manifest["parameters"] = result.model.param_count();
    write_json_file((out / "manifest.json").string(), manifest);
    std::cout << "best epoch " << result.best_epoch << ", validation NLL " << result.best_val_nll
              << "\n";
    return 0;
}

int cmd_evaluate(CommonArgs& common, const std::string& model_path, const std::string& horizons_csv) {
    Json config{{"command", "evaluate"},
                {"data", common.data_path},
                {"model", model_path},
                {"horizons", horizons_csv},
                {"seed", common.seed}};
    const auto out = prepare_out_dir(common.out_dir, config);

    const auto data = load_dataset(common);
    const auto model = checkpoint_load(model_path);
    std::vector<double> horizons = horizons_csv.empty() ? event_quantiles(data).times
                                                        : parse_double_list(horizons_csv);

    const auto report = evaluate_model(model, data, horizons);
    const auto envelope =
        reproducibility_envelope(config, common.seed, {common.data_path, model_path});

    Json payload{{"envelope", envelope}, {"metrics", to_json(report)}};
    write_json_file((out / "metrics.json").string(), payload);
    write_text_file((out / "metrics.txt").string(),
                    text_header(envelope) + "\n" + render_metric_table(report));
    std::cout << render_metric_table(report);
    return 0;
}

int cmd_cv(CommonArgs& common, const HyperParams& hp, int folds, int trials, int epochs,
           int patience, const std::string& horizons_csv, bool large_grid) {
    Json config{{"command", "cv"},       {"data", common.data_path}, {"variant", common.variant},
                {"risks", common.risks}, {"folds", folds},           {"trials", trials},
                {"epochs", epochs},      {"patience", patience},     {"seed", common.seed},
                {"jobs", common.jobs},   {"horizons", horizons_csv}, {"hyperparams", to_json(hp)},
                {"large_grid", large_grid}};
    const auto out = prepare_out_dir(common.out_dir, config);

    const auto data = load_dataset(common);
    CvConfig cfg;
    cfg.k = folds;
    cfg.seed = common.seed;
    cfg.variant = parse_variant(common.variant);
    cfg.n_risks = common.risks;
    cfg.n_trials = trials;
    cfg.fixed_hp = hp;
    cfg.grid = large_grid ? HyperGrid::large_data() : HyperGrid::standard();
    cfg.max_epochs = epochs;
    cfg.patience = patience;
    cfg.jobs = common.jobs;
    if (!horizons_csv.empty()) cfg.horizons = parse_double_list(horizons_csv);

    const auto result = cross_validate(data, cfg);
    const auto envelope = reproducibility_envelope(config, common.seed, {common.data_path});

    Json folds_json = Json::array();
    for (const auto& f : result.folds) {
        folds_json.push_back(Json{{"fold", f.fold},
                                  {"hyperparams", to_json(f.hp)},
                                  {"val_nll", f.val_nll},
                                  {"warnings", f.warnings}});
    }
    Json payload{{"envelope", envelope},
                 {"horizons", to_json(result.horizons)},
                 {"metrics", to_json(result.report)},
                 {"folds", folds_json}};
    write_json_file((out / "cv_report.json").string(), payload);
    write_text_file((out / "cv_table.txt").string(),
                    text_header(envelope) + "\n" + render_metric_table(result.report));
    std::cout << render_metric_table(result.report);
    return 0;
}

int cmd_reclassify(CommonArgs& common, const std::string& model_a_path,
                   const std::string& model_b_path, double horizon, int risk, double bin_lower,
                   double bin_upper, const std::string& filter_col, double filter_min,
                   const std::string& group_col, const std::string& group_edges_csv,
                   const std::string& horizons_csv) {
    Json config{{"command", "reclassify"}, {"data", common.data_path},
                {"model_a", model_a_path}, {"model_b", model_b_path},
                {"horizon", horizon},      {"risk", risk},
                {"bin_lower", bin_lower},  {"bin_upper", bin_upper},
                {"filter_col", filter_col}, {"filter_min", filter_min},
                {"group_col", group_col},  {"group_edges", group_edges_csv},
                {"seed", common.seed}};
    const auto out = prepare_out_dir(common.out_dir, config);

    const auto data = load_dataset(common);
    const auto model_a = checkpoint_load(model_a_path);
    const auto model_b = checkpoint_load(model_b_path);

    RiskBins bins{bin_lower, bin_upper};
    std::optional<CohortFilter> filter;
    if (!filter_col.empty())
        filter = CohortFilter{feature_index(data, filter_col), filter_min,
                              filter_col + " >= " + std::to_string(filter_min)};

    const auto result = reclassification_matrix(model_a, model_b, data, horizon, risk, bins, filter);
    const auto envelope = reproducibility_envelope(
        config, common.seed, {common.data_path, model_a_path, model_b_path});

    Json payload{{"envelope", envelope}, {"reclassification", to_json(result)}};
    std::string text = text_header(envelope) + "\n" + render_reclassification(result);

    if (!group_col.empty()) {
        const auto edges = parse_double_list(group_edges_csv);
        std::vector<double> horizons = horizons_csv.empty() ? std::vector<double>{horizon}
                                                            : parse_double_list(horizons_csv);
        const FoldModels fold{&model_a, &model_b, &data};
        const auto diff = subgroup_brier_diff({&fold, 1}, feature_index(data, group_col), edges,
                                              horizons, risk);
        payload["subgroup_brier_diff"] = to_json(diff);
        text += "\nSubgroup calibration difference (" + group_col + "):\n";
        text += render_subgroup_diff(diff);
    }

    write_json_file((out / "reclassification.json").string(), payload);
    write_text_file((out / "reclassification.txt").string(), text);
    std::cout << render_reclassification(result);
    return 0;
}

int cmd_benchmark(CommonArgs& common, const std::string& model_path, const std::string& degrees_csv,
                  int batch_rows, int layers, int nodes) {
    Json config{{"command", "benchmark"}, {"data", common.data_path},
                {"model", model_path},    {"degrees", degrees_csv},
                {"batch_rows", batch_rows}, {"layers", layers},
                {"nodes", nodes},         {"seed", common.seed}};
    const auto out = prepare_out_dir(common.out_dir, config);

    SurvivalDataset data;
    std::vector<std::string> inputs;
    if (!common.data_path.empty()) {
        data = load_dataset(common);
        inputs.push_back(common.data_path);
    } else {
        SyntheticSpec spec = SyntheticSpec::defaults();
        spec.n = std::max(batch_rows, 1);
        spec.seed = common.seed;
        data = generate_synthetic(spec);
    }

    NfgModel model;
    if (!model_path.empty()) {
        model = checkpoint_load(model_path);
        inputs.push_back(model_path);
    } else {
        NfgConfig arch;
        arch.n_features = data.p;
        arch.n_risks = std::max(1, data.n_risks);
        arch.variant = parse_variant(common.variant);
        arch.layers = layers;
        arch.nodes = nodes;
        Rng rng(mix_seed(common.seed, 77));
        model = init_model(arch, rng);
        std::vector<int> all_rows(static_cast<std::size_t>(data.n));
        std::iota(all_rows.begin(), all_rows.end(), 0);
        fit_normalization(model, data, all_rows);
    }

    std::vector<int> rows;
    for (int i = 0; i < std::min(batch_rows, data.n); ++i) rows.push_back(i);
    const auto degrees = parse_int_list(degrees_csv);
    const auto report = likelihood_cost_benchmark(model, data, rows, degrees);
    const auto envelope = reproducibility_envelope(config, common.seed, inputs);

    Json payload{{"envelope", envelope}, {"benchmark", to_json(report)}};
    write_json_file((out / "benchmark.json").string(), payload);
    write_text_file((out / "benchmark.txt").string(),
                    text_header(envelope) + "\n" + render_bench_table(report));
    std::cout << render_bench_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural Fine-Gray competing-risks survival engine"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    CommonArgs common;
    std::string active_command = "?";

    auto add_common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", common.config_path, "JSON config file; flags win");
        sub->add_option("--seed", common.seed, "RNG seed recorded in every output");
        sub->add_option("--out", common.out_dir, "output directory (default: runs/<stamp>-<hash>)");
        sub->add_option("--jobs", common.jobs, "parallel fold workers (cv only)");
        if (needs_data) {
            sub->add_option("--data", common.data_path, "dataset CSV");
            sub->add_option("--time-col", common.time_col, "time column name");
            sub->add_option("--event-col", common.event_col, "event column name");
        }
        sub->add_option("--variant", common.variant, "nfg | monofg | cause-specific");
        sub->add_option("--risks", common.risks, "declared risk count (default: max event label)");
    };

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic competing-risks cohort");
    int gen_n = 30000;
    double gen_censoring = 0.5;
    bool gen_correlated = false;
    gen->add_option("--n", gen_n, "cohort size");
    gen->add_option("--censoring", gen_censoring, "target censored fraction");
    gen->add_flag("--correlated", gen_correlated, "risks share covariate support");
    add_common(gen, false);

    // train
    auto* tr = app.add_subcommand("train", "fit one model and write a checkpoint");
    HyperParams hp;
    int epochs = 1000;
    int patience = 50;
    tr->add_option("--lr", hp.learning_rate, "learning rate");
    tr->add_option("--batch", hp.batch_size, "minibatch size");
    tr->add_option("--dropout", hp.dropout, "embedding dropout rate");
    tr->add_option("--layers", hp.layers, "hidden layers per sub-network");
    tr->add_option("--nodes", hp.nodes, "hidden width");
    tr->add_option("--epochs", epochs, "maximum epochs");
    tr->add_option("--patience", patience, "early-stopping patience");
    add_common(tr, true);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics of a checkpoint on a cohort");
    std::string model_path;
    std::string horizons_csv;
    ev->add_option("--model", model_path, "checkpoint path")->required();
    ev->add_option("--horizons", horizons_csv, "comma-separated horizons (default: q25,q50,q75)");
    add_common(ev, true);

    // cv
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation with optional random search");
    int folds = 5;
    int trials = 0;
    bool large_grid = false;
    cv->add_option("--folds", folds, "fold count");
    cv->add_option("--trials", trials, "random-search trials per fold (0: fixed hyperparams)");
    cv->add_flag("--large-grid", large_grid, "use the large-data batch sizes (1000, 5000)");
    cv->add_option("--lr", hp.learning_rate, "fixed learning rate");
    cv->add_option("--batch", hp.batch_size, "fixed minibatch size");
    cv->add_option("--dropout", hp.dropout, "fixed dropout rate");
    cv->add_option("--layers", hp.layers, "fixed hidden layers");
    cv->add_option("--nodes", hp.nodes, "fixed hidden width");
    cv->add_option("--epochs", epochs, "maximum epochs");
    cv->add_option("--patience", patience, "early-stopping patience");
    cv->add_option("--horizons", horizons_csv, "comma-separated horizons (default: q25,q50,q75)");
    add_common(cv, true);

    // reclassify
    auto* rc = app.add_subcommand("reclassify", "risk-bin reclassification between two checkpoints");
    std::string model_a_path;
    std::string model_b_path;
    double rc_horizon = 10.0;
    int rc_risk = 1;
    double bin_lower = 0.10;
    double bin_upper = 0.20;
    std::string filter_col;
    double filter_min = 0.0;
    std::string group_col;
    std::string group_edges;
    rc->add_option("--model-a", model_a_path, "first checkpoint (rows)")->required();
    rc->add_option("--model-b", model_b_path, "second checkpoint (columns)")->required();
    rc->add_option("--horizon", rc_horizon, "classification horizon");
    rc->add_option("--risk", rc_risk, "focal risk");
    rc->add_option("--bin-lower", bin_lower, "low/intermediate threshold");
    rc->add_option("--bin-upper", bin_upper, "intermediate/high threshold");
    rc->add_option("--filter-col", filter_col, "keep rows with column >= --filter-min");
    rc->add_option("--filter-min", filter_min, "cohort filter threshold");
    rc->add_option("--group-col", group_col, "subgroup column for Brier differences");
    rc->add_option("--group-edges", group_edges, "comma-separated subgroup edges");
    rc->add_option("--horizons", horizons_csv, "horizons for the subgroup differences");
    add_common(rc, true);

    // benchmark
    auto* bm = app.add_subcommand("benchmark", "exact vs quadrature likelihood cost");
    std::string degrees_csv = "1,15,100";
    int batch_rows = 256;
    int bm_layers = 3;
    int bm_nodes = 50;
    bm->add_option("--model", model_path, "checkpoint (default: fresh random model)");
    bm->add_option("--degrees", degrees_csv, "quadrature degrees to compare");
    bm->add_option("--batch-rows", batch_rows, "batch size for the likelihood");
    bm->add_option("--layers", bm_layers, "architecture when no checkpoint is given");
    bm->add_option("--nodes", bm_nodes, "architecture when no checkpoint is given");
    add_common(bm, false);
    bm->add_option("--data", common.data_path, "dataset CSV (default: small synthetic batch)");
    bm->add_option("--time-col", common.time_col, "time column name");
    bm->add_option("--event-col", common.event_col, "event column name");

    try {
        app.parse(argc, argv);
        CLI::App* sub = app.get_subcommands().at(0);
        active_command = sub->get_name();
        if (!common.config_path.empty()) {
            apply_config_file(*sub, common.config_path);
        }

        if (sub == gen) return cmd_generate(common, gen_n, gen_censoring, gen_correlated);
        if (sub == tr) return cmd_train(common, hp, epochs, patience);
        if (sub == ev) return cmd_evaluate(common, model_path, horizons_csv);
        if (sub == cv)
            return cmd_cv(common, hp, folds, trials, epochs, patience, horizons_csv, large_grid);
        if (sub == rc)
            return cmd_reclassify(common, model_a_path, model_b_path, rc_horizon, rc_risk,
                                  bin_lower, bin_upper, filter_col, filter_min, group_col,
                                  group_edges, horizons_csv);
        if (sub == bm)
            return cmd_benchmark(common, model_path, degrees_csv, batch_rows, bm_layers, bm_nodes);
        throw UsageError("no subcommand selected");
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        Json err{{"error", e.what()}, {"command", active_command}};
        std::cerr << err.dump() << '\n';
        return 1;
    }
}
