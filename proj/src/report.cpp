#include "nfg/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nfg/version.hpp"

namespace nfg {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0)
        h = fnv1a(buffer, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::string hex64(std::uint64_t value) {
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(value));
    return out;
}

Json reproducibility_envelope(const Json& resolved_config, std::uint64_t seed,
                              const std::vector<std::string>& input_files) {
    Json env;
    env["tool_version"] = kToolVersion;
    env["config"] = resolved_config;
    env["seed"] = seed;
    Json hashes = Json::object();
    for (const auto& f : input_files) hashes[f] = hex64(hash_file(f));
    env["input_hashes"] = hashes;
    return env;
}

Json to_json(const MetricCell& cell) {
    Json j;
    Json folds = Json::array();
    for (const auto& v : cell.per_fold) {
        if (v)
            folds.push_back(*v);
        else
            folds.push_back(nullptr);
    }
    j["per_fold"] = folds;
    j["mean"] = cell.mean ? Json(*cell.mean) : Json(nullptr);
    j["sd"] = cell.sd ? Json(*cell.sd) : Json(nullptr);
    j["available_folds"] = cell.available;
    return j;
}

Json to_json(const MetricReport& report) {
    Json j;
    j["horizons"] = report.horizons;
    j["ipcw_convention"] = report.ipcw_convention;
    j["warnings"] = report.warnings;
    Json risks = Json::array();
    for (std::size_t r = 0; r < report.risks.size(); ++r) {
        const auto& rr = report.risks[r];
        Json jr;
        jr["risk"] = r + 1;
        Json per_horizon = Json::array();
        for (std::size_t h = 0; h < report.horizons.size(); ++h) {
            Json jh;
            jh["horizon"] = report.horizons[h];
            jh["c_index"] = to_json(rr.c_index[h]);
            jh["brier"] = to_json(rr.brier[h]);
            jh["auc"] = to_json(rr.auc[h]);
            per_horizon.push_back(jh);
        }
        jr["per_horizon"] = per_horizon;
        jr["integrated_brier"] = to_json(rr.integrated_brier);
        jr["ctd_index"] = to_json(rr.ctd_index);
        risks.push_back(jr);
    }
    j["risks"] = risks;
    return j;
}

Json to_json(const EvalHorizons& horizons) {
    Json j;
    j["levels"] = horizons.levels;
    j["times"] = horizons.times;
    return j;
}

Json to_json(const BenchReport& report) {
    Json j = Json::array();
    for (const auto& e : report.entries) {
        Json je;
        je["method"] = e.method;
        je["degree"] = e.degree;
        je["model_evaluations"] = e.model_evaluations;
        je["repetitions"] = e.repetitions;
        je["seconds_per_likelihood"] = e.seconds_per_likelihood;
        if (e.degree != 0) je["ratio_vs_exact"] = report.ratio_vs_exact(e.degree);
        j.push_back(je);
    }
    return j;
}

namespace {

Json matrix_json(const RiskMatrix& m) {
    Json j;
    j["stratum"] = m.stratum;
    j["total"] = m.total;
    Json rows = Json::array();
    for (const auto& row : m.counts) {
        Json r = Json::array();
        for (long c : row) r.push_back(c);
        rows.push_back(r);
    }
    j["counts"] = rows;
    return j;
}

}  // namespace

Json to_json(const ReclassificationResult& result) {
    Json j;
    j["horizon"] = result.horizon;
    j["risk"] = result.risk;
    j["bins"] = {{"lower", result.bins.lower}, {"upper", result.bins.upper}};
    j["boundary_note"] = result.boundary_note;
    j["excluded_censored_before_horizon"] = result.excluded_censored;
    j["excluded_by_filter"] = result.excluded_filter;
    j["event_free"] = matrix_json(result.event_free);
    j["event"] = matrix_json(result.event);
    return j;
}

Json to_json(const SubgroupBrierDiff& diff) {
    Json j;
    j["horizons"] = diff.horizons;
    Json groups = Json::array();
    for (std::size_t g = 0; g < diff.group_labels.size(); ++g) {
        Json jg;
        jg["group"] = diff.group_labels[g];
        Json cells = Json::array();
        for (const auto& cell : diff.diffs[g]) cells.push_back(to_json(cell));
        jg["brier_diff"] = cells;
        groups.push_back(jg);
    }
    j["groups"] = groups;
    return j;
}

Json to_json(const HyperParams& hp) {
    Json j;
    j["learning_rate"] = hp.learning_rate;
    j["batch_size"] = hp.batch_size;
    j["dropout"] = hp.dropout;
    j["layers"] = hp.layers;
    j["nodes"] = hp.nodes;
    return j;
}

Json to_json(const std::vector<EpochRecord>& log) {
    Json j = Json::array();
    for (const auto& r : log) {
        Json jr;
        jr["epoch"] = r.epoch;
        jr["train_nll"] = r.train_nll;
        jr["val_nll"] = r.val_nll;
        jr["floored_terms"] = r.floored_terms;
        j.push_back(jr);
    }
    return j;
}

namespace {

std::string fmt_cell(const MetricCell& cell) {
    if (!cell.mean) return "unavailable";
    char out[64];
    std::snprintf(out, sizeof(out), "%.3f (%.3f)", *cell.mean, cell.sd ? *cell.sd : 0.0);
    return out;
}

std::string fmt_num(double v, int precision = 3) {
    char out[64];
    std::snprintf(out, sizeof(out), "%.*f", precision, v);
    return out;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << row[c];
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace

std::string render_metric_table(const MetricReport& report) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Risk", "Metric"};
    for (double h : report.horizons) header.push_back("q@" + fmt_num(h));
    header.push_back("Cumulative");
    rows.push_back(header);

    for (std::size_t r = 0; r < report.risks.size(); ++r) {
        const auto& rr = report.risks[r];
        std::vector<std::string> crow{std::to_string(r + 1), "C-Index"};
        std::vector<std::string> brow{std::to_string(r + 1), "Brier"};
        std::vector<std::string> arow{std::to_string(r + 1), "AUC"};
        for (std::size_t h = 0; h < report.horizons.size(); ++h) {
            crow.push_back(fmt_cell(rr.c_index[h]));
            brow.push_back(fmt_cell(rr.brier[h]));
            arow.push_back(fmt_cell(rr.auc[h]));
        }
        crow.push_back(fmt_cell(rr.ctd_index));
        brow.push_back(fmt_cell(rr.integrated_brier));
        arow.push_back("-");
        rows.push_back(crow);
        rows.push_back(brow);
        rows.push_back(arow);
    }

    std::string out = render_table(rows);
    out += "C-Index/AUC: larger is better. Brier: smaller is better.\n";
    out += "Cells are mean (sd) over folds; Cumulative holds the overall td-C-index\n";
    out += "and the integrated Brier score.\n";
    if (!report.warnings.empty()) {
        out += "warnings:\n";
        for (const auto& w : report.warnings) out += "  " + w + "\n";
    }
    return out;
}

std::string render_bench_table(const BenchReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Method", "Model evals", "Repetitions", "Time per likelihood (s)", "Ratio vs exact"});
    for (const auto& e : report.entries) {
        std::vector<std::string> row{e.method, std::to_string(e.model_evaluations),
                                     std::to_string(e.repetitions)};
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6e", e.seconds_per_likelihood);
        row.emplace_back(buf);
        row.push_back(e.degree == 0 ? "1.00" : fmt_num(report.ratio_vs_exact(e.degree), 2));
        rows.push_back(row);
    }
    return render_table(rows);
}

std::string render_reclassification(const ReclassificationResult& result) {
    auto matrix_rows = [](const RiskMatrix& m) {
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"", "B: low", "B: intermediate", "B: high", "Total"});
        const char* labels[3] = {"A: low", "A: intermediate", "A: high"};
        std::array<long, 3> col_totals{};
        for (int r = 0; r < 3; ++r) {
            long row_total = 0;
            std::vector<std::string> row{labels[r]};
            for (int c = 0; c < 3; ++c) {
                row.push_back(std::to_string(m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
                row_total += m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                col_totals[static_cast<std::size_t>(c)] += m.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
            row.push_back(std::to_string(row_total));
            rows.push_back(row);
        }
        std::vector<std::string> totals{"Total"};
        for (long c : col_totals) totals.push_back(std::to_string(c));
        totals.push_back(std::to_string(m.total));
        rows.push_back(totals);
        return rows;
    };

    std::ostringstream out;
    out << "Reclassification at horizon " << fmt_num(result.horizon) << ", risk " << result.risk
        << " (" << result.boundary_note << ")\n";
    out << "Excluded: " << result.excluded_censored << " censored before the horizon";
    if (result.excluded_filter > 0) out << ", " << result.excluded_filter << " by cohort filter";
    out << "\n\n";
    out << "Patients event-free of the focal risk by the horizon:\n";
    out << render_table(matrix_rows(result.event_free)) << '\n';
    out << "Patients with the focal event by the horizon:\n";
    out << render_table(matrix_rows(result.event));
    return out.str();
}

std::string render_subgroup_diff(const SubgroupBrierDiff& diff) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Group"};
    for (double h : diff.horizons) header.push_back("q@" + fmt_num(h));
    rows.push_back(header);
    for (std::size_t g = 0; g < diff.group_labels.size(); ++g) {
        std::vector<std::string> row{diff.group_labels[g]};
        for (const auto& cell : diff.diffs[g]) row.push_back(fmt_cell(cell));
        rows.push_back(row);
    }
    std::string out = render_table(rows);
    out += "Brier(model A) - Brier(model B); negative favors model A.\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << content;
    if (!out) throw UsageError("failed while writing '" + path + "'");
}

void write_json_file(const std::string& path, const Json& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << payload.dump(2) << '\n';
    if (!out) throw UsageError("failed while writing '" + path + "'");
}

}  // namespace nfg
