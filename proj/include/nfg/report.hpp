#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "nfg/metrics.hpp"
#include "nfg/reclassification.hpp"
#include "nfg/trainer.hpp"
#include "nfg/verification.hpp"

namespace nfg {

using Json = nlohmann::json;

// FNV-1a over bytes; used for the reproducibility envelope and run ids.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t value);

// Every persisted result embeds the tool version, the resolved configuration,
// the seed, and content hashes of the input files.
Json reproducibility_envelope(const Json& resolved_config, std::uint64_t seed,
                              const std::vector<std::string>& input_files);

Json to_json(const MetricCell& cell);
Json to_json(const MetricReport& report);
Json to_json(const EvalHorizons& horizons);
Json to_json(const BenchReport& report);
Json to_json(const ReclassificationResult& result);
Json to_json(const SubgroupBrierDiff& diff);
Json to_json(const HyperParams& hp);
Json to_json(const std::vector<EpochRecord>& log);

// Aligned text table with one row per (risk, metric) and "mean (sd)" cells.
std::string render_metric_table(const MetricReport& report);
std::string render_bench_table(const BenchReport& report);
std::string render_reclassification(const ReclassificationResult& result);
std::string render_subgroup_diff(const SubgroupBrierDiff& diff);

void write_text_file(const std::string& path, const std::string& content);
void write_json_file(const std::string& path, const Json& payload);

}  // namespace nfg
