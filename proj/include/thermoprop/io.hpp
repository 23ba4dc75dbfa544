#pragma once

// Serialization and table emission: spec JSON config, deterministic config
// hashing, sweep-record CSV/JSON, minimal SVG plots.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "thermoprop/substrate.hpp"

namespace thermoprop {

using Json = nlohmann::json;

// {partition, base:{a,b0,kappa}, couplings:[{m,mp,k,seed}|{m,mp,u,v}],
//  lambda_floor, train_v, trainable_bias}
Json spec_to_json(const SubstrateSpec& spec);
SubstrateSpec spec_from_json(const Json& j);

// FNV-1a over the canonical (sorted-key) serialization; stable across runs.
std::string config_hash(const Json& j);

// Rejects unknown keys; `allowed` lists every legal key at this level.
void require_keys(const Json& j, const std::vector<std::string>& allowed,
                  const std::string& context);

struct SweepRecord {
  std::string experiment_id;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string metric_name;
  double metric_value = 0.0;
  std::string config_hash;
};

void write_records_csv(const std::vector<SweepRecord>& records,
                       const std::string& path);
Json records_to_json(const std::vector<SweepRecord>& records);
void write_text_file(const std::string& path, const std::string& content);

// Minimal scatter/line plot, optionally log-log, one polyline per series.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const std::string& title, bool log_x, bool log_y);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace thermoprop
