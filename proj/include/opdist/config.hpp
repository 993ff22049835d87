#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "opdist/dataset_ops.hpp"
#include "opdist/metrics.hpp"
#include "opdist/model_client.hpp"
#include "opdist/prompting.hpp"

namespace opdist {

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir = "opdist-out";

  MetricConfig metric;
  PromptStyle style = PromptStyle::QA;
  FewShotConfig fewshot;

  std::int64_t bootstrap_replicates = 1000;
  std::uint64_t bootstrap_seed = 0;
  unsigned bootstrap_threads = 0;

  Endpoint model;
  Endpoint embedding;
  std::filesystem::path cache_dir;  // empty = <output_dir>/cache
  std::size_t max_in_flight = 8;

  // Selection; empty lists select everything.
  std::vector<std::string> groups;  // "trait: group" labels
  std::vector<std::string> waves;
  std::vector<std::string> question_ids;

  std::string eval_method = "zero-shot";
  std::string eval_predictor = "model";  // model | fewshot | uniform | human
  unsigned eval_workers = 1;
  std::filesystem::path fewshot_pool;  // dataset supplying few-shot examples; empty = the evaluated dataset
  int fewshot_max_tokens = 64;

  std::string disagree_trait;
  std::vector<std::string> disagree_groups;  // axis order
  std::string disagree_source = "human";     // human | model

  std::string export_mode = "explicit";
  std::string export_file = "train.jsonl";
  double train_fraction = 1.0;
  std::uint64_t split_seed = 0;

  std::filesystem::path overlap_dataset;
  double overlap_threshold = kDuplicateThreshold;

  std::vector<std::pair<double, double>> scaling_points;
  std::vector<double> scaling_predict_at;

  std::filesystem::path effective_cache_dir() const { return cache_dir.empty() ? output_dir / "cache" : cache_dir; }
};

// Overlays the keys present in a TOML document onto `cfg`. Unknown keys and type mismatches
// raise ConfigError with the dotted key path.
void apply_toml(RunConfig& cfg, std::string_view toml_text);
void apply_toml_file(RunConfig& cfg, const std::filesystem::path& path);

// Checks what `command` needs (paths exist, endpoints set, ranges). Throws ConfigError.
void validate(const RunConfig& cfg, std::string_view command);

// Full resolved configuration; feeding to_toml() back through apply_toml reproduces `cfg`.
nlohmann::json to_json(const RunConfig& cfg);
std::string to_toml(const RunConfig& cfg);

}  // namespace opdist
