#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "opdist/embedding.hpp"
#include "opdist/metrics.hpp"
#include "opdist/survey.hpp"

namespace opdist {

struct ExportMode {
  enum class Kind { Explicit, OneHot, Augment };
  Kind kind = Kind::Explicit;
  std::int64_t n = 1;  // replication factor, Augment only

  static ExportMode explicit_distribution() { return {Kind::Explicit, 1}; }
  static ExportMode one_hot() { return {Kind::OneHot, 1}; }
  static ExportMode augment(std::int64_t n);

  // "explicit", "one_hot", "augment:50"
  static ExportMode parse(std::string_view text);
  std::string to_string() const;
};

struct TrainingExample {
  std::string prompt;
  std::variant<Distribution, std::string> target;  // full distribution or one option letter
  GroupKey group;
  std::string question_id;
  std::string manifest_ref;
};

// {"prompt", "group", "question_id", "target"}; target is a letter-keyed map or a letter.
nlohmann::json to_json(const TrainingExample& example, const Question& question);

struct ExportManifest {
  std::string mode;
  std::string style;
  std::size_t pairs = 0;  // (group, question) pairs written
  std::size_t lines = 0;
  std::vector<std::pair<GroupKey, std::string>> skipped;  // pairs without human data
  std::string sha256;                                      // of the JSONL file
  nlohmann::json hyperparameters;

  nlohmann::json to_json() const;
};

// LoRA settings recorded in export manifests (metadata only; no training happens here).
nlohmann::json default_training_hyperparameters();

// Builds the examples for every (group, question) pair, group-major in the given orders.
// Pairs without human data are appended to `skipped` (when non-null) and produce no example.
std::vector<TrainingExample> make_training_examples(const SurveyDataset& dataset, std::span<const GroupKey> groups,
                                                    std::span<const Question> questions, PromptStyle style,
                                                    const ExportMode& mode,
                                                    std::vector<std::pair<GroupKey, std::string>>* skipped = nullptr,
                                                    const std::string& manifest_ref = {});

// Streams the examples to `out_path` as JSONL and writes `<out_path>.manifest.json`.
// An empty `questions` span means every question of the dataset.
ExportManifest export_training(const SurveyDataset& dataset, std::span<const GroupKey> groups, PromptStyle style,
                               const ExportMode& mode, const std::filesystem::path& out_path,
                               std::span<const Question> questions = {});

enum class Objective { KL, WD };

// Mean per-pair kl_forward or wasserstein. Lists must be aligned with `questions`.
double batch_loss(std::span<const Distribution> targets, std::span<const Distribution> predictions, Objective objective,
                  std::span<const Question> questions, const MetricConfig& cfg = {});

struct OverlapPair {
  std::string id_a;
  std::string id_b;
  double similarity = 0.0;
};

inline constexpr double kDuplicateThreshold = 0.87;

// Cross pairs with cosine >= threshold, most similar first (ties by id_a, then id_b).
// Throws ValidationError naming any question without an embedding.
std::vector<OverlapPair> detect_overlap(std::span<const Question> questions_a, std::span<const Question> questions_b,
                                        const EmbeddingMap& embeddings, double threshold = kDuplicateThreshold);

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> heldout;
};

// Question-level split stratified by wave. floor(fraction * N) questions go to train; the
// per-wave quotas follow largest remainders (ties to the later-sorted wave), and each wave's
// questions are drawn by a seeded shuffle. Both lists come back sorted.
SplitResult split(std::span<const Question> questions, double train_fraction, std::uint64_t seed);
SplitResult split(const SurveyDataset& dataset, double train_fraction, std::uint64_t seed);

}  // namespace opdist
