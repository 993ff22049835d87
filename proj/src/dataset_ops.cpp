#include "opdist/dataset_ops.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "opdist/digest.hpp"
#include "opdist/errors.hpp"
#include "opdist/prompting.hpp"
#include "opdist/rng.hpp"

namespace opdist {

using nlohmann::json;

ExportMode ExportMode::augment(std::int64_t n) {
  if (n < 1) throw ValidationError(fmt::format("augment factor must be >= 1, got {}", n));
  return {Kind::Augment, n};
}

ExportMode ExportMode::parse(std::string_view text) {
  if (text == "explicit") return explicit_distribution();
  if (text == "one_hot" || text == "one-hot") return one_hot();
  if (text.starts_with("augment:")) {
    const auto digits = text.substr(8);
    std::int64_t n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) return augment(n);
  }
  throw ValidationError(fmt::format("unknown export mode '{}' (expected explicit, one_hot or augment:N)", text));
}

std::string ExportMode::to_string() const {
  switch (kind) {
    case Kind::Explicit:
      return "explicit";
    case Kind::OneHot:
      return "one_hot";
    case Kind::Augment:
      return fmt::format("augment:{}", n);
  }
  return "?";
}

json to_json(const TrainingExample& example, const Question& question) {
  json target;
  if (const auto* dist = std::get_if<Distribution>(&example.target)) {
    target = json::object();
    for (std::size_t i = 0; i < question.options.size(); ++i) target[question.options[i].letter] = dist->probs[i];
  } else {
    target = std::get<std::string>(example.target);
  }
  return {{"prompt", example.prompt},
          {"group", example.group.label()},
          {"question_id", example.question_id},
          {"target", std::move(target)}};
}

json ExportManifest::to_json() const {
  json skipped_json = json::array();
  for (const auto& [g, q] : skipped) skipped_json.push_back({{"group", g.label()}, {"question_id", q}});
  return {{"mode", mode},         {"style", style},   {"pairs", pairs},
          {"lines", lines},       {"skipped", skipped_json}, {"sha256", sha256},
          {"hyperparameters", hyperparameters}};
}

json default_training_hyperparameters() {
  return {{"method", "LoRA"},
          {"lora_rank", 8},
          {"lora_alpha", 32},
          {"lora_dropout", 0.05},
          {"lora_init_std", 0.02},
          {"lora_target_modules", {"q_proj", "v_proj"}},
          {"optimizer", "AdamW"},
          {"weight_decay", 0.0},
          {"objective", "forward_kl"},
          {"learning_rate_grid", {5e-5, 1e-4, 2e-4}},
          {"batch_size_grid", {64, 128, 256}}};
}

std::vector<TrainingExample> make_training_examples(const SurveyDataset& dataset, std::span<const GroupKey> groups,
                                                    std::span<const Question> questions, PromptStyle style,
                                                    const ExportMode& mode,
                                                    std::vector<std::pair<GroupKey, std::string>>* skipped,
                                                    const std::string& manifest_ref) {
  std::vector<TrainingExample> out;
  for (const auto& g : groups) {
    const Subpopulation& sub = dataset.subpopulation(g);
    for (const auto& q : questions) {
      Distribution human;
      try {
        human = weighted_distribution(dataset, g, q);
      } catch (const NoDataError&) {
        if (skipped) skipped->emplace_back(g, q.id);
        continue;
      }
      const std::string prompt = build_prompt(sub, q, style);
      switch (mode.kind) {
        case ExportMode::Kind::Explicit:
          out.push_back({prompt, std::move(human), g, q.id, manifest_ref});
          break;
        case ExportMode::Kind::OneHot: {
          const auto hot = one_hot(human);
          const auto idx = static_cast<std::size_t>(std::max_element(hot.probs.begin(), hot.probs.end()) - hot.probs.begin());
          out.push_back({prompt, q.options[idx].letter, g, q.id, manifest_ref});
          break;
        }
        case ExportMode::Kind::Augment: {
          const auto counts = quantize_counts(human.probs, mode.n);
          for (std::size_t i = 0; i < counts.size(); ++i) {
            for (std::int64_t c = 0; c < counts[i]; ++c) out.push_back({prompt, q.options[i].letter, g, q.id, manifest_ref});
          }
          break;
        }
      }
    }
  }
  return out;
}

ExportManifest export_training(const SurveyDataset& dataset, std::span<const GroupKey> groups, PromptStyle style,
                               const ExportMode& mode, const std::filesystem::path& out_path,
                               std::span<const Question> questions) {
  if (questions.empty()) questions = dataset.questions();
  const std::filesystem::path manifest_path = out_path.string() + ".manifest.json";

  ExportManifest manifest;
  manifest.mode = mode.to_string();
  manifest.style = std::string(to_string(style));
  manifest.hyperparameters = default_training_hyperparameters();

  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", out_path.string()));

  // One group at a time keeps memory flat for large AUGMENT factors.
  for (const auto& g : groups) {
    const std::size_t skipped_before = manifest.skipped.size();
    const auto examples = make_training_examples(dataset, std::span(&g, 1), questions, style, mode, &manifest.skipped,
                                                 manifest_path.filename().string());
    manifest.pairs += questions.size() - (manifest.skipped.size() - skipped_before);
    for (const auto& ex : examples) {
      out << to_json(ex, dataset.question(ex.question_id)).dump() << '\n';
      ++manifest.lines;
    }
  }
  out.close();
  if (!out) throw Error(fmt::format("failed writing {}", out_path.string()));

  std::ifstream in(out_path, std::ios::binary);
  std::ostringstream content;
  content << in.rdbuf();
  manifest.sha256 = sha256_hex(content.str());

  std::ofstream mf(manifest_path, std::ios::binary | std::ios::trunc);
  mf << manifest.to_json().dump(2) << '\n';
  if (!mf) throw Error(fmt::format("cannot write {}", manifest_path.string()));
  return manifest;
}

double batch_loss(std::span<const Distribution> targets, std::span<const Distribution> predictions, Objective objective,
                  std::span<const Question> questions, const MetricConfig& cfg) {
  if (targets.size() != predictions.size() || targets.size() != questions.size()) {
    throw ValidationError(fmt::format("batch_loss: {} targets, {} predictions, {} questions", targets.size(),
                                      predictions.size(), questions.size()));
  }
  if (targets.empty()) throw ValidationError("batch_loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sum += objective == Objective::KL ? kl_forward(targets[i], predictions[i], cfg)
                                      : wasserstein(targets[i], predictions[i], questions[i], cfg);
  }
  return sum / static_cast<double>(targets.size());
}

std::vector<OverlapPair> detect_overlap(std::span<const Question> questions_a, std::span<const Question> questions_b,
                                        const EmbeddingMap& embeddings, double threshold) {
  auto lookup = [&](const Question& q) -> const EmbeddingVector& {
    auto it = embeddings.find(q.id);
    if (it == embeddings.end()) throw ValidationError(fmt::format("no embedding for question '{}'", q.id));
    return it->second;
  };
  for (const auto& q : questions_b) (void)lookup(q);

  std::vector<OverlapPair> out;
  for (const auto& a : questions_a) {
    const auto& ea = lookup(a);
    for (const auto& b : questions_b) {
      const double sim = cosine_similarity(ea, lookup(b));
      if (sim >= threshold) out.push_back({a.id, b.id, sim});
    }
  }
  std::sort(out.begin(), out.end(), [](const OverlapPair& x, const OverlapPair& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    if (x.id_a != y.id_a) return x.id_a < y.id_a;
    return x.id_b < y.id_b;
  });
  return out;
}

SplitResult split(std::span<const Question> questions, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0) || train_fraction > 1.0) {
    throw ValidationError(fmt::format("train fraction {} is outside (0, 1]", train_fraction));
  }
  std::map<std::string, std::vector<std::string>> by_wave;
  for (const auto& q : questions) by_wave[q.wave].push_back(q.id);

  const std::size_t total = questions.size();
  const auto target = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(total) + 1e-9));

  struct Quota {
    std::string wave;
    std::size_t base;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [wave, ids] : by_wave) {
    const double exact = train_fraction * static_cast<double>(ids.size());
    const auto base = std::min(ids.size(), static_cast<std::size_t>(std::floor(exact + 1e-9)));
    quotas.push_back({wave, base, exact - static_cast<double>(base)});
    assigned += base;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
    return a > b;  // later-sorted wave first
  });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
    auto& q = quotas[order[k]];
    if (q.base < by_wave[q.wave].size()) {
      ++q.base;
      ++assigned;
    }
  }

  SplitResult out;
  for (const auto& q : quotas) {
    auto ids = by_wave[q.wave];
    std::sort(ids.begin(), ids.end());
    StreamRng rng(seed, fnv1a64(q.wave));
    rng.shuffle(std::span(ids));
    out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(q.base));
    out.heldout.insert(out.heldout.end(), ids.begin() + static_cast<std::ptrdiff_t>(q.base), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.heldout.begin(), out.heldout.end());
  return out;
}

SplitResult split(const SurveyDataset& dataset, double train_fraction, std::uint64_t seed) {
  return split(std::span(dataset.questions()), train_fraction, seed);
}

}  // namespace opdist
