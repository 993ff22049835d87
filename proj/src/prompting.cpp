#include "opdist/prompting.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "opdist/errors.hpp"

namespace opdist {

void FewShotConfig::validate() const {
  if (k < 1) throw ValidationError(fmt::format("few-shot k must be >= 1, got {}", k));
  if (decimals < 0 || decimals > 12) throw ValidationError(fmt::format("few-shot decimals must be in [0, 12], got {}", decimals));
}

std::string render_question_block(const Question& question) {
  std::string out = "Question: " + question.text + "\n";
  for (const auto& o : question.options) out += fmt::format("{}. {}\n", o.letter, o.text);
  return out;
}

std::string build_prompt(const Subpopulation& group, const Question& question, PromptStyle style) {
  return group.steering(style) + "\n\n" + render_question_block(question) + std::string(kAnswerCue);
}

std::vector<Question> select_fewshot(const Question& target, const std::vector<Question>& pool,
                                     const EmbeddingMap& embeddings, const FewShotConfig& cfg) {
  cfg.validate();
  auto lookup = [&](const std::string& id) -> const EmbeddingVector& {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) throw ValidationError(fmt::format("no embedding for question '{}'", id));
    return it->second;
  };
  const EmbeddingVector& t = lookup(target.id);

  std::vector<std::pair<double, const Question*>> scored;
  for (const auto& q : pool) {
    if (q.id == target.id) continue;
    scored.emplace_back(cosine_similarity(t, lookup(q.id)), &q);
  }
  if (scored.size() < static_cast<std::size_t>(cfg.k)) {
    throw ValidationError(fmt::format("few-shot pool has {} questions, need k = {}", scored.size(), cfg.k));
  }
  // Rank: most similar first, id ascending among ties.
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<Question> out;
  out.reserve(static_cast<std::size_t>(cfg.k));
  for (int i = cfg.k - 1; i >= 0; --i) out.push_back(*scored[static_cast<std::size_t>(i)].second);
  return out;
}

std::string render_distribution_json(const Distribution& dist, const Question& question, int decimals) {
  validate(dist, question);
  std::string out = "{";
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt::format("\"{}\": {:.{}f}", question.options[i].letter, dist.probs[i], decimals);
  }
  out += "}";
  return out;
}

std::string build_fewshot_prompt(const Subpopulation& group, const std::vector<FewShotExample>& examples,
                                 const Question& target, const FewShotConfig& cfg) {
  cfg.validate();
  if (examples.size() != static_cast<std::size_t>(cfg.k)) {
    throw ValidationError(fmt::format("few-shot prompt needs {} examples, got {}", cfg.k, examples.size()));
  }
  std::string out = fmt::format(
      "The following are survey questions answered by people whose {} is {}. Each question is followed by the "
      "distribution of this group's answers in JSON format.\n\n",
      group.trait, group.group);
  for (const auto& [q, dist] : examples) {
    if (dist.question_id != q.id) {
      throw ValidationError(fmt::format("few-shot example '{}' carries the distribution of '{}'", q.id, dist.question_id));
    }
    out += render_question_block(q);
    out += "Answer distribution: " + render_distribution_json(dist, q, cfg.decimals) + "\n\n";
  }
  out += render_question_block(target);
  out +=
      "Predict the distribution of this group's answers. Respond with a JSON object whose keys are the option "
      "letters and whose values are probabilities, in the same format as above.\n";
  out += "Answer distribution: ";
  return out;
}

namespace {

// End offset (exclusive) of the brace-balanced object starting at `begin`, honoring strings.
std::optional<std::size_t> object_end(std::string_view text, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::string snippet(std::string_view text) {
  constexpr std::size_t kMax = 80;
  return std::string(text.substr(0, kMax)) + (text.size() > kMax ? "..." : "");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

}  // namespace

Distribution parse_verbalized_distribution(std::string_view text, const Question& question) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    const auto end = object_end(text, pos);
    if (!end) break;
    const auto candidate = text.substr(pos, *end - pos);
    nlohmann::json obj = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
    if (!obj.is_object()) continue;

    std::vector<double> probs(question.options.size(), 0.0);
    bool matches = true;
    for (const auto& [key, value] : obj.items()) {
      const auto idx = question.index_of(trim(key));
      if (!idx || !value.is_number()) {
        matches = false;
        break;
      }
      probs[*idx] = value.get<double>();
    }
    if (!matches) continue;

    double total = 0.0;
    for (double p : probs) {
      if (p < 0.0 || !std::isfinite(p)) throw ParseError("negative or non-finite probability", snippet(candidate));
      total += p;
    }
    if (!(total > 0.0)) throw ParseError("distribution has zero total mass", snippet(candidate));
    for (double& p : probs) p /= total;
    return {question.id, std::move(probs)};
  }
  throw ParseError(fmt::format("no JSON object over the letters of question '{}'", question.id), snippet(text));
}

}  // namespace opdist
