#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "opdist/embedding.hpp"
#include "opdist/survey.hpp"

namespace opdist {

// Every logprob prompt ends with this cue, so the next token is the bare option letter.
inline constexpr std::string_view kAnswerCue = "Answer: ";

struct FewShotConfig {
  int k = 5;
  int decimals = 3;  // probability places in rendered JSON

  void validate() const;
};

// "Question: ...\nA. ...\nB. ...\n" without the answer cue.
std::string render_question_block(const Question& question);

// Steering text, a blank line, the question block and kAnswerCue.
std::string build_prompt(const Subpopulation& group, const Question& question, PromptStyle style);

// The k pool questions most similar to `target`, least similar first so the closest example
// sits right before the target. Similarity ties rank by question id ascending. Pool entries
// sharing the target's id are ignored. Throws ValidationError when fewer than k remain or an
// embedding is missing.
std::vector<Question> select_fewshot(const Question& target, const std::vector<Question>& pool,
                                     const EmbeddingMap& embeddings, const FewShotConfig& cfg = {});

// {"A": 0.500, "B": 0.500} with cfg.decimals places, keys in option order.
std::string render_distribution_json(const Distribution& dist, const Question& question, int decimals);

using FewShotExample = std::pair<Question, Distribution>;

// Group header, cfg.k (question, JSON distribution) blocks, then the target question and an
// instruction to answer with a JSON object over the option letters.
std::string build_fewshot_prompt(const Subpopulation& group, const std::vector<FewShotExample>& examples,
                                 const Question& target, const FewShotConfig& cfg = {});

// First JSON object in `text` whose keys are all option letters of `question` and whose values
// are numbers. Missing letters get zero and the result is renormalized. Throws ParseError when
// no such object exists, a value is negative, or the mass is zero.
Distribution parse_verbalized_distribution(std::string_view text, const Question& question);

}  // namespace opdist
