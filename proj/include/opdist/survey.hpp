#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opdist {

enum class PromptStyle { QA, BIO, PORTRAY };

inline constexpr std::array<PromptStyle, 3> kAllPromptStyles = {PromptStyle::QA, PromptStyle::BIO,
                                                                PromptStyle::PORTRAY};

std::string_view to_string(PromptStyle style);
// Accepts "QA", "BIO", "PORTRAY" in any case. Throws ValidationError otherwise.
PromptStyle parse_prompt_style(std::string_view text);

struct AnswerOption {
  std::string letter;
  std::string text;
  std::optional<int> ordinal;  // 1-based position on the ordinal scale; absent for refusals
  bool is_refusal = false;
};

struct Question {
  std::string id;
  std::string wave;
  std::string text;
  std::vector<AnswerOption> options;

  std::size_t option_count() const noexcept { return options.size(); }
  std::size_t substantive_count() const noexcept;
  std::optional<std::size_t> index_of(std::string_view letter) const noexcept;
  std::vector<std::string> letters() const;
};

inline constexpr std::size_t kMinOptions = 2;
inline constexpr std::size_t kMaxOptions = 10;

// Checks letter/ordinal/refusal invariants. Throws ValidationError naming the question id.
void validate(const Question& question);

// (trait, group) pair, e.g. ("region", "South").
struct GroupKey {
  std::string trait;
  std::string group;

  auto operator<=>(const GroupKey&) const = default;

  // "trait: group", the form used in reports and export files.
  std::string label() const;
  static GroupKey parse(std::string_view label);
};

struct Subpopulation {
  std::string trait;
  std::string group;
  std::map<PromptStyle, std::string> steering_texts;

  GroupKey key() const { return {trait, group}; }
  std::string label() const { return key().label(); }
  // Throws ValidationError when the style has no steering text.
  const std::string& steering(PromptStyle style) const;
};

// Steering texts used when a dataset does not ship its own. `trait_groups` lists every group
// of the trait in display order; the QA block enumerates them as lettered options.
std::map<PromptStyle, std::string> default_steering_texts(const std::string& trait,
                                                          const std::string& group,
                                                          std::span<const std::string> trait_groups);

struct Respondent {
  std::string id;
  std::string wave;  // empty when respondent ids are global across waves
  std::set<GroupKey> memberships;
  double weight = 1.0;

  // Unique respondent identity: "wave/id" when a wave is set, otherwise the id.
  std::string key() const { return wave.empty() ? id : wave + "/" + id; }
};

struct ResponseRecord {
  std::string respondent_id;
  std::string question_id;
  std::size_t option_index = 0;
};

struct Distribution {
  std::string question_id;
  std::vector<double> probs;
};

inline constexpr double kSumTolerance = 1e-9;

// Length matches the question and entries are nonnegative and sum to one.
void validate(const Distribution& dist, const Question& question);

// Immutable after construction; safe for concurrent readers.
class SurveyDataset {
 public:
  struct Answer {
    std::size_t respondent;  // index into respondents()
    std::size_t option;      // index into the question's options
  };

  // Validates every invariant and referential link; throws ValidationError on failure.
  SurveyDataset(std::vector<Question> questions, std::vector<Respondent> respondents,
                std::vector<ResponseRecord> responses, std::vector<Subpopulation> subpopulations,
                std::string source_family = "unknown");

  const std::vector<Question>& questions() const noexcept { return questions_; }
  const std::vector<Respondent>& respondents() const noexcept { return respondents_; }
  const std::vector<ResponseRecord>& responses() const noexcept { return responses_; }
  const std::vector<Subpopulation>& subpopulations() const noexcept { return subpopulations_; }
  const std::string& source_family() const noexcept { return source_family_; }

  const Question* find_question(std::string_view id) const;
  const Question& question(std::string_view id) const;
  const Subpopulation* find_subpopulation(const GroupKey& key) const;
  const Subpopulation& subpopulation(const GroupKey& key) const;

  std::span<const Answer> answers(std::string_view question_id) const;
  // Sorted by respondent key.
  const std::vector<std::size_t>& member_indices(const GroupKey& key) const;

 private:
  std::vector<Question> questions_;
  std::vector<Respondent> respondents_;
  std::vector<ResponseRecord> responses_;
  std::vector<Subpopulation> subpopulations_;
  std::string source_family_;

  std::unordered_map<std::string, std::size_t> question_index_;
  std::vector<std::vector<Answer>> answers_by_question_;
  std::map<GroupKey, std::size_t> subpopulation_index_;
  std::map<GroupKey, std::vector<std::size_t>> members_;
};

// Reads questions.jsonl, respondents.csv, responses.csv (and the optional subpopulations.jsonl
// and meta.json) from `root`. Throws LoadError naming file, line and field.
SurveyDataset load_dataset(const std::filesystem::path& root);

// Sorted respondent keys of the group. Throws ValidationError for an undeclared group.
std::vector<std::string> members(const SurveyDataset& dataset, const GroupKey& group);

// Weight-normalized answer shares of the group's respondents on `question`, in option order.
// Throws NoDataError when nobody in the group answered or the total weight is zero.
Distribution weighted_distribution(const SurveyDataset& dataset, const GroupKey& group,
                                   const Question& question);

}  // namespace opdist
