#include "opdist/survey.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "opdist/errors.hpp"

namespace opdist {

std::string_view to_string(PromptStyle style) {
  switch (style) {
    case PromptStyle::QA:
      return "QA";
    case PromptStyle::BIO:
      return "BIO";
    case PromptStyle::PORTRAY:
      return "PORTRAY";
  }
  return "?";
}

PromptStyle parse_prompt_style(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (PromptStyle s : kAllPromptStyles) {
    if (to_string(s) == upper) return s;
  }
  throw ValidationError(fmt::format("unknown prompt style '{}' (expected QA, BIO or PORTRAY)", text));
}

std::size_t Question::substantive_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(options.begin(), options.end(), [](const AnswerOption& o) { return !o.is_refusal; }));
}

std::optional<std::size_t> Question::index_of(std::string_view letter) const noexcept {
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].letter == letter) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Question::letters() const {
  std::vector<std::string> out;
  out.reserve(options.size());
  for (const auto& o : options) out.push_back(o.letter);
  return out;
}

void validate(const Question& q) {
  auto fail = [&](const std::string& why) {
    throw ValidationError(fmt::format("question '{}': {}", q.id, why));
  };
  if (q.id.empty()) throw ValidationError("question with empty id");
  if (q.options.size() < kMinOptions) fail(fmt::format("needs at least {} options", kMinOptions));
  if (q.options.size() > kMaxOptions) fail(fmt::format("has more than {} options", kMaxOptions));

  std::vector<int> ordinals;
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    const auto& o = q.options[i];
    const std::string expected(1, static_cast<char>('A' + i));
    if (o.letter != expected) {
      fail(fmt::format("option {} has letter '{}', expected '{}'", i, o.letter, expected));
    }
    if (o.is_refusal == o.ordinal.has_value()) {
      fail(fmt::format("option {} must have an ordinal iff it is not a refusal", o.letter));
    }
    if (o.ordinal) ordinals.push_back(*o.ordinal);
  }
  std::sort(ordinals.begin(), ordinals.end());
  for (std::size_t i = 0; i < ordinals.size(); ++i) {
    if (ordinals[i] != static_cast<int>(i) + 1) {
      fail(fmt::format("substantive ordinals must be a permutation of 1..{}", ordinals.size()));
    }
  }
}

std::string GroupKey::label() const { return trait + ": " + group; }

GroupKey GroupKey::parse(std::string_view label) {
  const auto pos = label.find(": ");
  if (pos == std::string_view::npos || pos == 0 || pos + 2 >= label.size()) {
    throw ValidationError(fmt::format("group label '{}' is not of the form 'trait: group'", label));
  }
  return {std::string(label.substr(0, pos)), std::string(label.substr(pos + 2))};
}

const std::string& Subpopulation::steering(PromptStyle style) const {
  auto it = steering_texts.find(style);
  if (it == steering_texts.end() || it->second.empty()) {
    throw ValidationError(
        fmt::format("group '{}' has no steering text for style {}", label(), to_string(style)));
  }
  return it->second;
}

namespace {

struct TraitWording {
  const char* qa_question;
  const char* bio;      // {} is replaced by the group
  const char* portray;  // {} is replaced by the group
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<TraitWording> known_wording(std::string_view trait) {
  const std::string t = lower(trait);
  if (t == "region" || t == "cregion") {
    return TraitWording{"In which part of the United States do you currently live?",
                        "I currently reside in the {}.",
                        "Answer the following question as if you currently reside in the {}."};
  }
  if (t == "education" || t == "educ") {
    return TraitWording{"What is the highest level of schooling or degree that you have completed?",
                        "The highest level of education I have completed is {}.",
                        "Answer the following question as if the highest level of education you have "
                        "completed is {}."};
  }
  if (t == "age") {
    return TraitWording{"What is your age?", "I am {} years old.",
                        "Answer the following question as if you are {} years old."};
  }
  if (t == "party" || t == "polparty" || t == "political party") {
    return TraitWording{"In politics today, do you consider yourself a",
                        "In politics today, I consider myself a {}.",
                        "Answer the following question as if in politics today, you consider yourself a {}."};
  }
  if (t == "ideology" || t == "polideology" || t == "political ideology") {
    return TraitWording{"In general, would you describe your political views as",
                        "In general, I would describe my political views as {}.",
                        "Answer the following question as if in general, you would describe your political "
                        "views as {}."};
  }
  return std::nullopt;
}

}  // namespace

std::map<PromptStyle, std::string> default_steering_texts(const std::string& trait, const std::string& group,
                                                          std::span<const std::string> trait_groups) {
  std::string qa_question;
  std::string bio;
  std::string portray;
  if (auto w = known_wording(trait)) {
    qa_question = w->qa_question;
    bio = fmt::format(fmt::runtime(w->bio), group);
    portray = fmt::format(fmt::runtime(w->portray), group);
  } else {
    qa_question = fmt::format("What is your {}?", trait);
    bio = fmt::format("My {} is {}.", trait, group);
    portray = fmt::format("Answer the following question as if your {} is {}.", trait, group);
  }

  std::string qa = "Question: " + qa_question + "\n";
  std::string answer;
  const std::size_t shown = std::min<std::size_t>(trait_groups.size(), 26);
  for (std::size_t i = 0; i < shown; ++i) {
    const char letter = static_cast<char>('A' + i);
    qa += fmt::format("{}. {}\n", letter, trait_groups[i]);
    if (trait_groups[i] == group) answer = std::string(1, letter);
  }
  // A group missing from the enumeration is answered in free text.
  qa += "Answer: " + (answer.empty() ? group : answer);

  return {{PromptStyle::QA, std::move(qa)}, {PromptStyle::BIO, std::move(bio)}, {PromptStyle::PORTRAY, std::move(portray)}};
}

void validate(const Distribution& dist, const Question& question) {
  if (dist.probs.size() != question.options.size()) {
    throw ValidationError(fmt::format("distribution for '{}' has {} entries, question '{}' has {} options",
                                      dist.question_id, dist.probs.size(), question.id, question.options.size()));
  }
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError(fmt::format("distribution for '{}' has a negative or non-finite entry", dist.question_id));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ValidationError(fmt::format("distribution for '{}' sums to {}, not 1", dist.question_id, sum));
  }
}

SurveyDataset::SurveyDataset(std::vector<Question> questions, std::vector<Respondent> respondents,
                             std::vector<ResponseRecord> responses, std::vector<Subpopulation> subpopulations,
                             std::string source_family)
    : questions_(std::move(questions)),
      respondents_(std::move(respondents)),
      responses_(std::move(responses)),
      subpopulations_(std::move(subpopulations)),
      source_family_(std::move(source_family)) {
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    validate(questions_[i]);
    if (!question_index_.emplace(questions_[i].id, i).second) {
      throw ValidationError(fmt::format("duplicate question id '{}'", questions_[i].id));
    }
  }

  // Respondents are keyed by (wave, id); an empty wave matches every question wave.
  std::map<std::pair<std::string, std::string>, std::size_t> by_wave_id;
  for (std::size_t i = 0; i < respondents_.size(); ++i) {
    const auto& r = respondents_[i];
    if (r.id.empty()) throw ValidationError("respondent with empty id");
    if (!std::isfinite(r.weight) || r.weight < 0.0) {
      throw ValidationError(fmt::format("respondent '{}' has weight {}; weights must be nonnegative", r.key(), r.weight));
    }
    if (!by_wave_id.emplace(std::pair{r.wave, r.id}, i).second) {
      throw ValidationError(fmt::format("duplicate respondent id '{}'", r.key()));
    }
  }

  for (std::size_t i = 0; i < subpopulations_.size(); ++i) {
    const auto& s = subpopulations_[i];
    if (s.group.empty()) throw ValidationError(fmt::format("subpopulation of trait '{}' has an empty group", s.trait));
    for (PromptStyle style : kAllPromptStyles) (void)s.steering(style);
    if (!subpopulation_index_.emplace(s.key(), i).second) {
      throw ValidationError(fmt::format("duplicate subpopulation '{}'", s.label()));
    }
    members_[s.key()];
  }
  for (std::size_t i = 0; i < respondents_.size(); ++i) {
    for (const auto& g : respondents_[i].memberships) {
      auto it = members_.find(g);
      if (it == members_.end()) {
        throw ValidationError(
            fmt::format("respondent '{}' belongs to undeclared group '{}'", respondents_[i].key(), g.label()));
      }
      it->second.push_back(i);
    }
  }
  for (auto& [key, idx] : members_) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return respondents_[a].key() < respondents_[b].key(); });
  }

  answers_by_question_.resize(questions_.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& rec : responses_) {
    auto qit = question_index_.find(rec.question_id);
    if (qit == question_index_.end()) {
      throw ValidationError(fmt::format("response of respondent '{}' references unknown question '{}'",
                                        rec.respondent_id, rec.question_id));
    }
    const Question& q = questions_[qit->second];
    auto rit = by_wave_id.find({q.wave, rec.respondent_id});
    if (rit == by_wave_id.end()) rit = by_wave_id.find({std::string(), rec.respondent_id});
    if (rit == by_wave_id.end()) {
      throw ValidationError(fmt::format("response to question '{}' references unknown respondent '{}'", q.id,
                                        rec.respondent_id));
    }
    if (rec.option_index >= q.options.size()) {
      throw ValidationError(fmt::format("response of respondent '{}' to question '{}' has option index {} (only {} options)",
                                        rec.respondent_id, q.id, rec.option_index, q.options.size()));
    }
    if (!seen.emplace(rit->second, qit->second).second) {
      throw ValidationError(
          fmt::format("respondent '{}' answered question '{}' more than once", rec.respondent_id, q.id));
    }
    answers_by_question_[qit->second].push_back({rit->second, rec.option_index});
  }
  for (auto& answers : answers_by_question_) {
    std::sort(answers.begin(), answers.end(), [&](const Answer& a, const Answer& b) {
      return respondents_[a.respondent].key() < respondents_[b.respondent].key();
    });
  }
}

const Question* SurveyDataset::find_question(std::string_view id) const {
  auto it = question_index_.find(std::string(id));
  return it == question_index_.end() ? nullptr : &questions_[it->second];
}

const Question& SurveyDataset::question(std::string_view id) const {
  if (const Question* q = find_question(id)) return *q;
  throw ValidationError(fmt::format("unknown question '{}'", id));
}

const Subpopulation* SurveyDataset::find_subpopulation(const GroupKey& key) const {
  auto it = subpopulation_index_.find(key);
  return it == subpopulation_index_.end() ? nullptr : &subpopulations_[it->second];
}

const Subpopulation& SurveyDataset::subpopulation(const GroupKey& key) const {
  if (const Subpopulation* s = find_subpopulation(key)) return *s;
  throw ValidationError(fmt::format("unknown group '{}'", key.label()));
}

std::span<const SurveyDataset::Answer> SurveyDataset::answers(std::string_view question_id) const {
  auto it = question_index_.find(std::string(question_id));
  if (it == question_index_.end()) throw ValidationError(fmt::format("unknown question '{}'", question_id));
  return answers_by_question_[it->second];
}

const std::vector<std::size_t>& SurveyDataset::member_indices(const GroupKey& key) const {
  auto it = members_.find(key);
  if (it == members_.end()) throw ValidationError(fmt::format("unknown group '{}'", key.label()));
  return it->second;
}

std::vector<std::string> members(const SurveyDataset& dataset, const GroupKey& group) {
  const auto& idx = dataset.member_indices(group);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(dataset.respondents()[i].key());
  return out;
}

Distribution weighted_distribution(const SurveyDataset& dataset, const GroupKey& group, const Question& question) {
  const auto& respondents = dataset.respondents();
  // Existence check doubles as the unknown-group error.
  (void)dataset.member_indices(group);

  std::vector<double> mass(question.options.size(), 0.0);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& a : dataset.answers(question.id)) {
    const Respondent& r = respondents[a.respondent];
    if (!r.memberships.contains(group)) continue;
    mass[a.option] += r.weight;
    total += r.weight;
    ++n;
  }
  if (n == 0) throw NoDataError(group.label(), question.id, "no respondents in the group answered");
  if (!(total > 0.0)) throw NoDataError(group.label(), question.id, "total weight is zero");
  for (double& m : mass) m /= total;
  return {question.id, std::move(mass)};
}

}  // namespace opdist
