#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opdist/survey.hpp"

namespace fixtures {

std::filesystem::path data_dir();  // tests/data in the source tree
std::filesystem::path golden_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

// Letters A.., ordinals 1..n_substantive, optional trailing refusal.
opdist::Question ordinal_question(const std::string& id, const std::string& wave, std::size_t n_substantive,
                                  bool refusal = false);

// Incremental dataset assembly for synthetic tests.
class Builder {
 public:
  Builder& question(opdist::Question q);
  Builder& respondent(const std::string& id, double weight, std::vector<opdist::GroupKey> groups,
                      const std::string& wave = "");
  Builder& answer(const std::string& respondent, const std::string& question, std::size_t option);
  Builder& declare(const opdist::GroupKey& group);
  opdist::SurveyDataset build() const;

 private:
  std::vector<opdist::Question> questions_;
  std::vector<opdist::Respondent> respondents_;
  std::vector<opdist::ResponseRecord> responses_;
  std::vector<opdist::GroupKey> declared_;
};

// One group "g: x" of n respondents answering `questions` ordinal questions with 4 options i.i.d.
// from a fixed skewed distribution, unit weights.
opdist::SurveyDataset iid_group(std::size_t n, std::size_t questions, std::uint64_t seed);

// Groups "level: L0".."level: L{groups-1}" on 5-point questions; group i concentrates its answers
// near option i, so disagreement grows with the distance between levels.
opdist::SurveyDataset ordinal_gradient(std::size_t groups, std::size_t questions, std::size_t per_group);

}  // namespace fixtures
