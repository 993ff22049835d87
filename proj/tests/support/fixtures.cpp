#include "fixtures.hpp"

#include <map>
#include <set>

#include <unistd.h>

#include <fmt/format.h>

#include "opdist/rng.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using namespace opdist;

fs::path data_dir() { return fs::path(OPDIST_SOURCE_DIR) / "tests" / "data"; }
fs::path golden_dir() { return fs::path(OPDIST_SOURCE_DIR) / "tests" / "golden"; }

fs::path temp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       fmt::format("opdist-test-{}-{}-{}", tag, static_cast<long>(::getpid()), counter++);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Question ordinal_question(const std::string& id, const std::string& wave, std::size_t n_substantive, bool refusal) {
  Question q{id, wave, "Question " + id + "?", {}};
  for (std::size_t i = 0; i < n_substantive; ++i) {
    q.options.push_back({std::string(1, static_cast<char>('A' + i)), fmt::format("option {}", i + 1),
                         static_cast<int>(i + 1), false});
  }
  if (refusal) {
    q.options.push_back({std::string(1, static_cast<char>('A' + n_substantive)), "Refused", std::nullopt, true});
  }
  return q;
}

Builder& Builder::question(Question q) {
  questions_.push_back(std::move(q));
  return *this;
}

Builder& Builder::respondent(const std::string& id, double weight, std::vector<GroupKey> groups,
                             const std::string& wave) {
  respondents_.push_back({id, wave, std::set<GroupKey>(groups.begin(), groups.end()), weight});
  return *this;
}

Builder& Builder::answer(const std::string& respondent, const std::string& question, std::size_t option) {
  responses_.push_back({respondent, question, option});
  return *this;
}

Builder& Builder::declare(const GroupKey& group) {
  declared_.push_back(group);
  return *this;
}

SurveyDataset Builder::build() const {
  std::set<GroupKey> keys(declared_.begin(), declared_.end());
  for (const auto& r : respondents_) keys.insert(r.memberships.begin(), r.memberships.end());
  std::map<std::string, std::vector<std::string>> by_trait;
  for (const auto& k : keys) by_trait[k.trait].push_back(k.group);
  std::vector<Subpopulation> subs;
  for (const auto& k : keys) subs.push_back({k.trait, k.group, default_steering_texts(k.trait, k.group, by_trait[k.trait])});
  return SurveyDataset(questions_, respondents_, responses_, subs, "synthetic");
}

namespace {

std::size_t draw(StreamRng& rng, const std::vector<double>& p) {
  const double u = static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

}  // namespace

SurveyDataset iid_group(std::size_t n, std::size_t questions, std::uint64_t seed) {
  const std::vector<double> p = {0.4, 0.3, 0.2, 0.1};
  StreamRng rng(seed, n);
  Builder b;
  for (std::size_t q = 0; q < questions; ++q) b.question(ordinal_question(fmt::format("Q{}", q), "W1", 4));
  for (std::size_t r = 0; r < n; ++r) {
    const std::string id = fmt::format("R{:05}", r);
    b.respondent(id, 1.0, {{"g", "x"}});
    for (std::size_t q = 0; q < questions; ++q) b.answer(id, fmt::format("Q{}", q), draw(rng, p));
  }
  return b.build();
}

SurveyDataset ordinal_gradient(std::size_t groups, std::size_t questions, std::size_t per_group) {
  Builder b;
  constexpr std::size_t kOptions = 5;
  for (std::size_t q = 0; q < questions; ++q) b.question(ordinal_question(fmt::format("Q{}", q), "W1", kOptions));
  for (std::size_t g = 0; g < groups; ++g) {
    // Group g puts half its mass on option g and a quarter on each neighbour (clamped).
    for (std::size_t r = 0; r < per_group; ++r) {
      const std::string id = fmt::format("G{}R{:03}", g, r);
      b.respondent(id, 1.0, {{"level", fmt::format("L{}", g)}});
      const std::size_t slot = r % 4;
      std::size_t option = g;
      if (slot == 1 && g > 0) option = g - 1;
      if (slot == 2 && g + 1 < kOptions) option = g + 1;
      for (std::size_t q = 0; q < questions; ++q) b.answer(id, fmt::format("Q{}", q), option);
    }
  }
  return b.build();
}

}  // namespace fixtures
