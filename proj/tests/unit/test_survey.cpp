#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include "fixtures.hpp"
#include "opdist/errors.hpp"
#include "opdist/rng.hpp"
#include "opdist/survey.hpp"
#include "oracles.hpp"

using namespace opdist;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const SurveyDataset& tiny() {
  static const SurveyDataset ds = load_dataset(fixtures::data_dir() / "tiny");
  return ds;
}

}  // namespace

TEST_CASE("tiny fixture loads with its counts") {
  const auto& ds = tiny();
  CHECK(ds.questions().size() == 3);
  CHECK(ds.respondents().size() == 4);
  CHECK(ds.responses().size() == 9);
  CHECK(ds.question("Q1").substantive_count() == 3);
  CHECK(ds.question("Q1").options.back().is_refusal);
}

TEST_CASE("unknown question id in responses is a load error naming it") {
  CHECK_THROWS_WITH(load_dataset(fixtures::data_dir() / "bad_unknown_question"),
                    ContainsSubstring("Q9") && ContainsSubstring("responses.csv"));
}

TEST_CASE("negative weight is rejected") {
  CHECK_THROWS_AS(load_dataset(fixtures::data_dir() / "bad_weight"), LoadError);
  CHECK_THROWS_WITH(load_dataset(fixtures::data_dir() / "bad_weight"), ContainsSubstring("nonnegativ"));
}

TEST_CASE("missing dataset files are reported") {
  CHECK_THROWS_AS(load_dataset(fixtures::temp_dir("empty")), LoadError);
}

TEST_CASE("weighted distribution of a hand-checked group") {
  // South on Q1: A (w1), A (w1), B (w2) -> A 2/4, B 2/4
  const auto d = weighted_distribution(tiny(), {"region", "South"}, tiny().question("Q1"));
  REQUIRE(d.probs.size() == 4);
  CHECK_THAT(d.probs[0], WithinAbs(0.5, 1e-12));
  CHECK_THAT(d.probs[1], WithinAbs(0.5, 1e-12));
  CHECK(d.probs[2] == 0.0);
  CHECK(d.probs[3] == 0.0);
}

TEST_CASE("equal weights give relative frequencies") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", 3));
  const std::vector<std::size_t> picks = {0, 0, 1, 2, 2, 2};
  for (std::size_t i = 0; i < picks.size(); ++i) {
    b.respondent("r" + std::to_string(i), 3.0, {{"t", "g"}}).answer("r" + std::to_string(i), "Q", picks[i]);
  }
  const auto ds = b.build();
  const auto d = weighted_distribution(ds, {"t", "g"}, ds.question("Q"));
  CHECK_THAT(d.probs[0], WithinAbs(2.0 / 6, 1e-12));
  CHECK_THAT(d.probs[1], WithinAbs(1.0 / 6, 1e-12));
  CHECK_THAT(d.probs[2], WithinAbs(3.0 / 6, 1e-12));
}

TEST_CASE("single respondent gives a point mass") {
  const auto d = weighted_distribution(tiny(), {"region", "Northeast"}, tiny().question("Q1"));
  CHECK(d.probs == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("group without answers raises NoDataError") {
  CHECK_THROWS_AS(weighted_distribution(tiny(), {"region", "West"}, tiny().question("Q1")), NoDataError);
  CHECK_THROWS_AS(weighted_distribution(tiny(), {"region", "Northeast"}, tiny().question("Q3")), NoDataError);
}

TEST_CASE("zero total weight raises NoDataError") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", 2)).respondent("r", 0.0, {{"t", "g"}}).answer("r", "Q", 1);
  const auto ds = b.build();
  CHECK_THROWS_AS(weighted_distribution(ds, {"t", "g"}, ds.question("Q")), NoDataError);
}

TEST_CASE("membership sets") {
  const auto& ds = tiny();
  CHECK(members(ds, {"region", "West"}).empty());
  CHECK(members(ds, {"region", "South"}).size() == 3);
  CHECK(members(ds, {"region", "Northeast"}) == std::vector<std::string>{"R4"});
  const auto dem = members(ds, {"party", "Democrat"});
  CHECK(dem == std::vector<std::string>{"R1", "R4"});
  const auto south = members(ds, {"region", "South"});
  CHECK(std::find(south.begin(), south.end(), "R1") != south.end());
  CHECK_THROWS_AS(members(ds, {"region", "Atlantis"}), ValidationError);
}

TEST_CASE("declared groups keep declaration order and undeclared groups follow") {
  const auto& subs = tiny().subpopulations();
  std::vector<std::string> labels;
  for (const auto& s : subs) labels.push_back(s.label());
  CHECK(labels == std::vector<std::string>{"region: Northeast", "region: Midwest", "region: South", "region: West",
                                           "party: Democrat", "party: Republican"});
}

TEST_CASE("steering texts for regions") {
  const auto& south = tiny().subpopulation({"region", "South"});
  CHECK(south.steering(PromptStyle::BIO) == "I currently reside in the South.");
  CHECK(south.steering(PromptStyle::PORTRAY) == "Answer the following question as if you currently reside in the South.");
  CHECK_THAT(south.steering(PromptStyle::QA), ContainsSubstring("A. Northeast\nB. Midwest\nC. South\nD. West"));
  CHECK_THAT(south.steering(PromptStyle::QA), ContainsSubstring("Answer: C"));
}

TEST_CASE("steering overrides come from subpopulations.jsonl") {
  const auto dir = fixtures::temp_dir("steer");
  for (const char* f : {"questions.jsonl", "respondents.csv", "responses.csv"}) {
    std::filesystem::copy_file(fixtures::data_dir() / "tiny" / f, dir / f);
  }
  std::ofstream(dir / "subpopulations.jsonl") << R"({"trait":"region","group":"South","steering":{"bio":"I live down South."}})"
                                              << "\n";
  const auto ds = load_dataset(dir);
  CHECK(ds.subpopulation({"region", "South"}).steering(PromptStyle::BIO) == "I live down South.");
  CHECK(ds.subpopulation({"region", "South"}).steering(PromptStyle::PORTRAY).find("South") != std::string::npos);
}

TEST_CASE("question validation") {
  auto q = fixtures::ordinal_question("Q", "W", 3, true);
  CHECK_NOTHROW(validate(q));
  auto dup = q;
  dup.options[1].ordinal = 1;
  CHECK_THROWS_AS(validate(dup), ValidationError);
  auto refusal_with_ordinal = q;
  refusal_with_ordinal.options.back().ordinal = 4;
  CHECK_THROWS_AS(validate(refusal_with_ordinal), ValidationError);
  auto one = fixtures::ordinal_question("Q", "W", 1);
  CHECK_THROWS_AS(validate(one), ValidationError);
  auto eleven = fixtures::ordinal_question("Q", "W", 11);
  CHECK_THROWS_AS(validate(eleven), ValidationError);
}

TEST_CASE("group labels round-trip") {
  const GroupKey k{"age", "18-29"};
  CHECK(k.label() == "age: 18-29");
  CHECK(GroupKey::parse("age: 18-29") == k);
  CHECK_THROWS_AS(GroupKey::parse("no separator"), ValidationError);
}

TEST_CASE("prompt styles parse in any case") {
  CHECK(parse_prompt_style("portray") == PromptStyle::PORTRAY);
  CHECK(parse_prompt_style("Bio") == PromptStyle::BIO);
  CHECK_THROWS_AS(parse_prompt_style("essay"), ValidationError);
}

// ---- properties ----

namespace {

struct RandomSurvey {
  opdist::SurveyDataset ds;
  std::vector<oracle::Row> rows;
  std::vector<std::pair<std::string, double>> weights;
  std::vector<std::string> in_group;
};

RandomSurvey random_survey(std::uint64_t seed, double weight_scale = 1.0) {
  StreamRng rng(seed, 0);
  const std::size_t n_options = 2 + rng.below(4);
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", n_options, true));
  std::vector<oracle::Row> rows;
  std::vector<std::pair<std::string, double>> weights;
  std::vector<std::string> in_group;
  const std::size_t n = 1 + rng.below(25);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "r" + std::to_string(i);
    const double w = weight_scale * (0.1 + static_cast<double>(rng.below(1000)) / 250.0);
    const bool member = i == 0 || rng.below(3) != 0;
    b.respondent(id, w, member ? std::vector<GroupKey>{{"t", "g"}} : std::vector<GroupKey>{{"t", "h"}});
    const std::size_t option = rng.below(n_options + 1);
    b.answer(id, "Q", option);
    rows.push_back({id, option});
    weights.emplace_back(id, w);
    if (member) in_group.push_back(id);
  }
  return {b.build(), rows, weights, in_group};
}

}  // namespace

TEST_CASE("property: weighted distribution matches brute-force tallies and sums to one") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = random_survey(seed);
    const auto& q = s.ds.question("Q");
    const auto d = weighted_distribution(s.ds, {"t", "g"}, q);
    const auto expected = oracle::weighted_tally(s.rows, s.in_group, s.weights, q.options.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < d.probs.size(); ++i) {
      CHECK_THAT(d.probs[i], WithinAbs(expected[i], 1e-12));
      sum += d.probs[i];
    }
    CHECK_THAT(sum, WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("property: scaling every weight leaves distributions unchanged") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = random_survey(seed, 1.0);
    const auto b = random_survey(seed, 37.5);
    const auto da = weighted_distribution(a.ds, {"t", "g"}, a.ds.question("Q"));
    const auto db = weighted_distribution(b.ds, {"t", "g"}, b.ds.question("Q"));
    for (std::size_t i = 0; i < da.probs.size(); ++i) CHECK_THAT(da.probs[i], WithinAbs(db.probs[i], 1e-12));
  }
}

TEST_CASE("property: refusal share and substantive ratios") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = random_survey(seed);
    const auto& q = s.ds.question("Q");
    const auto d = weighted_distribution(s.ds, {"t", "g"}, q);
    double refusal_w = 0.0;
    double total_w = 0.0;
    for (const auto& row : s.rows) {
      if (std::find(s.in_group.begin(), s.in_group.end(), row.respondent) == s.in_group.end()) continue;
      const double w = std::find_if(s.weights.begin(), s.weights.end(), [&](auto& p) { return p.first == row.respondent; })->second;
      total_w += w;
      if (q.options[row.option].is_refusal) refusal_w += w;
    }
    CHECK_THAT(d.probs.back(), WithinAbs(refusal_w / total_w, 1e-12));
  }
}
