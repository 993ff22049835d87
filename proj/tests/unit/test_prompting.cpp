#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "opdist/errors.hpp"
#include "opdist/prompting.hpp"
#include "opdist/rng.hpp"
#include "oracles.hpp"

using namespace opdist;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::EndsWith;
using Catch::Matchers::StartsWith;
using Catch::Matchers::WithinAbs;

namespace {

Subpopulation south() {
  const std::vector<std::string> regions = {"Northeast", "Midwest", "South", "West"};
  return {"region", "South", default_steering_texts("region", "South", regions)};
}

Question economy() {
  Question q{"ECON1", "W26", "How would you rate economic conditions in this country today?", {}};
  q.options = {{"A", "Excellent", 1, false}, {"B", "Good", 2, false}, {"C", "Only fair", 3, false},
               {"D", "Poor", 4, false},      {"E", "Refused", std::nullopt, true}};
  return q;
}

EmbeddingVector vec(const std::string& id, std::vector<double> v) { return {id, std::move(v), "test"}; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("bio and portray prefixes") {
  const auto q = economy();
  CHECK_THAT(build_prompt(south(), q, PromptStyle::BIO), StartsWith("I currently reside in the South.\n\nQuestion: "));
  CHECK_THAT(build_prompt(south(), q, PromptStyle::PORTRAY),
             StartsWith("Answer the following question as if you currently reside in the South.\n\n"));
}

TEST_CASE("prompt layout ends with the answer cue") {
  const std::string p = build_prompt(south(), economy(), PromptStyle::QA);
  CHECK_THAT(p, ContainsSubstring("Question: How would you rate economic conditions in this country today?\nA. Excellent\n"
                                  "B. Good\nC. Only fair\nD. Poor\nE. Refused\n"));
  CHECK_THAT(p, EndsWith("E. Refused\nAnswer: "));
  CHECK(p == build_prompt(south(), economy(), PromptStyle::QA));
}

TEST_CASE("missing steering style is an error") {
  Subpopulation s{"region", "South", {{PromptStyle::BIO, "x"}}};
  CHECK_THROWS_AS(build_prompt(s, economy(), PromptStyle::QA), ValidationError);
}

TEST_CASE("few-shot selection from a pool of exactly k") {
  const auto target = fixtures::ordinal_question("T", "W", 2);
  std::vector<Question> pool;
  EmbeddingMap emb;
  emb.emplace("T", vec("T", {1, 0}));
  const std::vector<std::pair<std::string, std::vector<double>>> entries = {
      {"P1", {1, 1}}, {"P2", {0, 1}}, {"P3", {1, 0.1}}};
  for (const auto& [id, v] : entries) {
    pool.push_back(fixtures::ordinal_question(id, "W", 2));
    emb.emplace(id, vec(id, v));
  }
  const auto chosen = select_fewshot(target, pool, emb, {.k = 3});
  REQUIRE(chosen.size() == 3);
  CHECK(chosen[0].id == "P2");
  CHECK(chosen[1].id == "P1");
  CHECK(chosen[2].id == "P3");
}

TEST_CASE("a duplicate of the target is chosen and placed last") {
  const auto target = fixtures::ordinal_question("T", "W", 2);
  EmbeddingMap emb;
  emb.emplace("T", vec("T", {0.3, 0.9, 0.1}));
  std::vector<Question> pool;
  for (int i = 0; i < 6; ++i) {
    const std::string id = "P" + std::to_string(i);
    pool.push_back(fixtures::ordinal_question(id, "W", 2));
    emb.emplace(id, vec(id, {static_cast<double>(i), 1.0, static_cast<double>(6 - i)}));
  }
  pool.push_back(fixtures::ordinal_question("DUP", "W", 2));
  emb.emplace("DUP", vec("DUP", {0.6, 1.8, 0.2}));
  const auto chosen = select_fewshot(target, pool, emb, {.k = 3});
  CHECK(chosen.back().id == "DUP");
}

TEST_CASE("few-shot selection agrees with a full sort and ignores pool order") {
  StreamRng rng(5, 0);
  for (int trial = 0; trial < 50; ++trial) {
    auto coord = [&] { return static_cast<double>(rng.below(7)) - 3.0; };  // coarse grid, so ties happen
    EmbeddingMap emb;
    std::vector<double> t = {coord(), coord(), coord(), 1.0};
    emb.emplace("T", vec("T", t));
    std::vector<Question> pool;
    std::vector<std::pair<std::string, std::vector<double>>> raw;
    for (int i = 0; i < 20; ++i) {
      const std::string id = "Q" + std::to_string(100 + i);
      std::vector<double> v = {coord(), coord(), coord(), 1.0};
      pool.push_back(fixtures::ordinal_question(id, "W", 2));
      emb.emplace(id, vec(id, v));
      raw.emplace_back(id, v);
    }
    auto expected = oracle::top_k_by_cosine(t, raw, 5);
    std::reverse(expected.begin(), expected.end());
    std::vector<std::string> got;
    for (const auto& q : select_fewshot(fixtures::ordinal_question("T", "W", 2), pool, emb)) got.push_back(q.id);
    CHECK(got == expected);

    rng.shuffle(std::span(pool));
    std::vector<std::string> shuffled;
    for (const auto& q : select_fewshot(fixtures::ordinal_question("T", "W", 2), pool, emb)) shuffled.push_back(q.id);
    CHECK(shuffled == got);
  }
}

TEST_CASE("few-shot selection errors") {
  const auto target = fixtures::ordinal_question("T", "W", 2);
  EmbeddingMap emb;
  emb.emplace("T", vec("T", {1, 0}));
  emb.emplace("A", vec("A", {1, 1}));
  std::vector<Question> pool = {fixtures::ordinal_question("A", "W", 2), fixtures::ordinal_question("B", "W", 2)};
  CHECK_THROWS_AS(select_fewshot(target, pool, emb, {.k = 1}), ValidationError);  // B has no embedding
  pool.pop_back();
  CHECK_THROWS_AS(select_fewshot(target, pool, emb, {.k = 2}), ValidationError);  // pool too small
  CHECK_THROWS_AS(select_fewshot(target, pool, emb, {.k = 0}), ValidationError);
}

TEST_CASE("distribution json rendering") {
  const auto q = fixtures::ordinal_question("Q", "W", 2);
  CHECK(render_distribution_json({"Q", {0.5, 0.5}}, q, 3) == R"({"A": 0.500, "B": 0.500})");
  CHECK(render_distribution_json({"Q", {0.25, 0.75}}, q, 1) == R"({"A": 0.2, "B": 0.8})");
}

TEST_CASE("few-shot prompt preconditions") {
  const auto q = fixtures::ordinal_question("Q", "W", 2);
  CHECK_THROWS_AS(build_fewshot_prompt(south(), {}, q, {.k = 0}), ValidationError);
  CHECK_THROWS_AS(build_fewshot_prompt(south(), {{q, {"Q", {1, 0}}}}, q, {.k = 2}), ValidationError);
}

TEST_CASE("three-shot prompt matches the golden file") {
  std::vector<FewShotExample> examples;
  const std::vector<std::vector<double>> dists = {{0.1, 0.2, 0.3, 0.35, 0.05}, {0.5, 0.25, 0.125, 0.125, 0.0},
                                                  {0.0, 0.0, 0.5, 0.5, 0.0}};
  for (int i = 0; i < 3; ++i) {
    auto q = economy();
    q.id = "EX" + std::to_string(i + 1);
    q.text = "Example question number " + std::to_string(i + 1) + "?";
    examples.emplace_back(q, Distribution{q.id, dists[i]});
  }
  const std::string prompt = build_fewshot_prompt(south(), examples, economy(), {.k = 3, .decimals = 3});
  const auto golden = fixtures::golden_dir() / "fewshot_3shot.txt";
  if (std::getenv("OPDIST_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << prompt;
  REQUIRE(std::filesystem::exists(golden));
  CHECK(prompt == read_file(golden));
}

TEST_CASE("verbalized distributions") {
  const auto two = fixtures::ordinal_question("Q", "W", 2);
  const auto three = fixtures::ordinal_question("Q", "W", 3);
  CHECK(parse_verbalized_distribution(R"({"A":0.7,"B":0.3})", two).probs == std::vector<double>{0.7, 0.3});
  CHECK(parse_verbalized_distribution(R"({"A":2,"B":2})", two).probs == std::vector<double>{0.5, 0.5});
  const auto p = parse_verbalized_distribution(R"(Sure! {"A":0.6,"B":0.2})", three).probs;
  CHECK_THAT(p[0], WithinAbs(0.75, 1e-12));
  CHECK_THAT(p[1], WithinAbs(0.25, 1e-12));
  CHECK(p[2] == 0.0);
}

TEST_CASE("verbalized distribution failures") {
  const auto q = fixtures::ordinal_question("Q", "W", 2);
  CHECK_THROWS_AS(parse_verbalized_distribution("I cannot answer that.", q), ParseError);
  CHECK_THROWS_AS(parse_verbalized_distribution(R"({"A":-0.2,"B":1.2})", q), ParseError);
  CHECK_THROWS_AS(parse_verbalized_distribution(R"({"A":0,"B":0})", q), ParseError);
  CHECK_THROWS_AS(parse_verbalized_distribution(R"({"Z":1})", q), ParseError);
  // An object with foreign keys is passed over in favour of a later valid one.
  CHECK(parse_verbalized_distribution(R"({"note":"x"} then {"B":1})", q).probs == std::vector<double>{0, 1});
}

TEST_CASE("property: rendered distributions parse back within rounding") {
  StreamRng rng(17, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const auto q = fixtures::ordinal_question("Q", "W", n);
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& x : p) sum += (x = static_cast<double>(rng.below(1000) + 1));
    for (auto& x : p) x /= sum;
    const int decimals = 2 + static_cast<int>(rng.below(3));
    const auto back = parse_verbalized_distribution(render_distribution_json({"Q", p}, q, decimals), q);
    const double tol = std::pow(10.0, -decimals) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) CHECK_THAT(back.probs[i], WithinAbs(p[i], tol));
  }
}
