#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "opdist/bounds.hpp"
#include "opdist/errors.hpp"
#include "opdist/rng.hpp"

using namespace opdist;
using Catch::Matchers::WithinAbs;

namespace {

const GroupKey kG{"g", "x"};

SurveyDataset two_question_group() {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q1", "W", 2)).question(fixtures::ordinal_question("Q2", "W", 2));
  for (int i = 0; i < 10; ++i) {
    const std::string id = "r" + std::to_string(i);
    b.respondent(id, 1.0, {kG});
    b.answer(id, "Q1", i < 7 ? 0 : 1);
    b.answer(id, "Q2", i < 9 ? 0 : 1);
  }
  return b.build();
}

}  // namespace

TEST_CASE("upper bound is zero when the group is already uniform") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", 2));
  b.respondent("a", 1.0, {kG}).answer("a", "Q", 0).respondent("b", 1.0, {kG}).answer("b", "Q", 1);
  const auto ds = b.build();
  CHECK(upper_bound(ds, kG, ds.questions()) == 0.0);
}

TEST_CASE("upper bound of a point mass on two options") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", 2)).respondent("a", 1.0, {kG}).answer("a", "Q", 0);
  const auto ds = b.build();
  CHECK_THAT(upper_bound(ds, kG, ds.questions()), WithinAbs(0.5, 1e-15));
}

TEST_CASE("upper bound averages per-question distances") {
  const auto ds = two_question_group();  // WDs 0.2 and 0.4
  CHECK_THAT(upper_bound(ds, kG, ds.questions()), WithinAbs(0.3, 1e-12));
}

TEST_CASE("upper bound without data") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q", "W", 2)).respondent("a", 1.0, {kG}).declare({"g", "empty"});
  const auto ds = b.build();
  CHECK_THROWS_AS(upper_bound(ds, {"g", "empty"}, ds.questions()), NoDataError);
}

TEST_CASE("singleton group has a degenerate lower bound") {
  fixtures::Builder b;
  b.question(fixtures::ordinal_question("Q1", "W", 4)).question(fixtures::ordinal_question("Q2", "W", 3));
  b.respondent("solo", 2.5, {kG}).answer("solo", "Q1", 2).answer("solo", "Q2", 0);
  const auto ds = b.build();
  const auto r = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 200, .seed = 1});
  CHECK(r.mean_wd == 0.0);
  CHECK(r.ci_low == 0.0);
  CHECK(r.ci_high == 0.0);
  CHECK(r.replicates == 200);
  CHECK(r.questions_used == 2);
}

TEST_CASE("bootstrap is reproducible and thread-count independent") {
  const auto ds = fixtures::iid_group(60, 4, 5);
  const auto a = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 300, .seed = 9, .threads = 1});
  const auto b = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 300, .seed = 9, .threads = 1});
  const auto c = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 300, .seed = 9, .threads = 6});
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(to_json(a).dump() == to_json(c).dump());
  const auto d = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 300, .seed = 10, .threads = 1});
  CHECK(a.mean_wd != d.mean_wd);
}

TEST_CASE("bootstrap ignores respondent file order") {
  fixtures::Builder fwd;
  fixtures::Builder rev;
  const auto base = fixtures::iid_group(40, 3, 2);
  for (const auto& q : base.questions()) {
    fwd.question(q);
    rev.question(q);
  }
  const auto& rs = base.respondents();
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto& r = rs[i];
    const auto& s = rs[rs.size() - 1 - i];
    fwd.respondent(r.id, r.weight, {r.memberships.begin(), r.memberships.end()});
    rev.respondent(s.id, s.weight, {s.memberships.begin(), s.memberships.end()});
  }
  const auto& resp = base.responses();
  for (std::size_t i = 0; i < resp.size(); ++i) {
    fwd.answer(resp[i].respondent_id, resp[i].question_id, resp[i].option_index);
    const auto& back = resp[resp.size() - 1 - i];
    rev.answer(back.respondent_id, back.question_id, back.option_index);
  }
  const auto a = fwd.build();
  const auto b = rev.build();
  const BootstrapOptions opts{.replicates = 200, .seed = 3};
  CHECK(to_json(bootstrap_lower_bound(a, kG, a.questions(), opts)).dump() ==
        to_json(bootstrap_lower_bound(b, kG, b.questions(), opts)).dump());
}

TEST_CASE("lower bound shrinks as the group grows") {
  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<double> means;
    for (std::size_t n : {10, 100, 1000}) {
      const auto ds = fixtures::iid_group(n, 5, seed);
      means.push_back(bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 200, .seed = seed, .threads = 0}).mean_wd);
    }
    if (means[0] > means[1] && means[1] > means[2]) ++decreasing;
  }
  CHECK(decreasing >= 4);
}

TEST_CASE("nearest-rank percentiles bracket the mean") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = fixtures::iid_group(30, 3, seed);
    const auto r = bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 150, .seed = seed});
    CHECK(r.ci_low <= r.mean_wd);
    CHECK(r.mean_wd <= r.ci_high);
    CHECK(r.ci_low > 0.0);
  }
}

TEST_CASE("nearest-rank percentile picks order statistics") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  CHECK(nearest_rank_percentile(v, 2.5) == 3.0);
  CHECK(nearest_rank_percentile(v, 97.5) == 98.0);
  CHECK(nearest_rank_percentile(v, 100) == 100.0);
  CHECK(nearest_rank_percentile(std::vector<double>{4.0}, 50) == 4.0);
  std::vector<double> thousand(1000);
  for (int i = 0; i < 1000; ++i) thousand[i] = i;
  CHECK(nearest_rank_percentile(thousand, 2.5) == 24.0);
  CHECK(nearest_rank_percentile(thousand, 97.5) == 974.0);
}

TEST_CASE("bootstrap argument checks") {
  const auto ds = fixtures::iid_group(5, 1, 0);
  CHECK_THROWS_AS(bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 0}), ValidationError);
}

TEST_CASE("report json fields") {
  const auto ds = fixtures::iid_group(20, 2, 1);
  const auto j = to_json(bootstrap_lower_bound(ds, kG, ds.questions(), {.replicates = 50, .seed = 4}));
  CHECK(j.at("trait") == "g");
  CHECK(j.at("group") == "x");
  CHECK(j.at("R") == 50);
  CHECK(j.at("seed") == 4);
  CHECK(j.at("ci").size() == 2);
}
