#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fixtures.hpp"
#include "opdist/errors.hpp"
#include "opdist/metrics.hpp"
#include "opdist/rng.hpp"
#include "oracles.hpp"

using namespace opdist;
using Catch::Matchers::WithinAbs;

namespace {

Distribution dist(std::vector<double> p) { return {"Q", std::move(p)}; }

std::vector<double> random_simplex(StreamRng& rng, std::size_t n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& x : p) {
    // Some exact zeros so point masses show up too.
    x = rng.below(5) == 0 ? 0.0 : static_cast<double>(rng.below(1'000'000) + 1);
    sum += x;
  }
  if (sum == 0.0) {
    p[rng.below(n)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

TEST_CASE("wasserstein of identical distributions is zero") {
  const auto q = fixtures::ordinal_question("Q", "W", 3);
  CHECK(wasserstein(dist({0.2, 0.3, 0.5}), dist({0.2, 0.3, 0.5}), q) == 0.0);
}

TEST_CASE("opposite point masses on a two-point scale") {
  const auto q = fixtures::ordinal_question("Q", "W", 2);
  CHECK_THAT(wasserstein(dist({1, 0}), dist({0, 1}), q), WithinAbs(1.0, 1e-15));
}

TEST_CASE("three-option example, raw and normalized") {
  const auto q = fixtures::ordinal_question("Q", "W", 3);
  const auto p = dist({0.5, 0.3, 0.2});
  const auto r = dist({0.2, 0.3, 0.5});
  CHECK_THAT(wasserstein(p, r, q, {.normalize_wd = false}), WithinAbs(0.6, 1e-12));
  CHECK_THAT(wasserstein(p, r, q), WithinAbs(0.3, 1e-12));
  const std::vector<double> pos = {1, 2, 3};
  CHECK_THAT(oracle::transport_cost(p.probs, r.probs, pos), WithinAbs(0.6, 1e-12));
}

TEST_CASE("refusal mass is dropped and both sides renormalized") {
  const auto q = fixtures::ordinal_question("Q", "W", 2, true);
  // [0.4, 0.4, 0.2] -> [0.5, 0.5]; [0.5, 0, 0.5] -> [1, 0]
  CHECK_THAT(wasserstein(dist({0.4, 0.4, 0.2}), dist({0.5, 0.0, 0.5}), q), WithinAbs(0.5, 1e-12));
  CHECK_THROWS_AS(wasserstein(dist({0, 0, 1}), dist({0.5, 0.5, 0}), q), NoDataError);
}

TEST_CASE("ordinals need not follow option order") {
  auto q = fixtures::ordinal_question("Q", "W", 3);
  q.options[0].ordinal = 3;
  q.options[2].ordinal = 1;
  // Option A sits at the top of the scale now.
  CHECK_THAT(wasserstein(dist({1, 0, 0}), dist({0, 0, 1}), q), WithinAbs(1.0, 1e-12));
  CHECK_THAT(wasserstein(dist({1, 0, 0}), dist({0, 1, 0}), q), WithinAbs(0.5, 1e-12));
}

TEST_CASE("wasserstein rejects mismatched lengths") {
  const auto q = fixtures::ordinal_question("Q", "W", 3);
  CHECK_THROWS_AS(wasserstein(dist({0.5, 0.5}), dist({0.2, 0.3, 0.5}), q), ValidationError);
}

TEST_CASE("kl reference values") {
  CHECK(kl_forward(dist({0.3, 0.7}), dist({0.3, 0.7})) == 0.0);
  // 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
  CHECK_THAT(kl_forward(dist({0.5, 0.5}), dist({0.25, 0.75})), WithinAbs(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-12));
  CHECK_THAT(kl_forward(dist({0.5, 0.5}), dist({0.25, 0.75})), WithinAbs(0.1438, 1e-4));
  CHECK_THAT(kl_forward(dist({1, 0}), dist({0.5, 0.5})), WithinAbs(0.6931, 1e-4));
}

TEST_CASE("kl floors model zeros at epsilon") {
  const double v = kl_forward(dist({1, 0}), dist({0, 1}), {.kl_epsilon = 1e-10});
  CHECK_THAT(v, WithinAbs(-std::log(1e-10), 1e-9));
  CHECK(std::isfinite(v));
}

TEST_CASE("metric config validation") {
  CHECK_NOTHROW(MetricConfig{}.validate());
  CHECK_THROWS_AS((MetricConfig{.kl_epsilon = 0.0}.validate()), ValidationError);
  CHECK_THROWS_AS((MetricConfig{.kl_epsilon = 0.01}.validate()), ValidationError);
}

TEST_CASE("one-hot") {
  CHECK(one_hot(dist({0.2, 0.5, 0.3})).probs == std::vector<double>{0, 1, 0});
  CHECK(one_hot(dist({0.5, 0.5})).probs == std::vector<double>{1, 0});
  CHECK(one_hot(dist({0, 0, 1})).probs == std::vector<double>{0, 0, 1});
}

TEST_CASE("quantize counts") {
  CHECK(quantize_counts(std::vector<double>{0.5, 0.3, 0.2}, 10) == std::vector<std::int64_t>{5, 3, 2});
  CHECK(quantize_counts(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, 10) == std::vector<std::int64_t>{4, 3, 3});
  CHECK(quantize_counts(std::vector<double>{0.2, 0.45, 0.35}, 1) == std::vector<std::int64_t>{0, 1, 0});
  CHECK(quantize_counts(std::vector<double>{0.5, 0.5}, 1) == std::vector<std::int64_t>{1, 0});
}

TEST_CASE("uniform predictor") {
  CHECK(uniform(fixtures::ordinal_question("Q", "W", 4)).probs == std::vector<double>(4, 0.25));
  CHECK(uniform(fixtures::ordinal_question("Q", "W", 4, true)).probs == std::vector<double>{0.25, 0.25, 0.25, 0.25, 0});
  CHECK(uniform(fixtures::ordinal_question("Q", "W", 2)).probs == std::vector<double>{0.5, 0.5});
}

// ---- properties ----

TEST_CASE("property: wasserstein equals minimum-cost transport") {
  StreamRng rng(42, 1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const auto q = fixtures::ordinal_question("Q", "W", n);
    const auto p = random_simplex(rng, n);
    const auto r = random_simplex(rng, n);
    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<double>(i + 1);
    const double expected = oracle::transport_cost(p, r, pos);
    CHECK_THAT(wasserstein(dist(p), dist(r), q, {.normalize_wd = false}), WithinAbs(expected, 1e-8));
    CHECK_THAT(wasserstein(dist(p), dist(r), q), WithinAbs(expected / static_cast<double>(n - 1), 1e-8));
  }
}

TEST_CASE("property: wasserstein is a bounded metric") {
  StreamRng rng(7, 2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(5);
    const auto q = fixtures::ordinal_question("Q", "W", n);
    const auto a = dist(random_simplex(rng, n));
    const auto b = dist(random_simplex(rng, n));
    const auto c = dist(random_simplex(rng, n));
    const double ab = wasserstein(a, b, q);
    CHECK_THAT(ab, WithinAbs(wasserstein(b, a, q), 1e-9));
    CHECK(wasserstein(a, a, q) == 0.0);
    CHECK(ab <= wasserstein(a, c, q) + wasserstein(c, b, q) + 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
    if (ab == 0.0) CHECK(a.probs == b.probs);
  }
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto q = fixtures::ordinal_question("Q", "W", n);
    std::vector<double> lo(n, 0.0);
    std::vector<double> hi(n, 0.0);
    lo.front() = 1.0;
    hi.back() = 1.0;
    CHECK(wasserstein(dist(lo), dist(hi), q) == 1.0);
  }
}

TEST_CASE("property: kl is nonnegative and zero on equal inputs") {
  StreamRng rng(3, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(9);
    const auto p = dist(random_simplex(rng, n));
    const auto m = dist(random_simplex(rng, n));
    CHECK(kl_forward(p, m) >= 0.0);
    CHECK(kl_forward(p, p) == 0.0);
  }
}

TEST_CASE("property: quantization is within 1/N and as tight as exhaustive search") {
  StreamRng rng(11, 4);
  for (std::int64_t n : {1, 2, 3, 7, 10, 50, 100, 1000}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t k = 2 + rng.below(5);
      const auto p = random_simplex(rng, k);
      const auto counts = quantize_counts(p, n);
      std::int64_t total = 0;
      double worst = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        CHECK(counts[i] >= 0);
        total += counts[i];
        worst = std::max(worst, std::abs(static_cast<double>(counts[i]) / static_cast<double>(n) - p[i]));
      }
      CHECK(total == n);
      CHECK(worst <= 1.0 / static_cast<double>(n) + 1e-12);
      if (n <= 10 && k <= 4) CHECK(worst <= oracle::best_quantization_deviation(p, n) + 1e-12);
    }
  }
}
