#include "opdist/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "opdist/errors.hpp"
#include "opdist/rng.hpp"

namespace opdist {

nlohmann::json to_json(const BootstrapReport& report) {
  return {{"trait", report.group.trait},
          {"group", report.group.group},
          {"mean", report.mean_wd},
          {"ci", {report.ci_low, report.ci_high}},
          {"R", report.replicates},
          {"seed", report.seed},
          {"questions", report.questions_used}};
}

double upper_bound(const SurveyDataset& dataset, const GroupKey& group, std::span<const Question> questions,
                   const MetricConfig& cfg) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& q : questions) {
    try {
      const Distribution human = weighted_distribution(dataset, group, q);
      sum += wasserstein(human, uniform(q), q, cfg);
      ++used;
    } catch (const NoDataError&) {
    }
  }
  if (used == 0) throw NoDataError(group.label(), "*", "no listed question has data for the group");
  return sum / static_cast<double>(used);
}

double nearest_rank_percentile(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw ValidationError("percentile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

namespace {

struct PreparedQuestion {
  const Question* question;
  Distribution human;
};

// Mean WD of one bootstrap replicate, or nullopt when no question had a usable resample.
std::optional<double> replicate_mean(const std::vector<PreparedQuestion>& prepared,
                                     const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& answers_by_member,
                                     const std::vector<double>& weights, std::uint64_t seed, std::uint64_t r,
                                     const MetricConfig& cfg) {
  const std::size_t n = answers_by_member.size();
  std::vector<std::vector<double>> mass(prepared.size());
  for (std::size_t k = 0; k < prepared.size(); ++k) mass[k].assign(prepared[k].question->options.size(), 0.0);
  std::vector<double> total(prepared.size(), 0.0);

  StreamRng rng(seed, r);
  for (std::size_t draw = 0; draw < n; ++draw) {
    const auto m = static_cast<std::size_t>(rng.below(n));
    const double w = weights[m];
    for (const auto& [k, option] : answers_by_member[m]) {
      mass[k][option] += w;
      total[k] += w;
    }
  }

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < prepared.size(); ++k) {
    if (!(total[k] > 0.0)) continue;
    for (double& v : mass[k]) v /= total[k];
    try {
      sum += wasserstein(prepared[k].human, Distribution{prepared[k].question->id, std::move(mass[k])},
                         *prepared[k].question, cfg);
      ++used;
    } catch (const NoDataError&) {
    }
  }
  if (used == 0) return std::nullopt;
  return sum / static_cast<double>(used);
}

}  // namespace

BootstrapReport bootstrap_lower_bound(const SurveyDataset& dataset, const GroupKey& group,
                                      std::span<const Question> questions, const BootstrapOptions& options,
                                      const MetricConfig& cfg) {
  if (options.replicates < 1) throw ValidationError(fmt::format("bootstrap: R must be >= 1, got {}", options.replicates));
  const auto& member_idx = dataset.member_indices(group);
  if (member_idx.empty()) throw NoDataError(group.label(), "*", "group has no members");

  std::vector<PreparedQuestion> prepared;
  for (const auto& q : questions) {
    try {
      Distribution human = weighted_distribution(dataset, group, q);
      (void)wasserstein(human, human, q, cfg);  // rejects all-refusal targets up front
      prepared.push_back({&q, std::move(human)});
    } catch (const NoDataError&) {
    }
  }
  if (prepared.empty()) throw NoDataError(group.label(), "*", "no listed question has data for the group");

  // Member-local view: each member's (prepared question, option) answers and weight.
  std::vector<std::size_t> local(dataset.respondents().size(), SIZE_MAX);
  for (std::size_t m = 0; m < member_idx.size(); ++m) local[member_idx[m]] = m;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> answers_by_member(member_idx.size());
  std::vector<double> weights(member_idx.size());
  for (std::size_t m = 0; m < member_idx.size(); ++m) weights[m] = dataset.respondents()[member_idx[m]].weight;
  for (std::size_t k = 0; k < prepared.size(); ++k) {
    for (const auto& a : dataset.answers(prepared[k].question->id)) {
      if (local[a.respondent] != SIZE_MAX) answers_by_member[local[a.respondent]].emplace_back(k, a.option);
    }
  }

  const auto R = static_cast<std::size_t>(options.replicates);
  std::vector<std::optional<double>> values(R);
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, R));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next.fetch_add(1); r < R; r = next.fetch_add(1)) {
      values[r] = replicate_mean(prepared, answers_by_member, weights, options.seed, r, cfg);
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  std::vector<double> means;
  means.reserve(R);
  for (const auto& v : values) {
    if (v) means.push_back(*v);
  }
  if (means.empty()) throw NoDataError(group.label(), "*", "every bootstrap replicate was empty");

  BootstrapReport report;
  report.group = group;
  report.replicates = options.replicates;
  report.seed = options.seed;
  report.questions_used = prepared.size();
  // Summed in replicate order so the result is independent of scheduling.
  report.mean_wd = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  std::sort(means.begin(), means.end());
  report.ci_low = nearest_rank_percentile(means, 2.5);
  report.ci_high = nearest_rank_percentile(means, 97.5);
  return report;
}

}  // namespace opdist
