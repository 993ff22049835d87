#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "opdist/metrics.hpp"
#include "opdist/survey.hpp"

namespace opdist {

struct BootstrapReport {
  GroupKey group;
  double mean_wd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t replicates = 0;  // R
  std::uint64_t seed = 0;
  std::size_t questions_used = 0;
};

nlohmann::json to_json(const BootstrapReport& report);

// Mean WD between the group's human distributions and the uniform predictor.
// Questions without data for the group are skipped; throws NoDataError if none remain.
double upper_bound(const SurveyDataset& dataset, const GroupKey& group, std::span<const Question> questions,
                   const MetricConfig& cfg = {});

struct BootstrapOptions {
  std::int64_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency
};

// Respondent-level bootstrap of the human lower bound. Each replicate resamples the group's
// members with replacement (weights travel with them), rebuilds every question's weighted
// distribution from the resampled members who answered it, and records the mean WD against the
// full-sample distribution. Replicate r draws from StreamRng(seed, r), so results do not
// depend on the thread count. The CI is the nearest-rank 2.5th/97.5th percentile.
BootstrapReport bootstrap_lower_bound(const SurveyDataset& dataset, const GroupKey& group,
                                      std::span<const Question> questions, const BootstrapOptions& options,
                                      const MetricConfig& cfg = {});

// Nearest-rank percentile of an ascending-sorted sample; pct in (0, 100].
double nearest_rank_percentile(std::span<const double> sorted, double pct);

}  // namespace opdist
