#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opdist/metrics.hpp"
#include "opdist/survey.hpp"

namespace opdist {

struct EvalRecord {
  std::string method;
  GroupKey group;
  std::string question_id;
  std::string wave;
  double wd = 0.0;
  double kl = 0.0;
};

struct SkippedPair {
  GroupKey group;
  std::string question_id;
  std::string reason;
};

struct EvalResult {
  std::vector<EvalRecord> records;  // sorted by (group, question id)
  std::vector<SkippedPair> skipped;  // same order
};

using Predictor = std::function<Distribution(const Subpopulation&, const Question&)>;

struct EvalOptions {
  unsigned workers = 1;
};

// Scores `predictor` against the weighted human distribution of every (group, question) pair.
// Pairs without human data or whose predictor call throws are skipped with a reason.
// Throws Error if pairs were requested but no record could be produced.
EvalResult evaluate(const SurveyDataset& dataset, std::span<const GroupKey> groups, std::span<const Question> questions,
                    const Predictor& predictor, const std::string& method, const MetricConfig& cfg = {},
                    const EvalOptions& options = {});

enum class AggregateBy { Overall, Group, Wave };

struct AggregateRow {
  std::string key;  // "overall", a group label, or a wave tag
  std::size_t count = 0;
  double mean_wd = 0.0;
  double mean_kl = 0.0;
};

// Unweighted means within each bucket, rows sorted by key. Overall is the flat mean over records.
std::vector<AggregateRow> aggregate(std::span<const EvalRecord> records, AggregateBy by);

// (zero_shot - ours) / (zero_shot - lower). Throws DegenerateGapError if zero_shot <= lower.
double relative_improvement(double lower, double zero_shot, double ours);

enum class SourceKind { Human, Model };

struct DisagreementMatrix {
  std::vector<GroupKey> axis;
  std::vector<std::vector<double>> values;  // values[target][source]
  SourceKind source_kind = SourceKind::Human;
};

// question id -> distribution, per group
using GroupDistributions = std::map<GroupKey, std::map<std::string, Distribution>>;

// Entry (t, s) is the mean over questions both sides cover of WD(targets[t][q], sources[s][q]).
// Throws ValidationError when a (t, s) pair shares no question.
DisagreementMatrix intergroup_matrix(std::span<const GroupKey> axis, const GroupDistributions& targets,
                                     const GroupDistributions& sources, std::span<const Question> questions,
                                     SourceKind kind, const MetricConfig& cfg = {});

// Weighted human distributions of every group on every question it has data for.
GroupDistributions human_distributions(const SurveyDataset& dataset, std::span<const GroupKey> groups,
                                       std::span<const Question> questions);

struct ScalingFit {
  double slope = 0.0;      // in log10(wd) per log10(fraction)
  double intercept = 0.0;  // log10(wd) at fraction 1
  std::vector<std::pair<double, double>> points;
};

// Least squares through (log10 fraction, log10 wd). Needs two distinct fractions in (0, 1]
// and positive wd values; throws ValidationError otherwise.
ScalingFit fit_scaling(std::vector<std::pair<double, double>> points);

// 10^(intercept + slope * log10(fraction)); any positive fraction, so > 1 extrapolates.
double predict(const ScalingFit& fit, double fraction);

// Largest |log10 wd - fitted log10 wd| over the fit's points.
double max_log_residual(const ScalingFit& fit);

}  // namespace opdist
