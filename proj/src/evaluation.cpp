#include "opdist/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <set>
#include <thread>
#include <variant>

#include <fmt/format.h>

#include "opdist/errors.hpp"

namespace opdist {

EvalResult evaluate(const SurveyDataset& dataset, std::span<const GroupKey> groups, std::span<const Question> questions,
                    const Predictor& predictor, const std::string& method, const MetricConfig& cfg,
                    const EvalOptions& options) {
  // Canonical pair order so the output does not depend on input order or scheduling.
  std::vector<std::pair<GroupKey, const Question*>> pairs;
  for (const auto& g : std::set<GroupKey>(groups.begin(), groups.end())) {
    for (const auto& q : questions) pairs.emplace_back(g, &q);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->id < b.second->id;
  });

  using Outcome = std::variant<EvalRecord, SkippedPair>;
  std::vector<std::optional<Outcome>> outcomes(pairs.size());

  auto score = [&](std::size_t i) -> Outcome {
    const auto& [key, q] = pairs[i];
    Distribution human;
    try {
      human = weighted_distribution(dataset, key, *q);
    } catch (const NoDataError& e) {
      return SkippedPair{key, q->id, e.what()};
    }
    try {
      const Distribution predicted = predictor(dataset.subpopulation(key), *q);
      validate(predicted, *q);
      return EvalRecord{method, key, q->id, q->wave, wasserstein(human, predicted, *q, cfg), kl_forward(human, predicted, cfg)};
    } catch (const std::exception& e) {
      return SkippedPair{key, q->id, fmt::format("prediction failed: {}", e.what())};
    }
  };

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) outcomes[i] = score(i);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(pairs.size())));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  }

  EvalResult result;
  for (auto& o : outcomes) {
    if (auto* rec = std::get_if<EvalRecord>(&*o)) {
      result.records.push_back(std::move(*rec));
    } else {
      result.skipped.push_back(std::move(std::get<SkippedPair>(*o)));
    }
  }
  if (!pairs.empty() && result.records.empty()) {
    throw Error(fmt::format("evaluation of '{}' produced no records ({} pairs skipped; first: {})", method,
                            result.skipped.size(), result.skipped.front().reason));
  }
  return result;
}

std::vector<AggregateRow> aggregate(std::span<const EvalRecord> records, AggregateBy by) {
  std::map<std::string, AggregateRow> buckets;
  for (const auto& r : records) {
    std::string key;
    switch (by) {
      case AggregateBy::Overall:
        key = "overall";
        break;
      case AggregateBy::Group:
        key = r.group.label();
        break;
      case AggregateBy::Wave:
        key = r.wave;
        break;
    }
    auto& row = buckets[key];
    row.key = key;
    ++row.count;
    row.mean_wd += r.wd;
    row.mean_kl += r.kl;
  }
  std::vector<AggregateRow> out;
  for (auto& [key, row] : buckets) {
    row.mean_wd /= static_cast<double>(row.count);
    row.mean_kl /= static_cast<double>(row.count);
    out.push_back(std::move(row));
  }
  return out;
}

double relative_improvement(double lower, double zero_shot, double ours) {
  if (!(zero_shot > lower)) {
    throw DegenerateGapError(fmt::format("relative improvement needs zero_shot > lower (got {} <= {})", zero_shot, lower));
  }
  return (zero_shot - ours) / (zero_shot - lower);
}

GroupDistributions human_distributions(const SurveyDataset& dataset, std::span<const GroupKey> groups,
                                       std::span<const Question> questions) {
  GroupDistributions out;
  for (const auto& g : groups) {
    auto& per_question = out[g];
    for (const auto& q : questions) {
      try {
        per_question.emplace(q.id, weighted_distribution(dataset, g, q));
      } catch (const NoDataError&) {
      }
    }
  }
  return out;
}

DisagreementMatrix intergroup_matrix(std::span<const GroupKey> axis, const GroupDistributions& targets,
                                     const GroupDistributions& sources, std::span<const Question> questions,
                                     SourceKind kind, const MetricConfig& cfg) {
  DisagreementMatrix m;
  m.axis.assign(axis.begin(), axis.end());
  m.source_kind = kind;
  m.values.assign(axis.size(), std::vector<double>(axis.size(), 0.0));

  static const std::map<std::string, Distribution> kEmpty;
  auto lookup = [](const GroupDistributions& d, const GroupKey& g) -> const std::map<std::string, Distribution>& {
    auto it = d.find(g);
    return it == d.end() ? kEmpty : it->second;
  };

  for (std::size_t t = 0; t < axis.size(); ++t) {
    const auto& target = lookup(targets, axis[t]);
    for (std::size_t s = 0; s < axis.size(); ++s) {
      const auto& source = lookup(sources, axis[s]);
      double sum = 0.0;
      std::size_t used = 0;
      for (const auto& q : questions) {
        auto ti = target.find(q.id);
        auto si = source.find(q.id);
        if (ti == target.end() || si == source.end()) continue;
        try {
          sum += wasserstein(ti->second, si->second, q, cfg);
          ++used;
        } catch (const NoDataError&) {
        }
      }
      if (used == 0) {
        throw ValidationError(fmt::format("groups '{}' and '{}' share no evaluation question", axis[t].label(),
                                          axis[s].label()));
      }
      m.values[t][s] = sum / static_cast<double>(used);
    }
  }
  return m;
}

ScalingFit fit_scaling(std::vector<std::pair<double, double>> points) {
  std::set<double> fractions;
  for (const auto& [f, wd] : points) {
    if (!(f > 0.0) || f > 1.0) throw ValidationError(fmt::format("scaling fraction {} is outside (0, 1]", f));
    if (!(wd > 0.0)) throw ValidationError(fmt::format("scaling wd {} must be positive", wd));
    fractions.insert(f);
  }
  if (fractions.size() < 2) throw ValidationError("scaling fit needs at least two distinct fractions");

  const double n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [f, wd] : points) {
    mx += std::log10(f);
    my += std::log10(wd);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& [f, wd] : points) {
    const double dx = std::log10(f) - mx;
    sxy += dx * (std::log10(wd) - my);
    sxx += dx * dx;
  }
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = std::move(points);
  return fit;
}

double predict(const ScalingFit& fit, double fraction) {
  if (!(fraction > 0.0)) throw ValidationError(fmt::format("cannot predict at nonpositive fraction {}", fraction));
  return std::pow(10.0, fit.intercept + fit.slope * std::log10(fraction));
}

double max_log_residual(const ScalingFit& fit) {
  double worst = 0.0;
  for (const auto& [f, wd] : fit.points) {
    worst = std::max(worst, std::abs(std::log10(wd) - (fit.intercept + fit.slope * std::log10(f))));
  }
  return worst;
}

}  // namespace opdist
