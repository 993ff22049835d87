#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opdist/survey.hpp"

namespace opdist {

struct MetricConfig {
  // Divide WD by (n_substantive - 1) so every question's WD lies in [0, 1].
  bool normalize_wd = true;
  // Floor applied to model probabilities inside the KL log term.
  double kl_epsilon = 1e-10;

  void validate() const;  // kl_epsilon in (0, 1e-3]
};

// 1-D Wasserstein distance between two distributions already listed in ordinal order
// with unit spacing: sum_i |F_p(i) - F_q(i)|. Both must have equal mass; no renormalization.
double wasserstein_ordinal(std::span<const double> p, std::span<const double> q);

// Refusal entries are dropped and each side renormalized over substantive options before the
// distance is taken along the question's ordinal positions.
// Throws ValidationError on length mismatch or fewer than two substantive options, and
// NoDataError when either side has no substantive mass.
double wasserstein(const Distribution& p, const Distribution& q, const Question& question, const MetricConfig& cfg = {});

// Forward KL(p_H || p_theta) in nats. Terms with p_H(a) = 0 are skipped; p_theta is floored
// at cfg.kl_epsilon.
double kl_forward(const Distribution& p_human, const Distribution& p_model, const MetricConfig& cfg = {});
double kl_forward(std::span<const double> p_human, std::span<const double> p_model, double epsilon);

// Mass 1 on the argmax; ties go to the lowest index.
Distribution one_hot(const Distribution& p);

// Integer counts summing to n whose ratios track p (largest-remainder, ties to the lower index).
std::vector<std::int64_t> quantize_counts(std::span<const double> p, std::int64_t n);

// Equal mass on the substantive options, zero on refusals.
Distribution uniform(const Question& question);

}  // namespace opdist
