#include "opdist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "opdist/errors.hpp"

namespace opdist {

void MetricConfig::validate() const {
  if (!(kl_epsilon > 0.0 && kl_epsilon <= 1e-3)) {
    throw ValidationError(fmt::format("kl_epsilon must lie in (0, 1e-3], got {}", kl_epsilon));
  }
}

double wasserstein_ordinal(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ValidationError(fmt::format("wasserstein: length mismatch ({} vs {})", p.size(), q.size()));
  }
  double fp = 0.0;
  double fq = 0.0;
  double total = 0.0;
  // The last CDF difference is zero for equal-mass inputs and is left out.
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    fp += p[i];
    fq += q[i];
    total += std::abs(fp - fq);
  }
  return total;
}

namespace {

// Substantive probabilities reordered by ordinal and renormalized.
std::vector<double> ordinal_view(const Distribution& d, const Question& question) {
  std::vector<double> out(question.substantive_count(), 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    const auto& opt = question.options[i];
    if (opt.is_refusal) continue;
    out[static_cast<std::size_t>(*opt.ordinal - 1)] = d.probs[i];
    mass += d.probs[i];
  }
  if (!(mass > 0.0)) throw NoDataError("", question.id, "distribution has no mass on substantive options");
  for (double& v : out) v /= mass;
  return out;
}

}  // namespace

double wasserstein(const Distribution& p, const Distribution& q, const Question& question, const MetricConfig& cfg) {
  if (p.probs.size() != question.options.size() || q.probs.size() != question.options.size()) {
    throw ValidationError(fmt::format("wasserstein: distributions ({}, {}) do not match the {} options of '{}'",
                                      p.probs.size(), q.probs.size(), question.options.size(), question.id));
  }
  const std::size_t n = question.substantive_count();
  if (n < 2) throw ValidationError(fmt::format("wasserstein: question '{}' has fewer than 2 substantive options", question.id));
  const double wd = wasserstein_ordinal(ordinal_view(p, question), ordinal_view(q, question));
  return cfg.normalize_wd ? wd / static_cast<double>(n - 1) : wd;
}

double kl_forward(std::span<const double> p_human, std::span<const double> p_model, double epsilon) {
  if (p_human.size() != p_model.size()) {
    throw ValidationError(fmt::format("kl_forward: length mismatch ({} vs {})", p_human.size(), p_model.size()));
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p_human.size(); ++i) {
    if (p_human[i] <= 0.0) continue;
    kl += p_human[i] * std::log(p_human[i] / std::max(p_model[i], epsilon));
  }
  // Round-off can leave a tiny negative value for near-identical inputs.
  return std::max(kl, 0.0);
}

double kl_forward(const Distribution& p_human, const Distribution& p_model, const MetricConfig& cfg) {
  return kl_forward(p_human.probs, p_model.probs, cfg.kl_epsilon);
}

Distribution one_hot(const Distribution& p) {
  Distribution out{p.question_id, std::vector<double>(p.probs.size(), 0.0)};
  if (p.probs.empty()) return out;
  const auto best = std::max_element(p.probs.begin(), p.probs.end());  // first maximum
  out.probs[static_cast<std::size_t>(best - p.probs.begin())] = 1.0;
  return out;
}

std::vector<std::int64_t> quantize_counts(std::span<const double> p, std::int64_t n) {
  if (n < 1) throw ValidationError(fmt::format("quantize_counts: N must be >= 1, got {}", n));
  if (p.empty()) throw ValidationError("quantize_counts: empty distribution");

  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("quantize_counts: distribution has no mass");

  std::vector<std::int64_t> counts(p.size());
  std::vector<double> remainder(p.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double scaled = p[i] / total * static_cast<double>(n);
    // Absorb round-off so exact multiples (0.3 * 10) do not floor one short.
    const double base = std::floor(scaled + 1e-9);
    counts[i] = static_cast<std::int64_t>(base);
    remainder[i] = scaled - base;
    assigned += counts[i];
  }

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (assigned < n) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % order.size(), ++assigned) ++counts[order[k]];
  } else if (assigned > n) {
    // Only reachable through round-off; take back from the smallest remainders.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] < remainder[b]; });
    for (std::size_t k = 0; assigned > n; k = (k + 1) % order.size()) {
      if (counts[order[k]] > 0) {
        --counts[order[k]];
        --assigned;
      }
    }
  }
  return counts;
}

Distribution uniform(const Question& question) {
  const std::size_t n = question.substantive_count();
  if (n == 0) throw ValidationError(fmt::format("uniform: question '{}' has no substantive options", question.id));
  Distribution out{question.id, std::vector<double>(question.options.size(), 0.0)};
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    if (!question.options[i].is_refusal) out.probs[i] = 1.0 / static_cast<double>(n);
  }
  return out;
}

}  // namespace opdist
