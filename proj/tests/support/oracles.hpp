#pragma once

// Independent reference implementations used only by tests. None of these call into the
// library's metric code.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oracle {

// Minimum-cost transport between supplies p and demands q placed at `positions`, cost |x_i - x_j|,
// solved as a min-cost flow with successive shortest paths (Bellman-Ford).
double transport_cost(std::span<const double> p, std::span<const double> q, std::span<const double> positions);

// Raw weighted tallies: for every answer row by a respondent in the group, add its weight to the
// chosen option; then divide by the total.
struct Row {
  std::string respondent;
  std::size_t option;
};
std::vector<double> weighted_tally(std::span<const Row> rows, std::span<const std::string> group_members,
                                   std::span<const std::pair<std::string, double>> weights, std::size_t n_options);

// Smallest achievable max_i |c_i / N - p_i| over all nonnegative integer c with sum N (enumerated).
double best_quantization_deviation(std::span<const double> p, std::int64_t n);

double cosine(std::span<const double> u, std::span<const double> v);

// Ids of the k most similar pool entries, most similar first, ties by id ascending, computed by
// sorting every (similarity, id) pair.
std::vector<std::string> top_k_by_cosine(std::span<const double> target,
                                         std::span<const std::pair<std::string, std::vector<double>>> pool,
                                         std::size_t k);

}  // namespace oracle
