#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "opdist/evaluation.hpp"

namespace opdist {

// method,trait,group,question_id,wave,wd,kl with shortest round-trip numbers.
std::string records_csv(std::span<const EvalRecord> records);
std::vector<EvalRecord> parse_records_csv(const std::string& text);

nlohmann::json to_json(std::span<const AggregateRow> rows);
nlohmann::json to_json(const DisagreementMatrix& matrix);
nlohmann::json to_json(const ScalingFit& fit);
nlohmann::json to_json(std::span<const SkippedPair> skipped);

// Heatmap of a disagreement matrix; rows are targets, columns sources.
std::string heatmap_svg(const DisagreementMatrix& matrix, const std::string& title);

// Log-log scatter of the fit's points with the fitted line, extended to any extra fractions.
std::string scaling_svg(const ScalingFit& fit, std::span<const double> extra_fractions = {});

}  // namespace opdist
