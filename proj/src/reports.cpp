#include "opdist/reports.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "csv.hpp"
#include "opdist/errors.hpp"

namespace opdist {

using nlohmann::json;

std::string records_csv(std::span<const EvalRecord> records) {
  std::string out = "method,trait,group,question_id,wave,wd,kl\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{},{},{}\n", detail::csv_escape(r.method), detail::csv_escape(r.group.trait),
                       detail::csv_escape(r.group.group), detail::csv_escape(r.question_id), detail::csv_escape(r.wave),
                       r.wd, r.kl);
  }
  return out;
}

std::vector<EvalRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  detail::CsvReader reader(in);
  auto header = reader.next_row();
  if (!header || header->size() != 7 || (*header)[0] != "method") throw LoadError("records csv: unexpected header");
  std::vector<EvalRecord> out;
  while (auto row = reader.next_row()) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    if (row->size() != 7) throw LoadError(fmt::format("records csv:{}: expected 7 fields", reader.line()));
    EvalRecord r{(*row)[0], {(*row)[1], (*row)[2]}, (*row)[3], (*row)[4], std::stod((*row)[5]), std::stod((*row)[6])};
    out.push_back(std::move(r));
  }
  return out;
}

json to_json(std::span<const AggregateRow> rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"key", r.key}, {"count", r.count}, {"mean_wd", r.mean_wd}, {"mean_kl", r.mean_kl}});
  return out;
}

json to_json(const DisagreementMatrix& m) {
  json axis = json::array();
  for (const auto& g : m.axis) axis.push_back(g.label());
  return {{"axis", axis}, {"values", m.values}, {"source_kind", m.source_kind == SourceKind::Human ? "human" : "model"}};
}

json to_json(const ScalingFit& fit) {
  json points = json::array();
  for (const auto& [f, wd] : fit.points) points.push_back({f, wd});
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"points", points}};
}

json to_json(std::span<const SkippedPair> skipped) {
  json out = json::array();
  for (const auto& s : skipped) out.push_back({{"group", s.group.label()}, {"question_id", s.question_id}, {"reason", s.reason}});
  return out;
}

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string heatmap_svg(const DisagreementMatrix& m, const std::string& title) {
  constexpr int kCell = 64;
  constexpr int kLeft = 220;
  constexpr int kTop = 60;
  const int n = static_cast<int>(m.axis.size());
  const int width = kLeft + n * kCell + 20;
  const int height = kTop + n * kCell + 200;

  double hi = 0.0;
  for (const auto& row : m.values) {
    for (double v : row) hi = std::max(hi, v);
  }
  if (hi <= 0.0) hi = 1.0;

  std::string out = fmt::format(
      R"x(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)x"
      "\n",
      width, height);
  out += fmt::format(R"x(<text x="{}" y="24" font-size="16">{}</text>)x"
                     "\n",
                     kLeft, escape_xml(title));
  for (int t = 0; t < n; ++t) {
    out += fmt::format(R"x(<text x="{}" y="{}" text-anchor="end">{}</text>)x"
                       "\n",
                       kLeft - 8, kTop + t * kCell + kCell / 2 + 4, escape_xml(m.axis[t].group));
    for (int s = 0; s < n; ++s) {
      const double v = m.values[t][s];
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v / hi)));
      out += fmt::format(R"x(<rect x="{}" y="{}" width="{}" height="{}" fill="rgb(255,{},{})" stroke="#888"/>)x"
                         "\n",
                         kLeft + s * kCell, kTop + t * kCell, kCell, kCell, shade, shade);
      out += fmt::format(R"x(<text x="{}" y="{}" text-anchor="middle">{:.3f}</text>)x"
                         "\n",
                         kLeft + s * kCell + kCell / 2, kTop + t * kCell + kCell / 2 + 4, v);
    }
  }
  for (int s = 0; s < n; ++s) {
    const int x = kLeft + s * kCell + kCell / 2;
    const int y = kTop + n * kCell + 10;
    out += fmt::format(R"x(<text x="{}" y="{}" transform="rotate(60 {} {})">{}</text>)x"
                       "\n",
                       x, y, x, y, escape_xml(m.axis[s].group));
  }
  out += "</svg>\n";
  return out;
}

std::string scaling_svg(const ScalingFit& fit, std::span<const double> extra_fractions) {
  constexpr double kW = 480;
  constexpr double kH = 320;
  constexpr double kPad = 50;

  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [f, wd] : fit.points) {
    xs.push_back(std::log10(f));
    ys.push_back(std::log10(wd));
  }
  for (double f : extra_fractions) {
    if (f > 0.0) {
      xs.push_back(std::log10(f));
      ys.push_back(std::log10(predict(fit, f)));
    }
  }
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double x0 = *xmin_it - 0.05;
  const double x1 = *xmax_it + 0.05;
  const double y0 = *ymin_it - 0.05;
  const double y1 = *ymax_it + 0.05;
  auto px = [&](double x) { return kPad + (x - x0) / (x1 - x0) * (kW - 2 * kPad); };
  auto py = [&](double y) { return kH - kPad - (y - y0) / (y1 - y0) * (kH - 2 * kPad); };

  std::string out = fmt::format(
      R"x(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)x"
      "\n",
      kW, kH);
  out += fmt::format(R"x(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>)x"
                     "\n",
                     kPad, kH - kPad, kW - kPad);
  out += fmt::format(R"x(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)x"
                     "\n",
                     kPad, kPad, kH - kPad);
  out += fmt::format(R"x(<text x="{}" y="{}" text-anchor="middle">log10 fraction of training data</text>)x"
                     "\n",
                     kW / 2, kH - 12);
  out += fmt::format(R"x(<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">log10 WD</text>)x"
                     "\n",
                     kH / 2, kH / 2);
  const double lx0 = x0;
  const double lx1 = x1;
  out += fmt::format(
      R"x(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="#c33" stroke-dasharray="6,4"/>)x"
      "\n",
      px(lx0), py(fit.intercept + fit.slope * lx0), px(lx1), py(fit.intercept + fit.slope * lx1));
  for (std::size_t i = 0; i < fit.points.size(); ++i) {
    out += fmt::format(R"x(<circle cx="{:.2f}" cy="{:.2f}" r="4" fill="#236"/>)x"
                       "\n",
                       px(xs[i]), py(ys[i]));
  }
  out += fmt::format(R"x(<text x="{}" y="20">slope {:.4f}, intercept {:.4f}</text>)x"
                     "\n",
                     kPad, fit.slope, fit.intercept);
  out += "</svg>\n";
  return out;
}

}  // namespace opdist
