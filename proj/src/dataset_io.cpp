#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "opdist/errors.hpp"
#include "opdist/survey.hpp"

namespace opdist {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(std::string_view file, std::size_t line, std::string_view field, std::string_view why) {
  if (field.empty()) throw LoadError(fmt::format("{}:{}: {}", file, line, why));
  throw LoadError(fmt::format("{}:{}: field '{}': {}", file, line, field, why));
}

std::ifstream open(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot open {}", path.string()));
  return in;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const json& require(const json& obj, const char* key, std::string_view file, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(file, line, key, "missing");
  return *it;
}

std::string require_string(const json& obj, const char* key, std::string_view file, std::size_t line) {
  const json& v = require(obj, key, file, line);
  if (!v.is_string()) fail(file, line, key, "must be a string");
  return v.get<std::string>();
}

std::vector<Question> read_questions(const fs::path& path) {
  constexpr std::string_view file = "questions.jsonl";
  auto in = open(path);
  std::vector<Question> out;
  std::set<std::string> ids;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (trim(text).empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(file, line, "", fmt::format("invalid JSON: {}", e.what()));
    }
    if (!obj.is_object()) fail(file, line, "", "expected a JSON object");

    Question q;
    q.id = require_string(obj, "id", file, line);
    q.wave = require_string(obj, "wave", file, line);
    q.text = require_string(obj, "text", file, line);
    const json& opts = require(obj, "options", file, line);
    if (!opts.is_array()) fail(file, line, "options", "must be an array");
    for (std::size_t i = 0; i < opts.size(); ++i) {
      const json& o = opts[i];
      const std::string field = fmt::format("options[{}]", i);
      if (!o.is_object()) fail(file, line, field, "must be an object");
      AnswerOption opt;
      opt.letter = require_string(o, "letter", file, line);
      opt.text = require_string(o, "text", file, line);
      const json& ord = require(o, "ordinal", file, line);
      if (ord.is_number_integer()) {
        opt.ordinal = ord.get<int>();
      } else if (!ord.is_null()) {
        fail(file, line, field + ".ordinal", "must be an integer or null");
      }
      if (auto it = o.find("is_refusal"); it != o.end()) {
        if (!it->is_boolean()) fail(file, line, field + ".is_refusal", "must be a boolean");
        opt.is_refusal = it->get<bool>();
      }
      q.options.push_back(std::move(opt));
    }
    try {
      validate(q);
    } catch (const ValidationError& e) {
      fail(file, line, "options", e.what());
    }
    if (!ids.insert(q.id).second) fail(file, line, "id", fmt::format("duplicate question id '{}'", q.id));
    out.push_back(std::move(q));
  }
  return out;
}

struct RespondentTable {
  std::vector<Respondent> respondents;
  std::vector<std::string> traits;
};

RespondentTable read_respondents(const fs::path& path) {
  constexpr std::string_view file = "respondents.csv";
  auto in = open(path);
  detail::CsvReader reader(in);
  auto header = reader.next_row();
  if (!header) fail(file, 1, "", "missing header");

  std::optional<std::size_t> id_col, weight_col, wave_col;
  std::vector<std::pair<std::size_t, std::string>> trait_cols;
  for (std::size_t i = 0; i < header->size(); ++i) {
    const std::string name = trim((*header)[i]);
    if (name == "id") {
      id_col = i;
    } else if (name == "weight") {
      weight_col = i;
    } else if (name == "wave") {
      wave_col = i;
    } else if (!name.empty()) {
      trait_cols.emplace_back(i, name);
    }
  }
  if (!id_col) fail(file, 1, "id", "header column missing");
  if (!weight_col) fail(file, 1, "weight", "header column missing");

  RespondentTable table;
  for (const auto& [col, name] : trait_cols) table.traits.push_back(name);

  std::set<std::pair<std::string, std::string>> seen;
  while (auto row = reader.next_row()) {
    const std::size_t line = reader.line();
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;
    if (row->size() != header->size()) {
      fail(file, line, "", fmt::format("expected {} fields, found {}", header->size(), row->size()));
    }
    Respondent r;
    r.id = trim((*row)[*id_col]);
    if (r.id.empty()) fail(file, line, "id", "empty");
    if (wave_col) r.wave = trim((*row)[*wave_col]);

    const std::string w = trim((*row)[*weight_col]);
    double weight = 0.0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
    if (ec != std::errc() || ptr != w.data() + w.size() || !std::isfinite(weight)) {
      fail(file, line, "weight", fmt::format("'{}' is not a number", w));
    }
    if (weight < 0.0) fail(file, line, "weight", fmt::format("{} violates weight nonnegativity", w));
    r.weight = weight;

    for (const auto& [col, trait] : trait_cols) {
      std::string g = trim((*row)[col]);
      if (!g.empty()) r.memberships.insert({trait, std::move(g)});
    }
    if (!seen.emplace(r.wave, r.id).second) fail(file, line, "id", fmt::format("duplicate respondent '{}'", r.key()));
    table.respondents.push_back(std::move(r));
  }
  return table;
}

std::vector<ResponseRecord> read_responses(const fs::path& path, const std::vector<Question>& questions,
                                           const std::vector<Respondent>& respondents) {
  constexpr std::string_view file = "responses.csv";
  std::map<std::string, const Question*> qindex;
  for (const auto& q : questions) qindex.emplace(q.id, &q);
  std::set<std::pair<std::string, std::string>> known;  // (wave, id)
  for (const auto& r : respondents) known.emplace(r.wave, r.id);

  auto in = open(path);
  detail::CsvReader reader(in);
  auto header = reader.next_row();
  if (!header) fail(file, 1, "", "missing header");
  std::optional<std::size_t> rcol, qcol, lcol;
  for (std::size_t i = 0; i < header->size(); ++i) {
    const std::string name = trim((*header)[i]);
    if (name == "respondent_id") rcol = i;
    if (name == "question_id") qcol = i;
    if (name == "option_letter") lcol = i;
  }
  if (!rcol) fail(file, 1, "respondent_id", "header column missing");
  if (!qcol) fail(file, 1, "question_id", "header column missing");
  if (!lcol) fail(file, 1, "option_letter", "header column missing");

  std::vector<ResponseRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  while (auto row = reader.next_row()) {
    const std::size_t line = reader.line();
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;
    if (row->size() != header->size()) {
      fail(file, line, "", fmt::format("expected {} fields, found {}", header->size(), row->size()));
    }
    ResponseRecord rec;
    rec.respondent_id = trim((*row)[*rcol]);
    rec.question_id = trim((*row)[*qcol]);
    const std::string letter = trim((*row)[*lcol]);

    auto qit = qindex.find(rec.question_id);
    if (qit == qindex.end()) {
      fail(file, line, "question_id",
           fmt::format("respondent '{}' references unknown question '{}'", rec.respondent_id, rec.question_id));
    }
    const Question& q = *qit->second;
    if (!known.contains({q.wave, rec.respondent_id}) && !known.contains({std::string(), rec.respondent_id})) {
      fail(file, line, "respondent_id",
           fmt::format("question '{}' references unknown respondent '{}'", rec.question_id, rec.respondent_id));
    }
    auto idx = q.index_of(letter);
    if (!idx) {
      fail(file, line, "option_letter", fmt::format("'{}' is not an option of question '{}'", letter, q.id));
    }
    rec.option_index = *idx;
    if (!seen.emplace(rec.respondent_id, rec.question_id).second) {
      fail(file, line, "", fmt::format("respondent '{}' answered '{}' twice", rec.respondent_id, rec.question_id));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

struct DeclaredGroup {
  GroupKey key;
  std::map<PromptStyle, std::string> steering;
};

std::vector<DeclaredGroup> read_declared_groups(const fs::path& path) {
  constexpr std::string_view file = "subpopulations.jsonl";
  std::vector<DeclaredGroup> out;
  if (!fs::exists(path)) return out;
  auto in = open(path);
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (trim(text).empty()) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(file, line, "", fmt::format("invalid JSON: {}", e.what()));
    }
    if (!obj.is_object()) fail(file, line, "", "expected a JSON object");
    DeclaredGroup g;
    g.key.trait = require_string(obj, "trait", file, line);
    g.key.group = require_string(obj, "group", file, line);
    if (g.key.group.empty()) fail(file, line, "group", "empty");
    if (auto it = obj.find("steering"); it != obj.end()) {
      if (!it->is_object()) fail(file, line, "steering", "must be an object");
      for (const auto& [style, value] : it->items()) {
        PromptStyle s;
        try {
          s = parse_prompt_style(style);
        } catch (const ValidationError& e) {
          fail(file, line, "steering", e.what());
        }
        if (!value.is_string()) fail(file, line, "steering." + style, "must be a string");
        g.steering[s] = value.get<std::string>();
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string read_source_family(const fs::path& path) {
  if (!fs::exists(path)) return "unknown";
  auto in = open(path);
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(fmt::format("meta.json: invalid JSON: {}", e.what()));
  }
  if (auto it = meta.find("source_family"); it != meta.end() && it->is_string()) return it->get<std::string>();
  return "unknown";
}

}  // namespace

SurveyDataset load_dataset(const fs::path& root) {
  for (const char* name : {"questions.jsonl", "respondents.csv", "responses.csv"}) {
    if (!fs::exists(root / name)) throw LoadError(fmt::format("{}: required file {} not found", root.string(), name));
  }
  auto questions = read_questions(root / "questions.jsonl");
  auto table = read_respondents(root / "respondents.csv");
  auto responses = read_responses(root / "responses.csv", questions, table.respondents);
  auto declared = read_declared_groups(root / "subpopulations.jsonl");

  // Group order per trait: declaration order first, then the remaining observed groups sorted.
  std::map<std::string, std::vector<std::string>> trait_groups;
  std::vector<std::string> trait_order;
  std::set<GroupKey> known;
  auto add = [&](const GroupKey& k) {
    if (!known.insert(k).second) return;
    auto [it, inserted] = trait_groups.try_emplace(k.trait);
    if (inserted) trait_order.push_back(k.trait);
    it->second.push_back(k.group);
  };
  for (const auto& d : declared) add(d.key);
  for (const auto& trait : table.traits) {
    if (trait_groups.try_emplace(trait).second) trait_order.push_back(trait);
  }
  std::set<GroupKey> observed;
  for (const auto& r : table.respondents) observed.insert(r.memberships.begin(), r.memberships.end());
  for (const auto& k : observed) add(k);

  std::map<GroupKey, std::map<PromptStyle, std::string>> overrides;
  for (auto& d : declared) overrides[d.key] = std::move(d.steering);

  std::vector<Subpopulation> subpops;
  std::set<std::string> emitted_traits;
  auto emit_trait = [&](const std::string& trait) {
    if (!emitted_traits.insert(trait).second) return;
    const auto& groups = trait_groups[trait];
    for (const auto& g : groups) {
      Subpopulation s{trait, g, default_steering_texts(trait, g, groups)};
      if (auto it = overrides.find(s.key()); it != overrides.end()) {
        for (auto& [style, text] : it->second) s.steering_texts[style] = text;
      }
      subpops.push_back(std::move(s));
    }
  };
  for (const auto& t : trait_order) emit_trait(t);

  try {
    return SurveyDataset(std::move(questions), std::move(table.respondents), std::move(responses), std::move(subpops),
                         read_source_family(root / "meta.json"));
  } catch (const ValidationError& e) {
    throw LoadError(fmt::format("{}: {}", root.string(), e.what()));
  }
}

}  // namespace opdist
