#include "opdist/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "opdist/errors.hpp"

namespace opdist {

namespace fs = std::filesystem;

namespace {

class TomlReader {
 public:
  explicit TomlReader(const toml::table& root) : root_(root) {}

  void read(std::string_view path, std::string& out) {
    if (auto n = node(path)) {
      if (!n.is_string()) type_error(path, "a string");
      out = *n.value<std::string>();
    }
  }
  void read(std::string_view path, fs::path& out) {
    std::string s = out.string();
    read(path, s);
    out = s;
  }
  void read(std::string_view path, bool& out) {
    if (auto n = node(path)) {
      if (!n.is_boolean()) type_error(path, "a boolean");
      out = *n.value<bool>();
    }
  }
  void read(std::string_view path, double& out) {
    if (auto n = node(path)) {
      if (!n.is_number()) type_error(path, "a number");
      out = *n.value<double>();
    }
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void read(std::string_view path, Int& out) {
    if (auto n = node(path)) {
      if (!n.is_integer()) type_error(path, "an integer");
      const std::int64_t v = *n.value<std::int64_t>();
      if (std::is_unsigned_v<Int> && v < 0) throw ConfigError(std::string(path), "must be nonnegative");
      out = static_cast<Int>(v);
    }
  }
  void read(std::string_view path, std::vector<std::string>& out) {
    if (auto n = node(path)) {
      const auto* arr = n.as_array();
      if (!arr) type_error(path, "an array of strings");
      out.clear();
      for (const auto& e : *arr) {
        if (!e.is_string()) type_error(path, "an array of strings");
        out.push_back(*e.value<std::string>());
      }
    }
  }
  void read(std::string_view path, std::vector<double>& out) {
    if (auto n = node(path)) {
      const auto* arr = n.as_array();
      if (!arr) type_error(path, "an array of numbers");
      out.clear();
      for (const auto& e : *arr) {
        if (!e.is_number()) type_error(path, "an array of numbers");
        out.push_back(*e.value<double>());
      }
    }
  }
  void read(std::string_view path, std::vector<std::pair<double, double>>& out) {
    if (auto n = node(path)) {
      const auto* arr = n.as_array();
      if (!arr) type_error(path, "an array of [fraction, wd] pairs");
      out.clear();
      for (const auto& e : *arr) {
        const auto* pair = e.as_array();
        if (!pair || pair->size() != 2 || !(*pair)[0].is_number() || !(*pair)[1].is_number()) {
          type_error(path, "an array of [fraction, wd] pairs");
        }
        out.emplace_back(*(*pair)[0].value<double>(), *(*pair)[1].value<double>());
      }
    }
  }

  // Any leaf key that no read() asked for.
  void reject_unknown() const { walk(root_, ""); }

 private:
  toml::node_view<const toml::node> node(std::string_view path) {
    known_.insert(std::string(path));
    return root_.at_path(path);
  }

  [[noreturn]] static void type_error(std::string_view path, std::string_view expected) {
    throw ConfigError(std::string(path), fmt::format("expected {}", expected));
  }

  void walk(const toml::table& table, const std::string& prefix) const {
    for (const auto& [key, value] : table) {
      const std::string path = prefix.empty() ? std::string(key.str()) : prefix + "." + std::string(key.str());
      if (known_.contains(path)) continue;
      if (const auto* sub = value.as_table()) {
        walk(*sub, path);
      } else {
        throw ConfigError(path, "unknown key");
      }
    }
  }

  const toml::table& root_;
  std::set<std::string> known_;
};

void read_endpoint(TomlReader& r, const std::string& section, Endpoint& e) {
  r.read(section + ".url", e.base_url);
  r.read(section + ".model", e.model);
  r.read(section + ".tag", e.tag);
  r.read(section + ".top_logprobs", e.top_logprobs);
  r.read(section + ".api_key_env", e.api_key_env);
  std::int64_t timeout = e.timeout.count();
  r.read(section + ".timeout_s", timeout);
  e.timeout = std::chrono::seconds(timeout);
  r.read(section + ".max_attempts", e.retry.max_attempts);
  std::int64_t backoff = e.retry.initial_backoff.count();
  r.read(section + ".backoff_ms", backoff);
  e.retry.initial_backoff = std::chrono::milliseconds(backoff);
}

}  // namespace

void apply_toml(RunConfig& cfg, std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError(fmt::format("line {}", where.line), std::string(e.description()));
  }
  TomlReader r(root);
  r.read("dataset", cfg.dataset);
  r.read("output_dir", cfg.output_dir);

  r.read("metric.normalize_wd", cfg.metric.normalize_wd);
  r.read("metric.kl_epsilon", cfg.metric.kl_epsilon);

  std::string style(to_string(cfg.style));
  r.read("prompt.style", style);
  try {
    cfg.style = parse_prompt_style(style);
  } catch (const ValidationError& e) {
    throw ConfigError("prompt.style", e.what());
  }
  r.read("prompt.fewshot_k", cfg.fewshot.k);
  r.read("prompt.decimals", cfg.fewshot.decimals);

  r.read("bootstrap.R", cfg.bootstrap_replicates);
  r.read("bootstrap.seed", cfg.bootstrap_seed);
  r.read("bootstrap.threads", cfg.bootstrap_threads);

  read_endpoint(r, "model", cfg.model);
  read_endpoint(r, "embedding", cfg.embedding);
  r.read("client.cache_dir", cfg.cache_dir);
  r.read("client.max_in_flight", cfg.max_in_flight);

  r.read("select.groups", cfg.groups);
  r.read("select.waves", cfg.waves);
  r.read("select.questions", cfg.question_ids);

  r.read("eval.method", cfg.eval_method);
  r.read("eval.predictor", cfg.eval_predictor);
  r.read("eval.workers", cfg.eval_workers);
  r.read("eval.fewshot_pool", cfg.fewshot_pool);
  r.read("eval.max_tokens", cfg.fewshot_max_tokens);

  r.read("disagree.trait", cfg.disagree_trait);
  r.read("disagree.groups", cfg.disagree_groups);
  r.read("disagree.source", cfg.disagree_source);

  r.read("export.mode", cfg.export_mode);
  r.read("export.file", cfg.export_file);
  r.read("export.train_fraction", cfg.train_fraction);
  r.read("export.split_seed", cfg.split_seed);

  r.read("overlap.dataset", cfg.overlap_dataset);
  r.read("overlap.threshold", cfg.overlap_threshold);

  r.read("scaling.points", cfg.scaling_points);
  r.read("scaling.predict_at", cfg.scaling_predict_at);

  r.reject_unknown();
}

void apply_toml_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_toml(cfg, ss.str());
}

void validate(const RunConfig& cfg, std::string_view command) {
  auto require_dir = [](const fs::path& p, const std::string& field) {
    if (p.empty()) throw ConfigError(field, "required");
    if (!fs::is_directory(p)) throw ConfigError(field, fmt::format("'{}' is not a directory", p.string()));
  };
  auto require_endpoint = [](const Endpoint& e, const std::string& section) {
    if (e.base_url.empty()) throw ConfigError(section + ".url", "required");
    if (e.base_url.find("://") == std::string::npos) throw ConfigError(section + ".url", "must include a scheme");
    if (e.model.empty()) throw ConfigError(section + ".model", "required");
    if (e.top_logprobs < 1) throw ConfigError(section + ".top_logprobs", "must be >= 1");
    if (e.retry.max_attempts < 1) throw ConfigError(section + ".max_attempts", "must be >= 1");
  };

  try {
    cfg.metric.validate();
  } catch (const ValidationError& e) {
    throw ConfigError("metric.kl_epsilon", e.what());
  }
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "required");
  if (cfg.max_in_flight < 1) throw ConfigError("client.max_in_flight", "must be >= 1");
  for (const auto& g : cfg.groups) {
    try {
      (void)GroupKey::parse(g);
    } catch (const ValidationError& e) {
      throw ConfigError("select.groups", e.what());
    }
  }
  if (command != "scaling") require_dir(cfg.dataset, "dataset");

  if (command == "bounds" && cfg.bootstrap_replicates < 1) throw ConfigError("bootstrap.R", "must be >= 1");
  if (command == "eval") {
    static const std::set<std::string> kPredictors = {"model", "fewshot", "uniform", "human"};
    if (!kPredictors.contains(cfg.eval_predictor)) {
      throw ConfigError("eval.predictor", "must be one of model, fewshot, uniform, human");
    }
    if (cfg.eval_method.empty()) throw ConfigError("eval.method", "required");
    if (cfg.eval_workers < 1) throw ConfigError("eval.workers", "must be >= 1");
    if (cfg.eval_predictor == "model" || cfg.eval_predictor == "fewshot") require_endpoint(cfg.model, "model");
    if (cfg.eval_predictor == "fewshot") {
      require_endpoint(cfg.embedding, "embedding");
      try {
        cfg.fewshot.validate();
      } catch (const ValidationError& e) {
        throw ConfigError("prompt.fewshot_k", e.what());
      }
      if (!cfg.fewshot_pool.empty()) require_dir(cfg.fewshot_pool, "eval.fewshot_pool");
    }
  }
  if (command == "disagree") {
    if (cfg.disagree_trait.empty() && cfg.disagree_groups.size() < 2) {
      throw ConfigError("disagree.trait", "required unless disagree.groups lists at least two groups");
    }
    if (cfg.disagree_source != "human" && cfg.disagree_source != "model") {
      throw ConfigError("disagree.source", "must be human or model");
    }
    if (cfg.disagree_source == "model") require_endpoint(cfg.model, "model");
  }
  if (command == "export") {
    try {
      (void)ExportMode::parse(cfg.export_mode);
    } catch (const ValidationError& e) {
      throw ConfigError("export.mode", e.what());
    }
    if (!(cfg.train_fraction > 0.0) || cfg.train_fraction > 1.0) {
      throw ConfigError("export.train_fraction", "must lie in (0, 1]");
    }
    if (cfg.export_file.empty()) throw ConfigError("export.file", "required");
  }
  if (command == "overlap") {
    require_dir(cfg.overlap_dataset, "overlap.dataset");
    require_endpoint(cfg.embedding, "embedding");
    if (!(cfg.overlap_threshold >= -1.0 && cfg.overlap_threshold <= 1.0)) {
      throw ConfigError("overlap.threshold", "must lie in [-1, 1]");
    }
  }
  if (command == "scaling") {
    if (cfg.scaling_points.size() < 2) throw ConfigError("scaling.points", "needs at least two points");
    for (const auto& [f, wd] : cfg.scaling_points) {
      if (!(f > 0.0) || f > 1.0) throw ConfigError("scaling.points", fmt::format("fraction {} outside (0, 1]", f));
      if (!(wd > 0.0)) throw ConfigError("scaling.points", fmt::format("wd {} must be positive", wd));
    }
    for (double f : cfg.scaling_predict_at) {
      if (!(f > 0.0)) throw ConfigError("scaling.predict_at", "fractions must be positive");
    }
  }
}

namespace {

toml::table endpoint_table(const Endpoint& e) {
  return toml::table{{"url", e.base_url},
                     {"model", e.model},
                     {"tag", e.tag},
                     {"top_logprobs", e.top_logprobs},
                     {"api_key_env", e.api_key_env},
                     {"timeout_s", static_cast<std::int64_t>(e.timeout.count())},
                     {"max_attempts", e.retry.max_attempts},
                     {"backoff_ms", static_cast<std::int64_t>(e.retry.initial_backoff.count())}};
}

template <typename T>
toml::array to_array(const std::vector<T>& v) {
  toml::array a;
  for (const auto& x : v) a.push_back(x);
  return a;
}

toml::table to_table(const RunConfig& c) {
  toml::array points;
  for (const auto& [f, wd] : c.scaling_points) points.push_back(toml::array{f, wd});
  return toml::table{
      {"dataset", c.dataset.string()},
      {"output_dir", c.output_dir.string()},
      {"metric", toml::table{{"normalize_wd", c.metric.normalize_wd}, {"kl_epsilon", c.metric.kl_epsilon}}},
      {"prompt", toml::table{{"style", std::string(to_string(c.style))},
                             {"fewshot_k", c.fewshot.k},
                             {"decimals", c.fewshot.decimals}}},
      {"bootstrap", toml::table{{"R", c.bootstrap_replicates},
                                {"seed", static_cast<std::int64_t>(c.bootstrap_seed)},
                                {"threads", static_cast<std::int64_t>(c.bootstrap_threads)}}},
      {"model", endpoint_table(c.model)},
      {"embedding", endpoint_table(c.embedding)},
      {"client", toml::table{{"cache_dir", c.cache_dir.string()},
                             {"max_in_flight", static_cast<std::int64_t>(c.max_in_flight)}}},
      {"select", toml::table{{"groups", to_array(c.groups)},
                             {"waves", to_array(c.waves)},
                             {"questions", to_array(c.question_ids)}}},
      {"eval", toml::table{{"method", c.eval_method},
                           {"predictor", c.eval_predictor},
                           {"workers", static_cast<std::int64_t>(c.eval_workers)},
                           {"fewshot_pool", c.fewshot_pool.string()},
                           {"max_tokens", c.fewshot_max_tokens}}},
      {"disagree", toml::table{{"trait", c.disagree_trait},
                               {"groups", to_array(c.disagree_groups)},
                               {"source", c.disagree_source}}},
      {"export", toml::table{{"mode", c.export_mode},
                             {"file", c.export_file},
                             {"train_fraction", c.train_fraction},
                             {"split_seed", static_cast<std::int64_t>(c.split_seed)}}},
      {"overlap", toml::table{{"dataset", c.overlap_dataset.string()}, {"threshold", c.overlap_threshold}}},
      {"scaling", toml::table{{"points", points}, {"predict_at", to_array(c.scaling_predict_at)}}},
  };
}

}  // namespace

std::string to_toml(const RunConfig& cfg) {
  std::ostringstream out;
  out << to_table(cfg) << '\n';
  return out.str();
}

nlohmann::json to_json(const RunConfig& cfg) {
  std::ostringstream out;
  out << toml::json_formatter{to_table(cfg)};
  return nlohmann::json::parse(out.str());
}

}  // namespace opdist
