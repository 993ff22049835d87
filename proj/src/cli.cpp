#include "opdist/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "opdist/bounds.hpp"
#include "opdist/config.hpp"
#include "opdist/dataset_ops.hpp"
#include "opdist/digest.hpp"
#include "opdist/errors.hpp"
#include "opdist/evaluation.hpp"
#include "opdist/model_client.hpp"
#include "opdist/prompting.hpp"
#include "opdist/reports.hpp"

namespace opdist {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// Flag values land in RunConfig only when given, after the config file was applied.
class Overrides {
 public:
  template <typename T, typename Set>
  CLI::Option* option(CLI::App* app, const std::string& name, Set set, const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    setters_.push_back([opt, value, set](RunConfig& cfg) {
      if (opt->count() > 0) set(cfg, *value);
    });
    return opt;
  }

  template <typename Set>
  CLI::Option* flag(CLI::App* app, const std::string& name, Set set, const std::string& desc) {
    CLI::Option* opt = app->add_flag(name, desc);
    setters_.push_back([opt, set](RunConfig& cfg) {
      if (opt->count() > 0) set(cfg);
    });
    return opt;
  }

  void apply(RunConfig& cfg) const {
    for (const auto& s : setters_) s(cfg);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> setters_;
};

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

// Artifact writer plus the run manifest.
class Run {
 public:
  Run(std::string command, const RunConfig& cfg, std::ostream& err)
      : command_(std::move(command)), cfg_(cfg), err_(err), started_(utc_now()) {
    fs::create_directories(cfg_.output_dir);
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = cfg_.output_dir / name;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    artifacts_.push_back({{"path", name}, {"sha256", sha256_hex(content)}});
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  // For files produced elsewhere (export): hash what is on disk.
  void record(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    artifacts_.push_back({{"path", fs::relative(path, cfg_.output_dir).generic_string()}, {"sha256", sha256_hex(ss.str())}});
  }

  void warn(const std::string& message) {
    err_ << "warning: " << message << '\n';
    warnings_.push_back(message);
  }

  void finish(const ClientStats& stats) {
    const std::string toml = to_toml(cfg_);
    json manifest = {{"command", command_},
                     {"version", kVersion},
                     {"config", to_json(cfg_)},
                     {"config_sha256", sha256_hex(toml)},
                     {"started_at", started_},
                     {"finished_at", utc_now()},
                     {"cache", {{"network_requests", stats.network_requests},
                                {"cache_hits", stats.cache_hits},
                                {"cache_misses", stats.cache_misses}}},
                     {"artifacts", artifacts_},
                     {"warnings", warnings_}};
    write_plain(command_ + ".config.toml", toml);
    write_plain(command_ + ".manifest.json", manifest.dump(2) + "\n");
  }

 private:
  void write_plain(const std::string& name, const std::string& content) {
    std::ofstream out(cfg_.output_dir / name, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(fmt::format("cannot write {}", (cfg_.output_dir / name).string()));
  }

  std::string command_;
  const RunConfig& cfg_;
  std::ostream& err_;
  std::string started_;
  json artifacts_ = json::array();
  std::vector<std::string> warnings_;
};

std::vector<Question> select_questions(const SurveyDataset& ds, const RunConfig& cfg) {
  std::set<std::string> waves(cfg.waves.begin(), cfg.waves.end());
  std::set<std::string> ids(cfg.question_ids.begin(), cfg.question_ids.end());
  std::set<std::string> known_waves;
  for (const auto& q : ds.questions()) known_waves.insert(q.wave);
  for (const auto& w : waves) {
    if (!known_waves.contains(w)) throw ConfigError("select.waves", fmt::format("unknown wave '{}'", w));
  }
  for (const auto& id : ids) {
    if (!ds.find_question(id)) throw ConfigError("select.questions", fmt::format("unknown question '{}'", id));
  }
  std::vector<Question> out;
  for (const auto& q : ds.questions()) {
    if (!waves.empty() && !waves.contains(q.wave)) continue;
    if (!ids.empty() && !ids.contains(q.id)) continue;
    out.push_back(q);
  }
  if (out.empty()) throw ConfigError("select", "selection matches no question");
  return out;
}

std::vector<GroupKey> select_groups(const SurveyDataset& ds, const std::vector<std::string>& labels,
                                    const std::string& field) {
  std::vector<GroupKey> out;
  if (labels.empty()) {
    for (const auto& s : ds.subpopulations()) out.push_back(s.key());
    return out;
  }
  for (const auto& label : labels) {
    GroupKey key;
    try {
      key = GroupKey::parse(label);
    } catch (const ValidationError& e) {
      throw ConfigError(field, e.what());
    }
    if (!ds.find_subpopulation(key)) throw ConfigError(field, fmt::format("unknown group '{}'", label));
    out.push_back(key);
  }
  return out;
}

std::unique_ptr<ModelClient> make_client(const RunConfig& cfg) {
  return std::make_unique<ModelClient>(ModelClient::Options{cfg.effective_cache_dir(), cfg.max_in_flight});
}

Predictor model_predictor(ModelClient& client, const Endpoint& endpoint, PromptStyle style) {
  return [&client, endpoint, style](const Subpopulation& sub, const Question& q) {
    const auto result = client.fetch_option_logprobs(endpoint, build_prompt(sub, q, style), q.letters());
    return extract_distribution(result, q);
  };
}

// ---- commands ----

void cmd_ingest(const RunConfig& cfg, Run& run) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  std::map<std::string, std::size_t> per_wave;
  for (const auto& q : ds.questions()) ++per_wave[q.wave];
  json groups = json::array();
  for (const auto& s : ds.subpopulations()) {
    groups.push_back({{"trait", s.trait}, {"group", s.group}, {"members", ds.member_indices(s.key()).size()}});
    if (ds.member_indices(s.key()).empty()) run.warn(fmt::format("group '{}' has no members", s.label()));
  }
  run.write_json("dataset_summary.json", {{"source_family", ds.source_family()},
                                          {"questions", ds.questions().size()},
                                          {"respondents", ds.respondents().size()},
                                          {"responses", ds.responses().size()},
                                          {"questions_per_wave", per_wave},
                                          {"subpopulations", groups}});
}

void cmd_dists(const RunConfig& cfg, Run& run) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  const auto questions = select_questions(ds, cfg);
  const auto groups = select_groups(ds, cfg.groups, "select.groups");
  std::string csv = "trait,group,question_id,wave,letter,probability\n";
  std::size_t skipped = 0;
  for (const auto& g : groups) {
    for (const auto& q : questions) {
      Distribution d;
      try {
        d = weighted_distribution(ds, g, q);
      } catch (const NoDataError&) {
        ++skipped;
        continue;
      }
      for (std::size_t i = 0; i < q.options.size(); ++i) {
        csv += fmt::format("{},{},{},{},{},{}\n", detail::csv_escape(g.trait), detail::csv_escape(g.group),
                           detail::csv_escape(q.id), detail::csv_escape(q.wave), q.options[i].letter, d.probs[i]);
      }
    }
  }
  if (skipped > 0) run.warn(fmt::format("{} (group, question) pairs have no responses", skipped));
  run.write("distributions.csv", csv);
}

void cmd_bounds(const RunConfig& cfg, Run& run) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  const auto questions = select_questions(ds, cfg);
  const auto groups = select_groups(ds, cfg.groups, "select.groups");
  const BootstrapOptions opts{cfg.bootstrap_replicates, cfg.bootstrap_seed, cfg.bootstrap_threads};

  json rows = json::array();
  double upper_sum = 0.0;
  double lower_sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    try {
      const double upper = upper_bound(ds, g, questions, cfg.metric);
      const BootstrapReport lower = bootstrap_lower_bound(ds, g, questions, opts, cfg.metric);
      rows.push_back({{"trait", g.trait}, {"group", g.group}, {"upper_bound", upper}, {"lower_bound", to_json(lower)}});
      upper_sum += upper;
      lower_sum += lower.mean_wd;
      ++n;
    } catch (const NoDataError& e) {
      run.warn(fmt::format("skipping group '{}': {}", g.label(), e.what()));
    }
  }
  if (n == 0) throw Error("no group has data on the selected questions");
  run.write_json("bounds.json", {{"replicates", cfg.bootstrap_replicates},
                                 {"seed", cfg.bootstrap_seed},
                                 {"groups", rows},
                                 {"overall",
                                  {{"groups", n},
                                   {"upper_bound", upper_sum / static_cast<double>(n)},
                                   {"lower_bound", lower_sum / static_cast<double>(n)}}}});
}

Predictor fewshot_predictor(const RunConfig& cfg, ModelClient& client, const SurveyDataset& /*ds*/,
                            std::span<const Question> targets, const SurveyDataset& pool_ds,
                            std::shared_ptr<EmbeddingMap> embeddings) {
  auto embed = [&](const Question& q) {
    if (embeddings->contains(q.id)) return;
    auto v = client.fetch_embedding(cfg.embedding, q.text);
    v.id = q.id;
    embeddings->emplace(q.id, std::move(v));
  };
  for (const auto& q : targets) embed(q);
  for (const auto& q : pool_ds.questions()) embed(q);

  return [&cfg, &client, &pool_ds, embeddings](const Subpopulation& sub, const Question& target) {
    const GroupKey key = sub.key();
    if (!pool_ds.find_subpopulation(key)) {
      throw ValidationError(fmt::format("few-shot pool has no group '{}'", sub.label()));
    }
    std::vector<Question> pool;
    for (const auto& q : pool_ds.questions()) {
      if (q.id == target.id) continue;
      bool answered = false;
      for (const auto& a : pool_ds.answers(q.id)) {
        if (pool_ds.respondents()[a.respondent].memberships.contains(key)) {
          answered = true;
          break;
        }
      }
      if (answered) pool.push_back(q);
    }
    const auto chosen = select_fewshot(target, pool, *embeddings, cfg.fewshot);
    std::vector<FewShotExample> examples;
    for (const auto& q : chosen) examples.emplace_back(q, weighted_distribution(pool_ds, key, q));
    const std::string prompt = build_fewshot_prompt(sub, examples, target, cfg.fewshot);
    const std::string text = client.fetch_completion_text(cfg.model, prompt, cfg.fewshot_max_tokens);
    return parse_verbalized_distribution(text, target);
  };
}

void cmd_eval(const RunConfig& cfg, Run& run, std::unique_ptr<ModelClient>& client) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  const auto questions = select_questions(ds, cfg);
  const auto groups = select_groups(ds, cfg.groups, "select.groups");

  std::optional<SurveyDataset> pool_storage;
  Predictor predictor;
  if (cfg.eval_predictor == "uniform") {
    predictor = [](const Subpopulation&, const Question& q) { return uniform(q); };
  } else if (cfg.eval_predictor == "human") {
    predictor = [&ds](const Subpopulation& sub, const Question& q) { return weighted_distribution(ds, sub.key(), q); };
  } else if (cfg.eval_predictor == "model") {
    client = make_client(cfg);
    predictor = model_predictor(*client, cfg.model, cfg.style);
  } else {
    client = make_client(cfg);
    if (!cfg.fewshot_pool.empty()) pool_storage.emplace(load_dataset(cfg.fewshot_pool));
    const SurveyDataset& pool = pool_storage ? *pool_storage : ds;
    predictor = fewshot_predictor(cfg, *client, ds, questions, pool, std::make_shared<EmbeddingMap>());
  }

  const EvalResult result =
      evaluate(ds, groups, questions, predictor, cfg.eval_method, cfg.metric, EvalOptions{cfg.eval_workers});
  for (const auto& s : result.skipped) {
    run.warn(fmt::format("skipped {} / {}: {}", s.group.label(), s.question_id, s.reason));
  }
  run.write("records.csv", records_csv(result.records));
  const auto overall = aggregate(result.records, AggregateBy::Overall);
  run.write_json("aggregates.json", {{"method", cfg.eval_method},
                                     {"predictor", cfg.eval_predictor},
                                     {"overall", overall.empty() ? json() : to_json(overall)[0]},
                                     {"by_group", to_json(aggregate(result.records, AggregateBy::Group))},
                                     {"by_wave", to_json(aggregate(result.records, AggregateBy::Wave))}});
  run.write_json("skipped.json", to_json(result.skipped));
}

void cmd_disagree(const RunConfig& cfg, Run& run, std::unique_ptr<ModelClient>& client) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  const auto questions = select_questions(ds, cfg);
  std::vector<GroupKey> axis;
  if (!cfg.disagree_groups.empty()) {
    axis = select_groups(ds, cfg.disagree_groups, "disagree.groups");
  } else {
    for (const auto& s : ds.subpopulations()) {
      if (s.trait == cfg.disagree_trait) axis.push_back(s.key());
    }
    if (axis.size() < 2) {
      throw ConfigError("disagree.trait", fmt::format("trait '{}' has fewer than two groups", cfg.disagree_trait));
    }
  }

  const GroupDistributions human = human_distributions(ds, axis, questions);
  DisagreementMatrix matrix;
  if (cfg.disagree_source == "human") {
    matrix = intergroup_matrix(axis, human, human, questions, SourceKind::Human, cfg.metric);
  } else {
    client = make_client(cfg);
    const Predictor predict = model_predictor(*client, cfg.model, cfg.style);
    GroupDistributions model;
    for (const auto& g : axis) {
      const Subpopulation& sub = ds.subpopulation(g);
      for (const auto& q : questions) {
        try {
          model[g].emplace(q.id, predict(sub, q));
        } catch (const Error& e) {
          run.warn(fmt::format("model distribution for {} / {}: {}", g.label(), q.id, e.what()));
        }
      }
    }
    matrix = intergroup_matrix(axis, human, model, questions, SourceKind::Model, cfg.metric);
  }
  const std::string stem = "disagreement_" + cfg.disagree_source;
  run.write_json(stem + ".json", to_json(matrix));
  const std::string title = cfg.disagree_source == "human" ? "Human vs human" : "Human targets vs steered model";
  run.write(stem + ".svg", heatmap_svg(matrix, title));
}

void cmd_export(const RunConfig& cfg, Run& run) {
  const SurveyDataset ds = load_dataset(cfg.dataset);
  auto questions = select_questions(ds, cfg);
  const auto groups = select_groups(ds, cfg.groups, "select.groups");
  const ExportMode mode = ExportMode::parse(cfg.export_mode);

  const SplitResult parts = split(std::span<const Question>(questions), cfg.train_fraction, cfg.split_seed);
  run.write_json("split.json", {{"train_fraction", cfg.train_fraction},
                                {"seed", cfg.split_seed},
                                {"train", parts.train},
                                {"heldout", parts.heldout}});
  const std::set<std::string> train(parts.train.begin(), parts.train.end());
  std::erase_if(questions, [&](const Question& q) { return !train.contains(q.id); });

  const fs::path out_path = cfg.output_dir / cfg.export_file;
  const ExportManifest manifest = export_training(ds, groups, cfg.style, mode, out_path, questions);
  if (!manifest.skipped.empty()) {
    run.warn(fmt::format("{} (group, question) pairs have no responses and were not exported", manifest.skipped.size()));
  }
  run.record(out_path);
  run.record(out_path.string() + ".manifest.json");
}

void cmd_overlap(const RunConfig& cfg, Run& run, std::unique_ptr<ModelClient>& client) {
  const SurveyDataset a = load_dataset(cfg.dataset);
  const SurveyDataset b = load_dataset(cfg.overlap_dataset);
  client = make_client(cfg);

  // Ids may repeat across datasets, so each side gets its own namespace in the map.
  EmbeddingMap embeddings;
  auto prefixed = [&](const SurveyDataset& ds, const std::string& prefix) {
    std::vector<Question> out;
    for (Question q : ds.questions()) {
      auto v = client->fetch_embedding(cfg.embedding, q.text);
      q.id = prefix + q.id;
      v.id = q.id;
      embeddings.emplace(q.id, std::move(v));
      out.push_back(std::move(q));
    }
    return out;
  };
  const auto qa = prefixed(a, "a/");
  const auto qb = prefixed(b, "b/");
  json pairs = json::array();
  for (const auto& p : detect_overlap(qa, qb, embeddings, cfg.overlap_threshold)) {
    pairs.push_back({{"question_a", p.id_a.substr(2)}, {"question_b", p.id_b.substr(2)}, {"similarity", p.similarity}});
  }
  if (!pairs.empty()) run.warn(fmt::format("{} near-duplicate question pairs found", pairs.size()));
  run.write_json("overlap.json", {{"threshold", cfg.overlap_threshold},
                                  {"embedding_model", cfg.embedding.cache_tag()},
                                  {"pairs", pairs}});
}

void cmd_scaling(const RunConfig& cfg, Run& run) {
  const ScalingFit fit = fit_scaling(cfg.scaling_points);
  json predictions = json::array();
  for (double f : cfg.scaling_predict_at) predictions.push_back({{"fraction", f}, {"wd", predict(fit, f)}});
  json j = to_json(fit);
  j["max_log_residual"] = max_log_residual(fit);
  j["predictions"] = predictions;
  run.write_json("scaling_fit.json", j);
  run.write("scaling.svg", scaling_svg(fit, cfg.scaling_predict_at));
}

std::pair<double, double> parse_point(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("scaling.points", fmt::format("'{}' is not fraction:wd", text));
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("scaling.points", fmt::format("'{}' is not fraction:wd", text));
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steerable opinion-distribution toolkit: survey distributions, bounds, evaluation and export."};
  app.name("opdist");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Overrides ov;
  std::string config_path;
  app.add_option("-c,--config", config_path, "TOML run configuration");
  ov.option<std::string>(&app, "-d,--dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; },
                         "dataset directory");
  ov.option<std::string>(&app, "-o,--out", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
                         "output directory");
  ov.option<std::string>(&app, "--style", [](RunConfig& c, const std::string& v) {
    try {
      c.style = parse_prompt_style(v);
    } catch (const ValidationError& e) {
      throw ConfigError("prompt.style", e.what());
    }
  }, "prompt style: QA, BIO or PORTRAY");
  ov.flag(&app, "--raw-wd", [](RunConfig& c) { c.metric.normalize_wd = false; },
          "report WD without dividing by (options - 1)");
  ov.option<double>(&app, "--kl-epsilon", [](RunConfig& c, double v) { c.metric.kl_epsilon = v; },
                    "probability floor inside the KL log");
  ov.option<std::vector<std::string>>(&app, "--group", [](RunConfig& c, const auto& v) { c.groups = v; },
                                      "restrict to groups, as 'trait: group'");
  ov.option<std::vector<std::string>>(&app, "--wave", [](RunConfig& c, const auto& v) { c.waves = v; },
                                      "restrict to waves");
  ov.option<std::vector<std::string>>(&app, "--question", [](RunConfig& c, const auto& v) { c.question_ids = v; },
                                      "restrict to question ids");
  ov.option<std::string>(&app, "--model-url", [](RunConfig& c, const std::string& v) { c.model.base_url = v; },
                         "completions endpoint base URL");
  ov.option<std::string>(&app, "--model", [](RunConfig& c, const std::string& v) { c.model.model = v; },
                         "completions model name");
  ov.option<std::string>(&app, "--embed-url", [](RunConfig& c, const std::string& v) { c.embedding.base_url = v; },
                         "embeddings endpoint base URL");
  ov.option<std::string>(&app, "--embed-model", [](RunConfig& c, const std::string& v) { c.embedding.model = v; },
                         "embeddings model name");
  ov.option<std::string>(&app, "--cache-dir", [](RunConfig& c, const std::string& v) { c.cache_dir = v; },
                         "response cache directory (default <out>/cache)");
  ov.option<std::size_t>(&app, "--max-in-flight", [](RunConfig& c, std::size_t v) { c.max_in_flight = v; },
                         "concurrent HTTP requests");

  app.add_subcommand("ingest", "load and validate a dataset, write dataset_summary.json");
  app.add_subcommand("dists", "weighted group distributions, distributions.csv");

  auto* bounds = app.add_subcommand("bounds", "uniform upper bound and bootstrap lower bound per group");
  ov.option<std::int64_t>(bounds, "-R,--R", [](RunConfig& c, std::int64_t v) { c.bootstrap_replicates = v; },
                          "bootstrap replicates");
  ov.option<std::uint64_t>(bounds, "--seed", [](RunConfig& c, std::uint64_t v) { c.bootstrap_seed = v; },
                           "bootstrap seed");
  ov.option<unsigned>(bounds, "--threads", [](RunConfig& c, unsigned v) { c.bootstrap_threads = v; },
                      "worker threads (0 = all cores)");

  auto* eval = app.add_subcommand("eval", "score a predictor against human distributions");
  ov.option<std::string>(eval, "--predictor", [](RunConfig& c, const std::string& v) { c.eval_predictor = v; },
                         "model, fewshot, uniform or human");
  ov.option<std::string>(eval, "--method", [](RunConfig& c, const std::string& v) { c.eval_method = v; },
                         "method label written to the records");
  ov.option<unsigned>(eval, "--workers", [](RunConfig& c, unsigned v) { c.eval_workers = v; }, "worker threads");
  ov.option<std::string>(eval, "--fewshot-pool", [](RunConfig& c, const std::string& v) { c.fewshot_pool = v; },
                         "dataset supplying few-shot examples");
  ov.option<int>(eval, "-k,--k", [](RunConfig& c, int v) { c.fewshot.k = v; }, "few-shot examples");

  auto* disagree = app.add_subcommand("disagree", "intergroup disagreement matrix and heatmap");
  ov.option<std::string>(disagree, "--trait", [](RunConfig& c, const std::string& v) { c.disagree_trait = v; },
                         "trait whose groups form the axis");
  ov.option<std::vector<std::string>>(disagree, "--axis", [](RunConfig& c, const auto& v) { c.disagree_groups = v; },
                                      "explicit axis groups in order");
  ov.option<std::string>(disagree, "--source", [](RunConfig& c, const std::string& v) { c.disagree_source = v; },
                         "human or model");

  auto* exp = app.add_subcommand("export", "write fine-tuning JSONL and its manifest");
  ov.option<std::string>(exp, "--mode", [](RunConfig& c, const std::string& v) { c.export_mode = v; },
                         "explicit, one_hot or augment:N");
  ov.option<std::string>(exp, "--file", [](RunConfig& c, const std::string& v) { c.export_file = v; },
                         "JSONL file name under the output directory");
  ov.option<double>(exp, "--train-fraction", [](RunConfig& c, double v) { c.train_fraction = v; },
                    "fraction of questions exported for training");
  ov.option<std::uint64_t>(exp, "--split-seed", [](RunConfig& c, std::uint64_t v) { c.split_seed = v; },
                           "question split seed");

  auto* overlap = app.add_subcommand("overlap", "near-duplicate questions between two datasets");
  ov.option<std::string>(overlap, "--other", [](RunConfig& c, const std::string& v) { c.overlap_dataset = v; },
                         "second dataset directory");
  ov.option<double>(overlap, "--threshold", [](RunConfig& c, double v) { c.overlap_threshold = v; },
                    "cosine similarity threshold");

  auto* scaling = app.add_subcommand("scaling", "power-law fit of WD against training fraction");
  ov.option<std::vector<std::string>>(scaling, "--point", [](RunConfig& c, const std::vector<std::string>& v) {
    c.scaling_points.clear();
    for (const auto& s : v) c.scaling_points.push_back(parse_point(s));
  }, "fraction:wd, repeatable");
  ov.option<std::vector<double>>(scaling, "--predict-at", [](RunConfig& c, const auto& v) { c.scaling_predict_at = v; },
                                 "fractions to extrapolate to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  std::unique_ptr<ModelClient> client;
  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_toml_file(cfg, config_path);
    ov.apply(cfg);
    validate(cfg, command);

    Run run(command, cfg, err);
    if (command == "ingest") cmd_ingest(cfg, run);
    if (command == "dists") cmd_dists(cfg, run);
    if (command == "bounds") cmd_bounds(cfg, run);
    if (command == "eval") cmd_eval(cfg, run, client);
    if (command == "disagree") cmd_disagree(cfg, run, client);
    if (command == "export") cmd_export(cfg, run);
    if (command == "overlap") cmd_overlap(cfg, run, client);
    if (command == "scaling") cmd_scaling(cfg, run);
    run.finish(client ? client->stats() : ClientStats{});
    out << fmt::format("{}: wrote {}\n", command, cfg.output_dir.string());
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"opdist"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace opdist
