#include "opdist/mock_server.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "opdist/digest.hpp"
#include "opdist/errors.hpp"

namespace opdist {

using nlohmann::json;

namespace {

// Uniform value in [0, 1) from the first 52 bits of SHA-256(text).
double hash_unit(const std::string& text) {
  const std::string h = sha256_hex(text);
  return static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
}

std::vector<std::string> prompt_letters(const std::string& prompt) {
  std::vector<std::string> letters;
  auto pos = prompt.rfind("Question: ");
  if (pos == std::string::npos) pos = 0;
  std::size_t line_start = prompt.find('\n', pos);
  while (line_start != std::string::npos) {
    const std::size_t b = line_start + 1;
    if (b + 2 < prompt.size() && prompt[b] >= 'A' && prompt[b] <= 'Z' && prompt[b + 1] == '.' && prompt[b + 2] == ' ') {
      letters.emplace_back(1, prompt[b]);
    }
    line_start = prompt.find('\n', b);
  }
  if (letters.empty()) letters = {"A", "B", "C", "D"};
  return letters;
}

}  // namespace

std::map<std::string, double> MockServer::default_logprobs(const std::string& prompt) {
  std::map<std::string, double> table;
  for (const auto& letter : prompt_letters(prompt)) table[letter] = -0.3 - 4.0 * hash_unit(prompt + "|" + letter);
  table["\n"] = -6.5;
  table[" The"] = -7.25;
  return table;
}

std::vector<double> MockServer::default_embedding(const std::string& text) {
  std::vector<double> v(16);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * hash_unit(text + "#" + std::to_string(i)) - 1.0;
  return v;
}

MockServer::MockServer() : server_(std::make_unique<httplib::Server>()) {
  server_->Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (std::size_t n = fail_next_.load(); n > 0 && fail_next_.compare_exchange_strong(n, n - 1)) {
      res.status = 503;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return;
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    const std::string prompt = body["prompt"].get<std::string>();
    const std::string model = body.value("model", "");
    const int max_tokens = body.value("max_tokens", 16);

    std::map<std::string, double> table;
    {
      std::lock_guard lock(mu_);
      auto it = logprob_tables_.find(prompt);
      table = it != logprob_tables_.end() ? it->second : default_logprobs(prompt);
    }

    json choice = {{"index", 0}, {"finish_reason", "length"}};
    if (max_tokens > 1) {
      std::string text = "Based on the examples, my estimate is {";
      double total = 0.0;
      for (const auto& [tok, lp] : table) {
        if (tok.size() == 1 && tok[0] >= 'A' && tok[0] <= 'Z') total += std::exp(lp);
      }
      bool first = true;
      for (const auto& [tok, lp] : table) {
        if (tok.size() != 1 || tok[0] < 'A' || tok[0] > 'Z') continue;
        text += fmt::format("{}\"{}\": {:.3f}", first ? "" : ", ", tok, std::exp(lp) / total);
        first = false;
      }
      choice["text"] = text + "}";
      choice["logprobs"] = nullptr;
    } else {
      std::vector<std::pair<std::string, double>> ranked(table.begin(), table.end());
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      const auto k = static_cast<std::size_t>(std::max(1, body.value("logprobs", 5)));
      if (ranked.size() > k) ranked.resize(k);
      json top = json::object();
      for (const auto& [tok, lp] : ranked) top[tok] = lp;
      choice["text"] = ranked.front().first;
      if (model == "no-logprobs") {
        choice["logprobs"] = nullptr;
      } else {
        choice["logprobs"] = {{"tokens", {ranked.front().first}},
                              {"token_logprobs", {ranked.front().second}},
                              {"top_logprobs", json::array({top})}};
      }
    }
    json response = {{"object", "text_completion"}, {"model", model}, {"choices", json::array({choice})}};
    res.set_content(response.dump(), "application/json");
  });

  server_->Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (std::size_t n = fail_next_.load(); n > 0 && fail_next_.compare_exchange_strong(n, n - 1)) {
      res.status = 503;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return;
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("input") || !body["input"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    const std::string input = body["input"].get<std::string>();
    std::vector<double> v;
    {
      std::lock_guard lock(mu_);
      auto it = embeddings_.find(input);
      v = it != embeddings_.end() ? it->second : default_embedding(input);
    }
    res.set_content(json{{"vector", v}}.dump(), "application/json");
  });
}

MockServer::~MockServer() { stop(); }

void MockServer::start(int port) {
  if (thread_.joinable()) return;
  port_ = port == 0 ? server_->bind_to_any_port("127.0.0.1") : (server_->bind_to_port("127.0.0.1", port) ? port : -1);
  if (port_ <= 0) throw Error("mock server: cannot bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockServer::stop() {
  if (!thread_.joinable()) return;
  server_->stop();
  thread_.join();
}

std::string MockServer::base_url() const { return fmt::format("http://127.0.0.1:{}/v1", port_); }

void MockServer::set_logprobs(const std::string& prompt, std::map<std::string, double> table) {
  std::lock_guard lock(mu_);
  logprob_tables_[prompt] = std::move(table);
}

void MockServer::set_embedding(const std::string& text, std::vector<double> vector) {
  std::lock_guard lock(mu_);
  embeddings_[text] = std::move(vector);
}

}  // namespace opdist
