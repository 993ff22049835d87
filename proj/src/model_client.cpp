#include "opdist/model_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "opdist/digest.hpp"
#include "opdist/errors.hpp"

namespace opdist {

namespace fs = std::filesystem;
using nlohmann::json;

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.values.size() != v.values.size()) {
    throw ValidationError(fmt::format("cosine_similarity: dimension mismatch ({} vs {})", u.values.size(), v.values.size()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (!(nu > 0.0) || !(nv > 0.0)) throw ValidationError("cosine_similarity: zero-norm vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  if (dir_.empty()) {
    std::lock_guard lock(mu_);
    auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  std::ifstream in(dir_ / key.substr(0, 2) / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& body) {
  if (dir_.empty()) {
    std::lock_guard lock(mu_);
    memory_.emplace(key, body);
    return;
  }
  static std::atomic<std::uint64_t> counter{0};
  const fs::path shard = dir_ / key.substr(0, 2);
  fs::create_directories(shard);
  const fs::path tmp = shard / fmt::format("{}.tmp.{}.{}", key, ::getpid(), counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw Error(fmt::format("cannot write cache entry {}", tmp.string()));
  }
  fs::rename(tmp, shard / (key + ".json"));
}

ModelClient::ModelClient(Options options) : options_(std::move(options)), cache_(options_.cache_dir) {
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
}

ClientStats ModelClient::stats() const {
  return {network_requests_.load(), cache_hits_.load(), cache_misses_.load()};
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError(fmt::format("endpoint url '{}' has no scheme", url));
  const auto path_begin = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_begin);
  out.prefix = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

double log_add(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

// First-token top logprobs, from either the object form {"tok": lp} or the list form
// [{"token": "tok", "logprob": lp}].
std::vector<std::pair<std::string, double>> first_token_logprobs(const json& response) {
  const json* choice = nullptr;
  if (auto it = response.find("choices"); it != response.end() && it->is_array() && !it->empty()) choice = &(*it)[0];
  if (!choice) throw CapabilityError("completion response has no choices");
  auto lp = choice->find("logprobs");
  if (lp == choice->end() || lp->is_null()) throw CapabilityError("completion response has no logprobs field");
  auto top = lp->find("top_logprobs");
  if (top == lp->end() || !top->is_array() || top->empty()) {
    throw CapabilityError("completion response has no top_logprobs");
  }
  const json& first = (*top)[0];
  std::vector<std::pair<std::string, double>> out;
  if (first.is_object()) {
    for (const auto& [tok, value] : first.items()) {
      if (value.is_number()) out.emplace_back(tok, value.get<double>());
    }
  } else if (first.is_array()) {
    for (const auto& entry : first) {
      if (entry.contains("token") && entry.contains("logprob") && entry["logprob"].is_number()) {
        out.emplace_back(entry["token"].get<std::string>(), entry["logprob"].get<double>());
      }
    }
  } else {
    throw CapabilityError("top_logprobs entry has an unexpected shape");
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace

std::string ModelClient::post(const Endpoint& endpoint, std::string_view route, const std::string& body) {
  const ParsedUrl url = parse_url(endpoint.base_url);
  const std::string path = url.prefix + std::string(route);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  {
    std::unique_lock lock(slots_mu_);
    slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    ModelClient* self;
    ~Release() {
      {
        std::lock_guard lock(self->slots_mu_);
        --self->in_flight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  const int attempts = std::max(1, endpoint.retry.max_attempts);
  auto backoff = endpoint.retry.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(url.origin);
    client.set_connection_timeout(endpoint.timeout);
    client.set_read_timeout(endpoint.timeout);
    client.set_write_timeout(endpoint.timeout);
    ++network_requests_;
    auto res = client.Post(path, headers, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (!res) {
      last_error = fmt::format("connection error: {}", httplib::to_string(res.error()));
    } else {
      last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 200));
      if (!transient_status(res->status)) break;
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(endpoint.retry.max_backoff,
                         std::chrono::milliseconds(static_cast<std::int64_t>(
                             static_cast<double>(backoff.count()) * endpoint.retry.multiplier)));
    }
  }
  throw TransportError(fmt::format("POST {}{} failed: {}", url.origin, path, last_error));
}

std::string ModelClient::post_cached(const Endpoint& endpoint, std::string_view route, const std::string& body) {
  const std::string key = sha256_hex(endpoint.cache_tag() + "\n" + std::string(route) + "\n" + body);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    return *hit;
  }
  ++cache_misses_;
  std::string response = post(endpoint, route, body);
  cache_.put(key, response);
  return response;
}

LogprobResult ModelClient::fetch_option_logprobs(const Endpoint& endpoint, std::string_view prompt,
                                                 const std::vector<std::string>& letters) {
  if (letters.empty()) throw ValidationError("fetch_option_logprobs: no letters requested");
  const json request = {{"model", endpoint.model},
                        {"prompt", prompt},
                        {"max_tokens", 1},
                        {"logprobs", endpoint.top_logprobs},
                        {"temperature", 0}};
  const std::string body = post_cached(endpoint, "/completions", request.dump());

  json response = json::parse(body, nullptr, false);
  if (response.is_discarded()) throw TransportError("completion response is not valid JSON");

  LogprobResult result;
  result.prompt_hash = sha256_hex(prompt);
  result.raw_top_tokens = first_token_logprobs(response);
  for (const auto& letter : letters) {
    std::optional<double> lp;
    for (const auto& [tok, value] : result.raw_top_tokens) {
      if (tok == letter || tok == " " + letter) lp = lp ? log_add(*lp, value) : value;
    }
    if (lp) {
      result.letter_logprobs[letter] = *lp;
    } else {
      result.missing.push_back(letter);
    }
  }
  return result;
}

std::string ModelClient::fetch_completion_text(const Endpoint& endpoint, std::string_view prompt, int max_tokens) {
  const json request = {
      {"model", endpoint.model}, {"prompt", prompt}, {"max_tokens", max_tokens}, {"temperature", 0}};
  const std::string body = post_cached(endpoint, "/completions", request.dump());
  json response = json::parse(body, nullptr, false);
  if (response.is_discarded()) throw TransportError("completion response is not valid JSON");
  auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty() || !(*choices)[0].contains("text")) {
    throw CapabilityError("completion response has no choices[0].text");
  }
  return (*choices)[0]["text"].get<std::string>();
}

EmbeddingVector ModelClient::fetch_embedding(const Endpoint& endpoint, std::string_view text) {
  if (text.empty()) throw ValidationError("fetch_embedding: empty text");
  const json request = {{"model", endpoint.model}, {"input", text}};
  const std::string body = post_cached(endpoint, "/embeddings", request.dump());
  json response = json::parse(body, nullptr, false);
  if (response.is_discarded()) throw TransportError("embedding response is not valid JSON");

  const json* values = nullptr;
  if (auto it = response.find("vector"); it != response.end()) {
    values = &*it;
  } else if (auto data = response.find("data"); data != response.end() && data->is_array() && !data->empty() &&
                                                  (*data)[0].contains("embedding")) {
    values = &(*data)[0]["embedding"];
  }
  if (!values || !values->is_array() || values->empty()) throw CapabilityError("embedding response has no vector");

  EmbeddingVector out{sha256_hex(text), {}, endpoint.model};
  double norm = 0.0;
  for (const auto& v : *values) {
    if (!v.is_number()) throw CapabilityError("embedding vector has a non-numeric entry");
    out.values.push_back(v.get<double>());
    norm += out.values.back() * out.values.back();
  }
  if (!(norm > 0.0)) throw CapabilityError("embedding endpoint returned a zero vector");
  return out;
}

Distribution extract_distribution(const LogprobResult& result, const Question& question) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& o : question.options) {
    if (auto it = result.letter_logprobs.find(o.letter); it != result.letter_logprobs.end()) hi = std::max(hi, it->second);
  }
  if (!std::isfinite(hi)) {
    throw CapabilityError(fmt::format("no option letter of question '{}' among the returned tokens", question.id));
  }
  Distribution out{question.id, std::vector<double>(question.options.size(), 0.0)};
  double total = 0.0;
  for (std::size_t i = 0; i < question.options.size(); ++i) {
    if (auto it = result.letter_logprobs.find(question.options[i].letter); it != result.letter_logprobs.end()) {
      out.probs[i] = std::exp(it->second - hi);
      total += out.probs[i];
    }
  }
  for (double& p : out.probs) p /= total;
  return out;
}

}  // namespace opdist
