#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "opdist/embedding.hpp"
#include "opdist/survey.hpp"

namespace opdist {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
};

// An HTTP JSON endpoint speaking the common completions/embeddings contract.
// base_url includes any path prefix, e.g. "http://127.0.0.1:8000/v1"; requests go to
// base_url + "/completions" and base_url + "/embeddings".
struct Endpoint {
  std::string base_url;
  std::string model;
  std::string tag;  // cache namespace; empty means model@base_url
  int top_logprobs = 20;
  std::string api_key_env = "OPDIST_API_KEY";
  std::chrono::seconds timeout{60};
  RetryPolicy retry;

  std::string cache_tag() const { return tag.empty() ? model + "@" + base_url : tag; }
};

struct LogprobResult {
  std::string prompt_hash;
  std::map<std::string, double> letter_logprobs;  // natural log; only letters that were returned
  std::vector<std::string> missing;
  std::vector<std::pair<std::string, double>> raw_top_tokens;
};

// Content-addressed response store. With a directory, entries live at dir/ab/abcd....json and
// are written temp-then-rename; without one, entries are kept in memory.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& body);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> memory_;
};

struct ClientStats {
  std::size_t network_requests = 0;  // HTTP attempts, retries included
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

class ModelClient {
 public:
  struct Options {
    std::filesystem::path cache_dir;  // empty = in-memory cache
    std::size_t max_in_flight = 8;
  };

  ModelClient() : ModelClient(Options{}) {}
  explicit ModelClient(Options options);

  // First-token logprobs for each letter. "A" and " A" surface forms are both accepted and
  // their probabilities summed. Letters absent from the top tokens are listed in `missing`.
  // Throws TransportError after retries, CapabilityError when the response lacks logprobs.
  LogprobResult fetch_option_logprobs(const Endpoint& endpoint, std::string_view prompt,
                                      const std::vector<std::string>& letters);

  // Greedy text completion (temperature 0), used for verbalized few-shot answers.
  std::string fetch_completion_text(const Endpoint& endpoint, std::string_view prompt, int max_tokens);

  // The vector's id is the SHA-256 of `text`. Throws ValidationError for empty text.
  EmbeddingVector fetch_embedding(const Endpoint& endpoint, std::string_view text);

  ClientStats stats() const;

 private:
  std::string post_cached(const Endpoint& endpoint, std::string_view route, const std::string& body);
  std::string post(const Endpoint& endpoint, std::string_view route, const std::string& body);

  Options options_;
  ResponseCache cache_;

  std::mutex slots_mu_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;

  std::atomic<std::size_t> network_requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> cache_misses_{0};
};

// p(a) proportional to exp(logprob(a)) over the question's letters that were returned; others
// get zero. Throws CapabilityError when no option letter was returned.
Distribution extract_distribution(const LogprobResult& result, const Question& question);

}  // namespace opdist
