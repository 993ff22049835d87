#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace opdist {

// Deterministic stand-in for a completions + embeddings endpoint, served on 127.0.0.1.
//
//   POST {base}/completions  max_tokens == 1: first-token top logprobs over the option letters
//                            of the prompt's last question block, derived from SHA-256 of the
//                            prompt (or a table installed with set_logprobs).
//                            max_tokens > 1: text holding a JSON distribution over those letters.
//   POST {base}/embeddings   {"vector": [...]} from SHA-256 of the input (or set_embedding).
//
// Model "no-logprobs" answers without a logprobs field. fail_next(n) makes the next n
// requests return HTTP 503.
class MockServer {
 public:
  MockServer();
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds an ephemeral port (or `port` when nonzero) and starts serving on a background thread.
  void start(int port = 0);
  void stop();

  int port() const noexcept { return port_; }
  std::string base_url() const;  // "http://127.0.0.1:<port>/v1"

  std::size_t request_count() const noexcept { return requests_.load(); }
  void set_logprobs(const std::string& prompt, std::map<std::string, double> table);
  void set_embedding(const std::string& text, std::vector<double> vector);
  void fail_next(std::size_t n) { fail_next_.store(n); }

  // Deterministic logprob table the server would return for `prompt` (exposed for tests).
  static std::map<std::string, double> default_logprobs(const std::string& prompt);
  static std::vector<double> default_embedding(const std::string& text);

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> fail_next_{0};
  std::mutex mu_;
  std::map<std::string, std::map<std::string, double>> logprob_tables_;
  std::map<std::string, std::vector<double>> embeddings_;
};

}  // namespace opdist
