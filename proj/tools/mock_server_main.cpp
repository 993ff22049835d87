#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "opdist/mock_server.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
  CLI::App app{"Deterministic completions/embeddings endpoint for offline runs."};
  int port = 0;
  app.add_option("-p,--port", port, "port to bind (0 = ephemeral)");
  CLI11_PARSE(app, argc, argv);

  opdist::MockServer server;
  server.start(port);
  std::cout << server.base_url() << std::endl;

  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}
