// HTTP service for conducting a live trial.

#include <csignal>
#include <cstdio>
#include <cstdlib>

#include "CLI11.hpp"
#include "httplib.h"
#include "dosefind/service.hpp"

namespace {
httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dose-finding trial service"};
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "trials";
  std::string static_dir;
  std::string token;
  int timeout_s = 300;
  dosefind::McmcConfig mcmc;
  app.add_option("--host", host, "Bind address")->envname("DOSEFIND_HOST");
  app.add_option("--port", port, "Port")->envname("DOSEFIND_PORT");
  app.add_option("--data-dir", data_dir, "Directory of per-trial event logs")
      ->envname("DOSEFIND_DATA_DIR");
  app.add_option("--static-dir", static_dir, "Serve dashboard assets from this directory");
  app.add_option("--token", token, "Shared bearer token (empty disables auth)")
      ->envname("DOSEFIND_TOKEN");
  app.add_option("--timeout", timeout_s, "Read/write timeout in seconds for a request");
  app.add_option("--burn-in", mcmc.burn_in, "Default MCMC burn-in for new trials");
  app.add_option("--kept-draws", mcmc.kept_draws, "Default MCMC kept draws for new trials");
  app.add_option("--mcmc-seed", mcmc.seed, "Default MCMC base seed for new trials");
  CLI11_PARSE(app, argc, argv);

  try {
    dosefind::service::TrialStore store(data_dir, mcmc);
    dosefind::service::HttpOptions options{token, static_dir};
    httplib::Server server;
    server.set_read_timeout(timeout_s, 0);
    server.set_write_timeout(timeout_s, 0);
    dosefind::service::mount_routes(server, store, options);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::fprintf(stderr, "listening on %s:%d, %zu trial(s) loaded from %s\n", host.c_str(), port,
                 store.ids().size(), data_dir.c_str());
    if (!server.listen(host, port)) {
      std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
      return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
