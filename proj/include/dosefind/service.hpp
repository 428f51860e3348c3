#pragma once

// Live-trial backend: a store of trials persisted as append-only JSONL event
// logs, and the HTTP routes that expose it.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include "dosefind/io.hpp"

namespace httplib {
class Server;
}

namespace dosefind::service {

using io::json;

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Same idempotency key reused with a different payload.
class IdempotencyConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrialStore {
 public:
  /// With an empty `data_dir` nothing is persisted. Otherwise existing logs
  /// in the directory are replayed. `default_mcmc` fills MCMC fields a create
  /// request leaves out.
  explicit TrialStore(std::filesystem::path data_dir = {}, McmcConfig default_mcmc = {});
  ~TrialStore();

  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  /// Body keys: grid, design, prior, mcmc (all optional). Returns the trial view.
  json create(const json& body);
  json get(const std::string& id) const;
  /// Body: {"outcomes": [...]}. Runs one escalation step and persists it.
  json submit(const std::string& id, const json& body,
              const std::optional<std::string>& idempotency_key = std::nullopt);
  /// Decision the same cohort would produce, without storing anything. Body:
  /// {"outcomes": [...], "mcmc_seed": optional}; the default seed is the one
  /// the next real submission will use.
  json whatif(const std::string& id, const json& body) const;
  /// Per-dose posterior curves for the current data (prior before any cohort).
  json posterior(const std::string& id) const;
  std::vector<std::string> ids() const;

  static json builtin_scenarios_json();

 private:
  struct Trial;
  std::shared_ptr<Trial> find(const std::string& id) const;
  void replay(const std::filesystem::path& log);

  std::filesystem::path dir_;
  McmcConfig default_mcmc_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Trial>> trials_;
};

struct HttpOptions {
  /// Required as "Authorization: Bearer <token>" on API routes when non-empty.
  std::string token;
  /// Served at "/" when non-empty (dashboard build output).
  std::filesystem::path static_dir;
};

/// Registers the JSON API on `server`.
void mount_routes(httplib::Server& server, TrialStore& store, const HttpOptions& options);

}  // namespace dosefind::service
