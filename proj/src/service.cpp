#include "dosefind/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include "dosefind/errors.hpp"

namespace dosefind::service {

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_id() {
  std::random_device rd;
  char buf[33];
  for (int i = 0; i < 4; ++i) std::snprintf(buf + 8 * i, 9, "%08x", rd());
  return buf;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw std::runtime_error("cannot open trial log " + path.string());
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      ::close(fd);
      throw std::runtime_error("cannot append to trial log " + path.string());
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

void require_keys(const json& body, std::initializer_list<const char*> allowed,
                  const std::string& what) {
  if (!body.is_object()) throw ConfigError(what, "expected a JSON object");
  for (const auto& item : body.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(item.key(), "unknown key");
  }
}

std::vector<OutcomeRecord> outcomes_of(const json& body) {
  if (!body.is_object() || !body.contains("outcomes")) {
    throw ConfigError("outcomes", "required");
  }
  return io::parse_outcomes(body["outcomes"], "outcomes");
}

// Normalized form, so a replayed log and a live request compare equal.
std::string canonical(const std::vector<OutcomeRecord>& outcomes) {
  json a = json::array();
  for (const auto& r : outcomes) a.push_back(io::to_json(r));
  return a.dump();
}

json dose_curves(const std::vector<DoseSummary>& doses, const DoseGrid& grid) {
  json out = json::array();
  for (std::size_t j = 0; j < doses.size(); ++j) {
    out.push_back(io::to_json(doses[j], j, grid.raw_doses()[j]));
  }
  return out;
}

}  // namespace

struct Snapshot {
  explicit Snapshot(TrialState s) : state(std::move(s)) {}

  TrialState state;
  std::optional<Decision> last;
  std::uint64_t steps = 0;
  std::string updated_at;
};

struct TrialStore::Trial {
  std::string id;
  DoseGrid grid{{1.0}, 1.0};
  EscalationConfig design;
  PriorSpec prior;
  McmcConfig mcmc;
  std::string created_at;
  std::filesystem::path log;

  // Held for the whole of a mutation, including the posterior fit.
  std::mutex write_mu;
  // Guards only the committed snapshot pointer, so reads never wait on a fit.
  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;
  // idempotency key -> (canonical outcomes payload, response); under write_mu.
  std::map<std::string, std::pair<std::string, json>> idempotent;

  mutable std::mutex prior_mu;
  mutable std::optional<std::vector<DoseSummary>> prior_summary;

  std::shared_ptr<const Snapshot> committed() const {
    std::lock_guard lock(snap_mu);
    return snap;
  }
  void commit(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu);
    snap = std::move(s);
  }

  std::uint64_t step_seed(std::uint64_t step) const { return derive_seed(mcmc.seed, step); }

  json view() const {
    const auto s = committed();
    return {{"id", id},
            {"created_at", created_at},
            {"updated_at", s->updated_at},
            {"grid", io::to_json(grid)},
            {"design", io::to_json(design)},
            {"prior", io::to_json(prior)},
            {"mcmc", io::to_json(mcmc)},
            {"steps", s->steps},
            {"next_mcmc_seed", io::seed_string(step_seed(s->steps))},
            {"state", io::to_json(s->state)},
            {"last_decision", s->last ? io::to_json(*s->last, grid) : json(nullptr)}};
  }

  json step_response(const Snapshot& s) const {
    return {{"trial_id", id},
            {"step", s.steps},
            {"status", to_string(s.state.status)},
            {"current_dose", s.state.current_dose + 1},
            {"enrolled", s.state.records.size()},
            {"decision", io::to_json(*s.last, grid)}};
  }

  // Applies one cohort with a given seed; returns the new snapshot without
  // committing it.
  std::shared_ptr<Snapshot> advance(const Snapshot& from,
                                          const std::vector<OutcomeRecord>& outcomes,
                                          std::uint64_t seed) const {
    McmcConfig m = mcmc;
    m.seed = seed;
    StepResult r = run_escalation_step(from.state, outcomes, prior, m, design);
    auto next = std::make_shared<Snapshot>(std::move(r.state));
    next->last = std::move(r.decision);
    next->steps = from.steps + 1;
    next->updated_at = now_utc();
    return next;
  }
};

TrialStore::TrialStore(std::filesystem::path data_dir, McmcConfig default_mcmc)
    : dir_(std::move(data_dir)), default_mcmc_(default_mcmc) {
  default_mcmc_.validate();
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  std::vector<std::filesystem::path> logs;
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (e.path().extension() == ".jsonl") logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) replay(p);
}

TrialStore::~TrialStore() = default;

std::shared_ptr<TrialStore::Trial> TrialStore::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = trials_.find(id);
  if (it == trials_.end()) throw NotFound("no trial with id " + id);
  return it->second;
}

std::vector<std::string> TrialStore::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, t] : trials_) out.push_back(id);
  return out;
}

json TrialStore::create(const json& body) {
  const json b = body.is_null() ? json::object() : body;
  require_keys(b, {"grid", "design", "prior", "mcmc"}, "body");
  auto t = std::make_shared<Trial>();
  t->grid = b.contains("grid") ? io::parse_grid(b["grid"]) : DoseGrid(
      {60, 75, 90, 105, 120, 135, 150, 165, 180}, 180);
  t->design = b.contains("design") ? io::parse_design(b["design"]) : EscalationConfig{};
  t->prior = b.contains("prior") ? io::parse_prior(b["prior"]) : PriorSpec{};
  t->prior.validate(t->design.model_kind());
  json mcmc = io::to_json(default_mcmc_);
  if (b.contains("mcmc")) {
    if (!b["mcmc"].is_object()) throw ConfigError("mcmc", "expected an object");
    mcmc.update(b["mcmc"]);
  }
  t->mcmc = io::parse_mcmc(mcmc);
  t->id = new_id();
  t->created_at = now_utc();

  auto s = std::make_shared<Snapshot>(TrialState::start(t->grid));
  s->updated_at = t->created_at;
  t->snap = std::move(s);

  if (!dir_.empty()) {
    t->log = dir_ / (t->id + ".jsonl");
    const json event = {{"event", "create"},      {"id", t->id},
                        {"at", t->created_at},     {"grid", io::to_json(t->grid)},
                        {"design", io::to_json(t->design)}, {"prior", io::to_json(t->prior)},
                        {"mcmc", io::to_json(t->mcmc)}};
    append_line(t->log, event.dump());
  }
  {
    std::unique_lock lock(mu_);
    trials_[t->id] = t;
  }
  return t->view();
}

json TrialStore::get(const std::string& id) const { return find(id)->view(); }

json TrialStore::submit(const std::string& id, const json& body,
                        const std::optional<std::string>& idempotency_key) {
  const auto t = find(id);
  if (body.is_object()) require_keys(body, {"outcomes"}, "body");
  const auto outcomes = outcomes_of(body);
  const std::string key_payload = canonical(outcomes);

  std::lock_guard write(t->write_mu);
  if (idempotency_key) {
    const auto it = t->idempotent.find(*idempotency_key);
    if (it != t->idempotent.end()) {
      if (it->second.first != key_payload) {
        throw IdempotencyConflict("idempotency key reused with a different payload");
      }
      return it->second.second;
    }
  }
  const auto from = t->committed();
  const std::uint64_t seed = t->step_seed(from->steps);
  auto next = t->advance(*from, outcomes, seed);

  if (!t->log.empty()) {
    const json event = {{"event", "cohort"},
                        {"step", next->steps},
                        {"mcmc_seed", io::seed_string(seed)},
                        {"outcomes", json::parse(key_payload)},
                        {"idempotency_key", idempotency_key ? json(*idempotency_key) : json()},
                        {"at", next->updated_at},
                        {"decision_kind", to_string(next->last->kind)}};
    append_line(t->log, event.dump());
  }
  json response = t->step_response(*next);
  if (idempotency_key) t->idempotent[*idempotency_key] = {key_payload, response};
  t->commit(std::move(next));
  return response;
}

json TrialStore::whatif(const std::string& id, const json& body) const {
  const auto t = find(id);
  if (body.is_object()) require_keys(body, {"outcomes", "mcmc_seed"}, "body");
  const auto outcomes = outcomes_of(body);
  const auto from = t->committed();
  const std::uint64_t seed = body.contains("mcmc_seed")
                                 ? io::parse_seed(body["mcmc_seed"], "mcmc_seed")
                                 : t->step_seed(from->steps);
  const auto next = t->advance(*from, outcomes, seed);
  return {{"trial_id", id},
          {"hypothetical", true},
          {"mcmc_seed", io::seed_string(seed)},
          {"status", to_string(next->state.status)},
          {"current_dose", next->state.current_dose + 1},
          {"decision", io::to_json(*next->last, t->grid)}};
}

json TrialStore::posterior(const std::string& id) const {
  const auto t = find(id);
  const auto s = t->committed();
  std::vector<DoseSummary> doses;
  std::string source;
  std::uint64_t seed = 0;
  if (s->last) {
    doses = s->last->doses;
    source = "posterior";
    seed = s->last->mcmc_seed;
  } else {
    source = "prior";
    // A seed no real step can take.
    seed = derive_seed(t->mcmc.seed, ~std::uint64_t{0});
    std::lock_guard lock(t->prior_mu);
    if (!t->prior_summary) {
      McmcConfig m = t->mcmc;
      m.seed = seed;
      const auto draws = sample_posterior({}, t->grid, t->prior, m, t->design.model_kind());
      t->prior_summary = summarize_doses(draws, t->grid, t->design);
    }
    doses = *t->prior_summary;
  }
  return {{"trial_id", id},
          {"source", source},
          {"n_patients", s->state.records.size()},
          {"mcmc_seed", io::seed_string(seed)},
          {"tox_rule", io::to_json(t->design)["tox_rule"]},
          {"eff_bound", t->design.eff_bound},
          {"overdose_cutoff", t->design.overdose_cutoff},
          {"doses", dose_curves(doses, t->grid)}};
}

void TrialStore::replay(const std::filesystem::path& log) {
  std::ifstream in(log);
  std::string line;
  std::shared_ptr<Trial> t;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json e = json::parse(line);
    const std::string kind = e.at("event").get<std::string>();
    if (kind == "create") {
      t = std::make_shared<Trial>();
      t->id = e.at("id").get<std::string>();
      t->created_at = e.at("at").get<std::string>();
      t->grid = io::parse_grid(e.at("grid"));
      t->design = io::parse_design(e.at("design"));
      t->prior = io::parse_prior(e.at("prior"));
      t->mcmc = io::parse_mcmc(e.at("mcmc"));
      t->log = log;
      auto s = std::make_shared<Snapshot>(TrialState::start(t->grid));
      s->updated_at = t->created_at;
      t->snap = std::move(s);
    } else if (kind == "cohort") {
      if (!t) throw std::runtime_error(log.string() + ": cohort before create");
      const auto outcomes = io::parse_outcomes(e.at("outcomes"));
      const std::uint64_t seed = io::parse_seed(e.at("mcmc_seed"), "mcmc_seed");
      auto next = t->advance(*t->snap, outcomes, seed);
      next->updated_at = e.at("at").get<std::string>();
      if (e.contains("decision_kind") &&
          e["decision_kind"].get<std::string>() != to_string(next->last->kind)) {
        throw std::runtime_error(log.string() + ":" + std::to_string(lineno) +
                                 ": replayed decision differs from the log");
      }
      if (e.contains("idempotency_key") && e["idempotency_key"].is_string()) {
        t->idempotent[e["idempotency_key"].get<std::string>()] = {canonical(outcomes),
                                                                  t->step_response(*next)};
      }
      t->snap = std::move(next);
    }
  }
  if (t) trials_[t->id] = t;
}

json TrialStore::builtin_scenarios_json() {
  json all = json::array();
  for (const auto& s : builtin_scenarios()) all.push_back(io::to_json(s));
  return all;
}

}  // namespace dosefind::service
