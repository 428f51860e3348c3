#include "httplib.h"

#include "dosefind/errors.hpp"
#include "dosefind/service.hpp"

namespace dosefind::service {

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message, const std::string& field = {}) {
  json body = {{"error", kind}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  send(res, status, body);
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

// Runs a handler and maps library exceptions onto HTTP statuses.
template <class F>
httplib::Server::Handler guarded(const HttpOptions& opt, F f) {
  return [&opt, f](const httplib::Request& req, httplib::Response& res) {
    if (!opt.token.empty() && req.get_header_value("Authorization") != "Bearer " + opt.token) {
      send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return;
    }
    try {
      f(req, res);
    } catch (const json::parse_error& e) {
      send_error(res, 400, "invalid_json", e.what());
    } catch (const ConfigError& e) {
      send_error(res, 400, "validation", e.what(), e.field());
    } catch (const DomainError& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const NotFound& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ProtocolError& e) {
      send_error(res, 422, "protocol", e.what());
    } catch (const LifecycleError& e) {
      send_error(res, 409, "lifecycle", e.what());
    } catch (const IdempotencyConflict& e) {
      send_error(res, 409, "idempotency_conflict", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void mount_routes(httplib::Server& server, TrialStore& store, const HttpOptions& options) {
  // `options` must outlive the server; handlers keep a reference.
  const HttpOptions& opt = options;

  server.Post("/trials", guarded(opt, [&store](const httplib::Request& req, httplib::Response& res) {
                send(res, 201, store.create(body_of(req)));
              }));
  server.Get("/trials", guarded(opt, [&store](const httplib::Request&, httplib::Response& res) {
               send(res, 200, json{{"ids", store.ids()}});
             }));
  server.Get(R"(/trials/([0-9a-f]+))",
             guarded(opt, [&store](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, store.get(req.matches[1]));
             }));
  server.Post(R"(/trials/([0-9a-f]+)/cohorts)",
              guarded(opt, [&store](const httplib::Request& req, httplib::Response& res) {
                std::optional<std::string> key;
                if (req.has_header("Idempotency-Key")) key = req.get_header_value("Idempotency-Key");
                send(res, 200, store.submit(req.matches[1], body_of(req), key));
              }));
  server.Post(R"(/trials/([0-9a-f]+)/whatif)",
              guarded(opt, [&store](const httplib::Request& req, httplib::Response& res) {
                send(res, 200, store.whatif(req.matches[1], body_of(req)));
              }));
  server.Get(R"(/trials/([0-9a-f]+)/posterior)",
             guarded(opt, [&store](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, store.posterior(req.matches[1]));
             }));
  server.Get("/scenarios/builtin",
             guarded(opt, [](const httplib::Request&, httplib::Response& res) {
               send(res, 200, TrialStore::builtin_scenarios_json());
             }));
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, json{{"status", "ok"}});
  });

  if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir.string());
}

}  // namespace dosefind::service
