#include "evtriage/server.hpp"

#include <httplib.h>

#include "evtriage/error.hpp"
#include "wire.hpp"

namespace evtriage {

using wire::json;

std::string prediction_to_json(const PredictionResult& p) { return wire::dump(wire::prediction_to_json(p)); }
std::string item_to_json(const CurationItem& item) { return wire::dump(wire::item_to_json(item)); }
std::string stats_to_json(const TriageStats& s) { return wire::dump(wire::stats_to_json(s)); }

namespace {

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnknownItem: return 404;
    case ErrorKind::kAlreadyResolved: return 409;
    case ErrorKind::kNoModel:
    case ErrorKind::kTransport:
    case ErrorKind::kTimeout:
    case ErrorKind::kBadDimension:
    case ErrorKind::kNonFiniteValue:
    case ErrorKind::kDivergence: return 503;
    case ErrorKind::kIo: return 500;
    default: return 400;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(wire::dump(body), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  reply(res, status, {{"error", kind}, {"message", message}});
}

// Runs a handler, mapping library errors and bad JSON onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    reply_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "invalid-json", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw Error(ErrorKind::kInvalidArgument, "request body must be a JSON object");
  return j;
}

std::optional<Backend> backend_param(const json& body, const httplib::Request& req) {
  std::string name;
  if (body.contains("backend") && !body["backend"].is_null()) {
    name = body["backend"].get<std::string>();
  } else if (req.has_param("backend")) {
    name = req.get_param_value("backend");
  } else {
    return std::nullopt;
  }
  auto b = parse_backend(name);
  if (!b) throw Error(ErrorKind::kInvalidArgument, "backend must be 'forest' or 'linear'");
  return b;
}

}  // namespace

HttpFrontend::HttpFrontend(TriageService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpFrontend::~HttpFrontend() { stop(); }

bool HttpFrontend::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HttpFrontend::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpFrontend::listen_after_bind() { return server_->listen_after_bind(); }

void HttpFrontend::stop() {
  if (server_) server_->stop();
}

void HttpFrontend::wait_until_ready() const { server_->wait_until_ready(); }

void HttpFrontend::install_routes() {
  auto& svc = service_;

  server_->Post("/classify", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const std::string title = body.value("title", "");
      const std::string abstract_text = body.value("abstract", "");
      if (title.empty() && abstract_text.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "title or abstract required");
      }
      const Classification c = svc.classify(title, abstract_text, backend_param(body, req));
      json out = wire::prediction_to_json(c.result);
      out["backend"] = std::string(to_string(c.backend));
      out["model_version"] = c.model_version;
      reply(res, 200, out);
    });
  });

  server_->Post("/documents", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const ParseResult parsed = parse_corpus_text(req.body);
      json errors = json::array();
      for (const auto& e : parsed.errors) {
        errors.push_back({{"line", e.line}, {"kind", std::string(to_string(e.kind))}, {"reason", e.reason}});
      }
      if (parsed.records.empty() && !parsed.errors.empty()) {
        reply(res, 400, {{"error", "invalid-records"}, {"errors", std::move(errors)}});
        return;
      }
      const auto result = svc.enqueue(dedup(parsed.records).records, backend_param(json::object(), req));
      reply(res, 200,
            {{"enqueued", result.enqueued},
             {"skipped_duplicates", result.skipped_duplicates},
             {"errors", std::move(errors)}});
    });
  });

  server_->Get("/queue", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::size_t limit = 50;
      if (req.has_param("limit")) {
        const std::string v = req.get_param_value("limit");
        std::size_t pos = 0;
        long long n = -1;
        try {
          n = std::stoll(v, &pos);
        } catch (const std::exception&) {
        }
        if (n < 0 || pos != v.size()) throw Error(ErrorKind::kInvalidArgument, "limit must be a non-negative integer");
        limit = static_cast<std::size_t>(n);
      }
      json items = json::array();
      for (const auto& item : svc.queue(limit)) items.push_back(wire::item_to_json(item));
      reply(res, 200, items);
    });
  });

  server_->Post("/feedback", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.contains("item_id") || !body["item_id"].is_string()) {
        throw Error(ErrorKind::kInvalidArgument, "item_id (string) required");
      }
      if (!body.contains("decision")) throw Error(ErrorKind::kInvalidArgument, "decision required");
      const Decision d = wire::decision_from_json(body["decision"]);
      reply(res, 200, wire::item_to_json(svc.record_feedback(body["item_id"].get<std::string>(), d)));
    });
  });

  server_->Post("/retrain", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      std::size_t min_new = svc.default_min_new_labels();
      if (body.contains("min_new_labels") && !body["min_new_labels"].is_null()) {
        if (!body["min_new_labels"].is_number_unsigned()) {
          throw Error(ErrorKind::kInvalidArgument, "min_new_labels must be a non-negative integer");
        }
        min_new = body["min_new_labels"].get<std::size_t>();
      }
      const auto model = svc.retrain_from_feedback(min_new);
      reply(res, 200, {{"retrained", model != nullptr}, {"linear_version", svc.model_versions().linear}});
    });
  });

  server_->Get("/stats", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, wire::stats_to_json(svc.stats())); });
  });

  server_->Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const ModelVersions v = svc.model_versions();
      reply(res, 200, {{"status", "ok"}, {"model_versions", {{"forest", v.forest}, {"linear", v.linear}}}});
    });
  });
}

}  // namespace evtriage
