#pragma once

#include <memory>
#include <string>

#include "evtriage/triage.hpp"

namespace httplib {
class Server;
}

namespace evtriage {

// JSON-over-HTTP front end for a TriageService.
class HttpFrontend {
 public:
  explicit HttpFrontend(TriageService& service);
  ~HttpFrontend();

  // Blocking.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port; pair with listen_after_bind() on another thread.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  TriageService& service_;
  std::unique_ptr<httplib::Server> server_;
};

// Wire representations shared by the HTTP layer and the CLI.
std::string prediction_to_json(const PredictionResult& p);
std::string item_to_json(const CurationItem& item);
std::string stats_to_json(const TriageStats& s);

}  // namespace evtriage
