#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <thread>

#include "evtriage/server.hpp"
#include "fixtures.hpp"

using namespace evtriage;
using namespace evtriage::testing;
using nlohmann::json;

namespace {

class Harness {
 public:
  explicit Harness(std::shared_ptr<EmbeddingProvider> provider = nullptr)
      : service(TriageConfig{}, std::move(provider)), frontend(service) {
    port = frontend.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { frontend.listen_after_bind(); });
    frontend.wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Harness() {
    frontend.stop();
    thread.join();
  }

  std::pair<int, json> post(const std::string& path, const std::string& body,
                            const std::string& type = "application/json") {
    auto res = client->Post(path, body, type);
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    auto res = client->Get(path);
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }

  TriageService service;
  HttpFrontend frontend;
  int port = 0;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;
};

std::string corpus_lines(int n, int start = 0) {
  std::string out;
  for (int i = start; i < start + n; ++i) {
    out += serialize_record(record("doc" + std::to_string(i), "Title " + std::to_string(i), "abstract text")) + "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE("http") {

TEST_CASE("healthz and missing models") {
  Harness h;
  auto [s, body] = h.get("/healthz");
  CHECK(s == 200);
  CHECK(body["status"] == "ok");
  CHECK(body["model_versions"]["forest"] == 0);

  auto [cs, cb] = h.post("/classify", R"({"title": "x", "abstract": "y"})");
  CHECK(cs == 503);
  CHECK(cb["error"] == "no-model-loaded");
}

TEST_CASE("classify") {
  Harness h;
  h.service.load_forest(single_leaf_bundle({0, 5, 0, 0, 0}));
  auto [s, body] = h.post("/classify", R"({"title": "Aspirin", "abstract": "A review", "backend": "forest"})");
  CHECK(s == 200);
  CHECK(body["predicted"] == "systematic_review");
  CHECK(body["probabilities"].size() == 5);
  CHECK(body["entropy"] == 0.0);

  CHECK(h.post("/classify", R"({"title": "", "abstract": ""})").first == 400);
  CHECK(h.post("/classify", R"({"title": "x", "backend": "svm"})").first == 400);
  CHECK(h.post("/classify", "{not json").first == 400);
  CHECK(h.post("/classify", "[1, 2]").first == 400);
  CHECK(h.post("/classify", R"({"title": "x", "backend": "linear"})").first == 503);
}

TEST_CASE("documents, queue, feedback and stats") {
  Harness h;
  h.service.load_forest(single_leaf_bundle({1, 3, 0, 0, 0}));
  auto [s, body] = h.post("/documents", corpus_lines(4), "application/x-ndjson");
  CHECK(s == 200);
  CHECK(body["enqueued"] == 4);

  auto [s2, again] = h.post("/documents", corpus_lines(2) + "not a record\n", "application/x-ndjson");
  CHECK(s2 == 200);
  CHECK(again["enqueued"] == 0);
  CHECK(again["skipped_duplicates"] == 2);
  CHECK(again["errors"].size() == 1);
  CHECK(h.post("/documents", "garbage\n", "application/x-ndjson").first == 400);

  auto [qs, q] = h.get("/queue?limit=3");
  CHECK(qs == 200);
  REQUIRE(q.size() == 3);
  CHECK(q[0]["id"] == "doc0");  // equal entropies: oldest first
  CHECK(q[0]["status"] == "pending");
  CHECK(h.get("/queue?limit=-1").first == 400);
  CHECK(h.get("/queue?limit=abc").first == 400);

  auto [fs, item] = h.post("/feedback", R"({"item_id": "doc0", "decision": "accept"})");
  CHECK(fs == 200);
  CHECK(item["status"] == "accepted");
  CHECK(item["final_label"] == "systematic_review");

  auto [cs, corrected] = h.post("/feedback", R"({"item_id": "doc1", "decision": {"correct": "excluded"}})");
  CHECK(cs == 200);
  CHECK(corrected["status"] == "corrected");
  CHECK(corrected["final_label"] == "excluded");

  CHECK(h.post("/feedback", R"({"item_id": "doc0", "decision": "accept"})").first == 409);
  CHECK(h.post("/feedback", R"({"item_id": "missing", "decision": "accept"})").first == 404);
  CHECK(h.post("/feedback", R"({"item_id": "doc2", "decision": {"correct": "systematic_review"}})").first == 400);
  CHECK(h.post("/feedback", R"({"item_id": "doc2", "decision": "maybe"})").first == 400);
  CHECK(h.post("/feedback", R"({"decision": "accept"})").first == 400);

  CHECK(h.get("/queue").second.size() == 2);

  auto [ss, stats] = h.get("/stats");
  CHECK(ss == 200);
  CHECK(stats["documents_classified"] == 4);
  CHECK(stats["items_resolved"] == 2);
  CHECK(stats["estimated_minutes_saved"] == 8.0);
  CHECK(stats["predictions_per_class"]["systematic_review"] == 4);
}

TEST_CASE("retrain endpoint") {
  auto provider = std::make_shared<FlakyProvider>(8, 1);
  Harness h(provider);
  h.service.load_forest(single_leaf_bundle({0, 1, 0, 0, 0}));
  h.service.load_linear(LinearModel::zeros(8));
  auto [s, body] = h.post("/retrain", R"({"min_new_labels": 1})");
  CHECK(s == 200);
  CHECK(body["retrained"] == false);
  CHECK(h.post("/retrain", R"({"min_new_labels": -3})").first == 400);

  h.post("/documents", corpus_lines(2), "application/x-ndjson");
  h.post("/feedback", R"({"item_id": "doc0", "decision": {"correct": "excluded"}})");

  provider->failing = true;
  auto [fs, failed] = h.post("/retrain", R"({"min_new_labels": 1})");
  CHECK(fs == 503);
  CHECK(h.get("/healthz").second["model_versions"]["linear"] == 1);

  provider->failing = false;
  auto [os, ok] = h.post("/retrain", R"({"min_new_labels": 1})");
  CHECK(os == 200);
  CHECK(ok["retrained"] == true);
  CHECK(h.get("/healthz").second["model_versions"]["linear"] == 2);

  auto [ls, lin] = h.post("/classify", R"({"title": "x", "abstract": "y", "backend": "linear"})");
  CHECK(ls == 200);
  CHECK(lin["backend"] == "linear");
}

}
