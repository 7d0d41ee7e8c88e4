#include <doctest.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "evtriage/embed.hpp"
#include "evtriage/error.hpp"
#include "evtriage/rng.hpp"
#include "loopback.hpp"

using namespace evtriage;
using evtriage::testing::LoopbackServer;
using nlohmann::json;

namespace {

double norm(const DenseEmbedding& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ProviderConfig remote_config(const std::string& endpoint, std::size_t d) {
  ProviderConfig c;
  c.mode = ProviderMode::kRemote;
  c.endpoint = endpoint;
  c.dimension = d;
  c.timeout = std::chrono::milliseconds(2000);
  c.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

// Echo server: item i gets the vector (len(text_i), i, 0, ...).
void echo(const httplib::Request& req, httplib::Response& res, std::size_t d) {
  const json body = json::parse(req.body);
  json rows = json::array();
  std::size_t i = 0;
  for (const auto& t : body["texts"]) {
    std::vector<double> v(d, 0.0);
    v[0] = static_cast<double>(t.get<std::string>().size());
    if (d > 1) v[1] = static_cast<double>(i++);
    rows.push_back(v);
  }
  res.set_content(json{{"embeddings", rows}, {"dimension", d}}.dump(), "application/json");
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kInvalidArgument;
}

}  // namespace

TEST_SUITE("embed") {

TEST_CASE("stub is deterministic and unit norm") {
  const auto a = embed_stub("randomized trial of drug", 256, 7);
  const auto b = embed_stub("randomized trial of drug", 256, 7);
  CHECK(a == b);
  CHECK(a.size() == 256);
  CHECK(norm(a) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(embed_stub("randomized trial of drug", 256, 8) != a);
  // Stopwords and punctuation do not change the token list.
  CHECK(embed_stub("Randomized, trial of the DRUG.", 256, 7) == a);
}

TEST_CASE("stub sentinel for texts with no tokens") {
  for (const char* text : {"", "   ", "the of and", "a , ."}) {
    const auto e = embed_stub(text, 16, 7);
    CHECK(e[0] == 1.0);
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] == 0.0);
  }
  CHECK(embed_stub("", 1, 3) == DenseEmbedding{1.0});
  CHECK_THROWS_AS(embed_stub("x", 0, 3), Error);
}

TEST_CASE("shared tokens raise cosine similarity") {
  const auto q = embed_stub("randomized trial of drug", 256, 7);
  const auto near = embed_stub("randomized trial of placebo", 256, 7);
  const auto far = embed_stub("economic survey methods", 256, 7);
  CHECK(cosine_similarity(q, near) > cosine_similarity(q, far));

  SplitMix64 rng(31);
  for (int round = 0; round < 50; ++round) {
    std::string base, shared, disjoint;
    for (int k = 0; k < 6; ++k) {
      const auto w = "tok" + std::to_string(rng.bounded(1000));
      base += w + " ";
      if (k < 5) shared += w + " ";
      disjoint += "oth" + std::to_string(rng.bounded(1000)) + " ";
    }
    shared += "extra" + std::to_string(round);
    const auto e = embed_stub(base, 128, 5);
    CHECK(cosine_similarity(e, embed_stub(shared, 128, 5)) >
          cosine_similarity(e, embed_stub(disjoint, 128, 5)));
  }
}

TEST_CASE("stub values match an independent FNV-1a/SplitMix64 computation") {
  // Reference values computed outside C++ from the documented construction.
  const std::vector<double> want = {0.4725795808282709, -0.011825574452708454,
                                    0.16118277844378226, 0.866342200003083};
  const auto e = embed_stub("covid-19 trial", 4, 7);
  REQUIRE(e.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(e[i] == doctest::Approx(want[i]).epsilon(1e-14));
  CHECK(embed_stub("trial covid-19", 4, 7) == e);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> a = {1, 0}, b = {0, 2}, c = {3, 0};
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(cosine_similarity(a, c) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(a, std::vector<double>{1.0}), Error);
}

TEST_CASE("stub provider") {
  StubProvider p(32, 9);
  const std::vector<std::string> texts = {"alpha beta", "", "gamma"};
  const auto out = p.embed(texts);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == embed_stub(texts[i], 32, 9));
  CHECK(p.identity() != StubProvider(32, 10).identity());
}

TEST_CASE("remote provider preserves input order across batches") {
  LoopbackServer server([](const auto& req, auto& res) { echo(req, res, 4); });
  auto cfg = remote_config(server.endpoint(), 4);
  cfg.max_batch = 2;
  RemoteProvider p(cfg);
  const std::vector<std::string> texts = {"a", "bbb", "cc", "dddd", "eeeee"};
  const auto out = p.embed(texts);
  REQUIRE(out.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(out[i][0] == static_cast<double>(texts[i].size()));
    CHECK(out[i][1] == static_cast<double>(i % 2));
  }
  CHECK(server.requests() == 3);

  CHECK(p.embed(std::span<const std::string>{}).empty());
  CHECK(p.embed_batch({}).empty());
  CHECK(server.requests() == 3);
}

TEST_CASE("remote provider validates vectors") {
  SUBCASE("short vector names the item") {
    LoopbackServer server([](const auto&, auto& res) {
      res.set_content(R"({"embeddings": [[1,2,3],[1,2]], "dimension": 3})", "application/json");
    });
    RemoteProvider p(remote_config(server.endpoint(), 3));
    const std::vector<std::string> texts = {"x1", "x2"};
    try {
      p.embed_batch(texts);
      FAIL("expected bad-dimension");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kBadDimension);
      CHECK(std::string(e.what()).find("item 1") != std::string::npos);
    }
  }
  SUBCASE("non-finite value") {
    LoopbackServer server([](const auto&, auto& res) {
      res.set_content(R"({"embeddings": [[1,null]], "dimension": 2})", "application/json");
    });
    RemoteProvider p(remote_config(server.endpoint(), 2));
    const std::vector<std::string> texts = {"x"};
    CHECK(kind_of([&] { p.embed_batch(texts); }) == ErrorKind::kNonFiniteValue);
  }
  SUBCASE("declared dimension differs") {
    LoopbackServer server([](const auto&, auto& res) {
      res.set_content(R"({"embeddings": [[1,2]], "dimension": 5})", "application/json");
    });
    RemoteProvider p(remote_config(server.endpoint(), 2));
    const std::vector<std::string> texts = {"x"};
    CHECK(kind_of([&] { p.embed_batch(texts); }) == ErrorKind::kBadDimension);
  }
}

TEST_CASE("remote provider retries server errors") {
  std::atomic<int> calls{0};
  LoopbackServer server([&](const auto& req, auto& res) {
    if (calls++ < 2) {
      res.status = 503;
      return;
    }
    echo(req, res, 2);
  });
  RemoteProvider p(remote_config(server.endpoint(), 2));
  const std::vector<std::string> texts = {"abc"};
  const auto out = p.embed_batch(texts);
  CHECK(out[0][0] == 3.0);
  CHECK(server.requests() == 3);
}

TEST_CASE("remote provider gives up after max attempts") {
  LoopbackServer server([](const auto&, auto& res) { res.status = 500; });
  RemoteProvider p(remote_config(server.endpoint(), 2));
  const std::vector<std::string> texts = {"abc"};
  CHECK(kind_of([&] { p.embed_batch(texts); }) == ErrorKind::kTransport);
  CHECK(server.requests() == 3);
}

TEST_CASE("remote provider does not retry client errors") {
  LoopbackServer server([](const auto&, auto& res) { res.status = 400; });
  RemoteProvider p(remote_config(server.endpoint(), 2));
  const std::vector<std::string> texts = {"abc"};
  CHECK(kind_of([&] { p.embed_batch(texts); }) == ErrorKind::kTransport);
  CHECK(server.requests() == 1);
}

TEST_CASE("remote provider times out") {
  LoopbackServer server([](const auto& req, auto& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    echo(req, res, 2);
  });
  auto cfg = remote_config(server.endpoint(), 2);
  cfg.timeout = std::chrono::milliseconds(100);
  cfg.max_attempts = 2;
  RemoteProvider p(cfg);
  const std::vector<std::string> texts = {"abc"};
  CHECK(kind_of([&] { p.embed_batch(texts); }) == ErrorKind::kTimeout);
}

TEST_CASE("unreachable endpoint is a transport failure") {
  auto cfg = remote_config("http://127.0.0.1:1", 2);
  cfg.max_attempts = 2;
  RemoteProvider p(cfg);
  const std::vector<std::string> texts = {"abc"};
  const auto k = kind_of([&] { p.embed_batch(texts); });
  CHECK((k == ErrorKind::kTransport || k == ErrorKind::kTimeout));
}

TEST_CASE("provider config validation") {
  ProviderConfig c;
  c.dimension = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.max_batch = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.mode = ProviderMode::kRemote;
  CHECK_THROWS_AS(make_provider(c), Error);
  CHECK(make_provider(ProviderConfig{})->dimension() == kDefaultEmbeddingDimension);
}

TEST_CASE("cache keys separate identity, dimension and text") {
  const auto k = embedding_cache_key("stub", 8, "text");
  CHECK(k.size() == 64);
  CHECK(k == embedding_cache_key("stub", 8, "text"));
  CHECK(k != embedding_cache_key("stub2", 8, "text"));
  CHECK(k != embedding_cache_key("stub", 9, "text"));
  CHECK(k != embedding_cache_key("stub", 8, "text "));
}

TEST_CASE("cache round trip through disk") {
  const auto dir = std::filesystem::temp_directory_path() / "evtriage_cache_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = (dir / "cache.jsonl").string();
  {
    EmbeddingCache cache(path);
    CHECK(cache.size() == 0);
    cache.put("k1", {0.1, -2.5, 1e-300});
    cache.put("k2", {1.0 / 3.0});
    CHECK(cache.get("k1") == DenseEmbedding{0.1, -2.5, 1e-300});
    CHECK_FALSE(cache.get("missing").has_value());
    cache.flush();
  }
  EmbeddingCache reloaded(path);
  CHECK(reloaded.size() == 2);
  CHECK(reloaded.get("k2") == DenseEmbedding{1.0 / 3.0});
  CHECK(reloaded.get("k1") == DenseEmbedding{0.1, -2.5, 1e-300});
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    CHECK(entry.path().filename() == "cache.jsonl");
  }

  std::ofstream(path) << "not json\n";
  CHECK_THROWS_AS(EmbeddingCache{path}, Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("caching provider only embeds misses") {
  LoopbackServer server([](const auto& req, auto& res) { echo(req, res, 3); });
  auto inner = std::make_shared<RemoteProvider>(remote_config(server.endpoint(), 3));
  auto cache = std::make_shared<EmbeddingCache>();
  CachingProvider p(inner, cache);
  const std::vector<std::string> first = {"aa", "bbb"};
  const auto a = p.embed(first);
  CHECK(server.requests() == 1);
  CHECK(cache->size() == 2);
  const std::vector<std::string> second = {"bbb", "aa"};
  const auto b = p.embed(second);
  CHECK(server.requests() == 1);
  CHECK(b[0][0] == 3.0);
  CHECK(b[1][0] == 2.0);
  const std::vector<std::string> third = {"aa", "c"};
  p.embed(third);
  CHECK(server.requests() == 2);
  CHECK(cache->size() == 3);
}

}
