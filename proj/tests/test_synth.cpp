#include <doctest.h>

#include <numeric>
#include <set>

#include "evtriage/synth.hpp"
#include "evtriage/textpipe.hpp"

using namespace evtriage;

TEST_SUITE("synth") {

TEST_CASE("apportion follows the reference distribution") {
  const auto c = apportion(5000, kReferenceClassCounts);
  CHECK(c == std::array<std::size_t, kNumClasses>{215, 3560, 705, 444, 76});
  CHECK(std::accumulate(kReferenceClassCounts.begin(), kReferenceClassCounts.end(), std::size_t{0}) == 401737);
  for (std::size_t n : {1u, 7u, 100u, 999u, 10000u}) {
    const auto a = apportion(n, kReferenceClassCounts);
    CHECK(std::accumulate(a.begin(), a.end(), std::size_t{0}) == n);
  }
}

TEST_CASE("vocabularies are distinct and survive tokenization") {
  std::set<std::string> seen;
  for (DocClass c : kAllClasses) {
    for (const auto& w : synthetic_vocabulary(c, 40, 2020)) {
      CHECK(seen.insert(w).second);
      CHECK(tokenize(w) == TokenList{w});
    }
  }
  for (const auto& w : synthetic_vocabulary(std::nullopt, 300, 2020)) {
    CHECK(seen.insert(w).second);
  }
}

TEST_CASE("generated corpus") {
  SynthOptions o;
  o.n_documents = 1000;
  const auto docs = generate_corpus(o);
  REQUIRE(docs.size() == 1000);
  std::array<std::size_t, kNumClasses> counts{};
  std::set<std::string> ids;
  for (const auto& d : docs) {
    REQUIRE(d.label.has_value());
    ++counts[index_of(*d.label)];
    CHECK(ids.insert(d.id).second);
    CHECK_FALSE(d.title.empty());
  }
  CHECK(counts == apportion(1000, kReferenceClassCounts));
  CHECK(generate_corpus(o) == docs);
  o.seed = 1;
  CHECK_FALSE(generate_corpus(o) == docs);
}

TEST_CASE("skewed numeric set") {
  const auto d = generate_skewed_numeric(1000, 0.01, DocClass::kSystematicReview, DocClass::kExcluded, 2.0, 3, 4);
  REQUIRE(d.size() == 1000);
  std::size_t minority = 0;
  for (const auto& s : d) {
    CHECK(s.x.dimension == 3);
    minority += s.label == DocClass::kExcluded;
  }
  CHECK(minority == 10);
}

}
