#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "evtriage/eval.hpp"
#include "evtriage/rng.hpp"

using namespace evtriage;

namespace {

constexpr auto SR = DocClass::kSystematicReview;
constexpr auto EX = DocClass::kExcluded;

// Published per-class (precision, recall, F1), canonical class order.
const std::vector<std::array<double, 3>> kForestBaseline = {
    {.75, .15, .26}, {.93, .99, .96}, {.25, .79, .38}, {.63, .40, .49}, {.70, .21, .32}};
const std::vector<std::array<double, 3>> kTransformerHead = {
    {.67, .56, .61}, {.96, .98, .97}, {.94, .85, .89}, {.64, .91, .75}, {.82, .74, .78}};
const std::vector<std::array<double, 3>> kSecondTransformerHead = {
    {0, 0, 0}, {.85, 1.0, .92}, {.71, .71, .71}, {.61, .90, .72}, {0, 0, 0}};

ConfusionMatrix random_confusion(SplitMix64& rng) {
  ConfusionMatrix cm;
  for (auto& row : cm.cells) {
    for (auto& c : row) c = rng.bounded(3) == 0 ? 0 : rng.bounded(50);
  }
  cm.cells[rng.bounded(5)][rng.bounded(5)] += 1;
  return cm;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("confusion counts") {
  const std::vector<DocClass> g = {SR, SR};
  const std::vector<DocClass> p = {SR, EX};
  const auto cm = confusion(g, p);
  CHECK(cm.cells[1][1] == 1);
  CHECK(cm.cells[1][4] == 1);
  CHECK(cm.total() == 2);

  const std::vector<DocClass> all(kAllClasses.begin(), kAllClasses.end());
  const auto diag = confusion(all, all);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) CHECK(diag.cells[i][j] == (i == j ? 1u : 0u));
  }
  CHECK_THROWS_AS(confusion(g, std::vector<DocClass>{SR}), Error);
  CHECK_THROWS_AS(confusion(std::vector<DocClass>{}, std::vector<DocClass>{}), Error);
}

TEST_CASE("f1 from published precision and recall") {
  CHECK(f1_score(.96, .98) == doctest::Approx(.9699).epsilon(1e-4));
  CHECK(f1_score(.94, .85) == doctest::Approx(.893).epsilon(1e-3));
  CHECK(f1_score(0, 0) == 0.0);
  for (const auto* table : {&kForestBaseline, &kTransformerHead, &kSecondTransformerHead}) {
    for (const auto& [p, r, f] : *table) CHECK(std::abs(f1_score(p, r) - f) <= 0.015);
  }
}

TEST_CASE("metrics on a perfect classifier are all ones") {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < kNumClasses; ++i) cm.cells[i][i] = 3 + i;
  const auto m = metrics(cm);
  for (const auto& c : m.per_class) {
    CHECK(c.precision == 1.0);
    CHECK(c.recall == 1.0);
    CHECK(c.f1 == 1.0);
  }
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.per_class[4].support == 7);
}

TEST_CASE("empty rows and columns give zero") {
  ConfusionMatrix cm;
  cm.cells[1][1] = 5;
  cm.cells[1][2] = 5;
  const auto m = metrics(cm);
  CHECK(m.per_class[0].precision == 0.0);
  CHECK(m.per_class[0].recall == 0.0);
  CHECK(m.per_class[0].f1 == 0.0);
  CHECK(m.per_class[1].precision == 1.0);
  CHECK(m.per_class[1].recall == 0.5);
  CHECK(m.per_class[2].precision == 0.0);
  CHECK(m.macro_recall == doctest::Approx(0.1));
  CHECK(metrics(ConfusionMatrix{}).macro_f1 == 0.0);
}

TEST_CASE("metric invariants on random confusions") {
  SplitMix64 rng(55);
  for (int round = 0; round < 300; ++round) {
    const auto cm = random_confusion(rng);
    const auto m = metrics(cm);
    double sp = 0, sr = 0, sf = 0;
    std::uint64_t diag = 0, tp_sum = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto& k = m.per_class[c];
      CHECK(k.precision >= 0.0);
      CHECK(k.precision <= 1.0);
      CHECK(k.recall <= 1.0);
      const double expected_f1 = k.precision + k.recall > 0 ? 2 * k.precision * k.recall / (k.precision + k.recall) : 0.0;
      CHECK(k.f1 == doctest::Approx(expected_f1));
      CHECK(k.support == cm.row_sum(c));
      sp += k.precision;
      sr += k.recall;
      sf += k.f1;
      diag += cm.cells[c][c];
      tp_sum += cm.cells[c][c];
    }
    CHECK(m.macro_precision == doctest::Approx(sp / 5));
    CHECK(m.macro_recall == doctest::Approx(sr / 5));
    CHECK(m.macro_f1 == doctest::Approx(sf / 5));
    // Micro recall: pooled TP over pooled (TP + FN) equals accuracy.
    std::uint64_t tp_fn = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) tp_fn += cm.row_sum(c);
    CHECK(static_cast<double>(tp_sum) / static_cast<double>(tp_fn) ==
          doctest::Approx(static_cast<double>(diag) / static_cast<double>(cm.total())));
  }
}

TEST_CASE("confusion conserves input length") {
  SplitMix64 rng(8);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 1 + rng.bounded(200);
    std::vector<DocClass> g, p;
    for (std::size_t i = 0; i < n; ++i) {
      g.push_back(class_at(rng.bounded(5)));
      p.push_back(class_at(rng.bounded(5)));
    }
    CHECK(confusion(g, p).total() == n);
  }
}

TEST_CASE("relative improvement") {
  const auto rf = report_from_scores(kForestBaseline);
  const auto xl = report_from_scores(kTransformerHead);
  CHECK(rf.macro_f1 == doctest::Approx(0.482));
  CHECK(xl.macro_f1 == doctest::Approx(0.800));
  CHECK(relative_improvement(rf, xl) == doctest::Approx(0.660).epsilon(1e-3));
  CHECK(relative_improvement(rf, rf) == 0.0);

  MetricsReport a, b;
  a.macro_f1 = 0.4;
  b.macro_f1 = 0.8;
  CHECK(relative_improvement(a, b) == doctest::Approx(1.0));
  CHECK(relative_improvement(b, a) == doctest::Approx(-0.5));
  // Scale-free: multiplying both scores leaves the ratio unchanged.
  MetricsReport c = a, d = b;
  c.macro_f1 *= 0.5;
  d.macro_f1 *= 0.5;
  CHECK(relative_improvement(c, d) == doctest::Approx(relative_improvement(a, b)));

  MetricsReport zero;
  try {
    relative_improvement(zero, b);
    FAIL("expected zero-baseline");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kZeroBaseline);
  }
  CHECK(std::string(kImprovementNote).find("macro") != std::string::npos);
}

TEST_CASE("headline figure under other aggregations") {
  // Macro over the four non-dominant classes gives about +109%, not +93%.
  double rf = 0, xl = 0;
  for (std::size_t c : {0u, 2u, 3u, 4u}) {
    rf += kForestBaseline[c][2];
    xl += kTransformerHead[c][2];
  }
  CHECK((xl - rf) / rf == doctest::Approx(1.0897).epsilon(1e-3));
}

TEST_CASE("renderers") {
  ConfusionMatrix cm;
  cm.cells[0][0] = 3;
  cm.cells[1][1] = 10;
  cm.cells[1][0] = 2;
  cm.cells[4][3] = 1;
  const auto m = metrics(cm);

  const std::string table = render_table(m, "Forest");
  std::size_t last = 0;
  for (DocClass c : kAllClasses) {
    const auto pos = table.find(std::string(display_name(c)));
    REQUIRE(pos != std::string::npos);
    CHECK(pos > last);
    last = pos;
  }
  CHECK(table.find("0.60") != std::string::npos);  // broad synthesis precision 3/5
  CHECK(table.find("Forest") != std::string::npos);

  const auto j = nlohmann::json::parse(report_to_json(m));
  CHECK(j.dump().find("macro_f1") != std::string::npos);

  const std::string csv = confusion_to_csv(cm);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  for (DocClass c : kAllClasses) CHECK(header.find(std::string(to_string(c))) != std::string::npos);
  CHECK(header.find("broad_synthesis") < header.find("excluded"));
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == kNumClasses);
}

TEST_CASE("stratified split examples") {
  std::vector<DocClass> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(class_at(i % 5));
  const auto s = stratified_split(labels, 0.2, 1);
  CHECK(s.test.size() == 20);
  std::map<DocClass, int> per;
  for (auto i : s.test) ++per[labels[i]];
  for (DocClass c : kAllClasses) CHECK(per[c] == 4);
  const auto t = stratified_split(labels, 0.2, 1);
  CHECK(s.test == t.test);
  CHECK(s.train == t.train);
  CHECK(stratified_split(labels, 0.2, 2).test != s.test);

  for (double bad : {0.0, 1.0, -0.5, 1.5, std::nan("")}) {
    try {
      stratified_split(labels, bad, 1);
      FAIL("expected bad-ratio");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kBadRatio);
    }
  }
}

TEST_CASE("stratified split properties") {
  SplitMix64 rng(303);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng.bounded(300);
    std::vector<DocClass> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(class_at(rng.bounded(1 + rng.bounded(5))));
    const double ratio = 0.05 + rng.uniform() * 0.9;
    const auto s = stratified_split(labels, ratio, rng());

    std::set<std::size_t> seen(s.train.begin(), s.train.end());
    for (auto i : s.test) CHECK(seen.insert(i).second);
    CHECK(seen.size() == n);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));

    std::array<double, kNumClasses> total{}, test{};
    for (auto l : labels) ++total[index_of(l)];
    for (auto i : s.test) ++test[index_of(labels[i])];
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (total[c] == 1) {
        CHECK(test[c] == 0);
        continue;
      }
      CHECK(std::abs(test[c] - total[c] * ratio) <= 1.0);
    }
  }
}

TEST_CASE("singleton classes stay in train") {
  const std::vector<DocClass> labels = {SR, SR, SR, SR, EX};
  const auto s = stratified_split(labels, 0.5, 3);
  CHECK(std::find(s.train.begin(), s.train.end(), 4u) != s.train.end());
  CHECK(s.train_only_classes == std::vector<DocClass>{EX});

  const std::vector<int> items = {10, 11, 12, 13, 14};
  const auto [tr, te] = stratified_split<int>(items, labels, 0.5, 3);
  CHECK(tr.size() + te.size() == 5);
  CHECK(te.size() == 2);
}

}
