#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "sos/common.hpp"
#include "sos/csv.hpp"
#include "sos/eval.hpp"

using namespace sos;

namespace {

// Independent evaluation of the 11-point interpolation, structured as a
// direct scan per threshold rather than a collected precision envelope.
double ap_oracle(const std::vector<bool>& ranked_relevance, int64_t total_pos) {
  double sum = 0.0;
  for (int t = 0; t <= 10; ++t) {
    double thresh = t / 10.0;
    double best = 0.0;
    int64_t tp = 0;
    for (size_t i = 0; i < ranked_relevance.size(); ++i) {
      if (ranked_relevance[i]) ++tp;
      double recall = double(tp) / double(total_pos);
      double precision = double(tp) / double(i + 1);
      if (recall >= thresh) best = std::max(best, precision);
    }
    sum += best;
  }
  return sum / 11.0;
}

RankedList make_list(const std::vector<bool>& relevance, int64_t total_pos) {
  RankedList list;
  list.total_positives = total_pos;
  double score = double(relevance.size());
  for (bool r : relevance) list.items.push_back({score--, r});
  return list;
}

}  // namespace

TEST_CASE("ap of textbook rankings") {
  CHECK(average_precision_voc07(make_list({true, true, false}, 2)) == 1.0);
  CHECK(average_precision_voc07(make_list({true}, 1)) == 1.0);
  CHECK(average_precision_voc07(make_list({false}, 1)) == 0.0);
  // alternating +,-,+,-: recall 0.5 at precision 1, recall 1.0 at 2/3
  CHECK(average_precision_voc07(make_list({true, false, true, false}, 2)) ==
        doctest::Approx(28.0 / 33.0).epsilon(1e-12));
}

TEST_CASE("ap agrees with the direct interpolation oracle exhaustively") {
  for (int len = 1; len <= 8; ++len) {
    for (int bits = 0; bits < (1 << len); ++bits) {
      std::vector<bool> rel(len);
      int64_t pos = 0;
      for (int i = 0; i < len; ++i) {
        rel[i] = (bits >> i) & 1;
        pos += rel[i];
      }
      if (pos > 0) {
        CHECK(average_precision_voc07(make_list(rel, pos)) ==
              doctest::Approx(ap_oracle(rel, pos)).epsilon(1e-12));
      }
      // truncated list: positives exist beyond what was ranked
      CHECK(average_precision_voc07(make_list(rel, pos + 1)) ==
            doctest::Approx(ap_oracle(rel, pos + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tied scores keep input order") {
  RankedList ab;
  ab.items = {{1.0, true}, {1.0, false}};
  ab.total_positives = 1;
  CHECK(average_precision_voc07(ab) == 1.0);
  RankedList ba;
  ba.items = {{1.0, false}, {1.0, true}};
  ba.total_positives = 1;
  CHECK(average_precision_voc07(ba) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ap is invariant under monotone score transforms") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    RankedList list;
    int64_t pos = 0;
    for (int i = 0; i < 30; ++i) {
      bool rel = rng.bernoulli(0.3);
      pos += rel;
      list.items.push_back({rng.uniform(-2.0, 2.0), rel});
    }
    if (pos == 0) continue;
    list.total_positives = pos;
    double base = average_precision_voc07(list);
    RankedList affine = list, expo = list;
    for (auto& it : affine.items) it.score = 3.0 * it.score + 1.0;
    for (auto& it : expo.items) it.score = std::exp(it.score);
    CHECK(average_precision_voc07(affine) == doctest::Approx(base).epsilon(1e-12));
    CHECK(average_precision_voc07(expo) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("promoting a positive past an adjacent negative never hurts ap") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    int len = 2 + int(rng.uniform_int(0, 8));
    std::vector<bool> rel(len);
    int64_t pos = 0;
    for (int i = 0; i < len; ++i) {
      rel[i] = rng.bernoulli(0.4);
      pos += rel[i];
    }
    if (pos == 0) continue;
    for (int i = 0; i + 1 < len; ++i) {
      if (!rel[i] && rel[i + 1]) {
        std::vector<bool> swapped = rel;
        std::swap(swapped[i], swapped[i + 1]);
        CHECK(average_precision_voc07(make_list(swapped, pos)) >=
              average_precision_voc07(make_list(rel, pos)) - 1e-12);
      }
    }
  }
}

TEST_CASE("ap rejects degenerate inputs") {
  CHECK_THROWS_AS(average_precision_voc07(make_list({false, false}, 0)),
                  SchemaError);
  CHECK_THROWS_AS(average_precision_voc07(make_list({true, true}, 1)),
                  SchemaError);
  RankedList bad;
  bad.items = {{std::nan(""), true}};
  bad.total_positives = 1;
  CHECK_THROWS_AS(average_precision_voc07(bad), SchemaError);
}

TEST_CASE("perfect one-hot scores give unit ap everywhere") {
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  for (int i = 0; i < 50; ++i) {
    int c = i % 5;
    ScoreVector s{};
    s[c] = 1.0;
    scores.push_back(s);
    labels.push_back(label_from_index(c));
  }
  PerClassAp res = map_per_class(scores, labels);
  for (int c = 0; c < 5; ++c) {
    CHECK(res.defined[c]);
    CHECK(res.ap[c] == doctest::Approx(1.0));
  }
  CHECK(res.mean == doctest::Approx(1.0));
  CHECK(res.warnings.empty());
}

TEST_CASE("constant scores degrade to prevalence for large lists") {
  Rng rng(41);
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  for (int i = 0; i < 2000; ++i) {
    ScoreVector s{};
    s.fill(0.5);
    scores.push_back(s);
    labels.push_back(rng.bernoulli(0.3) ? CountLabel::Two : CountLabel::One);
  }
  PerClassAp res = map_per_class(scores, labels);
  double prevalence =
      double(std::count(labels.begin(), labels.end(), CountLabel::Two)) /
      labels.size();
  CHECK(std::fabs(res.ap[label_index(CountLabel::Two)] - prevalence) < 0.03);
}

TEST_CASE("classes without positives fall out of the mean with a warning") {
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  Rng rng(43);
  for (int i = 0; i < 40; ++i) {
    ScoreVector s{};
    for (auto& v : s) v = rng.uniform01();
    scores.push_back(s);
    labels.push_back(label_from_index(i % 4));  // never FourPlus
  }
  PerClassAp res = map_per_class(scores, labels);
  CHECK(!res.defined[4]);
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("4") != std::string::npos);
  double manual = (res.ap[0] + res.ap[1] + res.ap[2] + res.ap[3]) / 4.0;
  CHECK(res.mean == doctest::Approx(manual));
}

TEST_CASE("chance baseline is reproducible and prevalence-shaped") {
  std::vector<CountLabel> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 200; ++i) labels.push_back(label_from_index(c));
  PerClassAp a = chance_baseline(labels, 100, 99);
  PerClassAp b = chance_baseline(labels, 100, 99);
  for (int c = 0; c < 5; ++c) CHECK(a.ap[c] == b.ap[c]);
  // balanced prevalence 0.2; the 11-point interpolation biases slightly high
  for (int c = 0; c < 5; ++c) {
    CHECK(a.ap[c] > 0.15);
    CHECK(a.ap[c] < 0.25);
  }
  PerClassAp c1 = chance_baseline(labels, 1, 7);
  PerClassAp c2 = chance_baseline(labels, 1, 7);
  for (int c = 0; c < 5; ++c) CHECK(c1.ap[c] == c2.ap[c]);
}

TEST_CASE("chance baseline on the benchmark prevalences lands near 22.8") {
  // class sizes proportional to the published 3261/6041/2030/1309/1066
  // breakdown, scaled to a fifth for the held-out set size
  const int counts[5] = {652, 1208, 406, 262, 213};
  std::vector<CountLabel> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < counts[c]; ++i) labels.push_back(label_from_index(c));
  PerClassAp res = chance_baseline(labels, 100, 2026);
  CHECK(std::fabs(res.mean * 100.0 - 22.8) < 0.6);
  // class "1" dominates the set and its chance ap reflects that
  CHECK(std::fabs(res.ap[1] * 100.0 - 46.5) < 2.0);
}

TEST_CASE("confusion counts follow argmax with low-index ties") {
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  for (int i = 0; i < 10; ++i) {
    ScoreVector s{};
    s[i % 5] = 1.0;
    scores.push_back(s);
    labels.push_back(label_from_index(i % 5));
  }
  ConfusionMatrix cm = confusion(scores, labels);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) CHECK(cm.counts[r][c] == (r == c ? 2 : 0));

  ScoreVector tie{};
  tie.fill(0.2);
  ConfusionMatrix one = confusion({tie}, {CountLabel::Three});
  CHECK(one.counts[3][0] == 1);
}

TEST_CASE("confusion normalization and recall") {
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  Rng rng(47);
  for (int i = 0; i < 200; ++i) {
    ScoreVector s{};
    for (auto& v : s) v = rng.uniform01();
    scores.push_back(s);
    labels.push_back(label_from_index(int(rng.uniform_int(0, 3))));
  }
  ConfusionMatrix cm = confusion(scores, labels);
  auto norm = cm.row_normalized();
  for (int r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 5; ++c) sum += norm[r][c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (int c = 0; c < 5; ++c) CHECK(norm[4][c] == 0.0);
  auto recall = cm.per_class_recall();
  for (int r = 0; r < 5; ++r)
    CHECK(recall[r] == doctest::Approx(norm[r][r]));
}

TEST_CASE("confusion is equivariant under sample permutation") {
  Rng rng(53);
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  for (int i = 0; i < 60; ++i) {
    ScoreVector s{};
    for (auto& v : s) v = rng.uniform01();
    scores.push_back(s);
    labels.push_back(label_from_index(int(rng.uniform_int(0, 4))));
  }
  ConfusionMatrix a = confusion(scores, labels);
  std::vector<size_t> perm(scores.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[size_t(rng.uniform_int(0, int64_t(i)))]);
  std::vector<ScoreVector> ps;
  std::vector<CountLabel> pl;
  for (size_t i : perm) {
    ps.push_back(scores[i]);
    pl.push_back(labels[i]);
  }
  ConfusionMatrix b = confusion(ps, pl);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) CHECK(a.counts[r][c] == b.counts[r][c]);
}

TEST_CASE("evaluation report round-trips through csv") {
  std::string dir = fixtures::temp_dir("eval_report");
  std::vector<ScoreVector> scores;
  std::vector<CountLabel> labels;
  for (int i = 0; i < 25; ++i) {
    ScoreVector s{};
    s[i % 5] = 0.9;
    s[(i + 1) % 5] = 0.1;
    scores.push_back(s);
    labels.push_back(label_from_index((i * 2) % 5));
  }
  PerClassAp ap = map_per_class(scores, labels);
  ConfusionMatrix cm = confusion(scores, labels);
  std::string path = dir + "/report.csv";
  write_eval_report(path, ap, cm);
  auto rows = read_csv(path);
  REQUIRE(rows.size() == 12);  // header + ap + 5 counts + 5 pct
  CHECK(rows[0][0] == "section");
  CHECK(rows[1][0] == "ap");
  CHECK(std::stod(rows[1][7]) == doctest::Approx(ap.mean));
  int64_t total = 0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) total += std::stoll(rows[2 + r][2 + c]);
  CHECK(total == 25);
}
