#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "dph/eval.hpp"
#include "test_support.hpp"

using namespace dph;

namespace {

std::vector<int> bits_from_mask(std::uint32_t mask, int k) {
  std::vector<int> bits(k, 0);
  for (int i = 0; i < k; ++i) bits[i] = (mask >> i) & 1;
  return bits;
}

// Random attribute head centered so recovered scores straddle 0.5.
void randomize_attr_head(DphModel& model, Rng& rng) {
  for (double& w : model.params.attr.W.data) w = 0.3 * rng.normal();
  for (std::size_t j = 0; j < model.params.attr.b.size(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < model.params.attr.W.rows; ++i) {
      col += model.params.attr.W(i, j);
    }
    model.params.attr.b[j] = -0.5 * col + 0.1 * rng.normal();
  }
}

} // namespace

TEST_CASE("average precision matches hand values and the brute-force oracle") {
  using ids_t = std::vector<std::uint64_t>;

  SECTION("perfect ranking scores 1") {
    const ids_t ranked = {1, 2, 3, 4, 5};
    REQUIRE(*average_precision(ranked, {1, 2}) == 1.0);
    REQUIRE(*average_precision(ranked, {1, 2, 3, 4, 5}) == 1.0);
  }

  SECTION("pattern relevant, miss, relevant gives 5/6") {
    const ids_t ranked = {1, 2, 3};
    REQUIRE(*average_precision(ranked, {1, 3}) ==
            Catch::Approx(5.0 / 6.0).epsilon(1e-15));
  }

  SECTION("single relevant item at rank r scores 1/r") {
    for (std::size_t r = 1; r <= 10; ++r) {
      ids_t ranked(10);
      for (std::size_t i = 0; i < 10; ++i) ranked[i] = i + 1;
      const std::unordered_set<std::uint64_t> relevant = {r};
      REQUIRE(*average_precision(ranked, relevant) ==
              Catch::Approx(1.0 / static_cast<double>(r)).epsilon(1e-15));
      REQUIRE(*average_precision(ranked, relevant) ==
              testsup::brute_force_ap(ranked, relevant));
    }
  }

  SECTION("empty relevant set marks the query invalid") {
    REQUIRE_FALSE(average_precision(ids_t{1, 2}, {}).has_value());
  }

  SECTION("random rankings agree with the oracle exactly") {
    Rng rng(103);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(49));
      ids_t ranked(n);
      for (int i = 0; i < n; ++i) ranked[i] = i;
      rng.shuffle(ranked);
      std::unordered_set<std::uint64_t> relevant;
      for (int i = 0; i < n; ++i) {
        if (rng.uniform01() < 0.3) relevant.insert(i);
      }
      if (relevant.empty()) relevant.insert(ranked[0]);
      const double got = *average_precision(ranked, relevant);
      REQUIRE(got == testsup::brute_force_ap(ranked, relevant));
      REQUIRE(got >= 0.0);
      REQUIRE(got <= 1.0);

      // AP is 1 exactly when every relevant item precedes every irrelevant one.
      bool all_first = true;
      for (std::size_t i = 0; i < relevant.size(); ++i) {
        if (!relevant.contains(ranked[i])) all_first = false;
      }
      REQUIRE((got == 1.0) == all_first);
    }
  }
}

TEST_CASE("task1 mAP is 1 when codes separate categories perfectly") {
  const DphModel model = testsup::bit_model(8, 2, 1);
  std::vector<Sample> test;
  test.push_back(testsup::bit_sample(0, bits_from_mask(0b1, 8), 1, {kAttrPresent}));
  test.push_back(testsup::bit_sample(1, bits_from_mask(0b1, 8), 1, {kAttrPresent}));
  test.push_back(testsup::bit_sample(2, bits_from_mask(0b10, 8), 2, {kAttrAbsent}));
  test.push_back(testsup::bit_sample(3, bits_from_mask(0b10, 8), 2, {kAttrAbsent}));
  const MetricResult r = eval_task1(model, test);
  REQUIRE(r.valid_queries == 4);
  REQUIRE(r.value == 1.0);
}

TEST_CASE("task1 flags zero valid queries when categories are singletons") {
  const DphModel model = testsup::bit_model(8, 3, 1);
  std::vector<Sample> test;
  test.push_back(testsup::bit_sample(0, bits_from_mask(0b1, 8), 1, {kAttrPresent}));
  test.push_back(testsup::bit_sample(1, bits_from_mask(0b10, 8), 2, {kAttrPresent}));
  test.push_back(testsup::bit_sample(2, bits_from_mask(0b100, 8), 3, {kAttrPresent}));
  const MetricResult r = eval_task1(model, test);
  REQUIRE(r.valid_queries == 0);
  REQUIRE(r.value == 0.0);
}

TEST_CASE("task1 matches an independent end-to-end computation") {
  const DphModel model = testsup::bit_model(8, 3, 2);
  Rng rng(107);
  std::vector<Sample> test;
  for (int i = 0; i < 10; ++i) {
    std::vector<int> bits(8);
    for (int& b : bits) b = static_cast<int>(rng.uniform_int(2));
    test.push_back(testsup::bit_sample(i, bits, 1 + static_cast<int>(rng.uniform_int(3)),
                                       {kAttrPresent, kAttrAbsent}));
  }
  const MetricResult got = eval_task1(model, test);

  // Scripted recomputation: per-bit distances, naive sort, brute-force AP.
  std::vector<BinaryCode> codes;
  for (const Sample& s : test) codes.push_back(encode(model, s.features));
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    std::unordered_set<std::uint64_t> relevant;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i != q && test[i].category == test[q].category) relevant.insert(test[i].id);
    }
    if (relevant.empty()) continue;
    std::vector<std::pair<int, std::uint64_t>> order;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i != q) order.push_back({testsup::naive_hamming(codes[q], codes[i]), test[i].id});
    }
    std::sort(order.begin(), order.end());
    std::vector<std::uint64_t> ranked;
    for (const auto& [d, id] : order) ranked.push_back(id);
    sum += testsup::brute_force_ap(ranked, relevant);
    ++valid;
  }
  REQUIRE(got.valid_queries == valid);
  REQUIRE(got.value == Catch::Approx(sum / valid).margin(1e-12));
}

TEST_CASE("attribute F1 hand cases") {
  const DphModel model = testsup::bit_model(4, 2, 1);
  const auto sample = [&](std::uint64_t id, int bit0, std::uint8_t truth) {
    return testsup::bit_sample(id, {bit0, 0, 0, 0}, 1, {truth});
  };

  SECTION("perfect predictions give F1 = 1") {
    const std::vector<Sample> test = {sample(0, 1, 1), sample(1, 0, 0), sample(2, 1, 1)};
    const F1Result r = eval_attr_f1(model, test);
    REQUIRE(r.mean_f1 == 1.0);
    REQUIRE(r.per_attribute == std::vector<double>{1.0});
  }

  SECTION("complement predictions give F1 = 0") {
    const std::vector<Sample> test = {sample(0, 1, 0), sample(1, 0, 1), sample(2, 0, 1)};
    const F1Result r = eval_attr_f1(model, test);
    REQUIRE(r.mean_f1 == 0.0);
  }

  SECTION("TP=2 FP=1 FN=1 gives 2/3") {
    const std::vector<Sample> test = {
        sample(0, 1, 1), sample(1, 1, 1), sample(2, 0, 1), sample(3, 1, 0)};
    const F1Result r = eval_attr_f1(model, test);
    REQUIRE(r.mean_f1 == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  }

  SECTION("missing test labels are rejected") {
    const std::vector<Sample> test = {sample(0, 1, kAttrMissing), sample(1, 0, 0)};
    REQUIRE_THROWS_AS(eval_attr_f1(model, test), ValidationError);
  }
}

TEST_CASE("task2 evaluation is seed-reproducible and matches an independent script") {
  DphModel model = testsup::bit_model(6, 2, 3);
  Rng setup(109);
  randomize_attr_head(model, setup);

  std::vector<Sample> test;
  for (int i = 0; i < 20; ++i) {
    std::vector<int> bits(6);
    for (int& b : bits) b = static_cast<int>(setup.uniform_int(2));
    std::vector<std::uint8_t> attrs(3);
    for (auto& a : attrs) a = static_cast<std::uint8_t>(setup.uniform_int(2));
    test.push_back(testsup::bit_sample(i, bits, 1 + static_cast<int>(setup.uniform_int(2)),
                                       attrs));
  }

  const MetricResult once = eval_task2(model, test, 77);
  const MetricResult twice = eval_task2(model, test, 77);
  REQUIRE(once.value == twice.value);
  REQUIRE(once.valid_queries == twice.valid_queries);

  // Independent script: replays the query draw against the same stream
  // contract, then ranks and scores from scratch.
  const RetrievalIndex index = build_index(model, test);
  Rng rng(77);
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    const int m = index.m;
    const int count = std::min<int>(1 + static_cast<int>(rng.uniform_int(3)), m);
    std::vector<int> attrs(m);
    for (int j = 0; j < m; ++j) attrs[j] = j;
    for (int t = 0; t < count; ++t) {
      const int j = t + static_cast<int>(rng.uniform_int(m - t));
      std::swap(attrs[t], attrs[j]);
    }
    attrs.resize(count);
    std::sort(attrs.begin(), attrs.end());

    std::vector<std::pair<double, std::uint64_t>> order;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i == q) continue;
      double score = 1.0;
      for (int j : attrs) {
        const double p = index.attr_scores[i][j];
        score *= index.attr_scores[q][j] >= 0.5 ? p : 1.0 - p;
      }
      order.push_back({-score, test[i].id});
    }
    std::sort(order.begin(), order.end());
    std::vector<std::uint64_t> ranked;
    for (const auto& [s, id] : order) ranked.push_back(id);

    std::unordered_set<std::uint64_t> relevant;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i == q) continue;
      bool match = true;
      for (int j : attrs) {
        if (test[i].attributes[j] != test[q].attributes[j]) match = false;
      }
      if (match) relevant.insert(test[i].id);
    }
    if (relevant.empty()) continue;
    sum += testsup::brute_force_ap(ranked, relevant);
    ++valid;
  }
  REQUIRE(once.valid_queries == valid);
  REQUIRE(once.value == Catch::Approx(sum / valid).margin(1e-12));
}

TEST_CASE("task3 recall saturates, stays monotone, and matches the hand case") {
  const DphModel model = testsup::bit_model(8, 2, 1);

  SECTION("hand-built query: 3 true matches, 2 inside the top 5") {
    std::vector<Sample> test;
    // Query: no bits set, so attribute 0 is predicted absent.
    test.push_back(testsup::bit_sample(0, bits_from_mask(0, 8), 1, {0}));
    // True matches at distance 1, 1, and 8.
    test.push_back(testsup::bit_sample(1, bits_from_mask(0b1, 8), 1, {1}));
    test.push_back(testsup::bit_sample(2, bits_from_mask(0b1, 8), 1, {1}));
    test.push_back(testsup::bit_sample(3, bits_from_mask(0xff, 8), 1, {1}));
    // Fillers from another category at distance 2.
    for (std::uint64_t id = 4; id < 8; ++id) {
      test.push_back(testsup::bit_sample(id, bits_from_mask(0b11, 8), 2, {0}));
    }
    const RecallResult r = eval_task3(model, test);
    REQUIRE(r.valid_pairs == 1);
    REQUIRE(r.recall_at.at(5) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    REQUIRE(r.recall_at.at(10) == 1.0);
    REQUIRE(r.recall_at.at(100) == 1.0);
  }

  SECTION("all true matches in the top 5 gives recall 1 at every cutoff") {
    std::vector<Sample> test;
    test.push_back(testsup::bit_sample(0, bits_from_mask(0, 8), 1, {0}));
    test.push_back(testsup::bit_sample(1, bits_from_mask(0b1, 8), 1, {1}));
    test.push_back(testsup::bit_sample(2, bits_from_mask(0b1, 8), 1, {1}));
    const RecallResult r = eval_task3(model, test);
    REQUIRE(r.valid_pairs == 1);
    for (int k : kRecallCutoffs) REQUIRE(r.recall_at.at(k) == 1.0);
  }

  SECTION("recall is monotone in K on random data") {
    DphModel rmodel = testsup::bit_model(10, 3, 3);
    Rng rng(113);
    randomize_attr_head(rmodel, rng);
    std::vector<Sample> test;
    for (int i = 0; i < 40; ++i) {
      std::vector<int> bits(10);
      for (int& b : bits) b = static_cast<int>(rng.uniform_int(2));
      std::vector<std::uint8_t> attrs(3);
      for (auto& a : attrs) a = static_cast<std::uint8_t>(rng.uniform_int(2));
      test.push_back(testsup::bit_sample(i, bits,
                                         1 + static_cast<int>(rng.uniform_int(3)), attrs));
    }
    const RecallResult r = eval_task3(rmodel, test);
    double prev = 0.0;
    for (int k : kRecallCutoffs) {
      REQUIRE(r.recall_at.at(k) >= prev);
      prev = r.recall_at.at(k);
    }
  }
}

TEST_CASE("metrics are invariant under id relabeling when nothing ties") {
  // Nested-prefix codes: pairwise distances |2^i - 2^j| are all distinct, so
  // no ranking ever depends on the tie rule.
  const std::vector<int> widths = {0, 1, 3, 7, 15, 31};
  DphModel model = testsup::bit_model(32, 3, 2);
  Rng rng(127);
  randomize_attr_head(model, rng);

  const std::vector<int> categories = {1, 1, 2, 2, 3, 3};
  const std::vector<std::vector<std::uint8_t>> truths = {
      {1, 0}, {1, 1}, {0, 0}, {1, 0}, {0, 1}, {1, 1}};
  const auto build = [&](const std::vector<std::uint64_t>& ids) {
    std::vector<Sample> test;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      std::vector<int> bits(32, 0);
      for (int b = 0; b < widths[i]; ++b) bits[b] = 1;
      test.push_back(testsup::bit_sample(ids[i], bits, categories[i], truths[i]));
    }
    return test;
  };

  const auto a = build({0, 1, 2, 3, 4, 5});
  const auto b = build({50, 3, 91, 7, 64, 12}); // non-monotone relabeling

  REQUIRE(eval_task1(model, a).value == eval_task1(model, b).value);
  REQUIRE(eval_attr_f1(model, a).mean_f1 == eval_attr_f1(model, b).mean_f1);
  REQUIRE(eval_task2(model, a, 5).value == eval_task2(model, b, 5).value);
  const RecallResult ra = eval_task3(model, a);
  const RecallResult rb = eval_task3(model, b);
  REQUIRE(ra.valid_pairs == rb.valid_pairs);
  for (int k : kRecallCutoffs) REQUIRE(ra.recall_at.at(k) == rb.recall_at.at(k));
}

TEST_CASE("ablation driver trains four models on one test set and writes 4x3 CSV") {
  SynthConfig sc;
  sc.num_categories = 3;
  sc.feature_dim = 6;
  sc.num_attributes = 2;
  sc.samples_per_category = 12;
  sc.cluster_spread = 0.5;
  sc.attribute_noise_rate = 0.05;
  sc.partition_fractions = {0.3, 0.3, 0.2, 0.2};
  sc.seed = 9;
  const Dataset ds = generate_synthetic(sc);

  ModelConfig mc;
  mc.input_dim = 6;
  mc.code_length = 8;
  mc.num_categories = 3;
  mc.num_attributes = 2;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.seed = 11;

  const std::vector<AblationRow> rows = run_ablation(ds, mc, tc);
  REQUIRE(rows.size() == 4);
  REQUIRE(rows[0].mode == AblationMode::both_only);
  REQUIRE(rows[1].mode == AblationMode::both_attribute);
  REQUIRE(rows[2].mode == AblationMode::both_category);
  REQUIRE(rows[3].mode == AblationMode::all);
  for (const AblationRow& row : rows) {
    REQUIRE(row.map >= 0.0);
    REQUIRE(row.map <= 1.0);
    REQUIRE(row.mean_f1 >= 0.0);
    REQUIRE(row.mean_f1 <= 1.0);
  }

  testsup::TempDir tmp("eval_ablation");
  save_ablation_csv(rows, tmp.file("table.csv"));
  const std::string text = testsup::read_file(tmp.file("table.csv"));
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  REQUIRE(lines == 4);
  REQUIRE(text.starts_with("B,"));
  REQUIRE(text.find("\nB+A+C,") != std::string::npos);
  const std::string body = text.substr(0, text.size() - 1);
  for (const auto line_view : detail::split(body, '\n')) {
    REQUIRE(detail::split(line_view, ',').size() == 3);
  }
}

TEST_CASE("full eval report serializes every metric") {
  DphModel model = testsup::bit_model(8, 2, 2);
  Rng rng(131);
  randomize_attr_head(model, rng);
  std::vector<Sample> test;
  for (int i = 0; i < 12; ++i) {
    std::vector<int> bits(8);
    for (int& b : bits) b = static_cast<int>(rng.uniform_int(2));
    std::vector<std::uint8_t> attrs(2);
    for (auto& a : attrs) a = static_cast<std::uint8_t>(rng.uniform_int(2));
    test.push_back(testsup::bit_sample(i, bits, 1 + static_cast<int>(rng.uniform_int(2)),
                                       attrs));
  }
  const EvalReport report = run_full_eval(model, test, 99, "B+A+C");
  testsup::TempDir tmp("eval_report");
  save_report(report, tmp.file("report.txt"));
  const std::string text = testsup::read_file(tmp.file("report.txt"));
  for (const char* key :
       {"task1_map = ", "mean_f1 = ", "f1_attr_1 = ", "f1_attr_2 = ",
        "task2_avg_map = ", "recall_at_5 = ", "recall_at_100 = ",
        "task3_valid_pairs = ", "mode = B+A+C", "eval_seed = 99", "k = 8"}) {
    INFO(key);
    REQUIRE(text.find(key) != std::string::npos);
  }
}
