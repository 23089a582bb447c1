#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dph/dataset.hpp"
#include "dph/errors.hpp"
#include "dph/index.hpp"
#include "dph/model.hpp"
#include "dph/retrieval.hpp"

namespace dph {

inline constexpr std::array<int, 6> kRecallCutoffs = {5, 10, 20, 50, 75, 100};

// AP over the full ranking: mean over relevant items of precision at the
// rank where each is retrieved (relevant items never retrieved count as 0).
// An empty relevant set makes the query invalid; the caller skips it.
inline std::optional<double> average_precision(
    std::span<const std::uint64_t> ranked_ids,
    const std::unordered_set<std::uint64_t>& relevant) {
  if (relevant.empty()) return std::nullopt;
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked_ids.size(); ++r) {
    if (relevant.contains(ranked_ids[r])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

inline std::vector<std::uint64_t> ids_of(const RankedResult& result) {
  std::vector<std::uint64_t> ids;
  ids.reserve(result.size());
  for (const RankedHit& hit : result) ids.push_back(hit.id);
  return ids;
}

struct MetricResult {
  double value = 0.0;
  std::size_t valid_queries = 0;
};

// Leave-one-out category retrieval mAP over the test set: each sample
// queries the index of all test samples minus itself; relevant means same
// category. Queries with no same-category partner are skipped.
inline MetricResult eval_task1(const DphModel& model,
                               const std::vector<Sample>& test) {
  if (test.size() < 2) throw ConfigError("eval_task1 needs at least 2 test samples");
  const RetrievalIndex index = build_index(model, test);
  MetricResult out;
  double sum = 0.0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    if (!test[q].category.has_value()) continue;
    std::unordered_set<std::uint64_t> relevant;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i != q && test[i].category == test[q].category) relevant.insert(test[i].id);
    }
    const RankedResult ranked = task1_category(index, index.codes[q], test[q].id);
    if (const auto ap = average_precision(ids_of(ranked), relevant)) {
      sum += *ap;
      ++out.valid_queries;
    }
  }
  out.value = out.valid_queries > 0 ? sum / static_cast<double>(out.valid_queries) : 0.0;
  return out;
}

struct F1Result {
  double mean_f1 = 0.0;
  std::vector<double> per_attribute;
};

// Attribute prediction quality measured on the codes themselves: each test
// sample's attributes are recovered from its binary code, thresholded at
// 0.5, and scored per attribute as F1 = 2TP/(2TP+FP+FN) against ground
// truth (0 when the denominator is 0).
inline F1Result eval_attr_f1(const DphModel& model,
                             const std::vector<Sample>& test) {
  if (test.empty()) throw ConfigError("eval_attr_f1 needs test samples");
  const RetrievalIndex index = build_index(model, test);
  const int m = index.m;
  F1Result out;
  out.per_attribute.resize(m, 0.0);
  for (int j = 0; j < m; ++j) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::uint8_t truth = test[i].attributes[j];
      if (truth == kAttrMissing) {
        throw ValidationError("test sample id " + std::to_string(test[i].id) +
                              " is missing attribute " + std::to_string(j));
      }
      const bool predicted = index.attr_scores[i][j] >= 0.5;
      const bool actual = truth == kAttrPresent;
      if (predicted && actual) ++tp;
      else if (predicted && !actual) ++fp;
      else if (!predicted && actual) ++fn;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    out.per_attribute[j] =
        denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    out.mean_f1 += out.per_attribute[j];
  }
  out.mean_f1 /= static_cast<double>(m);
  return out;
}

// Leave-one-out attribute retrieval: for each test sample, draw a 1-3 clause
// query from its predicted attributes, rank by product of recovered scores,
// and score AP with relevance decided on ground-truth labels (an entry is
// relevant when its ground truth matches the query image's ground truth on
// every selected attribute). Queries with no relevant entry are skipped.
inline MetricResult eval_task2(const DphModel& model,
                               const std::vector<Sample>& test,
                               std::uint64_t seed) {
  if (test.size() < 2) throw ConfigError("eval_task2 needs at least 2 test samples");
  const RetrievalIndex index = build_index(model, test);
  Rng rng(seed);
  MetricResult out;
  double sum = 0.0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    const AttrQuery query = make_task2_query(index, test[q].id, rng);
    std::unordered_set<std::uint64_t> relevant;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (i == q) continue;
      bool match = true;
      for (const AttrClause& c : query.clauses) {
        if (test[i].attributes[c.attribute] != test[q].attributes[c.attribute]) {
          match = false;
          break;
        }
      }
      if (match) relevant.insert(test[i].id);
    }
    const RankedResult ranked = task2_attribute(index, query, test[q].id);
    if (const auto ap = average_precision(ids_of(ranked), relevant)) {
      sum += *ap;
      ++out.valid_queries;
    }
  }
  out.value = out.valid_queries > 0 ? sum / static_cast<double>(out.valid_queries) : 0.0;
  return out;
}

struct RecallResult {
  std::map<int, double> recall_at;
  std::size_t valid_pairs = 0;
};

// Leave-one-out combined retrieval: for every (query, attribute) pair where
// the attribute is predicted absent in the query, filter the database to
// entries predicted present, Hamming-rank them, and measure recall@K against
// true matches (same ground-truth category AND ground-truth attribute
// present). Pairs with zero true matches are ignored.
inline RecallResult eval_task3(const DphModel& model,
                               const std::vector<Sample>& test) {
  if (test.size() < 2) throw ConfigError("eval_task3 needs at least 2 test samples");
  const RetrievalIndex index = build_index(model, test);
  RecallResult out;
  std::map<int, double> sums;
  for (int k : kRecallCutoffs) sums[k] = 0.0;

  for (std::size_t q = 0; q < test.size(); ++q) {
    if (!test[q].category.has_value()) continue;
    for (int j = 0; j < index.m; ++j) {
      if (index.attr_scores[q][j] >= 0.5) continue;
      std::unordered_set<std::uint64_t> true_matches;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (i != q && test[i].category == test[q].category &&
            test[i].attributes[j] == kAttrPresent) {
          true_matches.insert(test[i].id);
        }
      }
      if (true_matches.empty()) continue;
      const RankedResult ranked =
          task3_combined(index, index.codes[q], test[q].id, j);
      for (int k : kRecallCutoffs) {
        std::size_t found = 0;
        const std::size_t top = std::min<std::size_t>(k, ranked.size());
        for (std::size_t r = 0; r < top; ++r) {
          if (true_matches.contains(ranked[r].id)) ++found;
        }
        sums[k] += static_cast<double>(found) / static_cast<double>(true_matches.size());
      }
      ++out.valid_pairs;
    }
  }
  for (int k : kRecallCutoffs) {
    out.recall_at[k] =
        out.valid_pairs > 0 ? sums[k] / static_cast<double>(out.valid_pairs) : 0.0;
  }
  return out;
}

// Everything the eval command reports, with enough metadata to reproduce it.
struct EvalReport {
  int code_length = 0;
  std::string mode = "-";
  std::uint64_t eval_seed = 0;
  double task1_map = 0.0;
  std::size_t task1_valid = 0;
  double mean_f1 = 0.0;
  std::vector<double> per_attribute_f1;
  double task2_avg_map = 0.0;
  std::size_t task2_valid = 0;
  std::map<int, double> task3_recall;
  std::size_t task3_valid_pairs = 0;
};

inline EvalReport run_full_eval(const DphModel& model,
                                const std::vector<Sample>& test,
                                std::uint64_t eval_seed,
                                const std::string& mode = "-") {
  EvalReport report;
  report.code_length = model.config.code_length;
  report.mode = mode;
  report.eval_seed = eval_seed;
  const MetricResult t1 = eval_task1(model, test);
  report.task1_map = t1.value;
  report.task1_valid = t1.valid_queries;
  const F1Result f1 = eval_attr_f1(model, test);
  report.mean_f1 = f1.mean_f1;
  report.per_attribute_f1 = f1.per_attribute;
  const MetricResult t2 = eval_task2(model, test, eval_seed);
  report.task2_avg_map = t2.value;
  report.task2_valid = t2.valid_queries;
  const RecallResult t3 = eval_task3(model, test);
  report.task3_recall = t3.recall_at;
  report.task3_valid_pairs = t3.valid_pairs;
  return report;
}

inline void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "k = " << report.code_length << '\n'
      << "mode = " << report.mode << '\n'
      << "eval_seed = " << report.eval_seed << '\n'
      << "task1_map = " << format_double(report.task1_map) << '\n'
      << "task1_valid_queries = " << report.task1_valid << '\n'
      << "mean_f1 = " << format_double(report.mean_f1) << '\n';
  for (std::size_t j = 0; j < report.per_attribute_f1.size(); ++j) {
    out << "f1_attr_" << (j + 1) << " = "
        << format_double(report.per_attribute_f1[j]) << '\n';
  }
  out << "task2_avg_map = " << format_double(report.task2_avg_map) << '\n'
      << "task2_valid_queries = " << report.task2_valid << '\n';
  for (const auto& [k, recall] : report.task3_recall) {
    out << "recall_at_" << k << " = " << format_double(recall) << '\n';
  }
  out << "task3_valid_pairs = " << report.task3_valid_pairs << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct AblationRow {
  AblationMode mode = AblationMode::both_only;
  double map = 0.0;
  double mean_f1 = 0.0;
};

// Trains the four ablation models (B, B+A, B+C, B+A+C) from one shared
// initialization so the training data is the only difference, then scores
// each on the shared test set.
inline std::vector<AblationRow> run_ablation(const Dataset& ds,
                                             const ModelConfig& model_cfg,
                                             const TrainConfig& train_cfg) {
  const DphModel initial = init_model(model_cfg, train_cfg.seed);
  const std::vector<Sample> test = test_samples(ds);
  std::vector<AblationRow> rows;
  for (AblationMode mode : kAllAblationModes) {
    DphModel model = initial;
    const std::vector<Sample> pool =
        apply_ablation_mask(ds.samples, ds.partition, mode);
    train(model, pool, mode, train_cfg);
    AblationRow row;
    row.mode = mode;
    row.map = eval_task1(model, test).value;
    row.mean_f1 = eval_attr_f1(model, test).mean_f1;
    rows.push_back(row);
  }
  return rows;
}

// Four rows, three columns: mode, category-retrieval mAP, mean attribute F1.
inline void save_ablation_csv(const std::vector<AblationRow>& rows,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const AblationRow& row : rows) {
    out << to_string(row.mode) << ',' << format_double(row.map) << ','
        << format_double(row.mean_f1) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace dph
