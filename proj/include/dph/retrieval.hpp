#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dph/errors.hpp"
#include "dph/index.hpp"
#include "dph/rng.hpp"

namespace dph {

// One conjunct of an attribute query: attribute index (0-based) and the
// desired value.
struct AttrClause {
  int attribute = 0;
  int desired = 1;

  bool operator==(const AttrClause&) const = default;
};

// 1 to 3 clauses over distinct attributes.
struct AttrQuery {
  std::vector<AttrClause> clauses;

  bool operator==(const AttrQuery&) const = default;
};

inline void validate(const AttrQuery& query, int num_attributes) {
  if (query.clauses.empty() || query.clauses.size() > 3) {
    throw QueryError("attribute query must have 1 to 3 clauses (got " +
                     std::to_string(query.clauses.size()) + ")");
  }
  for (std::size_t a = 0; a < query.clauses.size(); ++a) {
    const AttrClause& c = query.clauses[a];
    if (c.attribute < 0 || c.attribute >= num_attributes) {
      throw QueryError("clause attribute " + std::to_string(c.attribute) +
                       " outside 0.." + std::to_string(num_attributes - 1));
    }
    if (c.desired != 0 && c.desired != 1) {
      throw QueryError("clause desired value must be 0 or 1");
    }
    for (std::size_t b = a + 1; b < query.clauses.size(); ++b) {
      if (query.clauses[b].attribute == c.attribute) {
        throw QueryError("clause attributes must be distinct");
      }
    }
  }
}

struct RankedHit {
  std::uint64_t id = 0;
  double score = 0.0;

  bool operator==(const RankedHit&) const = default;
};

using RankedResult = std::vector<RankedHit>;

// Category retrieval: every database entry except the excluded one, in
// ascending Hamming distance, ties broken by ascending id. Score is the
// distance.
inline RankedResult task1_category(const RetrievalIndex& index,
                                   const BinaryCode& query_code,
                                   std::optional<std::uint64_t> exclude_id) {
  if (query_code.k != index.k) {
    throw ShapeError("task1: query code length " + std::to_string(query_code.k) +
                     " != index code length " + std::to_string(index.k));
  }
  RankedResult result;
  result.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude_id && index.ids[i] == *exclude_id) continue;
    result.push_back({index.ids[i],
                      static_cast<double>(hamming(query_code, index.codes[i]))});
  }
  std::sort(result.begin(), result.end(), [](const RankedHit& a, const RankedHit& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  return result;
}

// Attribute retrieval: rank by the product over clauses of the recovered
// score (p for a desired attribute, 1-p for an undesired one), descending,
// ties by ascending id.
inline RankedResult task2_attribute(const RetrievalIndex& index,
                                    const AttrQuery& query,
                                    std::optional<std::uint64_t> exclude_id) {
  validate(query, index.m);
  RankedResult result;
  result.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude_id && index.ids[i] == *exclude_id) continue;
    double score = 1.0;
    for (const AttrClause& c : query.clauses) {
      const double p = index.attr_scores[i][c.attribute];
      score *= c.desired == 1 ? p : 1.0 - p;
    }
    result.push_back({index.ids[i], score});
  }
  std::sort(result.begin(), result.end(), [](const RankedHit& a, const RankedHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return result;
}

// Draws a query the way the evaluation protocol does: 1-3 distinct random
// attributes (clipped to m), desired values taken from the query image's own
// predicted attributes (recovered scores thresholded at 0.5).
inline AttrQuery make_task2_query(const RetrievalIndex& index,
                                  std::uint64_t query_id, Rng& rng) {
  const auto row = index.row_of(query_id);
  if (!row) throw QueryError("id " + std::to_string(query_id) + " not in index");

  const int count = std::min<int>(1 + static_cast<int>(rng.uniform_int(3)), index.m);
  std::vector<int> attrs(index.m);
  for (int j = 0; j < index.m; ++j) attrs[j] = j;
  for (int t = 0; t < count; ++t) {
    const int j = t + static_cast<int>(rng.uniform_int(index.m - t));
    std::swap(attrs[t], attrs[j]);
  }
  attrs.resize(count);
  std::sort(attrs.begin(), attrs.end());

  AttrQuery query;
  for (int j : attrs) {
    query.clauses.push_back({j, index.attr_scores[*row][j] >= 0.5 ? 1 : 0});
  }
  return query;
}

// Combined retrieval: keep entries predicted to possess attribute j, then
// Hamming-rank the survivors against the query code. The query image itself
// must be predicted NOT to possess j.
inline RankedResult task3_combined(const RetrievalIndex& index,
                                   const BinaryCode& query_code,
                                   std::uint64_t query_id, int flip_attribute) {
  if (query_code.k != index.k) {
    throw ShapeError("task3: query code length mismatch");
  }
  if (flip_attribute < 0 || flip_attribute >= index.m) {
    throw QueryError("attribute " + std::to_string(flip_attribute) +
                     " outside 0.." + std::to_string(index.m - 1));
  }
  const auto row = index.row_of(query_id);
  if (!row) throw QueryError("id " + std::to_string(query_id) + " not in index");
  if (index.attr_scores[*row][flip_attribute] >= 0.5) {
    throw QueryError("attribute " + std::to_string(flip_attribute) +
                     " is predicted present in the query image; pick an absent one");
  }

  RankedResult result;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index.ids[i] == query_id) continue;
    if (index.attr_scores[i][flip_attribute] < 0.5) continue;
    result.push_back({index.ids[i],
                      static_cast<double>(hamming(query_code, index.codes[i]))});
  }
  std::sort(result.begin(), result.end(), [](const RankedHit& a, const RankedHit& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;
  });
  return result;
}

} // namespace dph
