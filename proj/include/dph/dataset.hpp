#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dph/errors.hpp"
#include "dph/rng.hpp"
#include "dph/serial.hpp"

namespace dph {

// Ternary attribute labels.
inline constexpr std::uint8_t kAttrAbsent = 0;
inline constexpr std::uint8_t kAttrPresent = 1;
inline constexpr std::uint8_t kAttrMissing = 2;

// One data point: a feature vector, an optional category label in 1..C, and
// m ternary attribute labels. The on-disk format stores a missing category as
// the sentinel C+1; in memory it is an empty optional so the sentinel cannot
// leak into arithmetic.
struct Sample {
  std::uint64_t id = 0;
  std::vector<double> features;
  std::optional<int> category;
  std::vector<std::uint8_t> attributes;

  bool operator==(const Sample&) const = default;

  bool has_any_label() const {
    if (category.has_value()) return true;
    for (std::uint8_t a : attributes) {
      if (a != kAttrMissing) return true;
    }
    return false;
  }
};

// Disjoint id lists covering a dataset. train_category samples carry only a
// category label, train_attribute only attribute labels, train_both and test
// carry everything.
struct DatasetPartition {
  std::vector<std::uint64_t> train_both;
  std::vector<std::uint64_t> train_category;
  std::vector<std::uint64_t> train_attribute;
  std::vector<std::uint64_t> test;

  bool operator==(const DatasetPartition&) const = default;
};

// Training pools for the four-way data ablation.
enum class AblationMode { both_only, both_attribute, both_category, all };

inline std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::both_only: return "B";
    case AblationMode::both_attribute: return "B+A";
    case AblationMode::both_category: return "B+C";
    case AblationMode::all: return "B+A+C";
  }
  throw ConfigError("unknown ablation mode");
}

inline AblationMode parse_ablation_mode(std::string_view text) {
  if (text == "B") return AblationMode::both_only;
  if (text == "B+A") return AblationMode::both_attribute;
  if (text == "B+C") return AblationMode::both_category;
  if (text == "B+A+C") return AblationMode::all;
  throw ConfigError("invalid ablation mode '" + std::string(text) +
                    "' (expected B, B+A, B+C, or B+A+C)");
}

inline constexpr std::array<AblationMode, 4> kAllAblationModes = {
    AblationMode::both_only, AblationMode::both_attribute,
    AblationMode::both_category, AblationMode::all};

struct SynthConfig {
  int num_categories = 20;
  int feature_dim = 32;
  int num_attributes = 8;
  int samples_per_category = 100;
  double cluster_spread = 0.8;
  double attribute_noise_rate = 0.05;
  // Fractions for (train_both, train_category, train_attribute, test).
  std::array<double, 4> partition_fractions = {0.15, 0.55, 0.15, 0.15};
  std::uint64_t seed = 1;
};

inline void validate(const SynthConfig& cfg) {
  if (cfg.num_categories < 2) {
    throw ConfigError("num_categories must be >= 2 (got " +
                      std::to_string(cfg.num_categories) + ")");
  }
  if (cfg.num_attributes < 1) {
    throw ConfigError("num_attributes must be >= 1 (got " +
                      std::to_string(cfg.num_attributes) + ")");
  }
  if (cfg.feature_dim < cfg.num_attributes) {
    throw ConfigError("feature_dim must be >= num_attributes (got " +
                      std::to_string(cfg.feature_dim) + " < " +
                      std::to_string(cfg.num_attributes) + ")");
  }
  if (cfg.samples_per_category < 1) {
    throw ConfigError("samples_per_category must be >= 1 (got " +
                      std::to_string(cfg.samples_per_category) + ")");
  }
  if (!(cfg.cluster_spread > 0.0)) {
    throw ConfigError("cluster_spread must be > 0");
  }
  if (cfg.attribute_noise_rate < 0.0 || cfg.attribute_noise_rate >= 1.0) {
    throw ConfigError("attribute_noise_rate must be in [0, 1)");
  }
  double sum = 0.0;
  for (double f : cfg.partition_fractions) {
    if (f < 0.0) throw ConfigError("partition fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("partition fractions must sum to 1 (got " +
                      format_double(sum) + ")");
  }
}

struct Dataset {
  int num_categories = 0;
  int num_attributes = 0;
  int feature_dim = 0;
  std::vector<Sample> samples;
  DatasetPartition partition;

  bool operator==(const Dataset&) const = default;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::unordered_map<std::uint64_t, std::size_t> id_index(
    const std::vector<Sample>& samples) {
  std::unordered_map<std::uint64_t, std::size_t> map;
  map.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!map.emplace(samples[i].id, i).second) {
      throw ValidationError("duplicate sample id " + std::to_string(samples[i].id));
    }
  }
  return map;
}

} // namespace detail

// Checks every structural invariant a dataset promises: label domains,
// shapes, partition disjointness/coverage, and per-partition label masking.
inline void validate_dataset(const Dataset& ds) {
  const auto index = detail::id_index(ds.samples);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    const std::string where = "record " + std::to_string(i) + " (id " +
                              std::to_string(s.id) + ")";
    if (static_cast<int>(s.features.size()) != ds.feature_dim) {
      throw ValidationError(where + ": expected " + std::to_string(ds.feature_dim) +
                            " features, got " + std::to_string(s.features.size()));
    }
    if (static_cast<int>(s.attributes.size()) != ds.num_attributes) {
      throw ValidationError(where + ": expected " + std::to_string(ds.num_attributes) +
                            " attributes, got " + std::to_string(s.attributes.size()));
    }
    if (s.category.has_value() &&
        (*s.category < 1 || *s.category > ds.num_categories)) {
      throw ValidationError(where + ": category " + std::to_string(*s.category) +
                            " outside 1.." + std::to_string(ds.num_categories));
    }
    for (std::uint8_t a : s.attributes) {
      if (a > kAttrMissing) {
        throw ValidationError(where + ": attribute value " + std::to_string(int(a)) +
                              " outside {0,1,2}");
      }
    }
    if (!s.has_any_label()) {
      throw ValidationError(where + ": sample has no available label");
    }
  }

  std::unordered_set<std::uint64_t> seen;
  std::size_t total = 0;
  const auto check_group = [&](const std::vector<std::uint64_t>& ids,
                               const std::string& name) {
    for (std::uint64_t id : ids) {
      if (!index.contains(id)) {
        throw ValidationError("partition '" + name + "' references unknown id " +
                              std::to_string(id));
      }
      if (!seen.insert(id).second) {
        throw ValidationError("partition groups overlap at id " + std::to_string(id));
      }
      ++total;
    }
  };
  check_group(ds.partition.train_both, "both");
  check_group(ds.partition.train_category, "category");
  check_group(ds.partition.train_attribute, "attribute");
  check_group(ds.partition.test, "test");
  if (total != ds.samples.size()) {
    throw ValidationError("partition covers " + std::to_string(total) +
                          " of " + std::to_string(ds.samples.size()) + " samples");
  }

  const auto fully_labelled = [&](std::uint64_t id) {
    const Sample& s = ds.samples[index.at(id)];
    if (!s.category.has_value()) return false;
    return std::none_of(s.attributes.begin(), s.attributes.end(),
                        [](std::uint8_t a) { return a == kAttrMissing; });
  };
  for (std::uint64_t id : ds.partition.train_category) {
    const Sample& s = ds.samples[index.at(id)];
    const bool all_missing = std::all_of(
        s.attributes.begin(), s.attributes.end(),
        [](std::uint8_t a) { return a == kAttrMissing; });
    if (!s.category.has_value() || !all_missing) {
      throw ValidationError("train_category sample id " + std::to_string(id) +
                            " must have category only");
    }
  }
  for (std::uint64_t id : ds.partition.train_attribute) {
    if (ds.samples[index.at(id)].category.has_value()) {
      throw ValidationError("train_attribute sample id " + std::to_string(id) +
                            " must have no category label");
    }
  }
  for (std::uint64_t id : ds.partition.train_both) {
    if (!fully_labelled(id)) {
      throw ValidationError("train_both sample id " + std::to_string(id) +
                            " must be fully labelled");
    }
  }
  for (std::uint64_t id : ds.partition.test) {
    if (!fully_labelled(id)) {
      throw ValidationError("test sample id " + std::to_string(id) +
                            " must be fully labelled");
    }
  }
}

// Draws C Gaussian cluster centers, places samples around them, and derives
// ground-truth attributes from random hyperplanes evaluated at the centers,
// so category and attributes stay correlated by construction. Labels are then
// masked per partition group. The value stream consumed from the seeded
// generator is fixed: centers, hyperplanes, then per sample (noise, flip
// coins) in id order, then one shuffle per category for the partition split.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);

  const int C = cfg.num_categories;
  const int d = cfg.feature_dim;
  const int m = cfg.num_attributes;
  const int per_cat = cfg.samples_per_category;

  std::vector<std::vector<double>> centers(C, std::vector<double>(d));
  for (auto& center : centers) {
    for (double& x : center) x = rng.normal();
  }
  std::vector<std::vector<double>> hyperplanes(m, std::vector<double>(d));
  for (auto& h : hyperplanes) {
    for (double& x : h) x = rng.normal();
  }

  // Category-level ground-truth attributes: hyperplane sign at the center.
  std::vector<std::vector<std::uint8_t>> center_attrs(C, std::vector<std::uint8_t>(m));
  for (int c = 0; c < C; ++c) {
    for (int j = 0; j < m; ++j) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += hyperplanes[j][i] * centers[c][i];
      center_attrs[c][j] = dot > 0.0 ? kAttrPresent : kAttrAbsent;
    }
  }

  Dataset ds;
  ds.num_categories = C;
  ds.num_attributes = m;
  ds.feature_dim = d;
  ds.samples.reserve(static_cast<std::size_t>(C) * per_cat);
  for (int c = 0; c < C; ++c) {
    for (int s = 0; s < per_cat; ++s) {
      Sample sample;
      sample.id = static_cast<std::uint64_t>(c) * per_cat + s;
      sample.category = c + 1;
      sample.features.resize(d);
      for (int i = 0; i < d; ++i) {
        sample.features[i] = centers[c][i] + cfg.cluster_spread * rng.normal();
      }
      sample.attributes = center_attrs[c];
      for (int j = 0; j < m; ++j) {
        if (rng.uniform01() < cfg.attribute_noise_rate) {
          sample.attributes[j] = sample.attributes[j] == kAttrPresent
                                     ? kAttrAbsent
                                     : kAttrPresent;
        }
      }
      ds.samples.push_back(std::move(sample));
    }
  }

  // Stratified split: each category contributes the same group counts,
  // derived from cumulative fractions so the groups always cover exactly.
  std::array<double, 4> cum{};
  double acc = 0.0;
  for (int g = 0; g < 4; ++g) {
    acc += cfg.partition_fractions[g];
    cum[g] = acc;
  }
  std::array<std::size_t, 4> bounds{};
  for (int g = 0; g < 3; ++g) {
    bounds[g] = static_cast<std::size_t>(std::floor(cum[g] * per_cat + 1e-9));
  }
  bounds[3] = per_cat;

  std::array<std::vector<std::uint64_t>*, 4> groups = {
      &ds.partition.train_both, &ds.partition.train_category,
      &ds.partition.train_attribute, &ds.partition.test};
  for (int c = 0; c < C; ++c) {
    std::vector<std::uint64_t> ids(per_cat);
    for (int s = 0; s < per_cat; ++s) {
      ids[s] = static_cast<std::uint64_t>(c) * per_cat + s;
    }
    rng.shuffle(ids);
    std::size_t pos = 0;
    for (int g = 0; g < 4; ++g) {
      for (; pos < bounds[g]; ++pos) groups[g]->push_back(ids[pos]);
    }
  }
  for (auto* group : groups) std::sort(group->begin(), group->end());

  const auto index = detail::id_index(ds.samples);
  for (std::uint64_t id : ds.partition.train_category) {
    auto& attrs = ds.samples[index.at(id)].attributes;
    std::fill(attrs.begin(), attrs.end(), kAttrMissing);
  }
  for (std::uint64_t id : ds.partition.train_attribute) {
    ds.samples[index.at(id)].category.reset();
  }

  validate_dataset(ds);
  return ds;
}

inline std::string partition_path_for(const std::string& dataset_path) {
  return dataset_path + ".part";
}

// Dataset file: one header line, then one tab-separated record per sample
// (id, category with C+1 meaning missing, m attribute digits, d floats).
// The partition lands in a sibling "<path>.part" file of four id lists.
inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "dph-dataset v1 C=" << ds.num_categories << " m=" << ds.num_attributes
      << " d=" << ds.feature_dim << " N=" << ds.samples.size() << "\n";
  for (const Sample& s : ds.samples) {
    out << s.id << '\t'
        << (s.category.has_value() ? *s.category : ds.num_categories + 1) << '\t';
    for (std::uint8_t a : s.attributes) out << char('0' + a);
    for (double f : s.features) out << '\t' << format_double(f);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");

  std::ofstream pout(partition_path_for(path), std::ios::binary);
  if (!pout) {
    throw IoError("cannot open '" + partition_path_for(path) + "' for writing");
  }
  const auto write_group = [&](const char* name,
                               const std::vector<std::uint64_t>& ids) {
    pout << name << ':';
    for (std::size_t i = 0; i < ids.size(); ++i) {
      pout << (i == 0 ? " " : ",") << ids[i];
    }
    pout << '\n';
  };
  write_group("both", ds.partition.train_both);
  write_group("category", ds.partition.train_category);
  write_group("attribute", ds.partition.train_attribute);
  write_group("test", ds.partition.test);
  if (!pout) throw IoError("write failed for '" + partition_path_for(path) + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::uint64_t> parse_id_list(std::string_view text,
                                                const std::string& context) {
  std::vector<std::uint64_t> ids;
  text = trim(text);
  if (text.empty()) return ids;
  for (std::string_view part : split(text, ',')) {
    ids.push_back(parse_u64(trim(part), context));
  }
  return ids;
}

} // namespace detail

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header line");
  {
    const auto tokens = detail::split(detail::trim(line), ' ');
    if (tokens.size() != 6 || tokens[0] != "dph-dataset" || tokens[1] != "v1") {
      throw ParseError(path + ": line 1: bad header (expected 'dph-dataset v1 ...')");
    }
    const auto field = [&](std::string_view token, std::string_view key) {
      if (!token.starts_with(key)) {
        throw ParseError(path + ": line 1: expected '" + std::string(key) +
                         "<int>', got '" + std::string(token) + "'");
      }
      return parse_u64(token.substr(key.size()), path + " header");
    };
    Dataset ds;
    ds.num_categories = static_cast<int>(field(tokens[2], "C="));
    ds.num_attributes = static_cast<int>(field(tokens[3], "m="));
    ds.feature_dim = static_cast<int>(field(tokens[4], "d="));
    const std::uint64_t n = field(tokens[5], "N=");

    ds.samples.reserve(n);
    for (std::uint64_t rec = 0; rec < n; ++rec) {
      const std::string where = path + ": record " + std::to_string(rec) +
                                " (line " + std::to_string(rec + 2) + ")";
      if (!std::getline(in, line)) throw ParseError(where + ": unexpected end of file");
      const auto fields = detail::split(detail::trim(line), '\t');
      if (fields.size() != 3 + static_cast<std::size_t>(ds.feature_dim)) {
        throw ParseError(where + ": expected " +
                         std::to_string(3 + ds.feature_dim) + " fields, got " +
                         std::to_string(fields.size()));
      }
      Sample s;
      s.id = parse_u64(fields[0], where);
      const long long cat = parse_i64(fields[1], where);
      if (cat < 1 || cat > ds.num_categories + 1) {
        throw ValidationError(where + ": category " + std::to_string(cat) +
                              " outside 1.." + std::to_string(ds.num_categories + 1));
      }
      if (cat <= ds.num_categories) s.category = static_cast<int>(cat);
      if (fields[2].size() != static_cast<std::size_t>(ds.num_attributes)) {
        throw ParseError(where + ": expected " + std::to_string(ds.num_attributes) +
                         " attribute digits, got " + std::to_string(fields[2].size()));
      }
      s.attributes.reserve(ds.num_attributes);
      for (char ch : fields[2]) {
        if (ch < '0' || ch > '2') {
          throw ValidationError(where + ": attribute value '" + std::string(1, ch) +
                                "' outside {0,1,2}");
        }
        s.attributes.push_back(static_cast<std::uint8_t>(ch - '0'));
      }
      s.features.reserve(ds.feature_dim);
      for (int i = 0; i < ds.feature_dim; ++i) {
        s.features.push_back(parse_double(fields[3 + i], where));
      }
      ds.samples.push_back(std::move(s));
    }
    std::string extra;
    while (std::getline(in, extra)) {
      if (!detail::trim(extra).empty()) {
        throw ParseError(path + ": unexpected content after " + std::to_string(n) +
                         " records");
      }
    }

    const std::string ppath = partition_path_for(path);
    std::ifstream pin(ppath, std::ios::binary);
    if (!pin) throw IoError("cannot open '" + ppath + "'");
    const auto read_group = [&](const char* name) {
      std::string pline;
      if (!std::getline(pin, pline)) {
        throw ParseError(ppath + ": missing '" + std::string(name) + ":' line");
      }
      const std::string prefix = std::string(name) + ":";
      std::string_view view = detail::trim(pline);
      if (!view.starts_with(prefix)) {
        throw ParseError(ppath + ": expected line starting with '" + prefix + "'");
      }
      return detail::parse_id_list(view.substr(prefix.size()), ppath);
    };
    ds.partition.train_both = read_group("both");
    ds.partition.train_category = read_group("category");
    ds.partition.train_attribute = read_group("attribute");
    ds.partition.test = read_group("test");

    validate_dataset(ds);
    return ds;
  }
}

// Selects the training pool for an ablation mode. Label masking already
// happened when the dataset was built; this only picks which groups train.
// The test group is never included.
inline std::vector<Sample> apply_ablation_mask(const std::vector<Sample>& samples,
                                               const DatasetPartition& partition,
                                               AblationMode mode) {
  const auto index = detail::id_index(samples);
  std::vector<std::uint64_t> ids = partition.train_both;
  if (mode == AblationMode::both_attribute || mode == AblationMode::all) {
    ids.insert(ids.end(), partition.train_attribute.begin(),
               partition.train_attribute.end());
  }
  if (mode == AblationMode::both_category || mode == AblationMode::all) {
    ids.insert(ids.end(), partition.train_category.begin(),
               partition.train_category.end());
  }
  std::sort(ids.begin(), ids.end());

  std::vector<Sample> pool;
  pool.reserve(ids.size());
  for (std::uint64_t id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("partition references unknown id " + std::to_string(id));
    }
    pool.push_back(samples[it->second]);
  }
  return pool;
}

// Convenience accessor for the held-out evaluation set.
inline std::vector<Sample> test_samples(const Dataset& ds) {
  const auto index = detail::id_index(ds.samples);
  std::vector<Sample> out;
  out.reserve(ds.partition.test.size());
  for (std::uint64_t id : ds.partition.test) {
    out.push_back(ds.samples[index.at(id)]);
  }
  return out;
}

} // namespace dph
