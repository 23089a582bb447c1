#pragma once

// Helpers shared by the unit and acceptance suites: scratch directories,
// hand-constructable models whose codes equal their input bit patterns, and
// random index builders.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dph/dph.hpp"

namespace testsup {

// Scratch directory under the working directory, wiped on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::current_path() / ("scratch_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Model with no hidden stack whose code layer saturates each bit to the
// corresponding 0/1 input feature, and whose attribute head predicts
// attribute j from bit j. Class head is zero. Lets tests dictate codes and
// predicted attributes directly through the features.
inline dph::DphModel bit_model(int k, int num_categories, int m) {
  dph::ModelConfig cfg;
  cfg.input_dim = k;
  cfg.code_length = k;
  cfg.num_categories = num_categories;
  cfg.num_attributes = m;
  dph::DphModel model = dph::init_model(cfg, 0);
  std::fill(model.params.code.W.data.begin(), model.params.code.W.data.end(), 0.0);
  std::fill(model.params.cls.W.data.begin(), model.params.cls.W.data.end(), 0.0);
  std::fill(model.params.attr.W.data.begin(), model.params.attr.W.data.end(), 0.0);
  for (int i = 0; i < k; ++i) {
    model.params.code.W(i, i) = 50.0;
    model.params.code.b[i] = -25.0;
  }
  for (int j = 0; j < std::min(k, m); ++j) {
    model.params.attr.W(j, j) = 50.0;
    model.params.attr.b[j] = -25.0;
  }
  return model;
}

// Sample whose features are the given bit pattern (for use with bit_model).
inline dph::Sample bit_sample(std::uint64_t id, const std::vector<int>& bits,
                              std::optional<int> category,
                              const std::vector<std::uint8_t>& attributes) {
  dph::Sample s;
  s.id = id;
  s.features.assign(bits.begin(), bits.end());
  s.category = category;
  s.attributes = attributes;
  return s;
}

inline dph::BinaryCode random_code(int k, dph::Rng& rng) {
  dph::BinaryCode code(k);
  for (int i = 0; i < k; ++i) {
    if (rng.uniform01() < 0.5) code.set_bit(i);
  }
  return code;
}

// Index over random codes with a random attribute head; no model involved.
inline dph::RetrievalIndex random_index(int n, int k, int m, dph::Rng& rng) {
  dph::RetrievalIndex index;
  index.k = k;
  index.m = m;
  index.attr_weights = dph::Matrix(k, m);
  for (double& w : index.attr_weights.data) w = rng.normal();
  index.attr_biases.resize(m);
  for (double& b : index.attr_biases) b = 0.25 * rng.normal();
  for (int i = 0; i < n; ++i) {
    index.ids.push_back(static_cast<std::uint64_t>(i));
    index.codes.push_back(random_code(k, rng));
  }
  index.finalize();
  return index;
}

// Per-bit Hamming distance, the slow way.
inline int naive_hamming(const dph::BinaryCode& a, const dph::BinaryCode& b) {
  int dist = 0;
  for (int i = 0; i < a.k; ++i) {
    if (a.bit(i) != b.bit(i)) ++dist;
  }
  return dist;
}

// Brute-force average precision used as the metric oracle: rescans the
// prefix at every relevant hit instead of keeping a running count.
inline double brute_force_ap(const std::vector<std::uint64_t>& ranked,
                             const std::unordered_set<std::uint64_t>& relevant) {
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!relevant.contains(ranked[r])) continue;
    std::size_t in_prefix = 0;
    for (std::size_t t = 0; t <= r; ++t) {
      if (relevant.contains(ranked[t])) ++in_prefix;
    }
    sum += static_cast<double>(in_prefix) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

// Every parameter scalar of a model, in declared order, paired with the
// matching slot of a gradient set by the caller's convention.
inline std::vector<double*> flat_params(dph::ParamSet& params) {
  std::vector<double*> out;
  for (const dph::LayerRef& ref : dph::layers_of(params)) {
    for (double& w : ref.layer->W.data) out.push_back(&w);
    for (double& b : ref.layer->b) out.push_back(&b);
  }
  return out;
}

// Random batch mixing present and missing labels; every sample keeps at
// least one label.
inline std::vector<dph::Sample> random_batch(int n, int d, int num_categories,
                                             int m, dph::Rng& rng) {
  std::vector<dph::Sample> batch;
  for (int i = 0; i < n; ++i) {
    dph::Sample s;
    s.id = static_cast<std::uint64_t>(i);
    s.features.resize(d);
    for (double& f : s.features) f = rng.normal();
    for (;;) {
      if (rng.uniform01() < 0.7) {
        s.category = 1 + static_cast<int>(rng.uniform_int(num_categories));
      } else {
        s.category.reset();
      }
      s.attributes.clear();
      for (int j = 0; j < m; ++j) {
        s.attributes.push_back(static_cast<std::uint8_t>(rng.uniform_int(3)));
      }
      if (s.has_any_label()) break;
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

} // namespace testsup
