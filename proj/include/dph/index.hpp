#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dph/errors.hpp"
#include "dph/matrix.hpp"
#include "dph/model.hpp"
#include "dph/serial.hpp"

namespace dph {

// k bits packed little-endian into 64-bit words: bit i lives in word i/64 at
// position i%64. Padding bits above k are always zero, so whole-word XOR and
// popcount give exact Hamming distances.
struct BinaryCode {
  int k = 0;
  std::vector<std::uint64_t> words;

  static std::size_t words_for(int k) {
    return (static_cast<std::size_t>(k) + 63) / 64;
  }

  explicit BinaryCode(int length = 0) : k(length), words(words_for(length), 0) {}

  bool bit(int i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
  void set_bit(int i) { words[i >> 6] |= std::uint64_t{1} << (i & 63); }

  bool operator==(const BinaryCode&) const = default;
};

// Threshold at the sigmoid midpoint, inclusive on the upper side.
inline BinaryCode quantize(std::span<const double> binary_like) {
  BinaryCode code(static_cast<int>(binary_like.size()));
  for (int i = 0; i < code.k; ++i) {
    if (binary_like[i] >= 0.5) code.set_bit(i);
  }
  return code;
}

inline BinaryCode encode(const DphModel& model, std::span<const double> features) {
  return quantize(forward(model, features).binary_like);
}

inline int hamming(const BinaryCode& a, const BinaryCode& b) {
  if (a.k != b.k) {
    throw ShapeError("hamming: code lengths differ (" + std::to_string(a.k) +
                     " vs " + std::to_string(b.k) + ")");
  }
  int dist = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) {
    dist += std::popcount(a.words[w] ^ b.words[w]);
  }
  return dist;
}

// Attribute probabilities straight from a code: sum the attribute-head weight
// rows of the set bits (ascending bit index), add the bias, squash. This is
// the k x m matrix the retrieval index stores instead of any real-valued
// features.
inline std::vector<double> recover_attributes(const BinaryCode& code,
                                              const Matrix& attr_weights,
                                              std::span<const double> attr_biases) {
  if (attr_weights.rows != static_cast<std::size_t>(code.k) ||
      attr_weights.cols != attr_biases.size()) {
    throw ShapeError("recover_attributes: weight shape mismatch");
  }
  const std::size_t m = attr_biases.size();
  std::vector<double> probs(m);
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (int i = 0; i < code.k; ++i) {
      if (code.bit(i)) acc += attr_weights(i, j);
    }
    acc += attr_biases[j];
    probs[j] = sigmoid(acc);
  }
  return probs;
}

// Codes for a database plus the attribute head needed to recover attribute
// scores from them. Immutable once built; attr_scores[i] is always exactly
// recover_attributes(codes[i]).
struct RetrievalIndex {
  int k = 0;
  int m = 0;
  std::vector<std::uint64_t> ids;
  std::vector<BinaryCode> codes;
  Matrix attr_weights;
  std::vector<double> attr_biases;
  std::vector<std::vector<double>> attr_scores;

  std::size_t size() const { return ids.size(); }

  std::optional<std::size_t> row_of(std::uint64_t id) const {
    const auto it = row_by_id_.find(id);
    if (it == row_by_id_.end()) return std::nullopt;
    return it->second;
  }

  // Derived state: id lookup and the precomputed attribute scores.
  void finalize() {
    row_by_id_.clear();
    row_by_id_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!row_by_id_.emplace(ids[i], i).second) {
        throw ValidationError("duplicate id " + std::to_string(ids[i]) +
                              " in retrieval index");
      }
    }
    attr_scores.resize(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
      attr_scores[i] = recover_attributes(codes[i], attr_weights, attr_biases);
    }
  }

  bool operator==(const RetrievalIndex& other) const {
    return k == other.k && m == other.m && ids == other.ids &&
           codes == other.codes && attr_weights == other.attr_weights &&
           attr_biases == other.attr_biases;
  }

private:
  std::unordered_map<std::uint64_t, std::size_t> row_by_id_;
};

inline RetrievalIndex build_index(const DphModel& model,
                                  const std::vector<Sample>& samples) {
  if (samples.empty()) throw ConfigError("cannot build an index over zero samples");
  RetrievalIndex index;
  index.k = model.config.code_length;
  index.m = model.config.num_attributes;
  index.attr_weights = model.params.attr.W;
  index.attr_biases = model.params.attr.b;
  index.ids.reserve(samples.size());
  index.codes.reserve(samples.size());
  for (const Sample& s : samples) {
    index.ids.push_back(s.id);
    index.codes.push_back(encode(model, s.features));
  }
  index.finalize();
  return index;
}

inline constexpr char kIndexMagic[8] = {'D', 'P', 'H', 'I', 'D', 'X', '1', '\0'};

// Binary layout: 8-byte magic, then k, m, N as little-endian u64, then the N
// ids, then the packed code words, then the k x m attribute weights
// (row-major) and the m biases as little-endian doubles. Scores are derived,
// not stored.
inline void save_index(const RetrievalIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kIndexMagic, 8);
  write_u64_le(out, static_cast<std::uint64_t>(index.k));
  write_u64_le(out, static_cast<std::uint64_t>(index.m));
  write_u64_le(out, index.size());
  for (std::uint64_t id : index.ids) write_u64_le(out, id);
  for (const BinaryCode& code : index.codes) {
    for (std::uint64_t w : code.words) write_u64_le(out, w);
  }
  for (double w : index.attr_weights.data) write_f64_le(out, w);
  for (double b : index.attr_biases) write_f64_le(out, b);
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline RetrievalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || !std::equal(magic, magic + 8, kIndexMagic)) {
    throw IoError(path + ": bad magic (not a dph index file)");
  }
  std::uint64_t offset = 8;
  RetrievalIndex index;
  index.k = static_cast<int>(read_u64_le(in, offset));
  index.m = static_cast<int>(read_u64_le(in, offset));
  const std::uint64_t n = read_u64_le(in, offset);
  if (index.k < 1 || index.m < 1) {
    throw ValidationError(path + ": k and m must be >= 1");
  }
  index.ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) index.ids.push_back(read_u64_le(in, offset));
  index.codes.reserve(n);
  const std::size_t words = BinaryCode::words_for(index.k);
  for (std::uint64_t i = 0; i < n; ++i) {
    BinaryCode code(index.k);
    for (std::size_t w = 0; w < words; ++w) code.words[w] = read_u64_le(in, offset);
    if (index.k % 64 != 0) {
      const std::uint64_t pad_mask = ~std::uint64_t{0} << (index.k % 64);
      if (code.words.back() & pad_mask) {
        throw ValidationError(path + ": nonzero padding bits in code " +
                              std::to_string(i));
      }
    }
    index.codes.push_back(std::move(code));
  }
  index.attr_weights = Matrix(static_cast<std::size_t>(index.k),
                              static_cast<std::size_t>(index.m));
  for (double& w : index.attr_weights.data) w = read_f64_le(in, offset);
  index.attr_biases.resize(index.m);
  for (double& b : index.attr_biases) b = read_f64_le(in, offset);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path + ": trailing bytes after offset " + std::to_string(offset));
  }
  index.finalize();
  return index;
}

} // namespace dph
