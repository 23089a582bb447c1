#pragma once

#include <cstddef>
#include <vector>

namespace dph {

// Dense row-major matrix of doubles. Weight matrices are stored as
// (input dim) x (output dim), so column j holds the weights feeding output j.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }

  bool operator==(const Matrix&) const = default;
};

} // namespace dph
