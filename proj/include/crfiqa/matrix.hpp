#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crfiqa {

// Row-major dense matrix. Storage only; the math lives with its users.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int rows_in, int cols_in)
      : rows(rows_in),
        cols(cols_in),
        data(static_cast<std::size_t>(rows_in) * static_cast<std::size_t>(cols_in), 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

}  // namespace crfiqa
