#pragma once

// Minimal dense row-major matrix. Only what the MLP backend and its trainer
// need; deliberately not a general tensor library.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "latref/rng.hpp"

namespace latref {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major, rows*cols

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  static Matrix zeros(int r, int c) { return Matrix(r, c); }

  static Matrix random_gaussian(int r, int c, double stddev, Rng& rng) {
    Matrix m(r, c);
    for (auto& x : m.data) x = stddev * rng.gaussian();
    return m;
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // y = M x, x has length cols, y has length rows.
  std::vector<double> matvec(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols) throw std::invalid_argument("matvec: size mismatch");
    std::vector<double> y(static_cast<size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      const double* row = data.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += row[c] * x[static_cast<size_t>(c)];
      y[static_cast<size_t>(r)] = acc;
    }
    return y;
  }

  // y = M^T x, x has length rows, y has length cols.
  std::vector<double> tmatvec(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != rows) throw std::invalid_argument("tmatvec: size mismatch");
    std::vector<double> y(static_cast<size_t>(cols), 0.0);
    for (int r = 0; r < rows; ++r) {
      const double xr = x[static_cast<size_t>(r)];
      const double* row = data.data() + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) y[static_cast<size_t>(c)] += row[c] * xr;
    }
    return y;
  }

  // M += scale * u v^T, u has length rows, v has length cols.
  void add_outer(const std::vector<double>& u, const std::vector<double>& v, double scale) {
    if (static_cast<int>(u.size()) != rows || static_cast<int>(v.size()) != cols)
      throw std::invalid_argument("add_outer: size mismatch");
    for (int r = 0; r < rows; ++r) {
      double* row = data.data() + static_cast<size_t>(r) * cols;
      const double ur = scale * u[static_cast<size_t>(r)];
      for (int c = 0; c < cols; ++c) row[c] += ur * v[static_cast<size_t>(c)];
    }
  }

  void add_scaled(const Matrix& o, double scale) {
    if (!same_shape(o)) throw std::invalid_argument("add_scaled: shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += scale * o.data[i];
  }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

}  // namespace latref
