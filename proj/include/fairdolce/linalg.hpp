#pragma once

// Minimal dense vector / matrix helpers.  Everything in this project is a
// handful of small matvecs per sample, so a flat row-major buffer is all we
// need; pulling in a full linear-algebra dependency would buy nothing.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fairdolce {

using Vec = std::vector<double>;

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

inline Vec matvec(const Matrix& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols)
    throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = &m.a[static_cast<size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

// y = M^T x, used when propagating adjoints back through an affine layer.
inline Vec tmatvec(const Matrix& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.rows)
    throw std::invalid_argument("tmatvec: dimension mismatch");
  Vec y(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.a[static_cast<size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
  }
  return y;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double l2_norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double l2_dist(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_dist: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace fairdolce
