#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ampc/errors.hpp"

namespace ampc {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Kept deliberately small: the networks
// in this project have at most a few thousand parameters and everything is
// verified against finite differences, so transparent loops beat a BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }

  double& operator()(int r, int c) { return d_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return d_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  void fill(double v) { std::fill(d_.begin(), d_.end(), v); }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> d_;
};

inline void check_length(const Vector& v, std::size_t expect, const char* what) {
  if (v.size() != expect) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expect) +
                         ", got " + std::to_string(v.size()));
  }
}

// out = M x
inline void matvec(const Matrix& m, const Vector& x, Vector& out) {
  check_length(x, static_cast<std::size_t>(m.cols()), "matvec input");
  out.assign(static_cast<std::size_t>(m.rows()), 0.0);
  const double* md = m.data();
  for (int r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    const double* row = md + static_cast<std::size_t>(r) * m.cols();
    for (int c = 0; c < m.cols(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// out += M^T x
inline void matvec_t_add(const Matrix& m, const Vector& x, Vector& out) {
  check_length(x, static_cast<std::size_t>(m.rows()), "matvec_t input");
  check_length(out, static_cast<std::size_t>(m.cols()), "matvec_t output");
  const double* md = m.data();
  for (int r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    const double* row = md + static_cast<std::size_t>(r) * m.cols();
    for (int c = 0; c < m.cols(); ++c) out[c] += row[c] * xr;
  }
}

// M += a b^T
inline void outer_add(Matrix& m, const Vector& a, const Vector& b) {
  check_length(a, static_cast<std::size_t>(m.rows()), "outer_add lhs");
  check_length(b, static_cast<std::size_t>(m.cols()), "outer_add rhs");
  double* md = m.data();
  for (int r = 0; r < m.rows(); ++r) {
    const double ar = a[r];
    double* row = md + static_cast<std::size_t>(r) * m.cols();
    for (int c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
  }
}

inline void add_inplace(Vector& a, const Vector& b) {
  check_length(b, a.size(), "add operand");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
  check_length(x, y.size(), "axpy operand");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void scale_inplace(Vector& a, double s) {
  for (double& v : a) v *= s;
}

inline double dot(const Vector& a, const Vector& b) {
  check_length(b, a.size(), "dot operand");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline Vector concat(const Vector& a, const Vector& b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// uniform init in [-limit, limit] with limit = 1/sqrt(fan_in)
inline void init_uniform(Matrix& m, std::mt19937_64& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(m.cols() > 0 ? m.cols() : 1));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
}

}  // namespace ampc
