#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>

#include "gravalloc/errors.hpp"

namespace gravalloc {

/// Largest ambient dimension supported by the fixed-capacity vector types.
inline constexpr int kMaxDim = 8;

/// Dimension-generic real vector with inline storage (no heap traffic in hot loops).
class Vec {
 public:
  Vec() = default;
  explicit Vec(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) {
      throw ValidationError("dimension out of supported range [1, 8]");
    }
  }
  Vec(std::initializer_list<double> values) : Vec(static_cast<int>(values.size())) {
    int i = 0;
    for (double v : values) c_[i++] = v;
  }
  explicit Vec(std::span<const double> values) : Vec(static_cast<int>(values.size())) {
    for (int i = 0; i < dim_; ++i) c_[i] = values[i];
  }

  static Vec zeros(int dim) { return Vec(dim); }
  static Vec filled(int dim, double value) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v.c_[i] = value;
    return v;
  }
  static Vec unit(int dim, int axis) {
    Vec v(dim);
    v.c_[axis] = 1.0;
    return v;
  }

  int dim() const noexcept { return dim_; }
  double operator[](int i) const noexcept { return c_[i]; }
  double& operator[](int i) noexcept { return c_[i]; }
  const double* data() const noexcept { return c_.data(); }
  double* data() noexcept { return c_.data(); }
  std::span<const double> coords() const noexcept { return {c_.data(), static_cast<std::size_t>(dim_)}; }

  Vec& operator+=(const Vec& o) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) noexcept {
    for (int i = 0; i < dim_; ++i) c_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
  friend Vec operator*(Vec a, double s) noexcept { return a *= s; }
  friend Vec operator*(double s, Vec a) noexcept { return a *= s; }
  friend Vec operator-(Vec a) noexcept { return a *= -1.0; }

  friend bool operator==(const Vec& a, const Vec& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i) {
      if (a.c_[i] != b.c_[i]) return false;
    }
    return true;
  }

  double dot(const Vec& o) const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += c_[i] * o.c_[i];
    return s;
  }
  double norm2() const noexcept { return dot(*this); }
  double norm() const noexcept { return std::sqrt(norm2()); }
  double norm_inf() const noexcept {
    double m = 0.0;
    for (int i = 0; i < dim_; ++i) m = std::fmax(m, std::fabs(c_[i]));
    return m;
  }
  bool finite() const noexcept {
    for (int i = 0; i < dim_; ++i) {
      if (!std::isfinite(c_[i])) return false;
    }
    return true;
  }

 private:
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

using Point = Vec;

inline double distance(const Vec& a, const Vec& b) noexcept { return (a - b).norm(); }

/// Lexicographic order on coordinates; the deterministic tie-break for equidistant stars.
inline bool lexicographic_less(const Vec& a, const Vec& b) noexcept {
  for (int i = 0; i < a.dim(); ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return false;
}

/// Square d x d matrix with inline storage, row-major.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int dim) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) {
      throw ValidationError("dimension out of supported range [1, 8]");
    }
  }
  static Matrix identity(int dim, double scale = 1.0) {
    Matrix m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = scale;
    return m;
  }

  int dim() const noexcept { return dim_; }
  double operator()(int r, int c) const noexcept { return a_[r * kMaxDim + c]; }
  double& operator()(int r, int c) noexcept { return a_[r * kMaxDim + c]; }

  Matrix& operator+=(const Matrix& o) noexcept {
    for (int r = 0; r < dim_; ++r)
      for (int c = 0; c < dim_; ++c) (*this)(r, c) += o(r, c);
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) noexcept { return a += b; }

  Vec operator*(const Vec& v) const noexcept {
    Vec out(dim_);
    for (int r = 0; r < dim_; ++r) {
      double s = 0.0;
      for (int c = 0; c < dim_; ++c) s += (*this)(r, c) * v[c];
      out[r] = s;
    }
    return out;
  }

  double trace() const noexcept {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }
  double frobenius_norm() const noexcept {
    double s = 0.0;
    for (int r = 0; r < dim_; ++r)
      for (int c = 0; c < dim_; ++c) s += (*this)(r, c) * (*this)(r, c);
    return std::sqrt(s);
  }
  double max_asymmetry() const noexcept {
    double m = 0.0;
    for (int r = 0; r < dim_; ++r)
      for (int c = r + 1; c < dim_; ++c) m = std::fmax(m, std::fabs((*this)(r, c) - (*this)(c, r)));
    return m;
  }

 private:
  std::array<double, kMaxDim * kMaxDim> a_{};
  int dim_ = 0;
};

}  // namespace gravalloc
