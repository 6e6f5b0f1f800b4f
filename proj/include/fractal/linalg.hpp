// Small dense linear algebra over an ordered field.
//
// Everything here is templated on the scalar so the same code runs in
// binary64 and in exact rational arithmetic (mpq_class). Matrices are tiny
// (N0 x N0 transformation matrices, level-1 graph blocks), so plain
// Gaussian elimination is the right tool.
#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fractal {

using Rational = mpq_class;

/// Scalar traits: tolerance handling differs between floating and exact types.
template <class T>
struct Num;

template <>
struct Num<double> {
  static constexpr bool exact = false;
  static double abs(double x) { return std::fabs(x); }
  static double to_double(double x) { return x; }
  static double from_rational(const Rational& q) { return q.get_d(); }
  static bool is_zero(double x, double tol) { return std::fabs(x) <= tol; }
};

template <>
struct Num<Rational> {
  static constexpr bool exact = true;
  static Rational abs(const Rational& x) { return ::abs(x); }
  static double to_double(const Rational& x) { return x.get_d(); }
  static Rational from_rational(const Rational& q) { return q; }
  static bool is_zero(const Rational& x, double) { return sgn(x) == 0; }
};

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.get_d(); }

/// Parses "3/5", "-2", "0.25" into an exact rational.
Rational parse_rational(const std::string& text);

/// Best rational approximation with denominator <= max_den (continued fractions).
Rational rationalize(double x, long max_den = 1000000);

std::string to_string(const Rational& q);

template <class T>
using Vec = std::vector<T>;

template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, const T& fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw std::invalid_argument("ragged matrix literal");
      for (const auto& v : row) data_.push_back(v);
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vec<T> row(std::size_t r) const {
    return Vec<T>(data_.begin() + r * cols_, data_.begin() + (r + 1) * cols_);
  }
  Vec<T> col(std::size_t c) const {
    Vec<T> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  template <class U>
  Mat<U> cast() const {
    Mat<U> out(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(r, c) = convert<U>((*this)(r, c));
    return out;
  }

  friend Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("matrix product shape mismatch");
    Mat out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T& aik = a(i, k);
        if (Num<T>::is_zero(aik, 0.0)) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }
  friend Mat operator+(Mat a, const Mat& b) {
    for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] += b.data_[i];
    return a;
  }
  friend Mat operator-(Mat a, const Mat& b) {
    for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
    return a;
  }
  friend Mat operator*(const T& s, Mat a) {
    for (auto& v : a.data_) v *= s;
    return a;
  }

  friend Vec<T> operator*(const Mat& a, const Vec<T>& x) {
    if (a.cols_ != x.size()) throw std::invalid_argument("matrix-vector shape mismatch");
    Vec<T> y(a.rows_, T(0));
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t j = 0; j < a.cols_; ++j) y[i] += a(i, j) * x[j];
    return y;
  }
  /// Row vector times matrix.
  friend Vec<T> operator*(const Vec<T>& x, const Mat& a) {
    if (a.rows_ != x.size()) throw std::invalid_argument("vector-matrix shape mismatch");
    Vec<T> y(a.cols_, T(0));
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t j = 0; j < a.cols_; ++j) y[j] += x[i] * a(i, j);
    return y;
  }

  double max_abs() const {
    double m = 0;
    for (const auto& v : data_) m = std::max(m, std::fabs(to_double(v)));
    return m;
  }

 private:
  template <class U, class V>
  static U convert(const V& v) {
    if constexpr (std::is_same_v<U, V>) {
      return v;
    } else if constexpr (std::is_same_v<U, double>) {
      return to_double(v);
    } else {
      return U(v);
    }
  }

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  T s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
Mat<T> power(const Mat<T>& m, unsigned n) {
  Mat<T> out = Mat<T>::identity(m.rows());
  Mat<T> base = m;
  while (n) {
    if (n & 1u) out = out * base;
    base = base * base;
    n >>= 1u;
  }
  return out;
}

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Row-echelon reduction with partial pivoting (largest magnitude in binary64,
/// first nonzero in exact mode). Returns pivot columns; `a` is reduced in place
/// to reduced row-echelon form.
template <class T>
std::vector<std::size_t> rref(Mat<T>& a, double tol) {
  std::vector<std::size_t> pivots;
  std::size_t r = 0;
  for (std::size_t c = 0; c < a.cols() && r < a.rows(); ++c) {
    std::size_t best = r;
    double best_mag = -1;
    for (std::size_t i = r; i < a.rows(); ++i) {
      if (Num<T>::is_zero(a(i, c), tol)) continue;
      double mag = std::fabs(to_double(a(i, c)));
      if (Num<T>::exact) {
        best = i;
        best_mag = mag;
        break;
      }
      if (mag > best_mag) {
        best = i;
        best_mag = mag;
      }
    }
    if (best_mag < 0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) std::swap(a(r, j), a(best, j));
    T inv = T(1) / a(r, c);
    for (std::size_t j = 0; j < a.cols(); ++j) a(r, j) *= inv;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (i == r || Num<T>::is_zero(a(i, c), 0.0)) continue;
      T f = a(i, c);
      for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) -= f * a(r, j);
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

/// Solves A X = B for square nonsingular A.
template <class T>
Mat<T> solve(const Mat<T>& a, const Mat<T>& b, double tol = 1e-13) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) throw std::invalid_argument("solve: shape mismatch");
  const std::size_t n = a.rows();
  Mat<T> aug(n, n + b.cols());
  double scale = std::max(1.0, a.max_abs());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) aug(i, n + j) = b(i, j);
  }
  auto piv = rref(aug, tol * scale);
  if (piv.size() < n || piv[n - 1] != n - 1) throw SingularMatrix("singular linear system");
  Mat<T> x(n, b.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) x(i, j) = aug(i, n + j);
  return x;
}

template <class T>
Vec<T> solve(const Mat<T>& a, const Vec<T>& b, double tol = 1e-13) {
  Mat<T> bm(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) bm(i, 0) = b[i];
  return solve(a, bm, tol).col(0);
}

template <class T>
Mat<T> inverse(const Mat<T>& a, double tol = 1e-13) {
  return solve(a, Mat<T>::identity(a.rows()), tol);
}

/// Solves a consistent (possibly over-determined) system A x = b with a
/// unique solution. Throws SingularMatrix when the solution is not unique and
/// std::runtime_error when the extra equations are inconsistent.
template <class T>
Vec<T> solve_consistent(const Mat<T>& a, const Vec<T>& b, double tol = 1e-11) {
  const std::size_t n = a.cols();
  Mat<T> aug(a.rows(), n + 1);
  double scale = std::max(1.0, a.max_abs());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = a(i, j);
    aug(i, n) = b[i];
  }
  auto piv = rref(aug, tol * scale);
  if (!piv.empty() && piv.back() == n) throw std::runtime_error("inconsistent linear system");
  if (piv.size() < n) throw SingularMatrix("solution is not unique");
  Vec<T> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = aug(i, n);
  return x;
}

/// Basis of the right null space {x : A x = 0}.
template <class T>
std::vector<Vec<T>> null_space(const Mat<T>& a, double tol) {
  Mat<T> r = a;
  auto piv = rref(r, tol);
  std::vector<bool> is_pivot(a.cols(), false);
  for (auto c : piv) is_pivot[c] = true;
  std::vector<Vec<T>> basis;
  for (std::size_t free = 0; free < a.cols(); ++free) {
    if (is_pivot[free]) continue;
    Vec<T> x(a.cols(), T(0));
    x[free] = T(1);
    for (std::size_t i = 0; i < piv.size(); ++i) x[piv[i]] = -r(i, free);
    basis.push_back(std::move(x));
  }
  return basis;
}

}  // namespace fractal
