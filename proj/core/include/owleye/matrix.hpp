#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace owleye {

/// Dense real matrix, 64-bit values in row-major order. The one numeric
/// container shared by every module; shapes are validated on every operation.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  /// Build from nested braces: Matrix::of({{1, 2}, {3, 4}}). Rows must agree
  /// in length.
  static Matrix of(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix ones(std::size_t rows, std::size_t cols);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool is_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// a (r×k) * b (k×c).
Matrix matmul(const Matrix& a, const Matrix& b);
/// a (r×k) * b(c×k)ᵀ.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a(k×r)ᵀ * b (k×c).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Euclidean norm of each row.
std::vector<double> row_norms(const Matrix& a);
double max_abs(const Matrix& a);

/// Rows of `a` selected by `idx`, in idx order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx);

}  // namespace owleye
