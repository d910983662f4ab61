#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stdpnet {

// Dense column-major matrix. Columns are contiguous so that selecting the
// columns named by a binary vector touches memory sequentially.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(c) * rows_ + r]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(c) * rows_ + r]; }

  std::span<double> col(int c) { return {data_.data() + static_cast<std::size_t>(c) * rows_, static_cast<std::size_t>(rows_)}; }
  std::span<const double> col(int c) const {
    return {data_.data() + static_cast<std::size_t>(c) * rows_, static_cast<std::size_t>(rows_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Linear algebra where one operand is a {0,1} vector: products with it
// reduce to additions of selected columns, or to skipped rows. All variants
// sum in ascending index order, so results are bit-identical to a dense loop
// that does the same.
namespace kernels {

// W x for binary x: sum of the columns j with x_j = 1.
std::vector<double> binary_matvec(const Matrix& w, std::span<const std::uint8_t> bits);
void binary_matvec_into(const Matrix& w, std::span<const std::uint8_t> bits, std::span<double> out);

// (W^T delta) masked by a binary vector, with W the *untransposed* next-layer
// matrix (rows = next layer). Masked-out entries are 0 and never computed.
std::vector<double> masked_backward_matvec(const Matrix& w_next, std::span<const double> delta_next,
                                           std::span<const std::uint8_t> mask);

// delta a^T for binary a: column j is delta if a_j = 1, else zero.
Matrix transcription_outer(std::span<const double> delta, std::span<const std::uint8_t> bits);

// target += scale * delta a^T without forming the outer product.
void transcription_accumulate(Matrix& target, double scale, std::span<const double> delta,
                              std::span<const std::uint8_t> bits);

}  // namespace kernels

namespace kernels::serial {
std::vector<double> binary_matvec(const Matrix& w, std::span<const std::uint8_t> bits);
std::vector<double> masked_backward_matvec(const Matrix& w_next, std::span<const double> delta_next,
                                           std::span<const std::uint8_t> mask);
Matrix transcription_outer(std::span<const double> delta, std::span<const std::uint8_t> bits);
void transcription_accumulate(Matrix& target, double scale, std::span<const double> delta,
                              std::span<const std::uint8_t> bits);
}  // namespace kernels::serial

}  // namespace stdpnet
