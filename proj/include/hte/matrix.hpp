#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace hte {

// Column-major numeric table. NaN encodes a missing cell.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = std::numeric_limits<double>::quiet_NaN())
      : n_rows_(rows), n_cols_(cols), values_(rows * cols, fill) {}

  double operator()(std::size_t row, std::size_t col) const { return values_[col * n_rows_ + row]; }
  double& operator()(std::size_t row, std::size_t col) { return values_[col * n_rows_ + row]; }

  std::span<const double> column(std::size_t col) const {
    return {values_.data() + col * n_rows_, n_rows_};
  }
  std::span<double> column(std::size_t col) {
    return {values_.data() + col * n_rows_, n_rows_};
  }

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  bool empty() const { return values_.empty(); }

  bool operator==(const Matrix& other) const {
    if (n_rows_ != other.n_rows_ || n_cols_ != other.n_cols_) {
      return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      bool a_nan = values_[i] != values_[i];
      bool b_nan = other.values_[i] != other.values_[i];
      if (a_nan != b_nan) {
        return false;
      }
      if (!a_nan && values_[i] != other.values_[i]) {
        return false;
      }
    }
    return true;
  }

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<double> values_;
};

}  // namespace hte
