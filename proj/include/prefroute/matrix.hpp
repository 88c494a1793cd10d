#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace prefroute {

// Dense row-major matrix of doubles. Small universes (tens to a few
// hundred stops), so no sparse machinery.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat square(std::size_t n, double fill = 0.0) { return Mat(n, n, fill); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double row_sum(std::size_t r) const {
    double s = 0.0;
    const double* p = row(r);
    for (std::size_t c = 0; c < cols_; ++c) s += p[c];
    return s;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool same_shape(const Mat& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Row-stochastic matrix of next-stop probabilities; entry (s, r) is
// Pr(next = r | current = s) over the full stop universe.
using TransitionMatrix = Mat;

// Arc costs -log(Pr(r|s) + eps); diagonal holds an infinity sentinel.
using CostMatrix = Mat;

// Pairwise distances in km over the full stop universe, zero diagonal.
using DistanceMatrix = Mat;

}  // namespace prefroute
