#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace lada {

// Dense row-major matrix of doubles. Column vectors are Mat(n, 1).
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double v);
  Mat transposed() const;
  bool all_finite() const;

  Mat& operator+=(const Mat& other);
  Mat& operator*=(double s);

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator*(double s, Mat a);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// y = W x + b, W is out x in, b is out x 1 (or empty).
std::vector<double> affine(const Mat& w, const Mat& b, std::span<const double> x);

// Pairwise cosine similarity between rows: C(i, j) = <A_i, B_j> / (|A_i| |B_j|).
// Throws InvalidArgument naming the first zero-norm row.
Mat cosine_matrix(const Mat& a, const Mat& b);

// Pull back dL/dC through cosine_matrix(a, b). Returns {dL/dA, dL/dB}.
std::pair<Mat, Mat> cosine_matrix_backward(const Mat& a, const Mat& b, const Mat& grad_c);

// Max-subtracted softmax of each row of M / tau.
Mat row_softmax(const Mat& m, double tau);

// log of row_softmax, computed with log-sum-exp.
Mat row_log_softmax(const Mat& m, double tau);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

// Largest |a_k - n_k| / max(|a_k|, |n_k|, floor) over all coordinates.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-2);

}  // namespace lada
