#include "lada/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lada/error.hpp"

namespace lada {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("Mat: data length " + std::to_string(data_.size()) + " != " +
                          std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Mat m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Mat::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Mat::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat& Mat::operator+=(const Mat& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw InvalidArgument("Mat +=: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator*(double s, Mat a) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> affine(const Mat& w, const Mat& b, std::span<const double> x) {
  if (w.cols() != x.size()) throw InvalidArgument("affine: input dimension mismatch");
  std::vector<double> y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x) + (b.empty() ? 0.0 : b(r, 0));
  return y;
}

namespace {

std::vector<double> row_norms(const Mat& m, const char* which) {
  std::vector<double> n(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    n[i] = norm(m.row(i));
    if (!(n[i] > 0.0) || !std::isfinite(n[i])) {
      throw InvalidArgument(std::string("cosine_matrix: ") + which + " row " + std::to_string(i) +
                            " has zero or non-finite norm");
    }
  }
  return n;
}

}  // namespace

Mat cosine_matrix(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw InvalidArgument("cosine_matrix: column count mismatch");
  const auto na = row_norms(a, "A");
  const auto nb = row_norms(b, "B");
  Mat c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j)) / (na[i] * nb[j]);
  return c;
}

std::pair<Mat, Mat> cosine_matrix_backward(const Mat& a, const Mat& b, const Mat& grad_c) {
  const auto na = row_norms(a, "A");
  const auto nb = row_norms(b, "B");
  const Mat c = cosine_matrix(a, b);
  const std::size_t d = a.cols();
  Mat ga(a.rows(), d);
  Mat gb(b.rows(), d);
  // dC_ij/dA_i = (B_j/|B_j| - C_ij A_i/|A_i|) / |A_i|, and symmetrically for B_j.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double g = grad_c(i, j);
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double ahat = a(i, k) / na[i];
        const double bhat = b(j, k) / nb[j];
        ga(i, k) += g * (bhat - c(i, j) * ahat) / na[i];
        gb(j, k) += g * (ahat - c(i, j) * bhat) / nb[j];
      }
    }
  }
  return {std::move(ga), std::move(gb)};
}

namespace {

void check_softmax_args(const Mat& m, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("row_softmax: tau must be positive");
  if (!m.all_finite()) throw InvalidArgument("row_softmax: non-finite input");
}

}  // namespace

Mat row_softmax(const Mat& m, double tau) {
  check_softmax_args(m, tau);
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp((in[j] - mx) / tau);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

Mat row_log_softmax(const Mat& m, double tau) {
  check_softmax_args(m, tau);
  Mat out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp((v - mx) / tau);
    const double lz = std::log(z);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = (in[j] - mx) / tau - lz;
  }
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double fp = f(probe);
    probe[k] = orig - h;
    const double fm = f(probe);
    probe[k] = orig;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
  }
  return worst;
}

}  // namespace lada
