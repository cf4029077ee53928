#include "lada/affinity.hpp"

#include <cmath>
#include <ostream>

#include "lada/error.hpp"

namespace lada {

void AffinityWeights::validate() const {
  for (double w : {w_t, w_r, w_g})
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("AffinityWeights: weights must be finite and non-negative");
  if (!(w_t + w_r + w_g > 0.0)) throw InvalidArgument("AffinityWeights: weights must not all be zero");
}

Mat match_matrix(std::span<const PrimitiveTriple> triples, Component component) {
  if (triples.empty()) throw InvalidArgument("match_matrix: empty batch");
  const auto same = [component](const PrimitiveTriple& a, const PrimitiveTriple& b) {
    switch (component) {
      case Component::Trans: return a.trans == b.trans;
      case Component::Rot: return a.rot == b.rot;
      case Component::Grip: return a.grip == b.grip;
    }
    return false;
  };
  const std::size_t n = triples.size();
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = same(triples[i], triples[j]) ? 1.0 : 0.0;
  return m;
}

AffinityMatrix similarity_matrix(std::span<const PrimitiveTriple> triples, const AffinityWeights& w) {
  w.validate();
  const Mat mt = match_matrix(triples, Component::Trans);
  const Mat mr = match_matrix(triples, Component::Rot);
  const Mat mg = match_matrix(triples, Component::Grip);
  const double total = w.w_t + w.w_r + w.w_g;
  AffinityMatrix out{triples.size(), Mat(triples.size(), triples.size())};
  for (std::size_t k = 0; k < mt.size(); ++k)
    out.s.flat()[k] = (w.w_t * mt.flat()[k] + w.w_r * mr.flat()[k] + w.w_g * mg.flat()[k]) / total;
  return out;
}

Mat row_normalize(const AffinityMatrix& s, SelfMode mode) {
  const std::size_t n = s.n;
  Mat t = s.s;
  if (mode == SelfMode::ExcludeSelf)
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = t.row(i);
    double sum = 0.0;
    for (double v : row) sum += v;
    if (sum > 0.0) {
      for (double& v : row) v /= sum;
    } else if (n > 1) {
      for (std::size_t j = 0; j < n; ++j) row[j] = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
    } else {
      // A lone sample has nothing but itself to point at.
      row[i] = 1.0;
    }
  }
  return t;
}

void write_matrix_csv(std::ostream& out, const Mat& m, std::span<const std::string> ids) {
  if (ids.size() != m.rows() || m.rows() != m.cols()) throw InvalidArgument("write_matrix_csv: ids must label a square matrix");
  out << "id";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << format_number(m(i, j));
    out << '\n';
  }
}

}  // namespace lada
