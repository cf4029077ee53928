#include "lada/losses.hpp"

#include <cmath>
#include <unordered_map>

#include "lada/error.hpp"

namespace lada {

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("ContrastiveConfig: tau must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("ContrastiveConfig: lambda must be >= 0");
}

namespace {

void check_target(const Mat& target, std::size_t n, std::size_t k) {
  if (target.rows() != n || target.cols() != k)
    throw InvalidArgument("soft_infonce: target must be " + std::to_string(n) + "x" + std::to_string(k));
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : target.row(i)) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidArgument("soft_infonce: target row " + std::to_string(i) + " has a negative or non-finite entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InvalidArgument("soft_infonce: target row " + std::to_string(i) + " does not sum to 1");
  }
}

}  // namespace

LossValue soft_infonce(const Mat& anchors, const Mat& candidates, const Mat& target, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("soft_infonce: tau must be positive");
  if (anchors.rows() == 0 || candidates.rows() == 0) throw InvalidArgument("soft_infonce: empty batch");
  check_target(target, anchors.rows(), candidates.rows());

  const Mat sim = cosine_matrix(anchors, candidates);
  const Mat logp = row_log_softmax(sim, tau);
  const std::size_t n = anchors.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  double value = 0.0;
  Mat grad_sim(n, candidates.rows());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < candidates.rows(); ++j) {
      const double t = target(i, j);
      if (t != 0.0) value -= t * logp(i, j);
      // d/dlogit_ij of -sum_j T_ij log p_ij is p_ij - T_ij for a row-stochastic T.
      grad_sim(i, j) = (std::exp(logp(i, j)) - t) * inv_n / tau;
    }
  }
  auto [ga, gc] = cosine_matrix_backward(anchors, candidates, grad_sim);
  LossValue out;
  out.value = value * inv_n;
  out.grads.push_back(std::move(ga));
  out.grads.push_back(std::move(gc));
  return out;
}

LossValue standard_infonce(const Mat& anchors, const Mat& candidates, double tau) {
  if (anchors.rows() != candidates.rows()) throw InvalidArgument("standard_infonce: needs one positive per anchor");
  return soft_infonce(anchors, candidates, Mat::identity(anchors.rows()), tau);
}

LossValue loss_action_action(const Mat& a, const Mat& target_aa, double tau) {
  LossValue lv = soft_infonce(a, a, target_aa, tau);
  lv.grads[0] += lv.grads[1];
  lv.grads.pop_back();
  return lv;
}

LossValue loss_action_primitive(const Mat& a, const Mat& p, const Mat& target_ap, double tau) {
  return soft_infonce(a, p, target_ap, tau);
}

DescriptionSet dedupe_descriptions(std::span<const std::string> descriptions) {
  DescriptionSet d;
  std::unordered_map<std::string, std::size_t> index;
  d.owner.reserve(descriptions.size());
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    auto [it, inserted] = index.try_emplace(descriptions[i], d.texts.size());
    if (inserted) {
      d.texts.push_back(descriptions[i]);
      d.representative.push_back(i);
    }
    d.owner.push_back(it->second);
  }
  return d;
}

Mat primitive_target(const AffinityMatrix& s, const DescriptionSet& d) {
  if (d.owner.size() != s.n) throw InvalidArgument("primitive_target: description count != batch size");
  const std::size_t k = d.texts.size();
  Mat t(s.n, k);
  for (std::size_t i = 0; i < s.n; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      t(i, c) = s.s(i, d.representative[c]);
      sum += t(i, c);
    }
    // sum >= 1: the sample's own description carries S_ii = 1.
    for (std::size_t c = 0; c < k; ++c) t(i, c) /= sum;
  }
  return t;
}

double contrastive_total(double l_a, double l_m, double lambda) { return l_a + lambda * l_m; }

LossValue contrastive_total(const LossValue& l_a, const LossValue& l_m, double lambda) {
  if (l_a.grads.size() != 1 || l_m.grads.size() != 2)
    throw InvalidArgument("contrastive_total: expected {dA} and {dA, dP} gradients");
  LossValue out;
  out.value = contrastive_total(l_a.value, l_m.value, lambda);
  out.grads.push_back(l_a.grads[0] + lambda * l_m.grads[0]);
  out.grads.push_back(lambda * l_m.grads[1]);
  return out;
}

namespace {

// Adds mean cross-entropy of one head to value and fills its gradient.
double cross_entropy(const Mat& logits, std::span<const ClassIndices> labels, int ClassIndices::*field,
                     Mat& grad, const char* head) {
  const std::size_t n = logits.rows();
  const Mat logp = row_log_softmax(logits, 1.0);
  grad = Mat(n, logits.cols());
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i].*field;
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
      throw InvalidArgument(std::string("imitation_loss: ") + head + " label " + std::to_string(y) +
                            " out of range at sample " + std::to_string(i));
    value -= logp(i, static_cast<std::size_t>(y));
    for (std::size_t c = 0; c < logits.cols(); ++c)
      grad(i, c) = (std::exp(logp(i, c)) - (static_cast<int>(c) == y ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  return value / static_cast<double>(n);
}

}  // namespace

LossValue imitation_loss(const Mat& logits_t, const Mat& logits_r, const Mat& logits_g,
                         std::span<const ClassIndices> labels) {
  const std::size_t n = labels.size();
  if (n == 0) throw InvalidArgument("imitation_loss: empty batch");
  if (logits_t.rows() != n || logits_r.rows() != n || logits_g.rows() != n)
    throw InvalidArgument("imitation_loss: logits rows must match label count");
  LossValue out;
  out.grads.resize(3);
  out.value = cross_entropy(logits_t, labels, &ClassIndices::t, out.grads[0], "translation") +
              cross_entropy(logits_r, labels, &ClassIndices::r, out.grads[1], "rotation") +
              cross_entropy(logits_g, labels, &ClassIndices::g, out.grads[2], "gripper");
  return out;
}

LossValue l1_trajectory_loss(const Mat& pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidArgument("l1_trajectory_loss: shape mismatch");
  if (pred.empty()) throw InvalidArgument("l1_trajectory_loss: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  Mat g(pred.rows(), pred.cols());
  double value = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double diff = pred.flat()[k] - target.flat()[k];
    value += std::abs(diff);
    g.flat()[k] = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
  }
  return {value * inv, {std::move(g)}};
}

}  // namespace lada
