#include "lada/adaptive_weighting.hpp"

#include <cmath>

#include "lada/error.hpp"

namespace lada {

namespace {

double mean(const std::deque<double>& buf) {
  if (buf.empty()) throw InvalidArgument("MAState: no losses observed yet");
  double s = 0.0;
  for (double v : buf) s += v;
  return s / static_cast<double>(buf.size());
}

void push(std::deque<double>& buf, double v, std::size_t window) {
  buf.push_back(v);
  if (buf.size() > window) buf.pop_front();
}

}  // namespace

MAState::MAState(std::size_t window) : window_(window) {
  if (window == 0) throw InvalidArgument("MAState: window must be positive");
}

void MAState::update(double l_il, double l_cl) {
  if (!(l_il >= 0.0) || !std::isfinite(l_il)) throw InvalidArgument("MAState: imitation loss must be finite and >= 0");
  if (!(l_cl >= 0.0) || !std::isfinite(l_cl)) throw InvalidArgument("MAState: contrastive loss must be finite and >= 0");
  push(il_, l_il, window_);
  push(cl_, l_cl, window_);
  ++count_;
}

double MAState::ma_il() const { return mean(il_); }
double MAState::ma_cl() const { return mean(cl_); }

LossWeights weights_from_averages(double ma_il, double ma_cl, bool inverse) {
  const double sum = ma_il + ma_cl;
  if (sum == 0.0) return {0.5, 0.5};
  const double w_il = (inverse ? ma_cl : ma_il) / sum;
  return {w_il, 1.0 - w_il};
}

LossWeights weights(const MAState& state, bool inverse) {
  if (state.count() == 0) throw InvalidArgument("weights: no losses observed yet");
  return weights_from_averages(state.ma_il(), state.ma_cl(), inverse);
}

double total_loss(double l_cl, double l_il, const LossWeights& w) { return w.w_cl * l_cl + w.w_il * l_il; }

}  // namespace lada
