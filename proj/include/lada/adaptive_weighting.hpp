#pragma once

#include <cstddef>
#include <deque>

namespace lada {

// Sliding-window moving averages of the imitation and contrastive losses.
class MAState {
 public:
  explicit MAState(std::size_t window = 100);

  // Pushes one observation of each loss; evicts the oldest beyond the window.
  // Throws InvalidArgument on negative or non-finite input.
  void update(double l_il, double l_cl);

  std::size_t window() const noexcept { return window_; }
  std::size_t count() const noexcept { return count_; }
  const std::deque<double>& buffer_il() const noexcept { return il_; }
  const std::deque<double>& buffer_cl() const noexcept { return cl_; }

  // Mean over the buffer contents, oldest first. Throws if nothing was pushed.
  double ma_il() const;
  double ma_cl() const;

 private:
  std::size_t window_;
  std::size_t count_ = 0;
  std::deque<double> il_;
  std::deque<double> cl_;
};

struct LossWeights {
  double w_il = 0.5;
  double w_cl = 0.5;
};

// w_IL = MA(L_IL) / (MA(L_IL) + MA(L_CL)), w_CL = 1 - w_IL; (0.5, 0.5) when both are 0.
// inverse swaps the roles so the smaller average gets the larger weight.
LossWeights weights(const MAState& state, bool inverse = false);

// Same rule on explicit averages.
LossWeights weights_from_averages(double ma_il, double ma_cl, bool inverse = false);

// w_CL * L_CL + w_IL * L_IL.
double total_loss(double l_cl, double l_il, const LossWeights& w);

}  // namespace lada
