// Multi-seed training properties. Each test runs several full pretraining or
// fine-tuning runs.

#include <gtest/gtest.h>

#include "lada/training.hpp"

using namespace lada;

namespace {

double window_mean(const std::vector<StepMetrics>& s, std::size_t begin, std::size_t end) {
  double sum = 0;
  for (std::size_t k = begin; k < end; ++k) sum += s[k].l_cl;
  return sum / static_cast<double>(end - begin);
}

Dataset noiseless(std::uint64_t seed) {
  SuiteSpec spec;
  spec.options.sigma_t = 0;
  spec.options.sigma_r = 0;
  return make_benchmark(seed, spec);
}

}  // namespace

TEST(TrainingProgress, ContrastiveLossFallsOnDefaultSuite) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c;
    c.seed = seed;
    const auto log = pretrain(c, make_benchmark(seed)).log.steps;
    const std::size_t n = log.size();
    EXPECT_LT(window_mean(log, n - 100, n), window_mean(log, 0, 100)) << "seed " << seed;
  }
}

TEST(FinetuneCalibration, NoiselessSuiteReachesFrozenBound) {
  // Bounds frozen from a calibration run (3 seeds, all blocks trainable).
  constexpr double kTranslation = 0.15;  // meters
  constexpr double kRotation = 0.6;      // degrees
  constexpr double kGripper = 0.15;
  std::array<double, 7> mean{};
  const int seeds = 3;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const Dataset d = noiseless(seed);
    TrainConfig c;
    c.seed = seed;
    FinetuneConfig f;
    f.seed = seed;
    f.unfreeze_all = true;
    const FinetuneResult r = finetune(f, d, pretrain(c, d).model);
    const auto per = evaluate_l1_per_dim(r.model, d, Split::HeldOut);
    for (int k = 0; k < 7; ++k) mean[k] += per[k] / seeds;
  }
  for (int k = 0; k < 3; ++k) EXPECT_LT(mean[k], kTranslation) << "dim " << k;
  for (int k = 3; k < 6; ++k) EXPECT_LT(mean[k], kRotation) << "dim " << k;
  EXPECT_LT(mean[6], kGripper);
}

TEST(FinetuneCalibration, PretrainingReachesThresholdSooner) {
  std::vector<double> pre_steps, rnd_steps;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = noiseless(seed);
    TrainConfig c;
    c.seed = seed;
    const Model pre = pretrain(c, d).model;
    const Model rnd = Model::init(seed, c.dims);
    FinetuneConfig f;
    f.seed = seed;
    f.unfreeze_all = true;
    f.eval_every = 100;
    f.target_l1 = 0.5;
    const auto steps = [&](const Model& m) {
      const FinetuneResult r = finetune(f, d, m);
      return static_cast<double>(r.steps_to_target.value_or(f.steps + f.eval_every));
    };
    pre_steps.push_back(steps(pre));
    rnd_steps.push_back(steps(rnd));
  }
  EXPECT_LT(median(pre_steps), median(rnd_steps));
}

TEST(AblationGrid, SoftAdaptiveHasHighestSpearman) {
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  const AblationResult r = run_ablation(TrainConfig{}, seeds);
  ASSERT_EQ(r.medians.size(), 4u);
  for (std::size_t c = 1; c < 4; ++c)
    EXPECT_GT(r.medians[0].spearman, r.medians[c].spearman) << r.medians[c].labels << '/' << r.medians[c].weighting;
}
