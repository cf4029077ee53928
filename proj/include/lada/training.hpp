#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lada/adaptive_weighting.hpp"
#include "lada/affinity.hpp"
#include "lada/datagen.hpp"
#include "lada/losses.hpp"
#include "lada/model.hpp"

namespace lada {

struct TrainConfig {
  std::size_t batch = 32;
  std::size_t steps = 3000;
  double lr = 0.05;
  double momentum = 0.9;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;  // model init and batch sampling
  AffinityWeights affinity;
  ContrastiveConfig contrastive;
  std::size_t ma_window = 100;
  ModelDims dims;
  SelfMode action_action_mode = SelfMode::ExcludeSelf;

  bool hard_labels = false;        // S := I
  bool fixed_weights = false;      // w_IL = w_CL = 0.5
  bool freeze_encoders = false;
  bool inverse_weighting = false;
  // Run the action-action branch through standard_infonce instead of the
  // soft-label kernel. Only meaningful together with hard_labels.
  bool standard_kernel = false;

  std::size_t eval_every = 0;  // 0: evaluate once, after the last step

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct StepMetrics {
  std::size_t step = 0;
  double l_a = 0, l_m = 0, l_cl = 0, l_il = 0;
  double w_il = 0, w_cl = 0, total = 0;
};

struct EvalMetrics {
  std::size_t step = 0;
  double retrieval_top1 = 0;
  double spearman = 0;
  std::map<std::size_t, double> per_task;
};

struct MetricsLog {
  std::vector<StepMetrics> steps;
  std::vector<EvalMetrics> evals;
};

void write_metrics_csv(std::ostream& out, const MetricsLog& log);
void write_eval_csv(std::ostream& out, const MetricsLog& log);

// One pretraining sample: observation plus its action.
struct Sample {
  Observation obs;
  Action7 action;
  std::size_t task_id = 0;
};

enum class Split {
  Train,     // first 80% of episodes of each pretraining task
  HeldOut,   // last 20% of episodes of each pretraining task
  Transfer,  // every episode of the transfer tasks
  All,
};

std::vector<Sample> collect_samples(const Dataset& data, Split split);

// Losses and cached activations of one pretraining batch.
struct BatchForward {
  std::vector<ActionTrace> actions;
  std::vector<TextTrace> texts;
  std::vector<ClassIndices> labels;
  Mat a, p;
  Mat logits_t, logits_r, logits_g;
  LossValue l_a, l_m, l_cl, l_il;
};

// Thrown by forward_batch when an embedding row has a zero or non-finite norm.
class DegenerateEmbedding : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

BatchForward forward_batch(const Model& model, std::span<const Sample> batch, const TrainConfig& cfg);

// Accumulates gradients of w_CL * L_CL + w_IL * L_IL into grads.
void backward_batch(const Model& model, const BatchForward& fwd, const LossWeights& w, const TrainConfig& cfg,
                    ModelParams& grads);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, Model last_good);
  std::size_t step() const noexcept { return step_; }
  const Model& last_good() const noexcept { return last_good_; }

 private:
  std::size_t step_;
  Model last_good_;
};

struct PretrainResult {
  Model model;
  MetricsLog log;
};

PretrainResult pretrain(const TrainConfig& cfg, const Dataset& data);

struct FinetuneConfig {
  std::size_t batch = 32;
  std::size_t steps = 2000;
  double lr = 0.005;
  double momentum = 0.9;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  bool unfreeze_all = false;  // default trains only the action head
  bool freeze_all = false;
  std::size_t eval_every = 0;
  double target_l1 = 0.0;  // > 0: record the first eval step below this held-out L1
};

struct FinetuneResult {
  Model model;
  std::vector<double> train_l1;                               // per step
  std::vector<std::pair<std::size_t, double>> eval_l1;        // (step, held-out mean L1)
  std::optional<std::size_t> steps_to_target;
};

FinetuneResult finetune(const FinetuneConfig& cfg, const Dataset& data, const Model& checkpoint);

// Mean absolute error of the action head over every entry of the split.
double evaluate_l1(const Model& model, const Dataset& data, Split split);
// Same, broken out per action dimension.
std::array<double, 7> evaluate_l1_per_dim(const Model& model, const Dataset& data, Split split);

struct RetrievalMetrics {
  double top1 = 0;
  std::size_t n = 0;
  std::size_t candidates = 0;  // K distinct descriptions in the dataset
  std::map<std::size_t, double> per_task;
};

// Nearest-description retrieval by cosine over every distinct description in the dataset.
RetrievalMetrics evaluate_retrieval(const Model& model, const Dataset& data, Split split = Split::HeldOut);

inline constexpr std::size_t kProbeBatch = 256;

// Spearman correlation between off-diagonal cosine(A, A) and S over a fixed
// probe batch of held-out samples.
double affinity_correlation(const Model& model, const Dataset& data, const AffinityWeights& w = {});

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// CSV: task_id, primitive_text, t_idx, r_idx, g_idx, e_0..e_{d-1}; one row per step.
void export_embeddings(const Model& model, const Dataset& data, std::ostream& out);

struct AblationRow {
  std::string labels;     // soft | hard
  std::string weighting;  // adaptive | fixed
  double spearman = 0;
  double retrieval = 0;
  double transfer = 0;
  double final_total = 0;        // last-window mean of the run's own objective
  double final_equal_total = 0;  // last-window mean of 0.5 L_CL + 0.5 L_IL
  bool any_nan = false;
};

struct AblationRun {
  std::uint64_t seed = 0;
  AblationRow row;
};

struct AblationResult {
  std::vector<AblationRow> medians;       // soft/adaptive, soft/fixed, hard/adaptive, hard/fixed
  std::vector<std::vector<AblationRun>> runs;  // per cell, per seed
};

struct SuiteSpec {
  std::size_t n_tasks = 4;
  double sharing = 0.5;
  std::size_t episodes_per_task = 10;
  SuiteOptions options;
};

// Dataset of the default benchmark for one seed.
Dataset make_benchmark(std::uint64_t seed, const SuiteSpec& spec = {});

// Metrics of one pretraining run on the benchmark.
AblationRow run_cell(const TrainConfig& cfg, const Dataset& data, std::size_t window = 100);

AblationResult run_ablation(const TrainConfig& base, std::span<const std::uint64_t> seeds, const SuiteSpec& spec = {});

void write_ablation_csv(std::ostream& out, const AblationResult& result);

double median(std::vector<double> v);

}  // namespace lada
