#pragma once

// Trainable embedding path: visual MLP encoder and instruction table standing
// in for the pretrained encoders, FiLM conditioning of visual features on the
// instruction, an MLP adapter producing the latent action A, a bag-of-tokens
// encoder producing primitive-description embeddings P, and linear heads.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lada/action_space.hpp"
#include "lada/numerics.hpp"

namespace lada {

struct ModelDims {
  std::size_t obs_dim = 32;
  std::size_t d_v = 32;     // visual feature width
  std::size_t d_l = 32;     // language feature width
  std::size_t hidden = 64;  // hidden width of the visual encoder and adapter
  std::size_t embed = 16;   // width d shared by A and P
  std::size_t n_instructions = 8;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Block : std::size_t {
  VisualW1, VisualB1, VisualW2, VisualB2,
  InstructionTable, TokenTable, TextW, TextB,
  FilmW, FilmB,
  AdapterW1, AdapterB1, AdapterW2, AdapterB2,
  HeadTW, HeadTB, HeadRW, HeadRB, HeadGW, HeadGB,
  ActionW, ActionB,
  Count
};

inline constexpr std::size_t kNumBlocks = static_cast<std::size_t>(Block::Count);

std::string_view block_name(Block b);

// Blocks of the visual and language encoders (frozen by --freeze-encoders).
bool is_encoder_block(Block b);
bool is_action_head_block(Block b);

// Named parameter arrays. Also used as the gradient accumulator.
struct ModelParams {
  std::array<Mat, kNumBlocks> blocks;

  Mat& operator[](Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const Mat& operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }

  ModelParams zeros_like() const;
  std::size_t total_size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Observation {
  std::vector<double> features;
  std::size_t instruction_id = 0;
  std::vector<std::string> instruction_tokens;
};

struct HeadOutputs {
  std::vector<double> logits_t;
  std::vector<double> logits_r;
  std::vector<double> logits_g;
  std::vector<double> action;  // continuous 7-DoF prediction
};

// Intermediate values of one embed_action call, kept for the backward pass.
struct ActionTrace {
  std::vector<double> x, h1, v, l, gamma, beta, f, h2, a;
  std::size_t instruction_id = 0;
};

struct TextTrace {
  std::vector<std::size_t> token_ids;
  std::vector<double> mean_embedding;
  std::vector<double> p;
};

class Model {
 public:
  Model(ModelDims dims, BinningConfig binning, ModelParams params);

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero; deterministic per seed.
  static Model init(std::uint64_t seed, const ModelDims& dims, const BinningConfig& binning = {});

  // Expected shape of every block for these dims and binning.
  static std::array<std::pair<std::size_t, std::size_t>, kNumBlocks> block_shapes(const ModelDims& dims,
                                                                                 const BinningConfig& binning);

  const ModelDims& dims() const noexcept { return dims_; }
  const BinningConfig& binning() const noexcept { return binning_; }
  const ClassIndices& class_counts() const noexcept { return classes_; }
  ModelParams& params() noexcept { return params_; }
  const ModelParams& params() const noexcept { return params_; }

  // (1 + gamma(l)) * v + beta(l); the generator is one affine map l -> [gamma; beta].
  std::vector<double> film(std::span<const double> v, std::span<const double> l) const;
  std::vector<double> film_gamma(std::span<const double> l) const;

  std::vector<double> embed_action(const Observation& obs) const;
  ActionTrace forward_action(const Observation& obs) const;
  // Accumulates parameter gradients for dL/dA into grads.
  void backward_action(const ActionTrace& trace, std::span<const double> grad_a, ModelParams& grads) const;

  // Rejects text that is not a canonical primitive sentence.
  std::vector<double> embed_primitive_text(std::string_view text) const;
  TextTrace forward_text(std::string_view text) const;
  void backward_text(const TextTrace& trace, std::span<const double> grad_p, ModelParams& grads) const;

  HeadOutputs heads(std::span<const double> a) const;
  // Accumulates head gradients; returns dL/dA. Any gradient in `grad` may be empty.
  std::vector<double> backward_heads(std::span<const double> a, const HeadOutputs& grad, ModelParams& grads) const;

 private:
  void check_shapes() const;

  ModelDims dims_;
  BinningConfig binning_;
  ClassIndices classes_;
  ModelParams params_;
  std::unordered_map<std::string, std::size_t> vocab_;
};

}  // namespace lada
