#include "lada/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lada/error.hpp"
#include "lada/rng.hpp"

namespace lada {

namespace {

constexpr std::array<std::string_view, kNumBlocks> kBlockNames = {
    "visual_w1", "visual_b1", "visual_w2", "visual_b2",
    "instruction_table", "token_table", "text_w", "text_b",
    "film_w", "film_b",
    "adapter_w1", "adapter_b1", "adapter_w2", "adapter_b2",
    "head_t_w", "head_t_b", "head_r_w", "head_r_b", "head_g_w", "head_g_b",
    "action_w", "action_b",
};

bool is_bias(Block b) {
  switch (b) {
    case Block::VisualB1: case Block::VisualB2: case Block::TextB: case Block::FilmB:
    case Block::AdapterB1: case Block::AdapterB2: case Block::HeadTB: case Block::HeadRB:
    case Block::HeadGB: case Block::ActionB:
      return true;
    default:
      return false;
  }
}

// w += dy x^T
void add_outer(Mat& w, std::span<const double> dy, std::span<const double> x) {
  for (std::size_t r = 0; r < dy.size(); ++r) {
    if (dy[r] == 0.0) continue;
    auto row = w.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) row[c] += dy[r] * x[c];
  }
}

void add_column(Mat& b, std::span<const double> dy) {
  for (std::size_t r = 0; r < dy.size(); ++r) b(r, 0) += dy[r];
}

// W^T dy
std::vector<double> transpose_times(const Mat& w, std::span<const double> dy) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    if (dy[r] == 0.0) continue;
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += row[c] * dy[r];
  }
  return out;
}

void tanh_inplace(std::vector<double>& v) {
  for (double& x : v) x = std::tanh(x);
}

}  // namespace

void ModelDims::validate() const {
  for (std::size_t d : {obs_dim, d_v, d_l, hidden, embed, n_instructions})
    if (d == 0) throw InvalidArgument("ModelDims: every dimension must be positive");
}

std::string_view block_name(Block b) { return kBlockNames.at(static_cast<std::size_t>(b)); }

bool is_encoder_block(Block b) {
  switch (b) {
    case Block::VisualW1: case Block::VisualB1: case Block::VisualW2: case Block::VisualB2:
    case Block::InstructionTable: case Block::TokenTable: case Block::TextW: case Block::TextB:
      return true;
    default:
      return false;
  }
}

bool is_action_head_block(Block b) { return b == Block::ActionW || b == Block::ActionB; }

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (std::size_t k = 0; k < kNumBlocks; ++k) z.blocks[k] = Mat(blocks[k].rows(), blocks[k].cols());
  return z;
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const auto& m : blocks) n += m.size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(total_size());
  for (const auto& m : blocks) out.insert(out.end(), m.flat().begin(), m.flat().end());
  return out;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != total_size()) throw InvalidArgument("ModelParams::assign: size mismatch");
  std::size_t off = 0;
  for (auto& m : blocks) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.flat().begin());
    off += m.size();
  }
}

bool ModelParams::all_finite() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const Mat& m) { return m.all_finite(); });
}

std::array<std::pair<std::size_t, std::size_t>, kNumBlocks> Model::block_shapes(const ModelDims& d,
                                                                               const BinningConfig& binning) {
  const ClassIndices n = lada::class_counts(binning);
  const std::size_t vocab = sentence_vocabulary(binning).size();
  const auto ct = static_cast<std::size_t>(n.t);
  const auto cr = static_cast<std::size_t>(n.r);
  const auto cg = static_cast<std::size_t>(n.g);
  return {{
      {d.hidden, d.obs_dim}, {d.hidden, 1}, {d.d_v, d.hidden}, {d.d_v, 1},
      {d.n_instructions, d.d_l}, {vocab, d.d_l}, {d.embed, d.d_l}, {d.embed, 1},
      {2 * d.d_v, d.d_l}, {2 * d.d_v, 1},
      {d.hidden, d.d_v}, {d.hidden, 1}, {d.embed, d.hidden}, {d.embed, 1},
      {ct, d.embed}, {ct, 1}, {cr, d.embed}, {cr, 1}, {cg, d.embed}, {cg, 1},
      {7, d.embed}, {7, 1},
  }};
}

Model::Model(ModelDims dims, BinningConfig binning, ModelParams params)
    : dims_(dims), binning_(std::move(binning)), params_(std::move(params)) {
  dims_.validate();
  binning_.validate();
  classes_ = lada::class_counts(binning_);
  const auto vocab = sentence_vocabulary(binning_);
  for (std::size_t k = 0; k < vocab.size(); ++k) vocab_.emplace(vocab[k], k);
  check_shapes();
}

void Model::check_shapes() const {
  const auto shapes = block_shapes(dims_, binning_);
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    const Mat& m = params_.blocks[k];
    if (m.rows() != shapes[k].first || m.cols() != shapes[k].second) {
      throw InvalidArgument("Model: block " + std::string(kBlockNames[k]) + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " + std::to_string(shapes[k].first) + "x" +
                            std::to_string(shapes[k].second));
    }
  }
}

Model Model::init(std::uint64_t seed, const ModelDims& dims, const BinningConfig& binning) {
  dims.validate();
  binning.validate();
  const auto shapes = block_shapes(dims, binning);
  ModelParams p;
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    const auto [rows, cols] = shapes[k];
    p.blocks[k] = Mat(rows, cols);
    if (is_bias(static_cast<Block>(k))) continue;
    Rng rng(mix_seed(seed, k));
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& w : p.blocks[k].flat()) w = rng.uniform(-bound, bound);
  }
  return Model(dims, binning, std::move(p));
}

std::vector<double> Model::film_gamma(std::span<const double> l) const {
  const auto gb = affine(params_[Block::FilmW], params_[Block::FilmB], l);
  std::vector<double> gamma(gb.begin(), gb.begin() + static_cast<std::ptrdiff_t>(dims_.d_v));
  for (double& g : gamma) g += 1.0;
  return gamma;
}

std::vector<double> Model::film(std::span<const double> v, std::span<const double> l) const {
  if (v.size() != dims_.d_v || l.size() != dims_.d_l) throw InvalidArgument("film: dimension mismatch");
  const auto gb = affine(params_[Block::FilmW], params_[Block::FilmB], l);
  std::vector<double> out(dims_.d_v);
  for (std::size_t k = 0; k < dims_.d_v; ++k) out[k] = (1.0 + gb[k]) * v[k] + gb[dims_.d_v + k];
  return out;
}

ActionTrace Model::forward_action(const Observation& obs) const {
  if (obs.features.size() != dims_.obs_dim)
    throw InvalidArgument("embed_action: expected " + std::to_string(dims_.obs_dim) + " observation features");
  if (obs.instruction_id >= dims_.n_instructions)
    throw InvalidArgument("embed_action: instruction id " + std::to_string(obs.instruction_id) + " out of range");
  ActionTrace t;
  t.instruction_id = obs.instruction_id;
  t.x = obs.features;
  t.h1 = affine(params_[Block::VisualW1], params_[Block::VisualB1], t.x);
  tanh_inplace(t.h1);
  t.v = affine(params_[Block::VisualW2], params_[Block::VisualB2], t.h1);
  const auto table_row = params_[Block::InstructionTable].row(obs.instruction_id);
  t.l.assign(table_row.begin(), table_row.end());
  const auto gb = affine(params_[Block::FilmW], params_[Block::FilmB], t.l);
  t.gamma.resize(dims_.d_v);
  t.beta.resize(dims_.d_v);
  t.f.resize(dims_.d_v);
  for (std::size_t k = 0; k < dims_.d_v; ++k) {
    t.gamma[k] = 1.0 + gb[k];
    t.beta[k] = gb[dims_.d_v + k];
    t.f[k] = t.gamma[k] * t.v[k] + t.beta[k];
  }
  t.h2 = affine(params_[Block::AdapterW1], params_[Block::AdapterB1], t.f);
  tanh_inplace(t.h2);
  t.a = affine(params_[Block::AdapterW2], params_[Block::AdapterB2], t.h2);
  return t;
}

std::vector<double> Model::embed_action(const Observation& obs) const { return forward_action(obs).a; }

void Model::backward_action(const ActionTrace& t, std::span<const double> grad_a, ModelParams& g) const {
  add_outer(g[Block::AdapterW2], grad_a, t.h2);
  add_column(g[Block::AdapterB2], grad_a);
  auto dz2 = transpose_times(params_[Block::AdapterW2], grad_a);
  for (std::size_t k = 0; k < dz2.size(); ++k) dz2[k] *= 1.0 - t.h2[k] * t.h2[k];
  add_outer(g[Block::AdapterW1], dz2, t.f);
  add_column(g[Block::AdapterB1], dz2);
  const auto df = transpose_times(params_[Block::AdapterW1], dz2);

  std::vector<double> dgb(2 * dims_.d_v);
  std::vector<double> dv(dims_.d_v);
  for (std::size_t k = 0; k < dims_.d_v; ++k) {
    dgb[k] = df[k] * t.v[k];
    dgb[dims_.d_v + k] = df[k];
    dv[k] = df[k] * t.gamma[k];
  }
  add_outer(g[Block::FilmW], dgb, t.l);
  add_column(g[Block::FilmB], dgb);
  const auto dl = transpose_times(params_[Block::FilmW], dgb);
  auto table_row = g[Block::InstructionTable].row(t.instruction_id);
  for (std::size_t k = 0; k < dl.size(); ++k) table_row[k] += dl[k];

  add_outer(g[Block::VisualW2], dv, t.h1);
  add_column(g[Block::VisualB2], dv);
  auto dz1 = transpose_times(params_[Block::VisualW2], dv);
  for (std::size_t k = 0; k < dz1.size(); ++k) dz1[k] *= 1.0 - t.h1[k] * t.h1[k];
  add_outer(g[Block::VisualW1], dz1, t.x);
  add_column(g[Block::VisualB1], dz1);
}

TextTrace Model::forward_text(std::string_view text) const {
  // Canonical check; throws ParseError on anything else.
  parse_language(text, binning_);
  TextTrace t;
  for (const auto& tok : tokenize_sentence(text)) t.token_ids.push_back(vocab_.at(tok));
  const Mat& table = params_[Block::TokenTable];
  t.mean_embedding.assign(dims_.d_l, 0.0);
  for (std::size_t id : t.token_ids) {
    const auto row = table.row(id);
    for (std::size_t k = 0; k < dims_.d_l; ++k) t.mean_embedding[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(t.token_ids.size());
  for (double& v : t.mean_embedding) v *= inv;
  t.p = affine(params_[Block::TextW], params_[Block::TextB], t.mean_embedding);
  return t;
}

std::vector<double> Model::embed_primitive_text(std::string_view text) const { return forward_text(text).p; }

void Model::backward_text(const TextTrace& t, std::span<const double> grad_p, ModelParams& g) const {
  add_outer(g[Block::TextW], grad_p, t.mean_embedding);
  add_column(g[Block::TextB], grad_p);
  auto dm = transpose_times(params_[Block::TextW], grad_p);
  const double inv = 1.0 / static_cast<double>(t.token_ids.size());
  Mat& table = g[Block::TokenTable];
  for (std::size_t id : t.token_ids) {
    auto row = table.row(id);
    for (std::size_t k = 0; k < dm.size(); ++k) row[k] += dm[k] * inv;
  }
}

HeadOutputs Model::heads(std::span<const double> a) const {
  if (a.size() != dims_.embed) throw InvalidArgument("heads: embedding dimension mismatch");
  return {
      affine(params_[Block::HeadTW], params_[Block::HeadTB], a),
      affine(params_[Block::HeadRW], params_[Block::HeadRB], a),
      affine(params_[Block::HeadGW], params_[Block::HeadGB], a),
      affine(params_[Block::ActionW], params_[Block::ActionB], a),
  };
}

std::vector<double> Model::backward_heads(std::span<const double> a, const HeadOutputs& d, ModelParams& g) const {
  std::vector<double> da(dims_.embed, 0.0);
  const auto one = [&](const std::vector<double>& dy, Block w, Block b) {
    if (dy.empty()) return;
    add_outer(g[w], dy, a);
    add_column(g[b], dy);
    const auto back = transpose_times(params_[w], dy);
    for (std::size_t k = 0; k < da.size(); ++k) da[k] += back[k];
  };
  one(d.logits_t, Block::HeadTW, Block::HeadTB);
  one(d.logits_r, Block::HeadRW, Block::HeadRB);
  one(d.logits_g, Block::HeadGW, Block::HeadGB);
  one(d.action, Block::ActionW, Block::ActionB);
  return da;
}

}  // namespace lada
