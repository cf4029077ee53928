#include "lada/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "lada/checkpoint.hpp"
#include "lada/error.hpp"
#include "lada/rng.hpp"

namespace lada {

namespace {

constexpr std::uint64_t kBatchStream = 0xba7c4;
constexpr std::uint64_t kProbeSeed = 0x9b0be;

bool finite_and_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double global_norm(const ModelParams& g) {
  double s = 0.0;
  for (const auto& m : g.blocks)
    for (double v : m.flat()) s += v * v;
  return std::sqrt(s);
}

// SGD with momentum and global-norm clipping; velocity has the shape of params.
void sgd_step(ModelParams& params, ModelParams& velocity, ModelParams& grads, double lr, double momentum,
              double clip_norm) {
  const double gn = global_norm(grads);
  const double scale = gn > clip_norm ? clip_norm / gn : 1.0;
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    auto p = params.blocks[k].flat();
    auto v = velocity.blocks[k].flat();
    const auto g = grads.blocks[k].flat();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + scale * g[i];
      p[i] -= lr * v[i];
    }
  }
}

// Partial Fisher-Yates over a persistent index vector.
std::vector<std::size_t> draw_batch(Rng& rng, std::vector<std::size_t>& order, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) std::swap(order[k], order[k + rng.index(order.size() - k)]);
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n)};
}

Mat stack_rows(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Mat m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

std::vector<double> row_copy(const Mat& m, std::size_t r, double scale) {
  std::vector<double> v(m.row(r).begin(), m.row(r).end());
  for (double& x : v) x *= scale;
  return v;
}

std::string mode_name(SelfMode m) { return m == SelfMode::IncludeSelf ? "include_self" : "exclude_self"; }

SelfMode mode_from_name(const std::string& s) {
  if (s == "include_self") return SelfMode::IncludeSelf;
  if (s == "exclude_self") return SelfMode::ExcludeSelf;
  throw InvalidArgument("unknown self mode \"" + s + "\"");
}

void check_instruction_range(const Dataset& data, const ModelDims& dims) {
  for (const auto& ep : data.episodes)
    if (ep.task_id >= dims.n_instructions)
      throw InvalidArgument("task id " + std::to_string(ep.task_id) + " exceeds n_instructions = " +
                            std::to_string(dims.n_instructions));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 2) throw InvalidArgument("TrainConfig: batch must be >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("TrainConfig: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("TrainConfig: momentum must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw InvalidArgument("TrainConfig: clip_norm must be positive");
  if (ma_window == 0) throw InvalidArgument("TrainConfig: ma_window must be positive");
  affinity.validate();
  contrastive.validate();
  dims.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"steps", c.steps},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"affinity", {{"w_t", c.affinity.w_t}, {"w_r", c.affinity.w_r}, {"w_g", c.affinity.w_g}}},
          {"tau", c.contrastive.tau},
          {"lambda", c.contrastive.lambda},
          {"ma_window", c.ma_window},
          {"dims", to_json(c.dims)},
          {"action_action_mode", mode_name(c.action_action_mode)},
          {"hard_labels", c.hard_labels},
          {"fixed_weights", c.fixed_weights},
          {"freeze_encoders", c.freeze_encoders},
          {"inverse_weighting", c.inverse_weighting},
          {"standard_kernel", c.standard_kernel},
          {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch = j.value("batch", c.batch);
    c.steps = j.value("steps", c.steps);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    if (j.contains("affinity")) {
      const auto& a = j.at("affinity");
      c.affinity = {a.value("w_t", 1.0), a.value("w_r", 1.0), a.value("w_g", 1.0)};
    }
    c.contrastive.tau = j.value("tau", c.contrastive.tau);
    c.contrastive.lambda = j.value("lambda", c.contrastive.lambda);
    c.ma_window = j.value("ma_window", c.ma_window);
    if (j.contains("dims")) c.dims = dims_from_json(j.at("dims"));
    if (j.contains("action_action_mode")) c.action_action_mode = mode_from_name(j.at("action_action_mode"));
    c.hard_labels = j.value("hard_labels", c.hard_labels);
    c.fixed_weights = j.value("fixed_weights", c.fixed_weights);
    c.freeze_encoders = j.value("freeze_encoders", c.freeze_encoders);
    c.inverse_weighting = j.value("inverse_weighting", c.inverse_weighting);
    c.standard_kernel = j.value("standard_kernel", c.standard_kernel);
    c.eval_every = j.value("eval_every", c.eval_every);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("TrainConfig: ") + e.what());
  }
  c.validate();
  return c;
}

void write_metrics_csv(std::ostream& out, const MetricsLog& log) {
  out << "step,L_a,L_m,L_CL,L_IL,w_IL,w_CL,total\n";
  for (const auto& s : log.steps) {
    out << s.step << ',' << format_number(s.l_a) << ',' << format_number(s.l_m) << ',' << format_number(s.l_cl) << ','
        << format_number(s.l_il) << ',' << format_number(s.w_il) << ',' << format_number(s.w_cl) << ','
        << format_number(s.total) << '\n';
  }
}

void write_eval_csv(std::ostream& out, const MetricsLog& log) {
  out << "step,retrieval_top1,spearman,task_id,task_accuracy\n";
  for (const auto& e : log.evals) {
    for (const auto& [task, acc] : e.per_task) {
      out << e.step << ',' << format_number(e.retrieval_top1) << ',' << format_number(e.spearman) << ',' << task << ','
          << format_number(acc) << '\n';
    }
  }
}

std::vector<Sample> collect_samples(const Dataset& data, Split split) {
  std::map<std::size_t, std::vector<const Episode*>> by_task;
  for (const auto& ep : data.episodes) by_task[ep.task_id].push_back(&ep);
  std::vector<Sample> out;
  for (const auto& [task, eps] : by_task) {
    const bool transfer = data.is_transfer(task);
    const std::size_t n = eps.size();
    // Last 20% of each pretraining task's episodes, at least one when there are two or more.
    const std::size_t n_eval = n < 2 ? 0 : std::max<std::size_t>(1, n / 5);
    for (std::size_t e = 0; e < n; ++e) {
      const bool held = e >= n - n_eval;
      bool keep = false;
      switch (split) {
        case Split::Train: keep = !transfer && !held; break;
        case Split::HeldOut: keep = !transfer && held; break;
        case Split::Transfer: keep = transfer; break;
        case Split::All: keep = true; break;
      }
      if (!keep) continue;
      for (const auto& st : eps[e]->steps) out.push_back({make_observation(*eps[e], st), st.action, task});
    }
  }
  return out;
}

BatchForward forward_batch(const Model& model, std::span<const Sample> batch, const TrainConfig& cfg) {
  const std::size_t n = batch.size();
  const BinningConfig& binning = model.binning();
  BatchForward f;
  std::vector<PrimitiveTriple> triples;
  std::vector<std::string> texts;
  for (const auto& s : batch) {
    triples.push_back(discretize(s.action, binning));
    texts.push_back(render_language(triples.back(), binning));
    f.labels.push_back(class_indices(triples.back(), binning));
  }
  const AffinityMatrix s =
      cfg.hard_labels ? AffinityMatrix{n, Mat::identity(n)} : similarity_matrix(triples, cfg.affinity);
  const Mat target_aa = cfg.hard_labels ? Mat::identity(n) : row_normalize(s, cfg.action_action_mode);
  const DescriptionSet desc = dedupe_descriptions(texts);
  Mat target_ap;
  if (cfg.hard_labels) {
    target_ap = Mat(n, desc.texts.size());
    for (std::size_t i = 0; i < n; ++i) target_ap(i, desc.owner[i]) = 1.0;
  } else {
    target_ap = primitive_target(s, desc);
  }

  std::vector<std::vector<double>> a_rows;
  for (const auto& smp : batch) {
    f.actions.push_back(model.forward_action(smp.obs));
    a_rows.push_back(f.actions.back().a);
  }
  std::vector<std::vector<double>> p_rows;
  for (const auto& t : desc.texts) {
    f.texts.push_back(model.forward_text(t));
    p_rows.push_back(f.texts.back().p);
  }
  const std::size_t d = model.dims().embed;
  f.a = stack_rows(a_rows, d);
  f.p = stack_rows(p_rows, d);
  for (const Mat* m : {&f.a, &f.p})
    for (std::size_t i = 0; i < m->rows(); ++i) {
      const double nrm = norm(m->row(i));
      if (!(std::isfinite(nrm) && nrm > 0.0))
        throw DegenerateEmbedding("forward_batch: embedding row " + std::to_string(i) + " has zero or non-finite norm");
    }

  const double tau = cfg.contrastive.tau;
  if (cfg.standard_kernel) {
    f.l_a = standard_infonce(f.a, f.a, tau);
    f.l_a.grads[0] += f.l_a.grads[1];
    f.l_a.grads.pop_back();
  } else {
    f.l_a = loss_action_action(f.a, target_aa, tau);
  }
  f.l_m = loss_action_primitive(f.a, f.p, target_ap, tau);
  f.l_cl = contrastive_total(f.l_a, f.l_m, cfg.contrastive.lambda);

  const ClassIndices counts = model.class_counts();
  f.logits_t = Mat(n, static_cast<std::size_t>(counts.t));
  f.logits_r = Mat(n, static_cast<std::size_t>(counts.r));
  f.logits_g = Mat(n, static_cast<std::size_t>(counts.g));
  for (std::size_t i = 0; i < n; ++i) {
    const HeadOutputs h = model.heads(a_rows[i]);
    std::copy(h.logits_t.begin(), h.logits_t.end(), f.logits_t.row(i).begin());
    std::copy(h.logits_r.begin(), h.logits_r.end(), f.logits_r.row(i).begin());
    std::copy(h.logits_g.begin(), h.logits_g.end(), f.logits_g.row(i).begin());
  }
  f.l_il = imitation_loss(f.logits_t, f.logits_r, f.logits_g, f.labels);
  return f;
}

void backward_batch(const Model& model, const BatchForward& f, const LossWeights& w, const TrainConfig& cfg,
                    ModelParams& grads) {
  const Mat& grad_a_cl = f.l_cl.grads[0];
  const Mat& grad_p_cl = f.l_cl.grads[1];
  for (std::size_t i = 0; i < f.actions.size(); ++i) {
    HeadOutputs dh;
    dh.logits_t = row_copy(f.l_il.grads[0], i, w.w_il);
    dh.logits_r = row_copy(f.l_il.grads[1], i, w.w_il);
    dh.logits_g = row_copy(f.l_il.grads[2], i, w.w_il);
    auto da = model.backward_heads(f.actions[i].a, dh, grads);
    const auto row = grad_a_cl.row(i);
    for (std::size_t k = 0; k < da.size(); ++k) da[k] += w.w_cl * row[k];
    model.backward_action(f.actions[i], da, grads);
  }
  for (std::size_t c = 0; c < f.texts.size(); ++c) model.backward_text(f.texts[c], row_copy(grad_p_cl, c, w.w_cl), grads);
  if (cfg.freeze_encoders) {
    for (std::size_t k = 0; k < kNumBlocks; ++k)
      if (is_encoder_block(static_cast<Block>(k))) grads.blocks[k].fill(0.0);
  }
}

DivergenceError::DivergenceError(std::size_t step, Model last_good)
    : std::runtime_error("training diverged at step " + std::to_string(step)), step_(step),
      last_good_(std::move(last_good)) {}

PretrainResult pretrain(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  check_instruction_range(data, cfg.dims);
  const std::vector<Sample> samples = collect_samples(data, Split::Train);
  if (samples.empty()) throw InvalidArgument("pretrain: no training samples");
  if (cfg.batch > samples.size()) throw InvalidArgument("pretrain: batch larger than the training split");

  PretrainResult r{Model::init(cfg.seed, cfg.dims), {}};
  Model& model = r.model;
  ModelParams velocity = model.params().zeros_like();
  MAState ma(cfg.ma_window);
  Rng rng(mix_seed(cfg.seed, kBatchStream));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;

  const auto evaluate = [&](std::size_t step) {
    EvalMetrics e;
    e.step = step;
    const RetrievalMetrics ret = evaluate_retrieval(model, data, Split::HeldOut);
    e.retrieval_top1 = ret.top1;
    e.per_task = ret.per_task;
    e.spearman = affinity_correlation(model, data, cfg.affinity);
    r.log.evals.push_back(std::move(e));
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    batch.clear();
    for (std::size_t idx : draw_batch(rng, order, cfg.batch)) batch.push_back(samples[idx]);
    BatchForward f;
    try {
      f = forward_batch(model, batch, cfg);
    } catch (const DegenerateEmbedding&) {
      throw DivergenceError(step, model);
    }
    if (!finite_and_nonneg(f.l_cl.value) || !finite_and_nonneg(f.l_il.value)) throw DivergenceError(step, model);

    ma.update(f.l_il.value, f.l_cl.value);
    const LossWeights w = cfg.fixed_weights ? LossWeights{0.5, 0.5} : weights(ma, cfg.inverse_weighting);

    ModelParams grads = model.params().zeros_like();
    backward_batch(model, f, w, cfg, grads);
    if (!grads.all_finite()) throw DivergenceError(step, model);
    ModelParams before = model.params();
    sgd_step(model.params(), velocity, grads, cfg.lr, cfg.momentum, cfg.clip_norm);
    if (!model.params().all_finite()) {
      model.params() = std::move(before);
      throw DivergenceError(step, model);
    }

    r.log.steps.push_back({step, f.l_a.value, f.l_m.value, f.l_cl.value, f.l_il.value, w.w_il, w.w_cl,
                           total_loss(f.l_cl.value, f.l_il.value, w)});
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) evaluate(step + 1);
  }
  if (r.log.evals.empty() || r.log.evals.back().step != cfg.steps) evaluate(cfg.steps);
  return r;
}

FinetuneResult finetune(const FinetuneConfig& cfg, const Dataset& data, const Model& checkpoint) {
  if (cfg.batch == 0) throw InvalidArgument("finetune: batch must be positive");
  check_instruction_range(data, checkpoint.dims());
  const std::vector<Sample> samples = collect_samples(data, Split::Train);
  if (samples.empty()) throw InvalidArgument("finetune: no training samples");
  if (cfg.batch > samples.size()) throw InvalidArgument("finetune: batch larger than the training split");
  for (const auto& s : samples)
    if (s.obs.features.size() != checkpoint.dims().obs_dim)
      throw InvalidArgument("finetune: observation width does not match the checkpoint");

  FinetuneResult r{checkpoint, {}, {}, std::nullopt};
  Model& model = r.model;
  ModelParams velocity = model.params().zeros_like();
  Rng rng(mix_seed(cfg.seed, kBatchStream, 1));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  const auto evaluate = [&](std::size_t step) {
    const double l1 = evaluate_l1(model, data, Split::HeldOut);
    r.eval_l1.emplace_back(step, l1);
    if (cfg.target_l1 > 0.0 && !r.steps_to_target && l1 < cfg.target_l1) r.steps_to_target = step;
  };
  if (cfg.eval_every > 0) evaluate(0);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto idx = draw_batch(rng, order, cfg.batch);
    std::vector<ActionTrace> traces;
    Mat pred(cfg.batch, 7);
    Mat target(cfg.batch, 7);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Sample& s = samples[idx[i]];
      traces.push_back(model.forward_action(s.obs));
      const auto act = model.heads(traces.back().a).action;
      std::copy(act.begin(), act.end(), pred.row(i).begin());
      const auto t = s.action.to_array();
      std::copy(t.begin(), t.end(), target.row(i).begin());
    }
    const LossValue l1 = l1_trajectory_loss(pred, target);
    r.train_l1.push_back(l1.value);
    if (!std::isfinite(l1.value)) throw DivergenceError(step, model);

    ModelParams grads = model.params().zeros_like();
    if (!cfg.freeze_all) {
      for (std::size_t i = 0; i < traces.size(); ++i) {
        HeadOutputs dh;
        dh.action = row_copy(l1.grads[0], i, 1.0);
        const auto da = model.backward_heads(traces[i].a, dh, grads);
        if (cfg.unfreeze_all) model.backward_action(traces[i], da, grads);
      }
      if (!cfg.unfreeze_all) {
        for (std::size_t k = 0; k < kNumBlocks; ++k)
          if (!is_action_head_block(static_cast<Block>(k))) grads.blocks[k].fill(0.0);
      }
    }
    sgd_step(model.params(), velocity, grads, cfg.lr, cfg.momentum, cfg.clip_norm);
    if (!model.params().all_finite()) throw DivergenceError(step, checkpoint);
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) evaluate(step + 1);
  }
  return r;
}

std::array<double, 7> evaluate_l1_per_dim(const Model& model, const Dataset& data, Split split) {
  const auto samples = collect_samples(data, split);
  if (samples.empty()) throw InvalidArgument("evaluate_l1: empty split");
  std::array<double, 7> err{};
  for (const auto& s : samples) {
    const auto pred = model.heads(model.embed_action(s.obs)).action;
    const auto t = s.action.to_array();
    for (std::size_t k = 0; k < 7; ++k) err[k] += std::abs(pred[k] - t[k]);
  }
  for (double& e : err) e /= static_cast<double>(samples.size());
  return err;
}

double evaluate_l1(const Model& model, const Dataset& data, Split split) {
  const auto per_dim = evaluate_l1_per_dim(model, data, split);
  return std::accumulate(per_dim.begin(), per_dim.end(), 0.0) / 7.0;
}

RetrievalMetrics evaluate_retrieval(const Model& model, const Dataset& data, Split split) {
  const BinningConfig& binning = model.binning();
  std::vector<std::string> texts;
  for (const auto& ep : data.episodes)
    for (const auto& st : ep.steps) texts.push_back(render_language(discretize(st.action, binning), binning));
  std::sort(texts.begin(), texts.end());
  texts.erase(std::unique(texts.begin(), texts.end()), texts.end());

  RetrievalMetrics m;
  m.candidates = texts.size();
  const auto samples = collect_samples(data, split);
  if (samples.empty() || texts.empty()) return m;

  std::vector<std::vector<double>> p_rows;
  for (const auto& t : texts) p_rows.push_back(model.embed_primitive_text(t));
  const Mat p = stack_rows(p_rows, model.dims().embed);
  std::vector<std::vector<double>> a_rows;
  for (const auto& s : samples) a_rows.push_back(model.embed_action(s.obs));
  const Mat sim = cosine_matrix(stack_rows(a_rows, model.dims().embed), p);

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_task;  // hits, total
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = sim.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const bool ok = texts[best] == render_language(discretize(samples[i].action, binning), binning);
    hits += ok ? 1 : 0;
    auto& pt = per_task[samples[i].task_id];
    pt.first += ok ? 1 : 0;
    pt.second += 1;
  }
  m.n = samples.size();
  m.top1 = static_cast<double>(hits) / static_cast<double>(m.n);
  for (const auto& [task, ht] : per_task)
    m.per_task[task] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return m;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman: need two equal-length samples of size >= 2");
  const auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("spearman: a sample is constant");
  return sxy / std::sqrt(sxx * syy);
}

double affinity_correlation(const Model& model, const Dataset& data, const AffinityWeights& w) {
  std::vector<Sample> probe = collect_samples(data, Split::HeldOut);
  if (probe.size() > kProbeBatch) {
    Rng rng(kProbeSeed);
    std::vector<std::size_t> order(probe.size());
    std::iota(order.begin(), order.end(), 0);
    auto pick = draw_batch(rng, order, kProbeBatch);
    std::sort(pick.begin(), pick.end());
    std::vector<Sample> chosen;
    for (std::size_t i : pick) chosen.push_back(probe[i]);
    probe = std::move(chosen);
  }
  std::vector<PrimitiveTriple> triples;
  std::vector<std::vector<double>> a_rows;
  for (const auto& s : probe) {
    triples.push_back(discretize(s.action, model.binning()));
    a_rows.push_back(model.embed_action(s.obs));
  }
  std::vector<PrimitiveTriple> distinct = triples;
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2)
    throw InvalidArgument("affinity_correlation: probe batch needs at least two distinct primitive triples");
  const AffinityMatrix s = similarity_matrix(triples, w);
  const Mat c = cosine_matrix(stack_rows(a_rows, model.dims().embed), stack_rows(a_rows, model.dims().embed));
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < probe.size(); ++i)
    for (std::size_t j = i + 1; j < probe.size(); ++j) {
      xs.push_back(c(i, j));
      ys.push_back(s.s(i, j));
    }
  if (std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys.front(); }))
    throw InvalidArgument("affinity_correlation: affinity matrix is degenerate (all off-diagonal entries equal)");
  return spearman(xs, ys);
}

void export_embeddings(const Model& model, const Dataset& data, std::ostream& out) {
  const std::size_t d = model.dims().embed;
  out << "task_id,primitive_text,t_idx,r_idx,g_idx";
  for (std::size_t k = 0; k < d; ++k) out << ",e_" << k;
  out << '\n';
  for (const auto& ep : data.episodes) {
    for (const auto& st : ep.steps) {
      const PrimitiveTriple t = discretize(st.action, model.binning());
      const ClassIndices c = class_indices(t, model.binning());
      out << ep.task_id << ",\"" << render_language(t, model.binning()) << "\"," << c.t << ',' << c.r << ',' << c.g;
      for (double v : model.embed_action(make_observation(ep, st))) out << ',' << format_number(v);
      out << '\n';
    }
  }
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Dataset make_benchmark(std::uint64_t seed, const SuiteSpec& spec) {
  const auto suite = build_suite(seed, spec.n_tasks, spec.sharing, spec.options);
  return generate_dataset(suite, spec.episodes_per_task, mix_seed(seed, 1), spec.options.binning);
}

AblationRow run_cell(const TrainConfig& cfg, const Dataset& data, std::size_t window) {
  AblationRow row;
  row.labels = cfg.hard_labels ? "hard" : "soft";
  row.weighting = cfg.fixed_weights ? "fixed" : "adaptive";
  try {
    const PretrainResult r = pretrain(cfg, data);
    const auto& steps = r.log.steps;
    const std::size_t n = std::min(window, steps.size());
    double tot = 0, eq = 0;
    for (std::size_t k = steps.size() - n; k < steps.size(); ++k) {
      tot += steps[k].total;
      eq += 0.5 * steps[k].l_cl + 0.5 * steps[k].l_il;
      row.any_nan = row.any_nan || !std::isfinite(steps[k].total);
    }
    row.final_total = tot / static_cast<double>(n);
    row.final_equal_total = eq / static_cast<double>(n);
    row.spearman = r.log.evals.back().spearman;
    row.retrieval = r.log.evals.back().retrieval_top1;
    row.transfer = data.transfer_tasks.empty() ? 0.0 : evaluate_retrieval(r.model, data, Split::Transfer).top1;
  } catch (const DivergenceError&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row = {row.labels, row.weighting, nan, nan, nan, nan, nan, true};
  }
  return row;
}

AblationResult run_ablation(const TrainConfig& base, std::span<const std::uint64_t> seeds, const SuiteSpec& spec) {
  struct Cell {
    bool hard, fixed;
  };
  constexpr std::array<Cell, 4> kCells = {{{false, false}, {false, true}, {true, false}, {true, true}}};
  AblationResult result;
  result.runs.resize(kCells.size());
  for (std::uint64_t seed : seeds) {
    const Dataset data = make_benchmark(seed, spec);
    for (std::size_t c = 0; c < kCells.size(); ++c) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.hard_labels = kCells[c].hard;
      cfg.fixed_weights = kCells[c].fixed;
      result.runs[c].push_back({seed, run_cell(cfg, data)});
    }
  }
  for (const auto& runs : result.runs) {
    AblationRow m = runs.front().row;
    const auto med = [&](double AblationRow::*field) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(r.row.*field);
      return median(v);
    };
    m.spearman = med(&AblationRow::spearman);
    m.retrieval = med(&AblationRow::retrieval);
    m.transfer = med(&AblationRow::transfer);
    m.final_total = med(&AblationRow::final_total);
    m.final_equal_total = med(&AblationRow::final_equal_total);
    m.any_nan = std::any_of(runs.begin(), runs.end(), [](const AblationRun& r) { return r.row.any_nan; });
    result.medians.push_back(m);
  }
  return result;
}

void write_ablation_csv(std::ostream& out, const AblationResult& result) {
  out << "labels,weighting,spearman,retrieval,transfer,final_total,final_equal_total,any_nan\n";
  for (const auto& r : result.medians) {
    out << r.labels << ',' << r.weighting << ',' << format_number(r.spearman) << ',' << format_number(r.retrieval) << ','
        << format_number(r.transfer) << ',' << format_number(r.final_total) << ','
        << format_number(r.final_equal_total) << ',' << (r.any_nan ? 1 : 0) << '\n';
  }
}

}  // namespace lada
