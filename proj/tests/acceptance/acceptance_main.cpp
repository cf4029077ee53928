// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "lada/checkpoint.hpp"
#include "lada/training.hpp"
#include "../oracles.hpp"

using namespace lada;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Mat random_target(std::mt19937_64& g, std::size_t n, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat t(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += t(i, j) = u(g) < 0.3 ? 0.0 : u(g);
    if (s == 0) t(i, 0) = s = 1;
    for (std::size_t j = 0; j < k; ++j) t(i, j) /= s;
  }
  return t;
}

std::vector<double> fd(const Mat& x, const std::function<double(const Mat&)>& f) {
  return finite_diff_grad(
      [&](std::span<const double> v) { return f(Mat(x.rows(), x.cols(), std::vector<double>(v.begin(), v.end()))); },
      x.flat());
}

// ---- 1. gradient suite ----
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_name;
  auto track = [&](double e, const char* name) {
    if (e > worst) worst = e, worst_name = name;
  };

  SuiteSpec spec;
  spec.options.obs_dim = 6;
  spec.episodes_per_task = 2;
  const Dataset data = make_benchmark(99, spec);
  const auto samples = collect_samples(data, Split::All);
  TrainConfig cfg;
  cfg.dims.obs_dim = 6;
  cfg.dims.d_v = 4;
  cfg.dims.d_l = 3;
  cfg.dims.hidden = 5;
  cfg.dims.embed = 4;
  cfg.contrastive = {0.5, 0.8};

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 g(seed);
    const std::size_t n = 2 + seed % 7, d = 2 + seed % 15;
    const double tau = 0.1 + 0.05 * static_cast<double>(seed % 10);
    const auto trip = oracle::clustered_triples(g, n, 1 + seed % 4);
    std::vector<std::string> texts;
    for (const auto& t : trip) texts.push_back(render_language(t));
    const DescriptionSet desc = dedupe_descriptions(texts);
    const AffinityMatrix s = similarity_matrix(trip);
    const Mat taa = row_normalize(s, SelfMode::ExcludeSelf), tap = primitive_target(s, desc);
    const Mat a = oracle::random_mat(g, n, d), p = oracle::random_mat(g, desc.texts.size(), d);

    const LossValue la = loss_action_action(a, taa, tau);
    track(max_relative_error(la.grads[0].flat(), fd(a, [&](const Mat& m) { return loss_action_action(m, taa, tau).value; })), "L_a");
    const LossValue lm = loss_action_primitive(a, p, tap, tau);
    track(max_relative_error(lm.grads[0].flat(), fd(a, [&](const Mat& m) { return loss_action_primitive(m, p, tap, tau).value; })), "L_m/A");
    track(max_relative_error(lm.grads[1].flat(), fd(p, [&](const Mat& m) { return loss_action_primitive(a, m, tap, tau).value; })), "L_m/P");

    std::vector<ClassIndices> labels;
    for (const auto& t : trip) labels.push_back(class_indices(t));
    const Mat lt = oracle::random_mat(g, n, 19), lr = oracle::random_mat(g, n, 19), lg = oracle::random_mat(g, n, 2);
    const LossValue il = imitation_loss(lt, lr, lg, labels);
    track(max_relative_error(il.grads[0].flat(), fd(lt, [&](const Mat& m) { return imitation_loss(m, lr, lg, labels).value; })), "L_IL");
    track(max_relative_error(il.grads[1].flat(), fd(lr, [&](const Mat& m) { return imitation_loss(lt, m, lg, labels).value; })), "L_IL");
    track(max_relative_error(il.grads[2].flat(), fd(lg, [&](const Mat& m) { return imitation_loss(lt, lr, m, labels).value; })), "L_IL");

    const Mat pred = oracle::random_mat(g, n, 7), target = oracle::random_mat(g, n, 7);
    const LossValue l1 = l1_trajectory_loss(pred, target);
    track(max_relative_error(l1.grads[0].flat(), fd(pred, [&](const Mat& m) { return l1_trajectory_loss(m, target).value; })), "L1");

    // FiLM: Jacobian with respect to v against diag(gamma), and parameter gradient of <w, film(v, l)>.
    Model model = Model::init(seed, cfg.dims);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto& b : model.params().blocks)
      for (double& v : b.flat()) v += nd(g);
    const Mat v = oracle::random_mat(g, 1, cfg.dims.d_v), l = oracle::random_mat(g, 1, cfg.dims.d_l);
    const auto gamma = model.film_gamma(l.row(0));
    for (std::size_t o = 0; o < cfg.dims.d_v; ++o) {
      const auto row = finite_diff_grad([&](std::span<const double> x) { return model.film(x, l.row(0))[o]; }, v.row(0));
      std::vector<double> want(cfg.dims.d_v, 0.0);
      want[o] = gamma[o];
      track(max_relative_error(want, row), "FiLM");
    }

    // Full composite over every parameter block on a 4-sample batch.
    std::vector<Sample> batch;
    for (int k = 0; k < 4; ++k) batch.push_back(samples[g() % samples.size()]);
    const LossWeights w = weights_from_averages(0.5 + nd(g) * nd(g), 1.0);
    ModelParams grads = model.params().zeros_like();
    backward_batch(model, forward_batch(model, batch, cfg), w, cfg, grads);
    const auto num = finite_diff_grad(
        [&](std::span<const double> x) {
          Model mm = model;
          mm.params().assign(x);
          const BatchForward f = forward_batch(mm, batch, cfg);
          return total_loss(f.l_cl.value, f.l_il.value, w);
        },
        model.params().flatten());
    track(max_relative_error(grads.flatten(), num), "composite");
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          "max rel err " + fmt(worst) + " (" + worst_name + "), " + fmt(secs) + " s"};
}

// ---- 2. Eq. 1 exactness ----
Outcome similarity_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> uw(0.0, 3.0);
  std::size_t bad = 0;
  double max_diff = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rep % 16;
    const auto trip = oracle::clustered_triples(g, n, 1 + rep % 6);
    const AffinityWeights w{uw(g), uw(g), uw(g) + 1e-3};
    const Mat s = similarity_matrix(trip, w).s;
    const Mat o = oracle::similarity(trip, w.w_t, w.w_r, w.w_g);
    for (std::size_t i = 0; i < n; ++i) {
      if (s(i, i) != 1.0) ++bad;
      for (std::size_t j = 0; j < n; ++j) {
        max_diff = std::max(max_diff, std::abs(s(i, j) - o(i, j)));
        if (s(i, j) != s(j, i) || s(i, j) < 0.0 || s(i, j) > 1.0) ++bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && max_diff <= 1e-15 && secs < 10.0,
          "max |S - oracle| " + fmt(max_diff) + ", invariant violations " + std::to_string(bad) + ", " + fmt(secs) + " s"};
}

// ---- 3. hard-label reduction ----
Outcome hard_label_reduction() {
  std::mt19937_64 g(3);
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rep % 9, d = 2 + rep % 13;
    const Mat a = oracle::random_mat(g, n, d), c = oracle::random_mat(g, n, d);
    const double tau = 0.05 + 0.01 * rep;
    worst = std::max(worst, std::abs(soft_infonce(a, c, Mat::identity(n), tau).value - oracle::standard_infonce(a, c, tau)));
  }
  return {worst <= 1e-12, "max |soft(I) - standard| " + fmt(worst)};
}

// ---- 4. Eq. 5 exactness ----
Outcome adaptive_weight_exactness() {
  std::mt19937_64 g(4);
  std::gamma_distribution<double> il_dist(2.0, 0.5), cl_dist(4.0, 1.0);
  bool ok = true;
  double worst = 0;
  for (std::size_t window : {1u, 7u, 100u}) {
    MAState state(window);
    std::vector<double> il, cl;
    for (int k = 0; k < 5000; ++k) {
      il.push_back(il_dist(g));
      cl.push_back(cl_dist(g));
      state.update(il.back(), cl.back());
      const double ma_il = oracle::tail_mean(il, window), ma_cl = oracle::tail_mean(cl, window);
      const LossWeights w = weights(state);
      const double want = ma_il / (ma_il + ma_cl);
      worst = std::max(worst, std::abs(w.w_il - want));
      if (w.w_il + w.w_cl != 1.0) ok = false;
    }
  }
  const LossWeights w = weights_from_averages(3.0, 1.0);
  const bool example = w.w_il == 0.75 && w.w_cl == 0.25;
  return {ok && example && worst < 1e-12,
          "max |w_IL - oracle| " + fmt(worst) + ", sum-to-1 " + (ok ? "ok" : "violated") + ", (3,1) -> (" +
              fmt(w.w_il) + ", " + fmt(w.w_cl) + ")"};
}

// ---- 5. round trip ----
Outcome round_trip() {
  std::mt19937_64 g(5);
  std::size_t bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const PrimitiveTriple p = discretize(oracle::random_action(g));
    const std::string s = render_language(p);
    if (parse_language(s) != p || render_language(parse_language(s)) != s) ++bad;
  }
  const std::string want = "move 0.5 meters forward, rotate 90 degrees around the z-axis, and close the gripper";
  const std::string got = render_language(discretize(Action7{0.5, 0, 0, 0, 0, 90, 1}));
  return {bad == 0 && got == want, std::to_string(bad) + " round-trip failures; sentence \"" + got + "\""};
}

// ---- training-based criteria share one ablation grid ----
struct Grid {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  AblationResult result;
  std::vector<double> k;  // distinct descriptions per seed
  double max_run_seconds = 0;
};

Grid run_grid() {
  Grid grid;
  const TrainConfig base;
  const SuiteSpec spec;
  grid.result.runs.resize(4);
  const std::array<std::pair<bool, bool>, 4> cells{{{false, false}, {false, true}, {true, false}, {true, true}}};
  for (std::uint64_t seed : grid.seeds) {
    const Dataset data = make_benchmark(seed, spec);
    grid.k.push_back(static_cast<double>(evaluate_retrieval(Model::init(0, base.dims), data, Split::Transfer).candidates));
    for (std::size_t c = 0; c < 4; ++c) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.hard_labels = cells[c].first;
      cfg.fixed_weights = cells[c].second;
      const auto t0 = Clock::now();
      grid.result.runs[c].push_back({seed, run_cell(cfg, data)});
      grid.max_run_seconds = std::max(grid.max_run_seconds, seconds_since(t0));
    }
  }
  return grid;
}

std::vector<double> column(const Grid& g, std::size_t cell, double AblationRow::*field) {
  std::vector<double> v;
  for (const auto& r : g.result.runs[cell]) v.push_back(r.row.*field);
  return v;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

constexpr std::size_t kSoftAdaptive = 0, kSoftFixed = 1, kHardAdaptive = 2;

Outcome end_to_end(const Grid& g) {
  const double ret = mean(column(g, kSoftAdaptive, &AblationRow::retrieval));
  const double rho = mean(column(g, kSoftAdaptive, &AblationRow::spearman));
  return {ret >= 0.9 && rho >= 0.6 && g.max_run_seconds <= 300.0,
          "5-seed mean retrieval " + fmt(ret) + ", spearman " + fmt(rho) + ", slowest run " + fmt(g.max_run_seconds) + " s"};
}

Outcome without_scl(const Grid& g) {
  const double rho_s = median(column(g, kSoftAdaptive, &AblationRow::spearman));
  const double rho_h = median(column(g, kHardAdaptive, &AblationRow::spearman));
  const double tr_s = median(column(g, kSoftAdaptive, &AblationRow::transfer));
  const double tr_h = median(column(g, kHardAdaptive, &AblationRow::transfer));
  return {rho_s > rho_h && tr_s > tr_h, "median spearman soft " + fmt(rho_s) + " vs hard " + fmt(rho_h) +
                                             "; held-out-task retrieval soft " + fmt(tr_s) + " vs hard " + fmt(tr_h)};
}

Outcome without_aw(const Grid& g) {
  const double eq_a = median(column(g, kSoftAdaptive, &AblationRow::final_equal_total));
  const double eq_f = median(column(g, kSoftFixed, &AblationRow::final_equal_total));
  const double own_a = median(column(g, kSoftAdaptive, &AblationRow::final_total));
  const double own_f = median(column(g, kSoftFixed, &AblationRow::final_total));
  const double ret_a = median(column(g, kSoftAdaptive, &AblationRow::retrieval));
  const double ret_f = median(column(g, kSoftFixed, &AblationRow::retrieval));
  bool nan = false;
  for (const auto& cell : g.result.runs)
    for (const auto& r : cell) nan = nan || r.row.any_nan;
  return {eq_a <= eq_f && ret_a >= ret_f && !nan,
          "median 0.5*(L_CL+L_IL) adaptive " + fmt(eq_a) + " vs fixed " + fmt(eq_f) + " (own objective " + fmt(own_a) +
              " vs " + fmt(own_f) + "); retrieval " + fmt(ret_a) + " vs " + fmt(ret_f) + "; NaN " + (nan ? "yes" : "no")};
}

Outcome transfer(const Grid& g) {
  std::vector<double> ratio;
  const auto soft = column(g, kSoftAdaptive, &AblationRow::transfer);
  for (std::size_t s = 0; s < soft.size(); ++s) ratio.push_back(soft[s] * g.k[s]);
  const double r = median(ratio);
  const double tr_s = median(soft), tr_h = median(column(g, kHardAdaptive, &AblationRow::transfer));
  return {r >= 3.0 && tr_s > tr_h, "median accuracy / chance " + fmt(r) + " (K median " + fmt(median(g.k)) +
                                       "); soft " + fmt(tr_s) + " vs hard " + fmt(tr_h)};
}

Outcome determinism() {
  const Dataset data = make_benchmark(7);
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.eval_every = 500;
  std::string csv[2], ckpt[2];
  for (int k = 0; k < 2; ++k) {
    const PretrainResult r = pretrain(cfg, data);
    std::ostringstream m;
    write_metrics_csv(m, r.log);
    write_eval_csv(m, r.log);
    csv[k] = m.str();
    ckpt[k] = checkpoint_to_json(r.model).dump();
  }
  return {csv[0] == csv[1] && ckpt[0] == ckpt[1],
          std::string("metrics ") + (csv[0] == csv[1] ? "identical" : "differ") + ", checkpoints " +
              (ckpt[0] == ckpt[1] ? "identical" : "differ") + " (" + std::to_string(csv[0].size()) + " + " +
              std::to_string(ckpt[0].size()) + " bytes)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ' ' << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
  };
  auto guarded = [&](const std::string& id, const std::string& name, const std::function<Outcome()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded("AC1", "gradient suite", gradient_suite);
  guarded("AC2", "similarity exactness", similarity_exactness);
  guarded("AC3", "hard-label reduction", hard_label_reduction);
  guarded("AC4", "adaptive weight exactness", adaptive_weight_exactness);
  guarded("AC5", "language round trip", round_trip);

  Grid grid;
  bool grid_ok = true;
  try {
    grid = run_grid();
  } catch (const std::exception& e) {
    grid_ok = false;
    for (const char* id : {"AC6", "AC7", "AC8", "AC9"}) report(id, "training grid", {false, std::string("exception: ") + e.what()});
  }
  if (grid_ok) {
    report("AC6", "end-to-end alignment", end_to_end(grid));
    report("AC7", "soft vs hard labels", without_scl(grid));
    report("AC8", "adaptive vs fixed weights", without_aw(grid));
    report("AC9", "cross-task transfer", transfer(grid));
  }
  guarded("AC10", "determinism", determinism);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
