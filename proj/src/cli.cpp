#include "lada/cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lada/checkpoint.hpp"
#include "lada/error.hpp"
#include "lada/rng.hpp"
#include "lada/training.hpp"

namespace lada::cli {

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  body(out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void record_config(const std::string& output, const nlohmann::json& resolved) {
  write_text(output + ".config.json", [&](std::ostream& o) { o << resolved.dump(2) << '\n'; });
}

// Flags that mirror TrainConfig. Values land in optionals so that a config file
// supplies the base and only flags actually given override it.
struct TrainFlags {
  std::string config;
  std::optional<std::size_t> batch, steps, ma_window, eval_every;
  std::optional<double> lr, tau, lambda, w_t, w_r, w_g;
  std::optional<std::uint64_t> seed;
  CLI::Option* hard = nullptr;
  CLI::Option* fixed = nullptr;
  CLI::Option* freeze = nullptr;
  CLI::Option* inverse = nullptr;
  CLI::Option* include_self = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON TrainConfig; flags override its values");
    app->add_option("--batch", batch, "batch size N");
    app->add_option("--steps", steps, "optimizer steps");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--seed", seed, "model init and batch sampling seed");
    app->add_option("--tau", tau, "contrastive temperature");
    app->add_option("--lambda", lambda, "weight of the action-primitive branch");
    app->add_option("--window", ma_window, "moving-average window W");
    app->add_option("--w-t", w_t, "translation affinity weight");
    app->add_option("--w-r", w_r, "rotation affinity weight");
    app->add_option("--w-g", w_g, "gripper affinity weight");
    app->add_option("--eval-every", eval_every, "evaluate every k steps (0: only at the end)");
    hard = app->add_flag("--hard-labels", "replace the soft affinity with the identity");
    fixed = app->add_flag("--fixed-weights", "use w_IL = w_CL = 0.5");
    freeze = app->add_flag("--freeze-encoders", "train only FiLM, adapter and heads");
    inverse = app->add_flag("--inverse-weighting", "give the smaller moving average the larger weight");
    include_self = app->add_flag("--include-self", "keep the diagonal in the action-action target");
  }

  TrainConfig resolve() const {
    TrainConfig c = config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(config));
    if (batch) c.batch = *batch;
    if (steps) c.steps = *steps;
    if (lr) c.lr = *lr;
    if (seed) c.seed = *seed;
    if (tau) c.contrastive.tau = *tau;
    if (lambda) c.contrastive.lambda = *lambda;
    if (ma_window) c.ma_window = *ma_window;
    if (w_t) c.affinity.w_t = *w_t;
    if (w_r) c.affinity.w_r = *w_r;
    if (w_g) c.affinity.w_g = *w_g;
    if (eval_every) c.eval_every = *eval_every;
    if (hard->count()) c.hard_labels = true;
    if (fixed->count()) c.fixed_weights = true;
    if (freeze->count()) c.freeze_encoders = true;
    if (inverse->count()) c.inverse_weighting = true;
    if (include_self->count()) c.action_action_mode = SelfMode::IncludeSelf;
    c.validate();
    return c;
  }
};

BinningConfig load_binning(const std::string& path) {
  return path.empty() ? BinningConfig{} : binning_from_json(read_json_file(path));
}

std::string format_action(const Action7& a) {
  std::string s;
  for (double v : a.to_array()) {
    if (!s.empty()) s += ' ';
    s += format_number(v);
  }
  return s;
}

Action7 parse_action_line(const std::string& line) {
  std::istringstream in(line);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: \"" + tok + "\"");
    }
  }
  return Action7::from_array(v);
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language-grounded action decomposition, soft-label contrastive pretraining and evaluation"};
  app.name("lada");
  app.require_subcommand(1);

  std::function<void()> run;  // set during resolution, executed after every flag validated

  // gen
  auto* gen = app.add_subcommand("gen", "build a task suite and write its dataset");
  std::uint64_t gen_seed = 0;
  std::size_t gen_tasks = 4, gen_episodes = 10;
  double gen_sharing = 0.5;
  std::string gen_out, gen_suite_out, gen_binning;
  gen->add_option("--seed", gen_seed, "suite seed");
  gen->add_option("--tasks", gen_tasks, "pretraining tasks");
  gen->add_option("--sharing", gen_sharing, "fraction of phases drawn from the shared pool")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--episodes", gen_episodes, "episodes per task");
  gen->add_option("--out", gen_out, "dataset JSONL path")->required();
  gen->add_option("--suite-out", gen_suite_out, "suite JSON path");
  gen->add_option("--binning", gen_binning, "BinningConfig JSON");
  SuiteOptions gen_opts;
  gen->add_option("--sigma-t", gen_opts.sigma_t, "translation noise std (meters)")->check(CLI::NonNegativeNumber);
  gen->add_option("--sigma-r", gen_opts.sigma_r, "rotation noise std (degrees)")->check(CLI::NonNegativeNumber);
  gen->add_option("--obs-noise", gen_opts.obs_noise, "observation noise std")->check(CLI::NonNegativeNumber);
  gen->add_option("--transfer", gen_opts.n_transfer, "held-out transfer tasks");

  // decompose / parse
  auto* decompose = app.add_subcommand("decompose", "stdin actions (7 numbers per line) -> primitive sentences");
  auto* parse = app.add_subcommand("parse", "stdin primitive sentences -> bin-center actions");
  std::string text_binning;
  decompose->add_option("--binning", text_binning, "BinningConfig JSON");
  parse->add_option("--binning", text_binning, "BinningConfig JSON");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "soft-label contrastive + imitation pretraining");
  TrainFlags pre_flags;
  pre_flags.attach(pre);
  std::string pre_data, pre_out, pre_metrics, pre_evals;
  pre->add_option("--data", pre_data, "dataset JSONL")->required();
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--metrics", pre_metrics, "per-step metrics CSV");
  pre->add_option("--eval-metrics", pre_evals, "evaluation metrics CSV");

  // finetune
  auto* fine = app.add_subcommand("finetune", "L1 regression of the continuous action head");
  FinetuneConfig fine_cfg;
  std::string fine_data, fine_ckpt, fine_out, fine_metrics;
  fine->add_option("--data", fine_data, "dataset JSONL")->required();
  fine->add_option("--checkpoint", fine_ckpt, "pretrained checkpoint")->required();
  fine->add_option("--out", fine_out, "output checkpoint")->required();
  fine->add_option("--steps", fine_cfg.steps, "optimizer steps");
  fine->add_option("--batch", fine_cfg.batch, "batch size");
  fine->add_option("--lr", fine_cfg.lr, "learning rate");
  fine->add_option("--seed", fine_cfg.seed, "batch sampling seed");
  fine->add_flag("--unfreeze-all", fine_cfg.unfreeze_all, "train every block, not only the action head");
  fine->add_option("--metrics", fine_metrics, "per-step L1 CSV");

  // eval
  auto* eval = app.add_subcommand("eval", "retrieval, affinity correlation and action L1 of a checkpoint");
  std::string eval_data, eval_ckpt;
  eval->add_option("--data", eval_data, "dataset JSONL")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "{soft, hard} x {adaptive, fixed} grid over seeds");
  TrainFlags abl_flags;
  abl_flags.attach(ablate);
  std::size_t abl_seeds = 5, abl_tasks = 4, abl_episodes = 10;
  double abl_sharing = 0.5;
  std::string abl_out, abl_runs;
  ablate->add_option("--seeds", abl_seeds, "number of seeds (0..n-1)");
  ablate->add_option("--tasks", abl_tasks, "pretraining tasks per suite");
  ablate->add_option("--sharing", abl_sharing, "primitive sharing")->check(CLI::Range(0.0, 1.0));
  ablate->add_option("--episodes", abl_episodes, "episodes per task");
  ablate->add_option("--out", abl_out, "comparison CSV (stdout if omitted)");
  ablate->add_option("--runs", abl_runs, "per-seed CSV");

  // export
  auto* exp = app.add_subcommand("export", "latent action embeddings as CSV");
  std::string exp_data, exp_ckpt, exp_out;
  exp->add_option("--data", exp_data, "dataset JSONL")->required();
  exp->add_option("--checkpoint", exp_ckpt, "checkpoint")->required();
  exp->add_option("--out", exp_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      const BinningConfig binning = load_binning(gen_binning);
      SuiteOptions opts = gen_opts;
      opts.binning = binning;
      run = [&, opts] {
        const auto suite = build_suite(gen_seed, gen_tasks, gen_sharing, opts);
        const Dataset data = generate_dataset(suite, gen_episodes, mix_seed(gen_seed, 1), opts.binning);
        write_dataset(gen_out, data, opts.binning);
        if (!gen_suite_out.empty())
          write_text(gen_suite_out, [&](std::ostream& o) { o << suite_to_json(suite, opts.binning).dump(2) << '\n'; });
        record_config(gen_out, {{"subcommand", "gen"}, {"seed", gen_seed}, {"tasks", gen_tasks},
                                {"sharing", gen_sharing}, {"episodes", gen_episodes},
                                {"sigma_t", opts.sigma_t}, {"sigma_r", opts.sigma_r}, {"obs_noise", opts.obs_noise},
                                {"transfer", opts.n_transfer}, {"binning", to_json(opts.binning)}});
        out << "wrote " << data.step_count() << " steps from " << data.episodes.size() << " episodes to " << gen_out
            << '\n';
      };
    } else if (decompose->parsed()) {
      const BinningConfig binning = load_binning(text_binning);
      run = [&, binning] {
        for (std::string line; std::getline(in, line);) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          out << render_language(discretize(parse_action_line(line), binning), binning) << '\n';
        }
      };
    } else if (parse->parsed()) {
      const BinningConfig binning = load_binning(text_binning);
      run = [&, binning] {
        for (std::string line; std::getline(in, line);) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          out << format_action(bin_center(parse_language(line, binning), binning)) << '\n';
        }
      };
    } else if (pre->parsed()) {
      const TrainConfig cfg = pre_flags.resolve();
      run = [&, cfg] {
        const Dataset data = read_dataset(pre_data);
        nlohmann::json resolved = {{"subcommand", "pretrain"}, {"data", pre_data}, {"train", to_json(cfg)}};
        try {
          const PretrainResult r = pretrain(cfg, data);
          save_checkpoint(r.model, pre_out);
          record_config(pre_out, resolved);
          if (!pre_metrics.empty()) write_text(pre_metrics, [&](std::ostream& o) { write_metrics_csv(o, r.log); });
          if (!pre_evals.empty()) write_text(pre_evals, [&](std::ostream& o) { write_eval_csv(o, r.log); });
          const auto& e = r.log.evals.back();
          out << "retrieval_top1 " << format_number(e.retrieval_top1) << "\nspearman " << format_number(e.spearman)
              << '\n';
        } catch (const DivergenceError& e) {
          save_checkpoint(e.last_good(), pre_out + ".last_good");
          throw;
        }
      };
    } else if (fine->parsed()) {
      run = [&] {
        const Dataset data = read_dataset(fine_data);
        const Model ckpt = load_checkpoint(fine_ckpt);
        const FinetuneResult r = finetune(fine_cfg, data, ckpt);
        save_checkpoint(r.model, fine_out);
        record_config(fine_out, {{"subcommand", "finetune"}, {"data", fine_data}, {"checkpoint", fine_ckpt},
                                 {"steps", fine_cfg.steps}, {"batch", fine_cfg.batch}, {"lr", fine_cfg.lr},
                                 {"seed", fine_cfg.seed}, {"unfreeze_all", fine_cfg.unfreeze_all}});
        if (!fine_metrics.empty()) {
          write_text(fine_metrics, [&](std::ostream& o) {
            o << "step,L1\n";
            for (std::size_t k = 0; k < r.train_l1.size(); ++k) o << k << ',' << format_number(r.train_l1[k]) << '\n';
          });
        }
        out << "heldout_l1 " << format_number(evaluate_l1(r.model, data, Split::HeldOut)) << '\n';
      };
    } else if (eval->parsed()) {
      run = [&] {
        const Dataset data = read_dataset(eval_data);
        const Model model = load_checkpoint(eval_ckpt);
        const RetrievalMetrics held = evaluate_retrieval(model, data, Split::HeldOut);
        nlohmann::json j = {{"retrieval_top1", held.top1},
                            {"candidates", held.candidates},
                            {"spearman", affinity_correlation(model, data)},
                            {"heldout_l1", evaluate_l1(model, data, Split::HeldOut)}};
        nlohmann::json per_task = nlohmann::json::object();
        for (const auto& [t, acc] : held.per_task) per_task[std::to_string(t)] = acc;
        j["per_task"] = per_task;
        if (!data.transfer_tasks.empty()) j["transfer_top1"] = evaluate_retrieval(model, data, Split::Transfer).top1;
        out << j.dump(2) << '\n';
      };
    } else if (ablate->parsed()) {
      const TrainConfig cfg = abl_flags.resolve();
      if (abl_seeds == 0) throw InvalidArgument("--seeds must be positive");
      SuiteSpec spec;
      spec.n_tasks = abl_tasks;
      spec.sharing = abl_sharing;
      spec.episodes_per_task = abl_episodes;
      run = [&, cfg, spec] {
        std::vector<std::uint64_t> seeds(abl_seeds);
        for (std::size_t k = 0; k < seeds.size(); ++k) seeds[k] = k;
        const AblationResult r = run_ablation(cfg, seeds, spec);
        if (abl_out.empty()) {
          write_ablation_csv(out, r);
        } else {
          write_text(abl_out, [&](std::ostream& o) { write_ablation_csv(o, r); });
          record_config(abl_out, {{"subcommand", "ablate"}, {"seeds", abl_seeds}, {"tasks", abl_tasks},
                                  {"sharing", abl_sharing}, {"episodes", abl_episodes}, {"train", to_json(cfg)}});
        }
        if (!abl_runs.empty()) {
          write_text(abl_runs, [&](std::ostream& o) {
            o << "seed,labels,weighting,spearman,retrieval,transfer,final_total,final_equal_total\n";
            for (const auto& cell : r.runs)
              for (const auto& run : cell)
                o << run.seed << ',' << run.row.labels << ',' << run.row.weighting << ','
                  << format_number(run.row.spearman) << ',' << format_number(run.row.retrieval) << ','
                  << format_number(run.row.transfer) << ',' << format_number(run.row.final_total) << ','
                  << format_number(run.row.final_equal_total) << '\n';
          });
        }
      };
    } else if (exp->parsed()) {
      run = [&] {
        const Dataset data = read_dataset(exp_data);
        const Model model = load_checkpoint(exp_ckpt);
        write_text(exp_out, [&](std::ostream& o) { export_embeddings(model, data, o); });
      };
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    run();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace lada::cli
