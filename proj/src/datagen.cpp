#include "lada/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lada/error.hpp"
#include "lada/rng.hpp"

namespace lada {

namespace {

constexpr int kDatasetVersion = 1;
constexpr int kSuiteVersion = 1;
constexpr int kResampleTries = 10;

constexpr std::array<std::string_view, 8> kVerbs = {"pick up", "push", "stack", "open", "pour", "place", "slide", "turn"};
constexpr std::array<std::string_view, 8> kColors = {"red", "blue", "green", "yellow", "black", "white", "orange", "gray"};
constexpr std::array<std::string_view, 8> kObjects = {"block", "bowl", "drawer", "cup", "bottle", "plate", "mug", "lid"};

PrimitiveTriple random_triple(Rng& rng, const BinningConfig& binning) {
  const ClassIndices n = class_counts(binning);
  return triple_from_indices({static_cast<int>(rng.index(static_cast<std::size_t>(n.t))),
                              static_cast<int>(rng.index(static_cast<std::size_t>(n.r))),
                              static_cast<int>(rng.index(static_cast<std::size_t>(n.g)))},
                             binning);
}

std::string make_instruction(Rng& rng, std::size_t id) {
  return std::string(kVerbs[rng.index(kVerbs.size())]) + " the " + std::string(kColors[rng.index(kColors.size())]) +
         " " + std::string(kObjects[rng.index(kObjects.size())]) + " " + std::to_string(id);
}

// k distinct entries of `from`, in draw order.
std::vector<PrimitiveTriple> draw_distinct(Rng& rng, const std::vector<PrimitiveTriple>& from, std::size_t k) {
  std::vector<PrimitiveTriple> pool = from;
  std::vector<PrimitiveTriple> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

Phase make_phase(const PrimitiveTriple& t, const SuiteOptions& o) {
  Phase p;
  p.tmpl = t;
  p.duration = o.duration;
  p.sigma = {o.sigma_t, o.sigma_t, o.sigma_t, o.sigma_r, o.sigma_r, o.sigma_r, 0.0};
  return p;
}

std::vector<double> standard_normal_block(std::uint64_t seed, std::size_t n, double scale) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

std::vector<TaskSpec> build_suite(std::uint64_t seed, std::size_t n_tasks, double sharing, const SuiteOptions& o) {
  if (n_tasks < 2) throw InvalidArgument("build_suite: need at least 2 tasks");
  if (!(sharing >= 0.0 && sharing <= 1.0)) throw InvalidArgument("build_suite: sharing must lie in [0, 1]");
  if (o.phases_per_task == 0 || o.duration == 0) throw InvalidArgument("build_suite: phases and durations must be >= 1");
  if (o.obs_dim == 0) throw InvalidArgument("build_suite: obs_dim must be positive");
  o.binning.validate();

  const auto n_shared = static_cast<std::size_t>(std::lround(sharing * static_cast<double>(o.phases_per_task)));
  const std::size_t n_unique = o.phases_per_task - n_shared;
  const ClassIndices counts = class_counts(o.binning);
  const auto space = static_cast<std::size_t>(counts.t * counts.r * counts.g);
  if (n_shared > o.pool_size)
    throw InvalidArgument("build_suite: pool of " + std::to_string(o.pool_size) + " cannot supply " +
                          std::to_string(n_shared) + " distinct shared phases per task");
  if (o.pool_size + n_tasks * n_unique > space)
    throw InvalidArgument("build_suite: primitive space too small for the requested unique phases");

  Rng rng(mix_seed(seed, 0x5u));
  std::set<PrimitiveTriple> taken;
  const auto fresh = [&] {
    for (;;) {
      const PrimitiveTriple t = random_triple(rng, o.binning);
      if (taken.insert(t).second) return t;
    }
  };
  std::vector<PrimitiveTriple> pool;
  for (std::size_t k = 0; k < o.pool_size; ++k) pool.push_back(fresh());

  const std::uint64_t render_seed = mix_seed(seed, 0x7e4d);
  std::vector<TaskSpec> suite;
  std::set<PrimitiveTriple> pool_used;
  const auto base_task = [&](std::size_t id) {
    TaskSpec t;
    t.id = id;
    t.instruction = make_instruction(rng, id);
    t.obs_projection = mix_seed(seed, 0x0b5, id);
    t.render_seed = render_seed;
    t.obs_dim = o.obs_dim;
    t.task_scale = o.task_scale;
    t.obs_noise = o.obs_noise;
    return t;
  };

  for (std::size_t id = 0; id < n_tasks; ++id) {
    TaskSpec t = base_task(id);
    std::vector<PrimitiveTriple> templates = draw_distinct(rng, pool, n_shared);
    pool_used.insert(templates.begin(), templates.end());
    for (std::size_t k = 0; k < n_unique; ++k) templates.push_back(fresh());
    // Interleave shared and unique phases in a random order.
    for (std::size_t k = templates.size(); k > 1; --k) std::swap(templates[k - 1], templates[rng.index(k)]);
    for (const auto& tmpl : templates) t.phases.push_back(make_phase(tmpl, o));
    suite.push_back(std::move(t));
  }

  const std::vector<PrimitiveTriple> transfer_pool =
      pool_used.empty() ? pool : std::vector<PrimitiveTriple>(pool_used.begin(), pool_used.end());
  for (std::size_t k = 0; k < o.n_transfer; ++k) {
    if (transfer_pool.empty()) throw InvalidArgument("build_suite: transfer task needs a non-empty primitive pool");
    TaskSpec t = base_task(n_tasks + k);
    t.transfer = true;
    const std::size_t n = std::min(o.phases_per_task, transfer_pool.size());
    for (const auto& tmpl : draw_distinct(rng, transfer_pool, n)) t.phases.push_back(make_phase(tmpl, o));
    suite.push_back(std::move(t));
  }
  return suite;
}

Episode generate_episode(const TaskSpec& task, std::uint64_t seed, const BinningConfig& binning) {
  if (task.phases.empty()) throw InvalidArgument("generate_episode: task has no phases");
  const ClassIndices counts = class_counts(binning);
  const auto n_class = static_cast<std::size_t>(counts.t + counts.r + counts.g);
  const std::size_t n_phase = task.phases.size();
  const std::size_t d = task.obs_dim;
  // Unit variance per feature from the three active one-hot columns.
  const auto render = standard_normal_block(task.render_seed, d * n_class, 1.0 / std::sqrt(3.0));
  const auto project = standard_normal_block(task.obs_projection, d * (n_phase + 1), task.task_scale);

  Rng rng(seed);
  Episode ep;
  ep.task_id = task.id;
  ep.instruction = task.instruction;
  for (std::size_t ph = 0; ph < n_phase; ++ph) {
    const Phase& phase = task.phases[ph];
    if (phase.duration == 0) throw InvalidArgument("generate_episode: phase duration must be >= 1");
    const ClassIndices c = class_indices(phase.tmpl, binning);
    const std::array<std::size_t, 3> active = {static_cast<std::size_t>(c.t),
                                               static_cast<std::size_t>(counts.t + c.r),
                                               static_cast<std::size_t>(counts.t + counts.r + c.g)};
    const auto center = bin_center(phase.tmpl, binning).to_array();
    for (std::size_t s = 0; s < phase.duration; ++s) {
      Step step;
      step.action = Action7::from_array(center);
      for (int attempt = 0; attempt < kResampleTries; ++attempt) {
        std::array<double, 7> v = center;
        for (std::size_t k = 0; k < 7; ++k) v[k] += phase.sigma[k] * rng.normal();
        const Action7 cand = Action7::from_array(v);
        if (discretize(cand, binning) == phase.tmpl) {
          step.action = cand;
          break;
        }
      }
      const double frac = static_cast<double>(s) / static_cast<double>(phase.duration);
      step.features.assign(d, 0.0);
      for (std::size_t r = 0; r < d; ++r) {
        double x = 0.0;
        for (std::size_t a : active) x += render[r * n_class + a];
        x += project[r * (n_phase + 1) + ph] + frac * project[r * (n_phase + 1) + n_phase];
        step.features[r] = x + task.obs_noise * rng.normal();
      }
      ep.steps.push_back(std::move(step));
    }
  }
  return ep;
}

std::size_t Dataset::step_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.steps.size();
  return n;
}

bool Dataset::is_transfer(std::size_t task_id) const {
  return std::find(transfer_tasks.begin(), transfer_tasks.end(), task_id) != transfer_tasks.end();
}

Dataset generate_dataset(const std::vector<TaskSpec>& suite, std::size_t episodes_per_task, std::uint64_t seed,
                         const BinningConfig& binning) {
  Dataset data;
  for (const auto& task : suite) {
    if (task.transfer) data.transfer_tasks.push_back(task.id);
    for (std::size_t e = 0; e < episodes_per_task; ++e)
      data.episodes.push_back(generate_episode(task, mix_seed(seed, task.id, e), binning));
  }
  return data;
}

void write_dataset(std::ostream& out, const Dataset& data, const BinningConfig& binning) {
  out << nlohmann::json{{"format", "lada-dataset"}, {"version", kDatasetVersion}, {"transfer_tasks", data.transfer_tasks}}
             .dump()
      << '\n';
  for (std::size_t e = 0; e < data.episodes.size(); ++e) {
    const Episode& ep = data.episodes[e];
    for (const Step& s : ep.steps) {
      const auto a = s.action.to_array();
      nlohmann::json line = {
          {"episode", e},
          {"task_id", ep.task_id},
          {"instruction", ep.instruction},
          {"obs", s.features},
          {"action", a},
          {"primitive_text", render_language(discretize(s.action, binning), binning)},
      };
      out << line.dump() << '\n';
    }
  }
}

void write_dataset(const std::string& path, const Dataset& data, const BinningConfig& binning) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(out, data, binning);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t current = SIZE_MAX;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
      throw FormatError("malformed JSON (last good line " + std::to_string(line_no - 1) + ")", line_no);
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "lada-dataset") throw FormatError("missing lada-dataset header", line_no);
        if (j.value("version", 0) != kDatasetVersion)
          throw FormatError("unsupported dataset version", line_no);
        data.transfer_tasks = j.at("transfer_tasks").get<std::vector<std::size_t>>();
        have_header = true;
        continue;
      }
      const auto episode = j.at("episode").get<std::size_t>();
      if (episode != current) {
        if (current != SIZE_MAX && episode != current + 1)
          throw FormatError("episode ordinals must be consecutive", line_no);
        if (current == SIZE_MAX && episode != 0) throw FormatError("first episode ordinal must be 0", line_no);
        current = episode;
        Episode ep;
        ep.task_id = j.at("task_id").get<std::size_t>();
        ep.instruction = j.at("instruction").get<std::string>();
        data.episodes.push_back(std::move(ep));
      }
      Episode& ep = data.episodes.back();
      if (j.at("task_id").get<std::size_t>() != ep.task_id) throw FormatError("task_id changes within an episode", line_no);
      Step s;
      s.features = j.at("obs").get<std::vector<double>>();
      s.action = Action7::from_array(j.at("action").get<std::vector<double>>());
      ep.steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad field: ") + e.what(), line_no);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  if (!have_header) throw FormatError("empty dataset file", line_no);
  return data;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in);
}

nlohmann::json suite_to_json(const std::vector<TaskSpec>& suite, const BinningConfig& binning) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : suite) {
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : t.phases) {
      phases.push_back({{"template", render_language(p.tmpl, binning)}, {"duration", p.duration}, {"sigma", p.sigma}});
    }
    tasks.push_back({{"id", t.id},
                     {"instruction", t.instruction},
                     {"phases", phases},
                     {"obs_projection", t.obs_projection},
                     {"render_seed", t.render_seed},
                     {"obs_dim", t.obs_dim},
                     {"task_scale", t.task_scale},
                     {"obs_noise", t.obs_noise},
                     {"transfer", t.transfer}});
  }
  return {{"format", "lada-suite"}, {"version", kSuiteVersion}, {"tasks", tasks}};
}

std::vector<TaskSpec> suite_from_json(const nlohmann::json& j, const BinningConfig& binning) {
  if (j.value("format", "") != "lada-suite" || j.value("version", 0) != kSuiteVersion)
    throw InvalidArgument("suite_from_json: not a version-1 lada-suite document");
  std::vector<TaskSpec> suite;
  try {
    for (const auto& jt : j.at("tasks")) {
      TaskSpec t;
      t.id = jt.at("id").get<std::size_t>();
      t.instruction = jt.at("instruction").get<std::string>();
      for (const auto& jp : jt.at("phases")) {
        Phase p;
        p.tmpl = parse_language(jp.at("template").get<std::string>(), binning);
        p.duration = jp.at("duration").get<std::size_t>();
        p.sigma = jp.at("sigma").get<std::array<double, 7>>();
        t.phases.push_back(p);
      }
      t.obs_projection = jt.at("obs_projection").get<std::uint64_t>();
      t.render_seed = jt.at("render_seed").get<std::uint64_t>();
      t.obs_dim = jt.at("obs_dim").get<std::size_t>();
      t.task_scale = jt.at("task_scale").get<double>();
      t.obs_noise = jt.at("obs_noise").get<double>();
      t.transfer = jt.at("transfer").get<bool>();
      suite.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("suite_from_json: ") + e.what());
  }
  return suite;
}

Observation make_observation(const Episode& ep, const Step& step) {
  Observation obs;
  obs.features = step.features;
  obs.instruction_id = ep.task_id;
  std::istringstream words(ep.instruction);
  for (std::string w; words >> w;) obs.instruction_tokens.push_back(w);
  return obs;
}

}  // namespace lada
