#pragma once

// Synthetic multi-task manipulation data. A task is an ordered list of phases,
// each pinned to one primitive template; an episode walks the phases and emits
// (observation features, continuous action) per step.
//
// Observation features are the sum of three parts:
//   - a suite-wide rendering of the phase's primitive classes (shared by every
//     task, so what a primitive "looks like" transfers across tasks),
//   - a task-specific linear map of (one-hot phase position, step-in-phase),
//   - isotropic Gaussian noise.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lada/action_space.hpp"
#include "lada/model.hpp"

namespace lada {

struct Phase {
  PrimitiveTriple tmpl;
  std::size_t duration = 8;
  std::array<double, 7> sigma{};  // per-dimension action noise
};

struct TaskSpec {
  std::size_t id = 0;
  std::string instruction;
  std::vector<Phase> phases;
  std::uint64_t obs_projection = 0;  // seed of the task-specific observation map
  std::uint64_t render_seed = 0;     // seed of the suite-wide primitive rendering
  std::size_t obs_dim = 32;
  double task_scale = 1.0;  // std of the task-specific map entries
  double obs_noise = 0.05;  // std of the additive observation noise
  bool transfer = false;    // held out of pretraining; built only from shared primitives
};

struct SuiteOptions {
  std::size_t phases_per_task = 6;
  std::size_t pool_size = 8;  // common primitive pool
  std::size_t duration = 8;
  double sigma_t = 0.002;  // meters
  double sigma_r = 1.0;    // degrees
  std::size_t obs_dim = 32;
  double task_scale = 1.0;
  double obs_noise = 0.05;
  std::size_t n_transfer = 1;
  BinningConfig binning;
};

// n_tasks pretraining tasks followed by n_transfer transfer tasks. A fraction
// `sharing` of each pretraining task's phases come from the common pool; the rest
// are unique to the task. Transfer tasks use only pool templates that some
// pretraining task also uses.
std::vector<TaskSpec> build_suite(std::uint64_t seed, std::size_t n_tasks, double sharing,
                                  const SuiteOptions& opts = {});

struct Step {
  std::vector<double> features;
  Action7 action;
  friend bool operator==(const Step&, const Step&) = default;
};

struct Episode {
  std::size_t task_id = 0;
  std::string instruction;
  std::vector<Step> steps;

  friend bool operator==(const Episode&, const Episode&) = default;
};

Episode generate_episode(const TaskSpec& task, std::uint64_t seed, const BinningConfig& binning = {});

struct Dataset {
  std::vector<std::size_t> transfer_tasks;
  std::vector<Episode> episodes;

  std::size_t step_count() const;
  bool is_transfer(std::size_t task_id) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// episodes_per_task episodes for every task, in task order.
Dataset generate_dataset(const std::vector<TaskSpec>& suite, std::size_t episodes_per_task, std::uint64_t seed,
                         const BinningConfig& binning = {});

// JSON-Lines: a header line, then one line per step with task_id, instruction,
// obs, action, primitive_text (and the episode ordinal).
void write_dataset(std::ostream& out, const Dataset& data, const BinningConfig& binning = {});
void write_dataset(const std::string& path, const Dataset& data, const BinningConfig& binning = {});
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

nlohmann::json suite_to_json(const std::vector<TaskSpec>& suite, const BinningConfig& binning = {});
std::vector<TaskSpec> suite_from_json(const nlohmann::json& j, const BinningConfig& binning = {});

Observation make_observation(const Episode& ep, const Step& step);

}  // namespace lada
