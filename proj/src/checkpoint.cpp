#include "lada/checkpoint.hpp"

#include <fstream>

#include "lada/error.hpp"

namespace lada {

namespace {
constexpr int kCheckpointVersion = 1;
}

nlohmann::json to_json(const ModelDims& d) {
  return {{"obs_dim", d.obs_dim}, {"d_v", d.d_v},       {"d_l", d.d_l},
          {"hidden", d.hidden},   {"embed", d.embed}, {"n_instructions", d.n_instructions}};
}

ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  try {
    d.obs_dim = j.value("obs_dim", d.obs_dim);
    d.d_v = j.value("d_v", d.d_v);
    d.d_l = j.value("d_l", d.d_l);
    d.hidden = j.value("hidden", d.hidden);
    d.embed = j.value("embed", d.embed);
    d.n_instructions = j.value("n_instructions", d.n_instructions);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("ModelDims: ") + e.what());
  }
  d.validate();
  return d;
}

nlohmann::json checkpoint_to_json(const Model& model) {
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    const Mat& m = model.params().blocks[k];
    params[std::string(block_name(static_cast<Block>(k)))] = {
        {"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
  }
  return {{"format", "lada-checkpoint"},
          {"version", kCheckpointVersion},
          {"dims", to_json(model.dims())},
          {"binning", to_json(model.binning())},
          {"params", params}};
}

Model checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "lada-checkpoint") throw InvalidArgument("checkpoint: not a lada-checkpoint document");
  if (j.value("version", 0) != kCheckpointVersion) throw InvalidArgument("checkpoint: unsupported version");
  try {
    const ModelDims dims = dims_from_json(j.at("dims"));
    const BinningConfig binning = binning_from_json(j.at("binning"));
    ModelParams params;
    for (std::size_t k = 0; k < kNumBlocks; ++k) {
      const auto& jb = j.at("params").at(std::string(block_name(static_cast<Block>(k))));
      params.blocks[k] = Mat(jb.at("rows").get<std::size_t>(), jb.at("cols").get<std::size_t>(),
                             jb.at("data").get<std::vector<double>>());
    }
    return Model(dims, binning, std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << checkpoint_to_json(model).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

Model load_checkpoint(const std::string& path, const ModelDims& expected) {
  Model m = load_checkpoint(path);
  if (!(m.dims() == expected)) throw InvalidArgument("checkpoint " + path + ": dimensions do not match the configuration");
  return m;
}

}  // namespace lada
