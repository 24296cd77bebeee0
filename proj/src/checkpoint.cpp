#include "ddqn/neural/checkpoint.hpp"

#include <fstream>

#include "ddqn/errors.hpp"
#include "ddqn/neural/optim.hpp"

namespace ddqn::nn {

using nlohmann::json;

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigInvalid("agent.optimizer.kind", "unknown optimizer '" + name + "'");
}

namespace {

json layer_to_json(const LayerSpec& l) {
  json j{{"type", l.type}, {"role", l.role}, {"activation", l.activation},
         {"in", l.in},     {"out", l.out}};
  if (l.type == "conv1d") {
    j["kernel"] = l.kernel;
    j["stride"] = l.stride;
    j["input_length"] = l.input_length;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.type = j.at("type").get<std::string>();
  l.role = j.at("role").get<std::string>();
  l.activation = j.at("activation").get<std::string>();
  l.in = j.at("in").get<int>();
  l.out = j.at("out").get<int>();
  if (l.type == "conv1d") {
    l.kernel = j.at("kernel").get<int>();
    l.stride = j.at("stride").get<int>();
    l.input_length = j.at("input_length").get<int>();
  }
  return l;
}

// Dense weights as [out][in]; conv kernels as [out][in_channel][tap].
json weight_to_json(const LayerSpec& l, const Matrix<double>& w) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    json row = json::array();
    if (l.type == "conv1d") {
      for (int c = 0; c < l.in; ++c) {
        json taps = json::array();
        for (int k = 0; k < l.kernel; ++k) taps.push_back(w(r, c * l.kernel + k));
        row.push_back(std::move(taps));
      }
    } else {
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void mismatch(std::size_t layer, const std::string& what) {
  throw CheckpointMismatch("checkpoint layer " + std::to_string(layer) + ": " + what);
}

Matrix<double> weight_from_json(const LayerSpec& l, std::size_t li, const json& j) {
  Matrix<double> w(l.weight_rows(), l.weight_cols());
  if (!j.is_array() || static_cast<int>(j.size()) != l.out) mismatch(li, "weight row count");
  for (int r = 0; r < l.out; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != l.in) mismatch(li, "weight column count");
    for (int c = 0; c < l.in; ++c) {
      const json& cell = row[static_cast<std::size_t>(c)];
      if (l.type == "conv1d") {
        if (!cell.is_array() || static_cast<int>(cell.size()) != l.kernel)
          mismatch(li, "kernel width");
        for (int k = 0; k < l.kernel; ++k)
          w(r, c * l.kernel + k) = cell[static_cast<std::size_t>(k)].get<double>();
      } else {
        if (!cell.is_number()) mismatch(li, "non-numeric weight");
        w(r, c) = cell.get<double>();
      }
    }
  }
  return w;
}

}  // namespace

json spec_to_json(const NetSpec& spec) {
  json conv = json::array();
  for (const auto& c : spec.conv)
    conv.push_back({{"out_channels", c.out_channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  return {{"arch", to_string(spec.arch)},
          {"input_channels", spec.input_channels},
          {"window_n", spec.window_n},
          {"conv", conv},
          {"hidden", spec.hidden}};
}

NetSpec spec_from_json(const json& j) {
  NetSpec s;
  try {
    s.arch = arch_from_string(j.value("arch", std::string("ffdqn")));
    s.input_channels = j.value("input_channels", s.input_channels);
    s.window_n = j.value("window_n", s.window_n);
    if (s.arch == ArchTag::cnn) s = NetSpec::cnn(s.input_channels, s.window_n);
    if (j.contains("conv")) {
      s.conv.clear();
      for (const auto& c : j.at("conv"))
        s.conv.push_back({c.value("out_channels", 32), c.value("kernel", 5), c.value("stride", 1)});
    }
    if (j.contains("hidden")) s.hidden = j.at("hidden").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigInvalid("net", e.what());
  }
  s.validate();
  return s;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& layers = ckpt.net.layers();
  const auto& params = ckpt.net.params();
  json specs = json::array();
  json tensors = json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    specs.push_back(layer_to_json(layers[i]));
    json bias = json::array();
    for (Eigen::Index r = 0; r < params[2 * i + 1].rows(); ++r) bias.push_back(params[2 * i + 1](r, 0));
    tensors.push_back({{"weight", weight_to_json(layers[i], params[2 * i])}, {"bias", bias}});
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"arch_tag", to_string(ckpt.net.spec().arch)},
          {"net_spec", spec_to_json(ckpt.net.spec())},
          {"layer_specs", specs},
          {"parameters", tensors},
          {"rng_seed", ckpt.rng_seed},
          {"training_step", ckpt.training_step}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw CheckpointMismatch("unsupported checkpoint format_version");
    NetSpec spec;
    try {
      spec = spec_from_json(j.at("net_spec"));
    } catch (const Error& e) {
      throw CheckpointMismatch(std::string("bad net_spec: ") + e.what());
    }
    if (j.at("arch_tag").get<std::string>() != to_string(spec.arch))
      throw CheckpointMismatch("arch_tag disagrees with net_spec");

    Checkpoint ckpt{DuelingNet<double>(spec), j.at("rng_seed").get<std::uint64_t>(),
                    j.at("training_step").get<std::int64_t>()};
    const auto& layers = ckpt.net.layers();
    const json& file_layers = j.at("layer_specs");
    const json& tensors = j.at("parameters");
    if (file_layers.size() != layers.size() || tensors.size() != layers.size())
      throw CheckpointMismatch("layer count disagrees with net_spec");

    Params<double> params;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!(layer_from_json(file_layers[i]) == layers[i]))
        mismatch(i, "layer spec disagrees with net_spec");
      params.push_back(weight_from_json(layers[i], i, tensors[i].at("weight")));
      const json& bias = tensors[i].at("bias");
      if (!bias.is_array() || static_cast<int>(bias.size()) != layers[i].out)
        mismatch(i, "bias length");
      Matrix<double> b(layers[i].out, 1);
      for (int r = 0; r < layers[i].out; ++r) b(r, 0) = bias[static_cast<std::size_t>(r)].get<double>();
      params.push_back(std::move(b));
    }
    ckpt.net.set_params(std::move(params));
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointMismatch(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointMismatch(std::string("unparsable checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace ddqn::nn
