#include "ddqn/config.hpp"

#include <filesystem>
#include <fstream>

#include "ddqn/errors.hpp"

namespace ddqn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads j[key] into `out` when present, reporting type errors by field path.
template <typename T>
void read(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigInvalid(path + "." + key, "wrong type");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigInvalid(key, "must be an object");
  return j.at(key);
}

std::string loss_name(LossKind k) { return k == LossKind::mse ? "mse" : "huber"; }

LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "huber") return LossKind::huber;
  throw ConfigInvalid("agent.loss", "expected mse or huber, got '" + s + "'");
}

json conv_to_json(const std::vector<nn::ConvSpec>& conv) {
  json a = json::array();
  for (const auto& c : conv)
    a.push_back({{"out_channels", c.out_channels}, {"kernel", c.kernel}, {"stride", c.stride}});
  return a;
}

std::vector<nn::ConvSpec> conv_from_json(const json& a) {
  std::vector<nn::ConvSpec> conv;
  if (!a.is_array()) throw ConfigInvalid("net.cnn_conv", "must be an array");
  for (const auto& c : a) {
    nn::ConvSpec s;
    read(c, "out_channels", "net.cnn_conv", s.out_channels);
    read(c, "kernel", "net.cnn_conv", s.kernel);
    read(c, "stride", "net.cnn_conv", s.stride);
    conv.push_back(s);
  }
  return conv;
}

}  // namespace

void RunConfig::validate() const {
  if (!(data.split_fraction > 0.0 && data.split_fraction < 1.0))
    throw ConfigInvalid("data.split_fraction", "must lie in (0, 1)");
  env.validate();
  agent.validate();
  net.spec_for(nn::ArchTag::ffdqn, env).validate();
  try {
    net.spec_for(nn::ArchTag::cnn, env).validate();
  } catch (const KernelTooLarge& e) {
    throw ConfigInvalid("net.cnn_conv", e.what());
  }
  if (run.total_steps < 0) throw ConfigInvalid("run.total_steps", "must be >= 0");
  if (run.log_every < 1) throw ConfigInvalid("run.log_every", "must be >= 1");
  if (run.checkpoint_every < 0) throw ConfigInvalid("run.checkpoint_every", "must be >= 0");
  if (run.eval_every < 0) throw ConfigInvalid("run.eval_every", "must be >= 0");
  if (run.eval_slice < 0) throw ConfigInvalid("run.eval_slice", "must be >= 0");
  if (run.baseline_episodes < 1) throw ConfigInvalid("run.baseline_episodes", "must be >= 1");
  if (sweep.archs.empty()) throw ConfigInvalid("sweep.archs", "must be non-empty");
  if (sweep.batch_sizes.empty()) throw ConfigInvalid("sweep.batch_sizes", "must be non-empty");
  for (int b : sweep.batch_sizes)
    if (b < 1) throw ConfigInvalid("sweep.batch_sizes", "entries must be >= 1");
  if (sweep.scenarios.empty()) throw ConfigInvalid("sweep.scenarios", "must be non-empty");
  if (jobs < 1) throw ConfigInvalid("jobs", "must be >= 1");
}

json config_to_json(const RunConfig& c) {
  json data{{"path", c.data.path},
            {"format",
             {{"timestamp", c.data.format.timestamp},
              {"open", c.data.format.open},
              {"high", c.data.format.high},
              {"low", c.data.format.low},
              {"close", c.data.format.close},
              {"volume", c.data.format.volume}}},
            {"split_boundary", c.data.split_boundary ? json(*c.data.split_boundary) : json(nullptr)},
            {"split_fraction", c.data.split_fraction}};
  json env{{"window_n", c.env.window_n},
           {"commission_rate", c.env.commission_rate},
           {"episode_len", c.env.episode_len},
           {"random_start", c.env.random_start},
           {"include_volume", c.env.include_volume},
           {"reward_scale", c.env.reward_scale}};
  json agent{{"gamma", c.agent.gamma},
             {"batch_size", c.agent.batch_size},
             {"sync_every", c.agent.sync_every},
             {"replay_start", c.agent.replay_start},
             {"replay_capacity", c.agent.replay_capacity},
             {"loss", loss_name(c.agent.loss)},
             {"epsilon",
              {{"start", c.agent.schedule.eps_start},
               {"final", c.agent.schedule.eps_final},
               {"decay_steps", c.agent.schedule.decay_steps}}},
             {"optimizer",
              {{"kind", nn::to_string(c.agent.optimizer.kind)},
               {"lr", c.agent.optimizer.lr},
               {"beta1", c.agent.optimizer.beta1},
               {"beta2", c.agent.optimizer.beta2},
               {"eps", c.agent.optimizer.eps}}}};
  json net{{"arch", nn::to_string(c.net.arch)},
           {"ffdqn_hidden", c.net.ffdqn_hidden},
           {"cnn_conv", conv_to_json(c.net.cnn_conv)},
           {"cnn_hidden", c.net.cnn_hidden}};
  json run{{"total_steps", c.run.total_steps},
           {"seed", c.run.seed},
           {"checkpoint_every", c.run.checkpoint_every},
           {"eval_every", c.run.eval_every},
           {"eval_slice", c.run.eval_slice},
           {"log_every", c.run.log_every},
           {"baseline_episodes", c.run.baseline_episodes},
           {"out_dir", c.run.out_dir}};
  json archs = json::array(), scenarios = json::array();
  for (auto a : c.sweep.archs) archs.push_back(nn::to_string(a));
  for (auto s : c.sweep.scenarios) scenarios.push_back(to_string(s));
  json sweep{{"archs", archs}, {"batch_sizes", c.sweep.batch_sizes}, {"scenarios", scenarios}};
  return {{"format_version", kConfigFormatVersion},
          {"data", data},
          {"env", env},
          {"agent", agent},
          {"net", net},
          {"run", run},
          {"sweep", sweep},
          {"jobs", c.jobs}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigInvalid("<root>", "config must be a JSON object");
  RunConfig c;
  int version = kConfigFormatVersion;
  read(j, "format_version", "", version);
  if (version != kConfigFormatVersion) throw ConfigInvalid("format_version", "unsupported version");

  const json& data = section(j, "data");
  read(data, "path", "data", c.data.path);
  const json& fmt = section(data, "format");
  read(fmt, "timestamp", "data.format", c.data.format.timestamp);
  read(fmt, "open", "data.format", c.data.format.open);
  read(fmt, "high", "data.format", c.data.format.high);
  read(fmt, "low", "data.format", c.data.format.low);
  read(fmt, "close", "data.format", c.data.format.close);
  read(fmt, "volume", "data.format", c.data.format.volume);
  if (data.contains("split_boundary") && !data.at("split_boundary").is_null()) {
    const json& b = data.at("split_boundary");
    std::int64_t t = 0;
    if (b.is_number_integer()) {
      t = b.get<std::int64_t>();
    } else if (!b.is_string() || !parse_iso8601(b.get<std::string>(), t)) {
      throw ConfigInvalid("data.split_boundary", "expected epoch seconds or ISO-8601 text");
    }
    c.data.split_boundary = t;
  }
  read(data, "split_fraction", "data", c.data.split_fraction);

  const json& env = section(j, "env");
  read(env, "window_n", "env", c.env.window_n);
  read(env, "commission_rate", "env", c.env.commission_rate);
  read(env, "episode_len", "env", c.env.episode_len);
  read(env, "random_start", "env", c.env.random_start);
  read(env, "include_volume", "env", c.env.include_volume);
  read(env, "reward_scale", "env", c.env.reward_scale);

  const json& agent = section(j, "agent");
  read(agent, "gamma", "agent", c.agent.gamma);
  read(agent, "batch_size", "agent", c.agent.batch_size);
  read(agent, "sync_every", "agent", c.agent.sync_every);
  read(agent, "replay_start", "agent", c.agent.replay_start);
  read(agent, "replay_capacity", "agent", c.agent.replay_capacity);
  std::string loss = loss_name(c.agent.loss);
  read(agent, "loss", "agent", loss);
  c.agent.loss = loss_from_string(loss);
  const json& eps = section(agent, "epsilon");
  read(eps, "start", "agent.epsilon", c.agent.schedule.eps_start);
  read(eps, "final", "agent.epsilon", c.agent.schedule.eps_final);
  read(eps, "decay_steps", "agent.epsilon", c.agent.schedule.decay_steps);
  const json& opt = section(agent, "optimizer");
  std::string kind = nn::to_string(c.agent.optimizer.kind);
  read(opt, "kind", "agent.optimizer", kind);
  c.agent.optimizer.kind = nn::optimizer_from_string(kind);
  read(opt, "lr", "agent.optimizer", c.agent.optimizer.lr);
  read(opt, "beta1", "agent.optimizer", c.agent.optimizer.beta1);
  read(opt, "beta2", "agent.optimizer", c.agent.optimizer.beta2);
  read(opt, "eps", "agent.optimizer", c.agent.optimizer.eps);

  const json& net = section(j, "net");
  std::string arch = nn::to_string(c.net.arch);
  read(net, "arch", "net", arch);
  c.net.arch = nn::arch_from_string(arch);
  read(net, "ffdqn_hidden", "net", c.net.ffdqn_hidden);
  if (net.contains("cnn_conv")) c.net.cnn_conv = conv_from_json(net.at("cnn_conv"));
  read(net, "cnn_hidden", "net", c.net.cnn_hidden);

  const json& run = section(j, "run");
  read(run, "total_steps", "run", c.run.total_steps);
  read(run, "seed", "run", c.run.seed);
  read(run, "checkpoint_every", "run", c.run.checkpoint_every);
  read(run, "eval_every", "run", c.run.eval_every);
  read(run, "eval_slice", "run", c.run.eval_slice);
  read(run, "log_every", "run", c.run.log_every);
  read(run, "baseline_episodes", "run", c.run.baseline_episodes);
  read(run, "out_dir", "run", c.run.out_dir);

  const json& sweep = section(j, "sweep");
  if (sweep.contains("archs")) {
    std::vector<std::string> names;
    read(sweep, "archs", "sweep", names);
    c.sweep.archs.clear();
    for (const auto& n : names) c.sweep.archs.push_back(nn::arch_from_string(n));
  }
  read(sweep, "batch_sizes", "sweep", c.sweep.batch_sizes);
  if (sweep.contains("scenarios")) {
    std::vector<std::string> names;
    read(sweep, "scenarios", "sweep", names);
    c.sweep.scenarios.clear();
    for (const auto& n : names) c.sweep.scenarios.push_back(scenario_from_string(n));
  }
  read(j, "jobs", "", c.jobs);

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("<file>", "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigInvalid("<file>", std::string("not valid JSON: ") + e.what());
  }
  RunConfig cfg = config_from_json(j);
  if (!cfg.data.path.empty()) {
    fs::path data(cfg.data.path);
    if (data.is_relative()) data = fs::path(path).parent_path() / data;
    if (!fs::exists(data)) throw ConfigInvalid("data.path", "'" + data.string() + "' does not exist");
    cfg.data.path = data.lexically_normal().string();
  }
  return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << config_to_json(cfg).dump(2) << '\n';
}

Dataset make_dataset(std::vector<Bar> bars, const DataConfig& data, std::string source_id) {
  if (bars.empty()) throw EmptySeries("data file holds no bars");
  std::int64_t boundary = 0;
  if (data.split_boundary) {
    boundary = *data.split_boundary;
  } else {
    auto cut = static_cast<std::size_t>(data.split_fraction * static_cast<double>(bars.size()));
    cut = std::min(cut, bars.size() - 1);
    boundary = bars[cut].timestamp;
  }
  std::vector<Bar> train_part;
  for (const auto& b : bars)
    if (b.timestamp < boundary) train_part.push_back(b);
  Dataset ds;
  ds.volume_scale = train_part.empty() ? volume_scale_of(bars) : volume_scale_of(train_part);
  const PriceSeries full = make_series(std::move(bars), ds.volume_scale, std::move(source_id));
  std::tie(ds.train, ds.test) = split_series(full, boundary);
  return ds;
}

Dataset load_dataset(const DataConfig& data) {
  if (data.path.empty()) throw ConfigInvalid("data.path", "no data file configured");
  return make_dataset(load_bars(data.path, data.format), data, fs::path(data.path).filename().string());
}

}  // namespace ddqn
