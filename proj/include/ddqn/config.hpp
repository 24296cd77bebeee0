#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ddqn/agent.hpp"
#include "ddqn/harness.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/trading_env.hpp"

namespace ddqn {

inline constexpr int kConfigFormatVersion = 1;

struct DataConfig {
  std::string path;
  BarFormat format;
  std::optional<std::int64_t> split_boundary;  // epoch seconds; unset: split_fraction of rows
  double split_fraction = 0.8;

  bool operator==(const DataConfig& o) const {
    return path == o.path && format.timestamp == o.format.timestamp && format.open == o.format.open &&
           format.high == o.format.high && format.low == o.format.low &&
           format.close == o.format.close && format.volume == o.format.volume &&
           split_boundary == o.split_boundary && split_fraction == o.split_fraction;
  }
};

// Mirrors the config JSON document one to one.
struct RunConfig {
  DataConfig data;
  EnvConfig env;
  AgentConfig agent;
  NetConfig net;
  RunSettings run;
  SweepGrid sweep;
  int jobs = 1;

  // Throws ConfigInvalid with the dotted path of the first bad field.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json config_to_json(const RunConfig& cfg);
// Missing fields take their defaults. Throws ConfigInvalid.
RunConfig config_from_json(const nlohmann::json& j);
// Relative data.path is resolved against the config file's directory and must
// exist. Throws ConfigInvalid.
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

struct Dataset {
  PriceSeries train;
  PriceSeries test;
  double volume_scale = 1.0;  // mean volume of the training partition
};

// Loads data.path, splits it, and encodes both parts with the training
// partition's volume scale.
Dataset load_dataset(const DataConfig& data);
Dataset make_dataset(std::vector<Bar> bars, const DataConfig& data, std::string source_id);

}  // namespace ddqn
