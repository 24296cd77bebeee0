#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ddqn/config.hpp"
#include "ddqn/errors.hpp"

using namespace ddqn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string field_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigInvalid& e) {
    return e.field_path;
  }
  return "";
}

RunConfig nondefault() {
  RunConfig c;
  c.data.path = "bars.csv";
  c.data.format.timestamp = "time";
  c.data.split_boundary = 1'514'900'000;
  c.env.window_n = 12;
  c.env.commission_rate = 0.0025;
  c.env.episode_len = 777;
  c.env.random_start = false;
  c.env.include_volume = true;
  c.env.reward_scale = 10.0;
  c.agent.gamma = 0.95;
  c.agent.batch_size = 128;
  c.agent.sync_every = 500;
  c.agent.replay_start = 2000;
  c.agent.replay_capacity = 50'000;
  c.agent.schedule = {0.9, 0.05, 12345};
  c.agent.optimizer = {nn::OptimizerKind::sgd, 3e-4, 0.8, 0.99, 1e-7};
  c.agent.loss = LossKind::huber;
  c.net.arch = nn::ArchTag::cnn;
  c.net.ffdqn_hidden = {64};
  c.net.cnn_conv = {{16, 3, 2}};
  c.net.cnn_hidden = {32, 16};
  c.run = {1000, 42, 100, 200, 500, 10, 7, "out"};
  c.sweep.archs = {nn::ArchTag::cnn};
  c.sweep.batch_sizes = {32, 64, 128};
  c.sweep.scenarios = {Scenario::with_commission};
  c.jobs = 3;
  return c;
}

}  // namespace

TEST_CASE("defaults survive an empty document") {
  CHECK(config_from_json(json::object()) == RunConfig{});
}

TEST_CASE("round trip through JSON is field-identical") {
  const RunConfig c = nondefault();
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_from_json(json::parse(config_to_json(c).dump())) == c);
  CHECK(config_to_json(c)["format_version"] == kConfigFormatVersion);
}

TEST_CASE("round trip through a file") {
  const fs::path dir = fs::temp_directory_path() / "ddqn_config_rt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  { std::ofstream(dir / "bars.csv") << "timestamp,open,high,low,close,volume\n"; }
  RunConfig c = nondefault();
  save_config(c, (dir / "cfg.json").string());
  const RunConfig loaded = load_config((dir / "cfg.json").string());
  CHECK(fs::equivalent(loaded.data.path, dir / "bars.csv"));
  // Saving the loaded config and loading it again changes nothing further.
  save_config(loaded, (dir / "cfg2.json").string());
  CHECK(load_config((dir / "cfg2.json").string()) == loaded);
  c.data.path = loaded.data.path;
  CHECK(loaded == c);
  fs::remove_all(dir);
}

TEST_CASE("a missing data file is reported on data.path") {
  const fs::path dir = fs::temp_directory_path() / "ddqn_config_missing";
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunConfig c;
  c.data.path = "nowhere.csv";
  save_config(c, (dir / "cfg.json").string());
  try {
    load_config((dir / "cfg.json").string());
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(e.field_path == "data.path");
  }
  CHECK_THROWS_AS(load_config((dir / "absent.json").string()), ConfigInvalid);
  { std::ofstream(dir / "broken.json") << "{ \"env\": "; }
  CHECK_THROWS_AS(load_config((dir / "broken.json").string()), ConfigInvalid);
  fs::remove_all(dir);
}

TEST_CASE("errors name the offending field") {
  CHECK(field_of({{"env", {{"window_n", "ten"}}}}) == "env.window_n");
  CHECK(field_of({{"env", {{"window_n", 0}}}}).rfind("env.", 0) == 0);
  CHECK(field_of({{"env", {{"commission_rate", 1.0}}}}).rfind("env.", 0) == 0);
  CHECK(field_of({{"agent", {{"gamma", 2.0}}}}) == "agent.gamma");
  CHECK(field_of({{"agent", {{"epsilon", {{"decay_steps", 0}}}}}}) == "agent.epsilon.decay_steps");
  CHECK(field_of({{"agent", {{"loss", "l1"}}}}) == "agent.loss");
  CHECK(field_of({{"agent", {{"optimizer", {{"lr", -1.0}}}}}}) == "agent.optimizer.lr");
  CHECK(field_of({{"run", {{"log_every", 0}}}}) == "run.log_every");
  CHECK(field_of({{"sweep", {{"batch_sizes", json::array()}}}}) == "sweep.batch_sizes");
  CHECK(field_of({{"data", {{"split_boundary", "yesterday"}}}}) == "data.split_boundary");
  CHECK(field_of({{"data", {{"split_fraction", 1.5}}}}) == "data.split_fraction");
  CHECK(field_of({{"jobs", 0}}) == "jobs");
  CHECK(field_of({{"format_version", 99}}) == "format_version");
  CHECK(field_of({{"env", 3}}) == "env");
  CHECK(field_of({{"net", {{"cnn_conv", {{{"out_channels", 4}, {"kernel", 50}}}}}}}) == "net.cnn_conv");
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigInvalid);
}

TEST_CASE("split boundary accepts ISO-8601 text") {
  const auto c = config_from_json({{"data", {{"split_boundary", "2018-01-02T10:10:00Z"}}}});
  REQUIRE(c.data.split_boundary.has_value());
  CHECK(*c.data.split_boundary == 1'514'887'800);
}

TEST_CASE("dataset split uses the training partition's volume scale") {
  std::vector<Bar> bars;
  for (int i = 0; i < 10; ++i)
    bars.push_back({1000 + 60 * i, 10.0, 11.0, 9.0, 10.0, i < 8 ? 2.0 : 20.0});
  DataConfig data;
  const Dataset ds = make_dataset(bars, data, "t");
  CHECK(ds.train.size() == 8);
  CHECK(ds.test.size() == 2);
  CHECK(ds.volume_scale == 2.0);
  CHECK(ds.test.rel[0].norm_volume == 10.0);

  data.split_boundary = 1000 + 60 * 7;
  const Dataset ds2 = make_dataset(bars, data, "t");
  CHECK(ds2.train.size() == 7);
  CHECK(ds2.test.size() == 3);
  CHECK_THROWS_AS(make_dataset({}, data, "t"), EmptySeries);
}
