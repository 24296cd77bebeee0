#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddqn/agent.hpp"
#include "ddqn/market_data.hpp"
#include "ddqn/neural.hpp"
#include "ddqn/trading_env.hpp"

namespace ddqn {

inline constexpr int kMetricsFormatVersion = 1;

struct RunSettings {
  long total_steps = 0;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;  // 0: only the final checkpoint
  long eval_every = 0;        // 0: no mid-training evaluation
  long eval_slice = 2000;     // bars of the held-out series used by mid-training evals
  long log_every = 1000;      // subsampling of the per-step loss/epsilon log
  int baseline_episodes = 20;
  std::string out_dir;  // empty: keep everything in memory

  bool operator==(const RunSettings&) const = default;
};

struct EpisodeMetrics {
  long episode_index = 0;
  long global_step = 0;  // env steps completed when the episode ended
  double cumulative_reward = 0.0;  // percent units at reward_scale 100
  int trades = 0;  // legs: a round trip counts 2
  int steps = 0;
  double epsilon = 0.0;    // at the episode's last step
  double mean_loss = 0.0;  // over this episode's train steps; 0 if none ran

  bool operator==(const EpisodeMetrics&) const = default;
};

struct StepLog {
  long global_step = 0;
  double epsilon = 0.0;
  double loss = 0.0;
  bool operator==(const StepLog&) const = default;
};

// Greedy pass over the truncated held-out slice during training.
struct MidTrainEval {
  long global_step = 0;
  double return_pct = 0.0;
  int trades = 0;
  bool operator==(const MidTrainEval&) const = default;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<EpisodeMetrics> metrics;
  std::vector<StepLog> step_log;
  std::vector<MidTrainEval> mid_evals;
};

// Builds the env-compatible network shape for an architecture.
struct NetConfig {
  nn::ArchTag arch = nn::ArchTag::ffdqn;
  std::vector<int> ffdqn_hidden{128, 128};
  std::vector<nn::ConvSpec> cnn_conv{{32, 5, 1}, {32, 5, 1}};
  std::vector<int> cnn_hidden{128};

  nn::NetSpec spec_for(nn::ArchTag arch, const EnvConfig& env) const;
  nn::NetSpec spec_for(const EnvConfig& env) const { return spec_for(arch, env); }
  bool operator==(const NetConfig&) const = default;
};

// reset -> {epsilon-greedy act -> step -> push -> train_step once warm ->
// periodic hard sync} until total_steps env steps. Deterministic in
// settings.seed. Writes metrics.csv, train_log.csv, midtrain_eval.csv and
// checkpoints into settings.out_dir when it is set. Throws ConfigInvalid.
TrainResult train(const PriceSeries& series, const EnvConfig& env_cfg,
                  const AgentConfig& agent_cfg, const nn::NetSpec& net_spec,
                  const RunSettings& settings, const PriceSeries* eval_series = nullptr);

enum class Scenario { with_commission, no_commission };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct CurvePoint {
  long step = 0;
  double cumulative_reward = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct EvalReport {
  Scenario scenario = Scenario::no_commission;
  nn::ArchTag arch = nn::ArchTag::ffdqn;
  int batch_size = 0;
  double commission_rate = 0.0;
  std::vector<CurvePoint> cumulative_reward_curve;
  double final_return_pct = 0.0;
  int trades = 0;
  double baseline_random_return_pct = 0.0;
  double baseline_random_stddev_pct = 0.0;

  bool operator==(const EvalReport&) const = default;
};

struct BaselineSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single episode
  std::vector<double> returns;
};

// The environment used for held-out passes: one deterministic episode over the
// whole series with the scenario's commission.
EnvConfig evaluation_env(const EnvConfig& env_cfg, const PriceSeries& series, Scenario scenario);

// Greedy (epsilon = 0) pass. Throws CheckpointMismatch when the network's input
// layout does not fit env_cfg.
EvalReport evaluate(const nn::Checkpoint& ckpt, const PriceSeries& series,
                    const EnvConfig& env_cfg, Scenario scenario, int batch_size = 0,
                    int baseline_episodes = 20);

// Uniform-random policy under env_cfg, `episodes` episodes.
BaselineSummary random_baseline(const PriceSeries& series, const EnvConfig& env_cfg,
                                std::uint64_t seed, int episodes);

struct SweepGrid {
  std::vector<nn::ArchTag> archs{nn::ArchTag::ffdqn, nn::ArchTag::cnn};
  std::vector<int> batch_sizes{32, 128};
  std::vector<Scenario> scenarios{Scenario::no_commission, Scenario::with_commission};

  bool operator==(const SweepGrid&) const = default;
};

struct SummaryRow {
  nn::ArchTag arch = nn::ArchTag::ffdqn;
  int batch_size = 0;
  std::optional<double> return_no_commission_pct;
  std::optional<double> return_with_commission_pct;
};

struct SweepResult {
  std::vector<EvalReport> reports;  // cell order, scenarios in grid order
  std::vector<SummaryRow> summary;
  std::vector<TrainResult> runs;
};

// One training run per (arch, batch) cell, each evaluated under every grid
// scenario. Cells run on up to `jobs` threads; output is independent of jobs.
SweepResult sweep(const SweepGrid& grid, const PriceSeries& train_series,
                  const PriceSeries& eval_series, const EnvConfig& env_cfg,
                  const AgentConfig& agent_cfg, const NetConfig& net_cfg,
                  const RunSettings& settings, int jobs = 1);

// Output formats.
void write_metrics_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics);
void write_step_log_csv(std::ostream& out, const std::vector<StepLog>& log);
void write_mid_eval_csv(std::ostream& out, const std::vector<MidTrainEval>& evals);
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
nlohmann::json report_to_json(const EvalReport& report);
// Writes <stem>.json and <stem>.csv (curve).
void save_report(const EvalReport& report, const std::string& stem);

struct MetricsRow {
  long episode_index = 0;
  long global_step = 0;
  double cumulative_reward = 0.0;
  int trades = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
};
// Reads a metrics CSV as written by write_metrics_csv. Throws MalformedRow.
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

// Deterministic minute bars whose closes follow a sine of the given period and
// relative amplitude plus uniform noise. Used for learnability checks and demos.
struct SyntheticSpec {
  std::size_t bars = 50'000;
  double period = 40.0;
  double amplitude = 0.01;
  double noise = 0.0005;
  double base_price = 100.0;
  std::int64_t start_timestamp = 1514887800;  // 2018-01-02T10:10:00Z
  std::uint64_t seed = 1;
};
std::vector<Bar> make_periodic_bars(const SyntheticSpec& spec);

}  // namespace ddqn
