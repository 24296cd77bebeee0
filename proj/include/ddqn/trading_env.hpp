#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ddqn/market_data.hpp"
#include "ddqn/rng.hpp"

namespace ddqn {

enum class Action : int { Hold = 0, Buy = 1, Close = 2 };
inline constexpr int kNumActions = 3;

inline Action action_from_index(int i) { return static_cast<Action>(i); }
inline int action_index(Action a) { return static_cast<int>(a); }

struct EnvConfig {
  int window_n = 10;
  double commission_rate = 0.01;  // per trade leg
  int episode_len = 1000;
  bool random_start = true;
  bool include_volume = false;
  double reward_scale = 100.0;  // 100 → rewards in percent

  int channels() const { return include_volume ? 4 : 3; }
  // Length of observation_flat().
  int observation_size() const { return channels() * window_n + 2; }
  // Throws ConfigInvalid on the first bad field.
  void validate() const;

  bool operator==(const EnvConfig&) const = default;
};

struct EnvState {
  std::size_t cursor = 0;
  int steps_taken = 0;
  bool has_position = false;
  std::optional<double> entry_price;
  bool episode_done = false;
};

struct Observation {
  std::vector<RelativeBar> bars_window;  // oldest first
  bool has_position = false;
  double unrealized_pnl = 0.0;

  bool operator==(const Observation&) const = default;
};

struct StepInfo {
  bool trade_opened = false;
  bool trade_closed = false;
  double commission_paid = 0.0;  // in reward units
  double raw_price_change = 0.0;  // (c_{t+1} - c_t) / c_t
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

Observation observe(const EnvState& state, const PriceSeries& series, const EnvConfig& config);

// Throws SeriesTooShort when the series cannot hold window_n bars plus a full
// episode.
std::pair<EnvState, Observation> reset(const PriceSeries& series, const EnvConfig& config,
                                       Rng& rng);

// Throws SteppedAfterDone.
std::pair<EnvState, StepResult> step(const EnvState& state, Action action,
                                     const PriceSeries& series, const EnvConfig& config);

// [rel_high x N, rel_low x N, rel_close x N, (norm_volume x N), has_position,
//  unrealized_pnl]
Eigen::VectorXd observation_flat(const Observation& obs, const EnvConfig& config);

// channels x N rows {rel_high, rel_low, rel_close, (norm_volume)}. The
// position flag and unrealized P&L are not part of the matrix; the CNN trunk
// appends them after its convolutions.
Eigen::MatrixXd observation_channels(const Observation& obs, const EnvConfig& config);

// Convenience wrapper owning the series reference and the current state.
class TradingEnv {
 public:
  TradingEnv(const PriceSeries& series, EnvConfig config)
      : series_(&series), config_(std::move(config)) {
    config_.validate();
  }

  const Observation& reset(Rng& rng) {
    auto [s, o] = ddqn::reset(*series_, config_, rng);
    state_ = s;
    obs_ = std::move(o);
    return obs_;
  }

  const StepResult& step(Action a) {
    auto [s, r] = ddqn::step(state_, a, *series_, config_);
    state_ = s;
    last_ = std::move(r);
    obs_ = last_.observation;
    return last_;
  }

  const EnvState& state() const { return state_; }
  const Observation& observation() const { return obs_; }
  const EnvConfig& config() const { return config_; }
  const PriceSeries& series() const { return *series_; }

 private:
  const PriceSeries* series_;
  EnvConfig config_;
  EnvState state_;
  Observation obs_;
  StepResult last_;
};

}  // namespace ddqn
