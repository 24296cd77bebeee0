#include "ddqn/trading_env.hpp"

#include <string>

#include "ddqn/errors.hpp"

namespace ddqn {

void EnvConfig::validate() const {
  if (window_n < 1) throw ConfigInvalid("env.window_n", "must be >= 1");
  if (episode_len < 1) throw ConfigInvalid("env.episode_len", "must be >= 1");
  if (!(commission_rate >= 0.0 && commission_rate < 1.0))
    throw ConfigInvalid("env.commission_rate", "must lie in [0, 1)");
  if (!(reward_scale > 0.0)) throw ConfigInvalid("env.reward_scale", "must be positive");
}

Observation observe(const EnvState& state, const PriceSeries& series, const EnvConfig& config) {
  Observation obs;
  const auto n = static_cast<std::size_t>(config.window_n);
  obs.bars_window.assign(series.rel.begin() + static_cast<std::ptrdiff_t>(state.cursor + 1 - n),
                         series.rel.begin() + static_cast<std::ptrdiff_t>(state.cursor + 1));
  obs.has_position = state.has_position;
  if (state.has_position) {
    const double entry = *state.entry_price;
    obs.unrealized_pnl = (series.bars[state.cursor].close - entry) / entry;
  }
  return obs;
}

std::pair<EnvState, Observation> reset(const PriceSeries& series, const EnvConfig& config,
                                       Rng& rng) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.window_n);
  const auto len = static_cast<std::size_t>(config.episode_len);
  if (series.size() < n + len) {
    throw SeriesTooShort("series of " + std::to_string(series.size()) +
                         " bars cannot hold a window of " + std::to_string(n) +
                         " plus an episode of " + std::to_string(len) + " steps");
  }
  EnvState state;
  state.cursor = n - 1;
  if (config.random_start) {
    // Leaves room for episode_len steps: the last cursor must stay in range.
    const std::size_t slack = series.size() - n - len;
    state.cursor += uniform_index(rng, slack + 1);
  }
  return {state, observe(state, series, config)};
}

std::pair<EnvState, StepResult> step(const EnvState& state, Action action,
                                     const PriceSeries& series, const EnvConfig& config) {
  if (state.episode_done) throw SteppedAfterDone("step() called on a finished episode");

  const double c_now = series.bars[state.cursor].close;
  const double c_next = series.bars[state.cursor + 1].close;
  const double change = (c_next - c_now) / c_now;
  const double commission = config.reward_scale * config.commission_rate;

  EnvState next = state;
  StepResult result;
  result.info.raw_price_change = change;
  double reward = 0.0;

  if (!state.has_position) {
    if (action == Action::Buy) {
      next.has_position = true;
      next.entry_price = c_now;
      reward = config.reward_scale * change - commission;
      result.info.trade_opened = true;
      result.info.commission_paid += commission;
    }
  } else if (action == Action::Close) {
    next.has_position = false;
    next.entry_price.reset();
    reward = -commission;
    result.info.trade_closed = true;
    result.info.commission_paid += commission;
  } else {
    reward = config.reward_scale * change;
  }

  next.cursor = state.cursor + 1;
  next.steps_taken = state.steps_taken + 1;
  if (next.steps_taken >= config.episode_len || next.cursor + 1 >= series.size()) {
    next.episode_done = true;
    if (next.has_position) {
      next.has_position = false;
      next.entry_price.reset();
      reward -= commission;
      result.info.trade_closed = true;
      result.info.commission_paid += commission;
    }
  }

  result.reward = reward;
  result.done = next.episode_done;
  result.observation = observe(next, series, config);
  return {next, std::move(result)};
}

Eigen::VectorXd observation_flat(const Observation& obs, const EnvConfig& config) {
  const int n = config.window_n;
  const int ch = config.channels();
  Eigen::VectorXd out(ch * n + 2);
  for (int i = 0; i < n; ++i) {
    const auto& b = obs.bars_window[static_cast<std::size_t>(i)];
    out[i] = b.rel_high;
    out[n + i] = b.rel_low;
    out[2 * n + i] = b.rel_close;
    if (config.include_volume) out[3 * n + i] = b.norm_volume;
  }
  out[ch * n] = obs.has_position ? 1.0 : 0.0;
  out[ch * n + 1] = obs.unrealized_pnl;
  return out;
}

Eigen::MatrixXd observation_channels(const Observation& obs, const EnvConfig& config) {
  const int n = config.window_n;
  Eigen::MatrixXd m(config.channels(), n);
  for (int i = 0; i < n; ++i) {
    const auto& b = obs.bars_window[static_cast<std::size_t>(i)];
    m(0, i) = b.rel_high;
    m(1, i) = b.rel_low;
    m(2, i) = b.rel_close;
    if (config.include_volume) m(3, i) = b.norm_volume;
  }
  return m;
}

}  // namespace ddqn
