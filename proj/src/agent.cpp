#include "ddqn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddqn/errors.hpp"

namespace ddqn {

void EpsilonSchedule::validate() const {
  if (!(0.0 <= eps_final && eps_final <= eps_start && eps_start <= 1.0))
    throw ConfigInvalid("agent.epsilon", "need 0 <= final <= start <= 1");
  if (decay_steps < 1) throw ConfigInvalid("agent.epsilon.decay_steps", "must be >= 1");
}

double epsilon_at(const EpsilonSchedule& s, long step) {
  const double frac =
      std::min(static_cast<double>(std::max(step, 0L)) / static_cast<double>(s.decay_steps), 1.0);
  return s.eps_start + (s.eps_final - s.eps_start) * frac;
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigInvalid("agent.gamma", "must lie in [0, 1]");
  if (batch_size < 1) throw ConfigInvalid("agent.batch_size", "must be >= 1");
  if (sync_every < 1) throw ConfigInvalid("agent.sync_every", "must be >= 1");
  if (replay_start < 1) throw ConfigInvalid("agent.replay_start", "must be >= 1");
  if (replay_capacity < 1) throw ConfigInvalid("agent.replay_capacity", "must be >= 1");
  if (replay_capacity < static_cast<std::size_t>(replay_start))
    throw ConfigInvalid("agent.replay_start", "exceeds replay_capacity");
  if (!(optimizer.lr > 0.0)) throw ConfigInvalid("agent.optimizer.lr", "must be positive");
  schedule.validate();
}

int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (int a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

Eigen::MatrixXd encode_observations(std::span<const Observation* const> obs,
                                    const nn::NetSpec& spec) {
  EnvConfig layout;
  layout.window_n = spec.window_n;
  layout.include_volume = spec.input_channels == 4;
  if (spec.input_channels != layout.channels())
    throw ShapeMismatch("network expects " + std::to_string(spec.input_channels) +
                        " channels; observations provide 3 or 4");
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(obs.size()), spec.input_size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (static_cast<int>(obs[i]->bars_window.size()) != spec.window_n)
      throw ShapeMismatch("observation window " + std::to_string(obs[i]->bars_window.size()) +
                          " does not match network window " + std::to_string(spec.window_n));
    batch.row(static_cast<Eigen::Index>(i)) = observation_flat(*obs[i], layout).transpose();
  }
  return batch;
}

Eigen::MatrixXd encode_observation(const Observation& obs, const nn::NetSpec& spec) {
  const Observation* one[] = {&obs};
  return encode_observations(one, spec);
}

Action greedy_action(const QNet& net, const Observation& obs) {
  const Eigen::MatrixXd q = net.forward(encode_observation(obs, net.spec()));
  return action_from_index(argmax_lowest(q.row(0)));
}

Action select_action(const QNet& net, const Observation& obs, double epsilon, Rng& rng) {
  if (uniform_unit(rng) < epsilon)
    return action_from_index(static_cast<int>(uniform_index(rng, kNumActions)));
  return greedy_action(net, obs);
}

namespace {

void check_pair(const QNet& online, const QNet& target) {
  if (!online.same_architecture(target))
    throw ArchitectureMismatch("online and target networks differ in architecture");
}

Eigen::MatrixXd next_states(std::span<const Transition> batch, const nn::NetSpec& spec) {
  std::vector<const Observation*> obs;
  obs.reserve(batch.size());
  for (const auto& t : batch) obs.push_back(&t.next_state);
  return encode_observations(obs, spec);
}

}  // namespace

Eigen::VectorXd ddqn_target(std::span<const Transition> batch, double gamma, const QNet& online,
                            const QNet& target) {
  check_pair(online, target);
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  if (batch.empty()) return y;
  const Eigen::MatrixXd next = next_states(batch, online.spec());
  const Eigen::MatrixXd q_online = online.forward(next);
  const Eigen::MatrixXd q_target = target.forward(next);
  for (Eigen::Index b = 0; b < y.size(); ++b) {
    const auto& t = batch[static_cast<std::size_t>(b)];
    if (t.done) {
      y[b] = t.reward;
    } else {
      const int best = argmax_lowest(q_online.row(b));
      y[b] = t.reward + gamma * q_target(b, best);
    }
  }
  return y;
}

TdBatch make_td_batch(std::span<const Transition> batch, double gamma, const QNet& online,
                      const QNet& target) {
  TdBatch td;
  std::vector<const Observation*> obs;
  obs.reserve(batch.size());
  for (const auto& t : batch) {
    obs.push_back(&t.state);
    td.actions.push_back(action_index(t.action));
  }
  td.states = encode_observations(obs, online.spec());
  td.targets = ddqn_target(batch, gamma, online, target);
  return td;
}

LossAndGrads td_loss(const QNet& online, const TdBatch& batch, LossKind kind) {
  nn::ForwardCache<double> cache;
  const Eigen::MatrixXd q = online.forward(batch.states, &cache);
  const auto n = q.rows();
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(n, q.cols());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const int a = batch.actions[static_cast<std::size_t>(b)];
    const double td = q(b, a) - batch.targets[b];
    if (kind == LossKind::mse || std::abs(td) <= 1.0) {
      loss += kind == LossKind::mse ? td * td : 0.5 * td * td;
      dq(b, a) = (kind == LossKind::mse ? 2.0 * td : td) / static_cast<double>(n);
    } else {
      loss += std::abs(td) - 0.5;
      dq(b, a) = (td > 0 ? 1.0 : -1.0) / static_cast<double>(n);
    }
  }
  return {loss / static_cast<double>(n), online.backward(cache, dq)};
}

double train_step(QNet& online, const QNet& target, const ReplayBuffer& buffer,
                  const AgentConfig& config, nn::Optimizer<double>& optimizer, Rng& rng) {
  const auto needed =
      std::max(static_cast<std::size_t>(config.batch_size), static_cast<std::size_t>(config.replay_start));
  if (buffer.size() < needed)
    throw InsufficientData("train_step needs " + std::to_string(needed) + " transitions, have " +
                           std::to_string(buffer.size()));
  const auto batch = buffer.sample(static_cast<std::size_t>(config.batch_size), rng);
  const TdBatch td = make_td_batch(batch, config.gamma, online, target);
  LossAndGrads lg = td_loss(online, td, config.loss);
  optimizer.step(online, lg.grads);
  return lg.loss;
}

}  // namespace ddqn
