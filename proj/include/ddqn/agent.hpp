#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddqn/neural.hpp"
#include "ddqn/replay_buffer.hpp"
#include "ddqn/trading_env.hpp"

namespace ddqn {

using QNet = nn::DuelingNet<double>;

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_final = 0.1;
  long decay_steps = 1'000'000;

  void validate() const;
  bool operator==(const EpsilonSchedule&) const = default;
};

// Linear from eps_start to eps_final over decay_steps, then flat.
double epsilon_at(const EpsilonSchedule& schedule, long step);

enum class LossKind { mse, huber };

struct AgentConfig {
  double gamma = 0.99;
  int batch_size = 32;
  long sync_every = 1000;
  long replay_start = 10'000;
  std::size_t replay_capacity = 100'000;
  EpsilonSchedule schedule;
  nn::OptimizerConfig optimizer;
  LossKind loss = LossKind::mse;

  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

// Index of the largest entry; ties go to the lowest index.
int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Rows of observation_flat() for each observation, in the layout `spec` expects.
// Throws ShapeMismatch when the window length disagrees with the network.
Eigen::MatrixXd encode_observations(std::span<const Observation* const> obs,
                                    const nn::NetSpec& spec);
Eigen::MatrixXd encode_observation(const Observation& obs, const nn::NetSpec& spec);

Action greedy_action(const QNet& net, const Observation& obs);

// epsilon-greedy: uniform random action with probability epsilon, else the
// greedy action. Always consumes one draw from rng, plus one more when exploring.
Action select_action(const QNet& net, const Observation& obs, double epsilon, Rng& rng);

// y = r for terminal transitions, else r + gamma * Q_target(s', argmax_a Q_online(s', a)).
// Throws ArchitectureMismatch.
Eigen::VectorXd ddqn_target(std::span<const Transition> batch, double gamma, const QNet& online,
                            const QNet& target);

// Frozen regression problem for one update: Q_online(states)[actions] ~ targets.
struct TdBatch {
  Eigen::MatrixXd states;
  std::vector<int> actions;
  Eigen::VectorXd targets;
};

TdBatch make_td_batch(std::span<const Transition> batch, double gamma, const QNet& online,
                      const QNet& target);

struct LossAndGrads {
  double loss = 0.0;
  nn::LayerGrads<double> grads;
};

// Targets are constants: gradients flow only through Q_online(states).
LossAndGrads td_loss(const QNet& online, const TdBatch& batch, LossKind kind);

// Samples a batch, regresses the online net toward the DDQN targets with one
// optimizer update, and returns the pre-update loss. Throws InsufficientData
// until the buffer holds max(batch_size, replay_start) transitions.
double train_step(QNet& online, const QNet& target, const ReplayBuffer& buffer,
                  const AgentConfig& config, nn::Optimizer<double>& optimizer, Rng& rng);

}  // namespace ddqn
