#pragma once

#include <cstddef>
#include <vector>

#include "ddqn/rng.hpp"
#include "ddqn/trading_env.hpp"

namespace ddqn {

struct Transition {
  Observation state;
  Action action = Action::Hold;
  double reward = 0.0;
  Observation next_state;  // kept for terminal transitions too; the target masks it
  bool done = false;
};

// Fixed-capacity FIFO ring of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // O(1); evicts the oldest transition once full.
  void push(Transition t);

  // Draws `batch_size` stored transitions uniformly with replacement, so the
  // batch may exceed size(). Throws InsufficientData on an empty buffer.
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;
  // Same draw as sample(), as slot indices into the ring.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

  // Stored transitions oldest first.
  std::vector<Transition> contents() const;
  const Transition& at_slot(std::size_t slot) const { return storage_[slot]; }

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t write_index() const { return write_index_; }
  bool full() const { return count_ == capacity_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t count_ = 0;
  std::size_t write_index_ = 0;
};

}  // namespace ddqn
