#include "ddqn/replay_buffer.hpp"

#include <string>

#include "ddqn/errors.hpp"

namespace ddqn {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigInvalid("agent.replay_capacity", "must be >= 1");
  storage_.reserve(capacity < 4096 ? capacity : 4096);
}

void ReplayBuffer::push(Transition t) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[write_index_] = std::move(t);
  }
  write_index_ = (write_index_ + 1) % capacity_;
  if (count_ < capacity_) ++count_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (count_ == 0)
    throw InsufficientData("cannot sample " + std::to_string(batch_size) +
                           " transitions from an empty buffer");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = uniform_index(rng, count_);
  return idx;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (auto i : sample_indices(batch_size, rng)) out.push_back(storage_[i]);
  return out;
}

std::vector<Transition> ReplayBuffer::contents() const {
  std::vector<Transition> out;
  out.reserve(count_);
  const std::size_t start = count_ < capacity_ ? 0 : write_index_;
  for (std::size_t k = 0; k < count_; ++k) out.push_back(storage_[(start + k) % capacity_]);
  return out;
}

}  // namespace ddqn
