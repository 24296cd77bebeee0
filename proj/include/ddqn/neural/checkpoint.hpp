#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ddqn/neural/dueling_net.hpp"

namespace ddqn::nn {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  DuelingNet<double> net;
  std::uint64_t rng_seed = 0;
  std::int64_t training_step = 0;
};

nlohmann::json spec_to_json(const NetSpec& spec);
// Throws ConfigInvalid with a "net." field path.
NetSpec spec_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Validates layer_specs and every parameter shape; throws CheckpointMismatch.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ddqn::nn
