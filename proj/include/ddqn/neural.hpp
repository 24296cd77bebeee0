#pragma once

#include "ddqn/neural/checkpoint.hpp"
#include "ddqn/neural/dueling_net.hpp"
#include "ddqn/neural/gradcheck.hpp"
#include "ddqn/neural/layers.hpp"
#include "ddqn/neural/net_spec.hpp"
#include "ddqn/neural/optim.hpp"
