#pragma once

#include <ostream>

namespace ddqn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Entry point of the ddqn_trader tool: 0 on success, 1 on validation failure
// (bad data, bad config, failed gradient check), 2 on any other runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ddqn::cli
