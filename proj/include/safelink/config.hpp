#pragma once

#include <filesystem>

#include "safelink/sim.hpp"

namespace safelink {

/// Loads a full simulation configuration from one keyed text file holding
/// the scenario sections plus [rvfl], [cost], [filter], [mpc], [sim].
/// Missing keys fall back to the built-in defaults; unknown keys or sections
/// are errors naming the offending line.
SimConfig load_config(const std::filesystem::path& path);

}  // namespace safelink
