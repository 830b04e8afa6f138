#pragma once

#include <filesystem>

#include "safelink/rvfl.hpp"

namespace safelink {

// Binary model archive. Round trips are bit-exact: save(load(f)) writes a
// byte-identical file.

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace safelink
