#pragma once

#include <filesystem>

#include "resflow/network.hpp"

namespace resflow {

// Versioned binary parameter checkpoint. Layout:
//   magic "RFNW", format version u32, seed u64, group count u32, then per
//   group: name (u32 length + bytes), rows u64, cols u64, row-major f64
//   values. All integers and doubles little-endian. Round trips byte-exact.

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace resflow
