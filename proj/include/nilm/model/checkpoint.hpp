#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "DDNN" | u16 version | u32 entry count | entries | u32 parameter count | parameters
//   entry     = u32 key length, key bytes, u32 value length, value text
//   parameter = u32 name length, name bytes, u32 rank, rank x u32 extents,
//               extents-product x f64 values
//
// Config and metadata travel as text key/value entries; reals are written in
// shortest round-trip form so loading reproduces them exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nilm/model/dual_dnn.hpp"

namespace nilm {

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string serialize_model(const DualDnnModel& model);
DualDnnModel deserialize_model(std::string_view bytes);

void save_checkpoint(const DualDnnModel& model, const std::filesystem::path& path);
DualDnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nilm
