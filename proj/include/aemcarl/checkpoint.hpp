#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "aemcarl/value_network.hpp"

namespace aemcarl {

// Binary checkpoint layout (all integers little-endian):
//   8 bytes  magic "AEMCKPT\0"
//   u32      format version (currently 1)
//   u64      header length, then that many bytes of UTF-8 JSON
//            {"model": <ModelConfig>, "meta": {...}}
//   u32      parameter count
//   per parameter:
//     u32 name length, name bytes
//     u32 rank, then rank x u64 dimensions
//     f64 values, row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, ValueNetwork& net,
                     const nlohmann::json& meta = nlohmann::json::object());

struct LoadedCheckpoint {
  ValueNetwork net;
  nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace aemcarl
