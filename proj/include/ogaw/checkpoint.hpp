#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ogaw/model.hpp"
#include "ogaw/optim.hpp"

namespace ogaw {

/// File layout, all integers little-endian:
///   "OGAW" | u32 format_version | u32 header_bytes | JSON header | payload
/// The header carries the model and train configs, class names and a
/// directory of {name, kind, dtype, shape, offset, length}; offsets are
/// relative to the payload start, ascending and non-overlapping, and the
/// lengths sum to the payload size.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class PayloadType { F64, F32 };

struct CheckpointEntry {
  std::string name;
  std::string kind;   // "parameter" | "buffer"
  std::string dtype;  // "f64" | "f32"
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct LoadedCheckpoint {
  Model model;
  TrainConfig train;
  std::vector<std::string> class_names;
  std::vector<CheckpointEntry> entries;
};

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const TrainConfig& train,
                                               std::span<const std::string> class_names,
                                               PayloadType payload = PayloadType::F64);
LoadedCheckpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const TrainConfig& train, std::span<const std::string> class_names,
                     const std::string& path, PayloadType payload = PayloadType::F64);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ogaw
