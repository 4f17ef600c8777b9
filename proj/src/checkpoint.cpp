#include "ogaw/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ogaw/config.hpp"
#include "ogaw/error.hpp"

namespace ogaw {

namespace {

constexpr char kMagic[4] = {'O', 'G', 'A', 'W'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

struct NamedTensor {
  std::string name;
  const char* kind;
  Tensor tensor;
};

std::vector<NamedTensor> collect(const Model& model) {
  std::vector<NamedTensor> all;
  for (const auto& p : model.store().parameters()) all.push_back({p.name, "parameter", p.tensor});
  for (const auto& [name, t] : model.store().buffers()) all.push_back({name, "buffer", t});
  return all;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const TrainConfig& train,
                                               std::span<const std::string> class_names, PayloadType payload) {
  const bool f32 = payload == PayloadType::F32;
  const std::size_t elem = f32 ? 4 : 8;
  Json header;
  header["model"] = to_json(model.config());
  header["train"] = to_json(train);
  header["class_names"] = std::vector<std::string>(class_names.begin(), class_names.end());
  Json directory = Json::array();
  std::vector<std::uint8_t> body;
  for (const auto& nt : collect(model)) {
    Json e;
    e["name"] = nt.name;
    e["kind"] = nt.kind;
    e["dtype"] = f32 ? "f32" : "f64";
    e["shape"] = nt.tensor.shape();
    e["offset"] = body.size();
    e["length"] = nt.tensor.numel() * elem;
    directory.push_back(std::move(e));
    for (double v : nt.tensor.data()) {
      if (f32) {
        put_le(body, static_cast<float>(v));
      } else {
        put_le(body, v);
      }
    }
  }
  header["entries"] = std::move(directory);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

LoadedCheckpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "file shorter than the fixed preamble");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw CheckpointError(Kind::BadMagic, "expected 'OGAW'");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::VersionMismatch,
                          "file version " + std::to_string(version) + ", reader expects " +
                              std::to_string(kCheckpointVersion));
  }
  const auto header_bytes = get_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_bytes)) {
    throw CheckpointError(Kind::Truncated, "header extends past end of file");
  }
  Json header;
  try {
    header = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Malformed, e.what());
  }
  const auto payload = bytes.subspan(12 + header_bytes);

  ModelConfig mc;
  TrainConfig tc;
  std::vector<CheckpointEntry> entries;
  std::vector<std::string> class_names;
  try {
    merge_json(header.at("model"), mc);
    merge_json(header.at("train"), tc);
    class_names = header.at("class_names").get<std::vector<std::string>>();
    for (const auto& e : header.at("entries")) {
      CheckpointEntry entry;
      entry.name = e.at("name").get<std::string>();
      entry.kind = e.at("kind").get<std::string>();
      entry.dtype = e.at("dtype").get<std::string>();
      entry.shape = e.at("shape").get<Shape>();
      entry.offset = e.at("offset").get<std::uint64_t>();
      entry.length = e.at("length").get<std::uint64_t>();
      entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::Malformed, e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError(Kind::Malformed, e.what());
  }

  std::uint64_t expected_offset = 0;
  for (const auto& e : entries) {
    if (e.offset < expected_offset) {
      throw CheckpointError(Kind::OverlappingEntries, "entry '" + e.name + "' starts at " + std::to_string(e.offset) +
                                                          " inside the previous entry");
    }
    if (e.offset != expected_offset) {
      throw CheckpointError(Kind::Malformed, "gap before entry '" + e.name + "'");
    }
    const std::size_t elem = e.dtype == "f32" ? 4 : e.dtype == "f64" ? 8 : 0;
    if (elem == 0) throw CheckpointError(Kind::Malformed, "entry '" + e.name + "' has dtype '" + e.dtype + "'");
    if (e.length != shape_numel(e.shape) * elem) {
      throw CheckpointError(Kind::Malformed, "entry '" + e.name + "' length disagrees with its shape");
    }
    expected_offset = e.offset + e.length;
  }
  if (payload.size() < expected_offset) {
    throw CheckpointError(Kind::Truncated, "payload holds " + std::to_string(payload.size()) + " bytes, directory needs " +
                                               std::to_string(expected_offset));
  }
  if (payload.size() > expected_offset) {
    throw CheckpointError(Kind::Malformed, "payload has " + std::to_string(payload.size() - expected_offset) +
                                               " trailing bytes");
  }

  Model model = [&] {
    try {
      return Model(mc, 0);
    } catch (const ValidationError& e) {
      throw CheckpointError(Kind::Malformed, std::string("model config rejected: ") + e.what());
    }
  }();
  const std::size_t expected_count = model.store().parameters().size() + model.store().buffers().size();
  if (entries.size() != expected_count) {
    throw CheckpointError(Kind::Malformed, "directory lists " + std::to_string(entries.size()) +
                                               " tensors, model has " + std::to_string(expected_count));
  }
  for (const auto& e : entries) {
    if (!model.store().contains(e.name)) throw CheckpointError(Kind::Malformed, "unknown tensor '" + e.name + "'");
    Tensor target = model.store().tensor(e.name);
    if (target.shape() != e.shape) {
      throw CheckpointError(Kind::Malformed, "tensor '" + e.name + "' has shape " + shape_string(e.shape) +
                                                 ", model expects " + shape_string(target.shape()));
    }
    auto dst = target.mutable_data();
    const std::uint8_t* src = payload.data() + e.offset;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = e.dtype == "f32" ? static_cast<double>(get_le<float>(src + 4 * i)) : get_le<double>(src + 8 * i);
    }
  }
  return LoadedCheckpoint{std::move(model), tc, std::move(class_names), std::move(entries)};
}

void save_checkpoint(const Model& model, const TrainConfig& train, std::span<const std::string> class_names,
                     const std::string& path, PayloadType payload) {
  const auto bytes = serialize_checkpoint(model, train, class_names, payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace ogaw
