#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ogaw/error.hpp"
#include "ogaw/tensor.hpp"

namespace ogaw {

class ManifestError : public ValidationError {
 public:
  enum class Kind { EmptyFile, BadHeader, DuplicatePath, MalformedRow, TooFewClasses };

  ManifestError(Kind kind, std::size_t line, const std::string& detail)
      : ValidationError("manifest " + std::string(kind_name(kind)) + " (line " + std::to_string(line) + "): " + detail),
        kind_(kind),
        line_(line) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

  static const char* kind_name(Kind kind) noexcept {
    switch (kind) {
      case Kind::EmptyFile: return "empty file";
      case Kind::BadHeader: return "unknown header";
      case Kind::DuplicatePath: return "duplicate path";
      case Kind::MalformedRow: return "malformed row";
      case Kind::TooFewClasses: return "too few classes";
    }
    return "error";
  }

 private:
  Kind kind_;
  std::size_t line_;
};

struct ManifestRow {
  std::string path;  // relative to base_dir
  std::string label;
};

/// CSV `path,label`. Class indices follow the lexicographic order of the
/// label strings.
struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> class_index;
  std::string base_dir;

  int label_index(const std::string& label) const;
  std::size_t num_classes() const { return class_index.size(); }
  std::string resolve(const ManifestRow& row) const;
};

/// `base_dir` is prepended to relative paths when images are loaded.
DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir = "");
/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::string& path);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

struct SplitResult {
  DatasetManifest train, val;
  std::vector<std::string> warnings;
};

/// Per class, round(count·val_fraction) rows go to validation, at least one
/// when the class has two or more rows and never the whole class. Both halves
/// keep the manifest's row order and the parent's class_index.
SplitResult stratified_split(const DatasetManifest& manifest, double val_fraction, std::uint64_t seed);

/// Writes `class_<name>/img_<i>.ppm` grating images and `manifest.csv` under
/// out_dir. Class c is a sinusoidal grating of c+1 cycles per image at
/// orientation c·π/C with N(0, 0.05) pixel noise.
DatasetManifest generate_synthetic(const std::string& out_dir, std::size_t num_classes, std::size_t per_class,
                                   std::size_t image_size, std::uint64_t seed);

struct Dataset {
  Tensor images;  // [N,3,S,S]
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  /// Samples at the given indices, in that order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Decodes and resizes every row on `workers` threads; the result follows
/// manifest order regardless of the worker count.
Dataset load_dataset(const DatasetManifest& manifest, std::size_t image_size, std::size_t workers = 4);

}  // namespace ogaw
