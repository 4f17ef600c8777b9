#include "ogaw/data.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "ogaw/image_io.hpp"
#include "ogaw/rng.hpp"

namespace fs = std::filesystem;

namespace ogaw {

int DatasetManifest::label_index(const std::string& label) const {
  const auto it = std::lower_bound(class_index.begin(), class_index.end(), label);
  if (it == class_index.end() || *it != label) throw ValidationError("unknown class label '" + label + "'");
  return static_cast<int>(it - class_index.begin());
}

std::string DatasetManifest::resolve(const ManifestRow& row) const {
  const fs::path p(row.path);
  if (p.is_absolute() || base_dir.empty()) return row.path;
  return (fs::path(base_dir) / p).string();
}

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir) {
  using K = ManifestError::Kind;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line != "path,label") throw ManifestError(K::BadHeader, line_no, "expected 'path,label', got '" + line + "'");
    have_header = true;
  }
  if (!have_header) throw ManifestError(K::EmptyFile, line_no, "no header");

  DatasetManifest m;
  m.base_dir = base_dir;
  std::map<std::string, std::size_t> seen;
  std::set<std::string> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ManifestError(K::MalformedRow, line_no, "expected exactly two fields");
    }
    ManifestRow row{line.substr(0, comma), line.substr(comma + 1)};
    if (row.path.empty() || row.label.empty()) throw ManifestError(K::MalformedRow, line_no, "empty field");
    const auto [it, inserted] = seen.emplace(row.path, line_no);
    if (!inserted) {
      throw ManifestError(K::DuplicatePath, line_no,
                          "'" + row.path + "' already listed on line " + std::to_string(it->second));
    }
    labels.insert(row.label);
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) throw ManifestError(K::EmptyFile, line_no, "no data rows");
  if (labels.size() < 2) throw ManifestError(K::TooFewClasses, line_no, "need at least two distinct labels");
  m.class_index.assign(labels.begin(), labels.end());
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), fs::path(path).parent_path().string());
}

std::string format_manifest(const DatasetManifest& m) {
  std::string out = "path,label\n";
  for (const auto& r : m.rows) out += r.path + "," + r.label + "\n";
  return out;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << format_manifest(m);
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

SplitResult stratified_split(const DatasetManifest& m, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("stratified_split: val_fraction must lie in (0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(m.num_classes());
  for (std::size_t i = 0; i < m.rows.size(); ++i) by_class[m.label_index(m.rows[i].label)].push_back(i);

  SplitResult out;
  std::vector<bool> to_val(m.rows.size(), false);
  Rng rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      if (idx.size() == 1) {
        out.warnings.push_back("class '" + m.class_index[c] + "' has a single sample; kept in train");
      }
      continue;
    }
    auto take = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * val_fraction));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    rng.shuffle(idx);
    for (std::size_t k = 0; k < take; ++k) to_val[idx[k]] = true;
  }
  out.train.class_index = out.val.class_index = m.class_index;
  out.train.base_dir = out.val.base_dir = m.base_dir;
  for (std::size_t i = 0; i < m.rows.size(); ++i) (to_val[i] ? out.val : out.train).rows.push_back(m.rows[i]);
  return out;
}

DatasetManifest generate_synthetic(const std::string& out_dir, std::size_t num_classes, std::size_t per_class,
                                   std::size_t image_size, std::uint64_t seed) {
  if (num_classes < 2) throw ValidationError("synthetic: need at least 2 classes");
  if (per_class < 2) throw ValidationError("synthetic: need at least 2 images per class");
  if (image_size < 2) throw ValidationError("synthetic: image size must be at least 2");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());

  DatasetManifest m;
  m.base_dir = out_dir;
  const double s = static_cast<double>(image_size);
  for (std::size_t c = 0; c < num_classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "grating_%02zu", c);
    m.class_index.push_back(name);
    const std::string dir = std::string("class_") + name;
    fs::create_directories(fs::path(out_dir) / dir, ec);
    if (ec) throw IoError("cannot create '" + (fs::path(out_dir) / dir).string() + "': " + ec.message());

    const double freq = static_cast<double>(c + 1);
    const double theta = static_cast<double>(c) * std::numbers::pi / static_cast<double>(num_classes);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng = Rng::derived(seed, c * per_class + i);
      image::Image img;
      img.width = img.height = image_size;
      img.channels = 3;
      img.pixels.resize(image_size * image_size * 3);
      for (std::size_t y = 0; y < image_size; ++y)
        for (std::size_t x = 0; x < image_size; ++x) {
          const double u = (static_cast<double>(x) * ct + static_cast<double>(y) * st) / s;
          double v = 0.5 + 0.35 * std::sin(2.0 * std::numbers::pi * freq * u) + 0.05 * rng.normal();
          v = std::clamp(v, 0.0, 1.0);
          const auto q = static_cast<std::uint8_t>(std::lround(v * 255.0));
          std::fill_n(&img.pixels[(y * image_size + x) * 3], 3, q);
        }
      char file[32];
      std::snprintf(file, sizeof file, "img_%zu.ppm", i);
      const std::string rel = dir + "/" + file;
      image::write_file((fs::path(out_dir) / rel).string(), image::encode_ppm(img));
      m.rows.push_back({rel, name});
    }
  }
  write_manifest(m, (fs::path(out_dir) / "manifest.csv").string());
  return m;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  const std::size_t per = images.numel() / std::max<std::size_t>(size(), 1);
  Shape shape = images.shape();
  shape[0] = indices.size();
  std::vector<double> values(indices.size() * per);
  auto src = images.data();
  Dataset out;
  out.class_names = class_names;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ValidationError("Dataset::subset: index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * per), per, values.begin() + static_cast<std::ptrdiff_t>(k * per));
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
  }
  if (!indices.empty()) out.images = Tensor(std::move(shape), std::move(values));
  return out;
}

Dataset load_dataset(const DatasetManifest& m, std::size_t image_size, std::size_t workers) {
  if (m.rows.empty()) throw ValidationError("load_dataset: empty manifest");
  if (image_size == 0) throw ValidationError("load_dataset: image size must be positive");
  const std::size_t n = m.rows.size();
  const std::size_t per = 3 * image_size * image_size;
  std::vector<double> values(n * per);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const Tensor t = image::load_image(m.resolve(m.rows[i]), image_size);
        std::copy(t.data().begin(), t.data().end(), values.begin() + static_cast<std::ptrdiff_t>(i * per));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::max<std::size_t>(workers, 1); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  Dataset d;
  d.images = Tensor(Shape{n, 3, image_size, image_size}, std::move(values));
  d.class_names = m.class_index;
  for (const auto& r : m.rows) {
    d.labels.push_back(m.label_index(r.label));
    d.ids.push_back(r.path);
  }
  return d;
}

}  // namespace ogaw
