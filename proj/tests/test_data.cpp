#include <gtest/gtest.h>
#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "ogaw/data.hpp"
#include "ogaw/image_io.hpp"

using namespace ogaw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ogaw_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ManifestError::Kind manifest_failure(const std::string& text, std::size_t* line = nullptr) {
  try {
    parse_manifest(text);
  } catch (const ManifestError& e) {
    if (line) *line = e.line();
    return e.kind();
  }
  ADD_FAILURE() << "manifest parsed:\n" << text;
  return ManifestError::Kind::EmptyFile;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size()))));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

// Hand-assembled PNG whose scanline i uses filter filters[i % size].
std::vector<std::uint8_t> filtered_png(const image::Image& img, const std::vector<int>& filters, int bit_depth = 8,
                                       int interlace = 0) {
  const std::size_t bpp = img.channels, stride = img.width * bpp;
  std::vector<std::uint8_t> raw;
  for (std::size_t y = 0; y < img.height; ++y) {
    const int f = filters[y % filters.size()];
    raw.push_back(static_cast<std::uint8_t>(f));
    for (std::size_t x = 0; x < stride; ++x) {
      const int cur = img.pixels[y * stride + x];
      const int a = x >= bpp ? img.pixels[y * stride + x - bpp] : 0;
      const int b = y > 0 ? img.pixels[(y - 1) * stride + x] : 0;
      const int c = (x >= bpp && y > 0) ? img.pixels[(y - 1) * stride + x - bpp] : 0;
      int pred = 0;
      switch (f) {
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
      }
      raw.push_back(static_cast<std::uint8_t>(cur - pred));
    }
  }
  uLongf zlen = compressBound(raw.size());
  std::vector<std::uint8_t> z(zlen);
  compress(z.data(), &zlen, raw.data(), raw.size());
  z.resize(zlen);

  std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  const int color = img.channels == 1 ? 0 : img.channels == 2 ? 4 : img.channels == 3 ? 2 : 6;
  for (int v : {bit_depth, color, 0, 0, interlace}) ihdr.push_back(static_cast<std::uint8_t>(v));
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", z);
  put_chunk(png, "IEND", {});
  return png;
}

image::Image random_image(std::size_t w, std::size_t h, std::size_t c, Rng& rng) {
  image::Image img{w, h, c, {}};
  for (std::size_t i = 0; i < w * h * c; ++i) img.pixels.push_back(static_cast<std::uint8_t>(rng.below(256)));
  return img;
}

DatasetManifest random_manifest(Rng& rng) {
  std::string text = "path,label\n";
  const std::size_t classes = 2 + rng.below(4);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t n = 2 + rng.below(15);
    for (std::size_t i = 0; i < n; ++i) text += "k" + std::to_string(c) + "/" + std::to_string(i) + ".ppm,k" + std::to_string(c) + "\n";
  }
  return parse_manifest(text);
}

}  // namespace

TEST(Manifest, LexicographicClassIndex) {
  const auto m = parse_manifest("path,label\nb.png,normal\na.png,bleeding\nc.png,normal\n");
  EXPECT_EQ(m.class_index, (std::vector<std::string>{"bleeding", "normal"}));
  EXPECT_EQ(m.label_index("bleeding"), 0);
  EXPECT_EQ(m.label_index("normal"), 1);
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_EQ(m.rows[0].path, "b.png");
}

TEST(Manifest, NamedErrorsWithLines) {
  using K = ManifestError::Kind;
  std::size_t line = 0;
  EXPECT_EQ(manifest_failure("path,label\na.png,x\nb.png,y\na.png,y\n", &line), K::DuplicatePath);
  EXPECT_EQ(line, 4u);
  EXPECT_EQ(manifest_failure("file,class\na.png,x\n", &line), K::BadHeader);
  EXPECT_EQ(line, 1u);
  EXPECT_EQ(manifest_failure(""), K::EmptyFile);
  EXPECT_EQ(manifest_failure("path,label\na.png,x\nb.png\n", &line), K::MalformedRow);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(manifest_failure("path,label\na.png,x\nb.png,x\n"), K::TooFewClasses);
  try {
    parse_manifest("path,label\na.png,x\na.png,y\n");
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Manifest, SyntheticRoundTrip) {
  const auto dir = scratch("manifest_rt");
  const auto m = generate_synthetic(dir.string(), 10, 3, 16, 1);
  write_manifest(m, (dir / "copy.csv").string());
  const auto back = load_manifest((dir / "copy.csv").string());
  EXPECT_EQ(format_manifest(back), format_manifest(m));
  EXPECT_EQ(back.class_index, m.class_index);
  EXPECT_EQ(back.resolve(back.rows[5]), m.resolve(m.rows[5]));
  EXPECT_THROW(load_manifest((dir / "missing.csv").string()), IoError);
  fs::remove_all(dir);
}

TEST(Split, ExactFraction) {
  std::string text = "path,label\n";
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 100; ++i) text += std::to_string(c) + "_" + std::to_string(i) + ".png,c" + std::to_string(c) + "\n";
  const auto m = parse_manifest(text);
  const auto s = stratified_split(m, 0.2, 7);
  EXPECT_EQ(s.val.rows.size(), 60u);
  for (const auto& name : m.class_index)
    EXPECT_EQ(std::count_if(s.val.rows.begin(), s.val.rows.end(), [&](const auto& r) { return r.label == name; }), 20);
  EXPECT_EQ(s.train.class_index, m.class_index);
  EXPECT_EQ(s.val.class_index, m.class_index);
}

TEST(Split, DeterministicPartition) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_manifest(rng);
    const double frac = rng.uniform(0.05, 0.95);
    const std::uint64_t seed = rng.next();
    const auto a = stratified_split(m, frac, seed);
    const auto b = stratified_split(m, frac, seed);
    EXPECT_EQ(format_manifest(a.train), format_manifest(b.train));
    EXPECT_EQ(format_manifest(a.val), format_manifest(b.val));
    std::multiset<std::string> all;
    for (const auto& r : a.train.rows) all.insert(r.path);
    for (const auto& r : a.val.rows) all.insert(r.path);
    std::multiset<std::string> orig;
    for (const auto& r : m.rows) orig.insert(r.path);
    EXPECT_EQ(all, orig);
    for (const auto& name : m.class_index) {
      const auto total = std::count_if(m.rows.begin(), m.rows.end(), [&](const auto& r) { return r.label == name; });
      const auto val = std::count_if(a.val.rows.begin(), a.val.rows.end(), [&](const auto& r) { return r.label == name; });
      const long expect = std::clamp<long>(std::lround(total * frac), 1, total - 1);
      EXPECT_EQ(val, expect) << name << " " << total << " " << frac;
    }
  }
}

TEST(Split, SingleSampleClassWarns) {
  const auto m = parse_manifest("path,label\na,x\nb,x\nc,x\nd,y\n");
  const auto s = stratified_split(m, 0.5, 1);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("y"), std::string::npos);
  EXPECT_TRUE(std::any_of(s.train.rows.begin(), s.train.rows.end(), [](const auto& r) { return r.path == "d"; }));
  EXPECT_THROW(stratified_split(m, 0.0, 1), ValidationError);
  EXPECT_THROW(stratified_split(m, 1.0, 1), ValidationError);
}

TEST(Synthetic, CountsAndDeterminism) {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  const auto m = generate_synthetic(a.string(), 10, 20, 64, 42);
  generate_synthetic(b.string(), 10, 20, 64, 42);
  EXPECT_EQ(m.rows.size(), 200u);
  EXPECT_EQ(m.num_classes(), 10u);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".ppm") continue;
    ++files;
    EXPECT_EQ(image::read_file(e.path().string()), image::read_file((b / fs::relative(e.path(), a)).string()));
  }
  EXPECT_EQ(files, 200u);
  EXPECT_EQ(image::read_file((a / "manifest.csv").string()), image::read_file((b / "manifest.csv").string()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synthetic, NearestCentroidBeatsChance) {
  const auto dir = scratch("synth_nc");
  const auto m = generate_synthetic(dir.string(), 10, 20, 32, 3);
  const auto split = stratified_split(m, 0.25, 3);
  const Dataset tr = load_dataset(split.train, 32), va = load_dataset(split.val, 32);
  const std::size_t dim = 3 * 32 * 32, c = 10;
  std::vector<double> centroid(c * dim, 0.0);
  std::vector<double> count(c, 0.0);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    count[tr.labels[i]] += 1;
    for (std::size_t d = 0; d < dim; ++d) centroid[tr.labels[i] * dim + d] += tr.images.at(i * dim + d);
  }
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t d = 0; d < dim; ++d) centroid[k * dim + d] /= count[k];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    double best = 1e300;
    int arg = -1;
    for (std::size_t k = 0; k < c; ++k) {
      double dist = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = va.images.at(i * dim + d) - centroid[k * dim + d];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = static_cast<int>(k);
      }
    }
    correct += arg == va.labels[i];
  }
  EXPECT_GT(static_cast<double>(correct) / va.size(), 1.0 / c);
  fs::remove_all(dir);
}

TEST(LoadDataset, RangeShapeAndWorkerIndependence) {
  const auto dir = scratch("load_ds");
  const auto m = generate_synthetic(dir.string(), 3, 5, 24, 9);
  const Dataset one = load_dataset(m, 16, 1), four = load_dataset(m, 16, 4);
  EXPECT_EQ(one.images.shape(), (Shape{15, 3, 16, 16}));
  EXPECT_TRUE(std::equal(one.images.data().begin(), one.images.data().end(), four.images.data().begin()));
  EXPECT_EQ(one.labels, four.labels);
  EXPECT_EQ(one.ids, four.ids);
  for (double v : one.images.data()) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  const Dataset sub = one.subset({4, 0});
  EXPECT_EQ(sub.labels, (std::vector<int>{one.labels[4], one.labels[0]}));
  fs::remove(dir / m.rows[2].path);
  EXPECT_THROW(load_dataset(m, 16, 2), IoError);
  fs::remove_all(dir);
}

TEST(ImageIo, SolidPngResizesToConstant) {
  const auto dir = scratch("solid");
  image::Image img{100, 100, 3, {}};
  for (int i = 0; i < 100 * 100; ++i) img.pixels.insert(img.pixels.end(), {128, 64, 32});
  image::write_file((dir / "solid.png").string(), image::encode_png(img));
  const Tensor t = image::load_image((dir / "solid.png").string(), 64);
  ASSERT_EQ(t.shape(), (Shape{3, 64, 64}));
  const double expect[] = {128 / 255.0, 64 / 255.0, 32 / 255.0};
  for (std::size_t i = 0; i < t.numel(); ++i) ASSERT_NEAR(t.at(i), expect[i / (64 * 64)], 1e-7);
  fs::remove_all(dir);
}

TEST(ImageIo, ResizeToSameSizeIsIdentity) {
  Rng rng(10);
  const Tensor x = oracle::random_tensor({3, 7, 9}, rng, 0, 1);
  EXPECT_LE(oracle::max_abs_diff(image::resize_bilinear(x, 7, 9).data(), x.data()), 1e-12);
}

TEST(ImageIo, CheckerboardBilinearOracle) {
  const Tensor board(Shape{1, 2, 2}, std::vector<double>{0, 1, 1, 0});
  const Tensor up = image::resize_bilinear(board, 4, 4);
  const std::vector<double> grid{0,    0.25,  0.75,  1,     0.25, 0.375, 0.625, 0.75,
                                 0.75, 0.625, 0.375, 0.25,  1,    0.75,  0.25,  0};
  EXPECT_LE(oracle::max_abs_diff(up.data(), grid), 1e-15);
}

TEST(ImageIo, PngFiltersAndColorTypes) {
  Rng rng(11);
  for (std::size_t channels : {1u, 2u, 3u, 4u}) {
    const auto img = random_image(13, 9, channels, rng);
    const auto decoded = image::decode(filtered_png(img, {0, 1, 2, 3, 4}));
    EXPECT_EQ(decoded.pixels, img.pixels) << channels;
    EXPECT_EQ(decoded.channels, channels);
    EXPECT_EQ(image::decode(image::encode_png(img)).pixels, img.pixels);
  }
}

TEST(ImageIo, GrayReplicatedAlphaDropped) {
  const image::Image gray{2, 1, 1, {10, 200}};
  const Tensor g = image::to_tensor(gray);
  EXPECT_EQ(g.shape(), (Shape{3, 1, 2}));
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(g.at(c * 2), 10 / 255.0);
    EXPECT_EQ(g.at(c * 2 + 1), 200 / 255.0);
  }
  const image::Image rgba{1, 1, 4, {1, 2, 3, 77}};
  const Tensor t = image::to_tensor(image::decode(filtered_png(rgba, {0})));
  EXPECT_EQ(t.shape(), (Shape{3, 1, 1}));
  EXPECT_EQ(t.at(2), 3 / 255.0);
}

TEST(ImageIo, PpmRoundTripAndErrors) {
  Rng rng(12);
  const auto img = random_image(5, 4, 3, rng);
  EXPECT_EQ(image::decode(image::encode_ppm(img)).pixels, img.pixels);
  const std::string commented = "P6\n# a comment\n1 1\n255\n\x01\x02\x03";
  const auto c = image::decode(std::vector<std::uint8_t>(commented.begin(), commented.end()));
  EXPECT_EQ(c.pixels, (std::vector<std::uint8_t>{1, 2, 3}));

  const auto sixteen = filtered_png(random_image(2, 2, 3, rng), {0}, 16);
  try {
    image::decode(sixteen);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("bit depth"), std::string::npos);
  }
  EXPECT_THROW(image::decode(filtered_png(random_image(2, 2, 3, rng), {0}, 8, 1)), IoError);
  const std::string ascii = "P3\n1 1\n255\n1 2 3\n";
  EXPECT_THROW(image::decode(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), IoError);
  const std::string gif = "GIF89a";
  EXPECT_THROW(image::decode(std::vector<std::uint8_t>(gif.begin(), gif.end())), IoError);
}
