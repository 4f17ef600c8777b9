#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "ogaw/checkpoint.hpp"
#include "ogaw/config.hpp"
#include "ogaw/image_io.hpp"
#include "ogaw/metrics.hpp"

namespace fs = std::filesystem;
using namespace ogaw;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / ("ogaw_cli_test_" + std::to_string(getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  static const struct Cleanup {
    ~Cleanup() { fs::remove_all(dir); }
  } cleanup;
  return dir;
}

Run cli(const std::string& args) {
  const fs::path log = work_dir() / "stdout.txt";
  const std::string cmd = std::string(OGAW_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Json resolved_config(const std::string& out) {
  const std::string tag = "resolved config: ";
  const auto first = lines_of(out).at(0);
  EXPECT_EQ(first.rfind(tag, 0), 0u) << out;
  return Json::parse(first.substr(tag.size()));
}

// A 3-class, 16-pixel dataset and a small model config, trained once.
struct Fixture {
  fs::path dir = work_dir() / "run";
  fs::path manifest = dir / "data" / "manifest.csv";
  fs::path config = dir / "mini.json";
  fs::path ckpt = dir / "model.ckpt";
  Run synth, train;

  Fixture() {
    fs::create_directories(dir);
    std::ofstream(config) << R"({"model": {"image_size": 16, "encoder_widths": [4, 8], "classifier_widths": [4, 4],
                                 "oga_reduction_ratio": 2}, "train": {"batch_size": 4, "learning_rate": 0.01}})";
    synth = cli("synth --out " + (dir / "data").string() + " --classes 3 --per-class 6 --size 16 --seed 5");
    train = cli("train --manifest " + manifest.string() + " --config " + config.string() + " --epochs 4 --seed 3 --out " +
                ckpt.string() + " --curves " + (dir / "curves.csv").string());
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Cli, SynthWritesDataset) {
  const auto& f = fixture();
  ASSERT_EQ(f.synth.code, 0) << f.synth.out;
  EXPECT_EQ(resolved_config(f.synth.out)["classes"], 3);
  EXPECT_EQ(lines_of(slurp(f.manifest)).size(), 1u + 18u);
  EXPECT_TRUE(fs::exists(f.dir / "data" / "class_grating_00" / "img_0.ppm"));
}

TEST(Cli, TrainWritesArtifactsAndEvalReproducesValAccuracy) {
  const auto& f = fixture();
  ASSERT_EQ(f.train.code, 0) << f.train.out;
  const Json cfg = resolved_config(f.train.out);
  EXPECT_EQ(cfg["train"]["epochs"], 4);
  EXPECT_EQ(cfg["train"]["batch_size"], 4);
  EXPECT_EQ(cfg["model"]["num_classes"], 3);
  for (const char* name : {"model.ckpt", "model.final.ckpt", "curves.csv", "model.train.csv", "model.val.csv"})
    EXPECT_TRUE(fs::exists(f.dir / name)) << name;
  EXPECT_EQ(lines_of(slurp(f.dir / "curves.csv")).size(), 5u);

  std::string final_line;
  for (const auto& l : lines_of(f.train.out))
    if (l.rfind("final epoch", 0) == 0) final_line = l;
  ASSERT_FALSE(final_line.empty());
  const double final_acc = std::stod(final_line.substr(final_line.rfind(' ') + 1));

  const auto ev = cli("eval --checkpoint " + (f.dir / "model.final.ckpt").string() + " --manifest " +
                      (f.dir / "model.val.csv").string() + " --report " + (f.dir / "report.json").string() +
                      " --predictions " + (f.dir / "preds.csv").string());
  ASSERT_EQ(ev.code, 0) << ev.out;
  std::string samples_line;
  for (const auto& l : lines_of(ev.out))
    if (l.rfind("samples", 0) == 0) samples_line = l;
  ASSERT_FALSE(samples_line.empty());
  EXPECT_NEAR(std::stod(samples_line.substr(samples_line.rfind(' ') + 1)), final_acc, 1e-9);

  const Json report = Json::parse(slurp(f.dir / "report.json"));
  for (const char* key : {"mean_auc", "balanced_accuracy", "accuracy", "f1_weighted", "precision_weighted",
                          "recall_weighted", "specificity_macro"})
    EXPECT_TRUE(report.contains(key)) << key;
  EXPECT_NE(ev.out.find("VGG16"), std::string::npos);
  EXPECT_NE(ev.out.find("delta vs ResNet50"), std::string::npos);

  // The model-free report path agrees with eval.
  const auto rep = cli("report --predictions " + (f.dir / "preds.csv").string() + " --out " +
                       (f.dir / "report2.json").string());
  ASSERT_EQ(rep.code, 0) << rep.out;
  EXPECT_EQ(Json::parse(slurp(f.dir / "report2.json"))["accuracy"], report["accuracy"]);
}

TEST(Cli, TrainIsDeterministic) {
  const auto& f = fixture();
  ASSERT_EQ(f.train.code, 0);
  const fs::path again = f.dir / "again.ckpt";
  const auto r = cli("train --manifest " + f.manifest.string() + " --config " + f.config.string() +
                     " --epochs 4 --seed 3 --out " + again.string() + " --curves " + (f.dir / "again.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(again), slurp(f.ckpt));
  EXPECT_EQ(slurp(f.dir / "again.final.ckpt"), slurp(f.dir / "model.final.ckpt"));
  EXPECT_EQ(slurp(f.dir / "again.csv"), slurp(f.dir / "curves.csv"));
}

TEST(Cli, PredictTopK) {
  const auto& f = fixture();
  ASSERT_EQ(f.train.code, 0);
  const auto img = f.dir / "data" / "class_grating_01" / "img_2.ppm";
  const auto r = cli("predict --checkpoint " + f.ckpt.string() + " --image " + img.string() + " --topk 3");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 6u) << r.out;
  EXPECT_EQ(lines[1], "rank,class,probability");
  double prev = 2;
  for (int i = 2; i < 5; ++i) {
    const double p = std::stod(lines[i].substr(lines[i].rfind(',') + 1));
    EXPECT_LE(p, prev);
    prev = p;
  }
  const double total = std::stod(lines[5].substr(lines[5].rfind(' ') + 1));
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(cli("predict --checkpoint " + f.ckpt.string() + " --image " + img.string() + " --topk 4").code, 1);
}

TEST(Cli, EvalClassMismatchIsValidationError) {
  const auto& f = fixture();
  ASSERT_EQ(f.train.code, 0);
  const fs::path two = f.dir / "two.csv";
  std::ofstream(two) << "path,label\n" << (f.dir / "data" / "class_grating_00" / "img_0.ppm").string() << ",a\n"
                     << (f.dir / "data" / "class_grating_01" / "img_0.ppm").string() << ",b\n";
  const auto r = cli("eval --checkpoint " + f.ckpt.string() + " --manifest " + two.string());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("class count mismatch"), std::string::npos);
}

TEST(Cli, PrintConfigShowsDefaults) {
  const auto r = cli("train --print-config");
  ASSERT_EQ(r.code, 0) << r.out;
  const Json cfg = resolved_config(r.out);
  EXPECT_EQ(cfg["train"]["epochs"], 50);
  EXPECT_EQ(cfg["train"]["batch_size"], 16);
  EXPECT_EQ(cfg["train"]["learning_rate"], 0.001);
  EXPECT_EQ(cfg["train"]["weight_decay"], 1e-5);
  EXPECT_EQ(cfg["loss"], "cross_entropy");
  EXPECT_EQ(cfg["preprocessing"]["resize"], 256);
}

TEST(Cli, ExitCodes) {
  const auto& f = fixture();
  const auto zero = cli("train --manifest " + f.manifest.string() + " --epochs 0 --out " + (f.dir / "zero.ckpt").string());
  EXPECT_EQ(zero.code, 1) << zero.out;
  EXPECT_FALSE(fs::exists(f.dir / "zero.ckpt"));
  EXPECT_EQ(cli("train --bogus-flag 3").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("train --manifest /nonexistent/manifest.csv").code, 2);
  EXPECT_EQ(cli("predict --checkpoint /nonexistent/model.ckpt --image x.png").code, 2);
  EXPECT_EQ(cli("wavelet --image x.png --transform fft --out " + (f.dir / "w").string()).code, 1);
}

TEST(Cli, WaveletDumpsPyramid) {
  const fs::path dir = work_dir() / "wavelet";
  fs::create_directories(dir);
  image::Image img{64, 64, 3, {}};
  for (std::size_t i = 0; i < 64 * 64 * 3; ++i) img.pixels.push_back(static_cast<std::uint8_t>((i * 37) % 251));
  image::write_file((dir / "in.png").string(), image::encode_png(img));
  const auto r = cli("wavelet --image " + (dir / "in.png").string() + " --transform dwt --wavelet haar --levels 2 --out " +
                     (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Json side = Json::parse(slurp(dir / "out" / "subbands.json"));
  ASSERT_EQ(side["planes"].size(), 21u);
  std::map<std::string, std::size_t> sizes;
  for (const auto& p : side["planes"]) {
    if (p["channel"] != 0) continue;
    const std::string file = p["file"];
    sizes[file] = p["rows"].get<std::size_t>() * p["cols"].get<std::size_t>();
    EXPECT_EQ(fs::file_size(dir / "out" / file), 4 * sizes[file]);
  }
  EXPECT_EQ(sizes, (std::map<std::string, std::size_t>{{"0_2_LL.f32", 256},
                                                        {"0_1_LH.f32", 1024},
                                                        {"0_1_HL.f32", 1024},
                                                        {"0_1_HH.f32", 1024},
                                                        {"0_2_LH.f32", 256},
                                                        {"0_2_HL.f32", 256},
                                                        {"0_2_HH.f32", 256}}));
}

TEST(Cli, GradcheckIsDeterministic) {
  const auto a = cli("gradcheck --seed 7");
  const auto b = cli("gradcheck --seed 7");
  ASSERT_EQ(a.code, 0) << a.out;
  const auto last = [](const std::string& out) { return lines_of(out).back(); };
  EXPECT_EQ(last(a.out), last(b.out));
  EXPECT_EQ(last(a.out).rfind("summary:", 0), 0u);
}

TEST(Cli, ReportMatchesConfusionMatrixPath) {
  const fs::path csv = work_dir() / "hand.csv";
  std::ofstream(csv) << "sample_id,true_label,predicted_label\ns1,0,0\ns2,0,1\ns3,1,1\ns4,2,1\n";
  const fs::path out = work_dir() / "hand.json";
  const auto r = cli("report --predictions " + csv.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  ConfusionMatrix cm;
  cm.counts = {{1, 1, 0}, {0, 1, 0}, {0, 1, 0}};
  cm.class_names = {"0", "1", "2"};
  const auto expect = report_to_json(classification_metrics(cm));
  const Json got = Json::parse(slurp(out));
  for (const auto& [key, value] : expect.items()) {
    if (key == "per_class" || key == "mean_auc") continue;
    EXPECT_EQ(got[key], value) << key;
  }
}
