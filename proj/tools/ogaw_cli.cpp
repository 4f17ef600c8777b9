// Command-line front end: train, eval, predict, wavelet, gradcheck, synth, report.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ogaw/checkpoint.hpp"
#include "ogaw/config.hpp"
#include "ogaw/data.hpp"
#include "ogaw/error.hpp"
#include "ogaw/gradcheck_battery.hpp"
#include "ogaw/image_io.hpp"
#include "ogaw/metrics.hpp"
#include "ogaw/training.hpp"
#include "ogaw/wavelet.hpp"

namespace fs = std::filesystem;
using namespace ogaw;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitGradcheck = 3;

void print_config(const Json& config) { std::cout << "resolved config: " << config.dump() << std::endl; }

std::string sibling(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Copy of a manifest with absolute paths, so it can be stored anywhere.
DatasetManifest absolute_manifest(const DatasetManifest& m) {
  DatasetManifest out = m;
  out.base_dir.clear();
  for (auto& row : out.rows) row.path = fs::absolute(m.resolve(row)).lexically_normal().string();
  return out;
}

struct TrainArgs {
  std::string manifest, val_manifest, config, out = "model.ckpt", curves = "curves.csv";
  std::optional<double> val_fraction;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr, weight_decay;
  std::optional<std::uint64_t> seed;
  bool print_only = false;
  bool f32 = false;
};

int run_train(const TrainArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : RunConfig::from_file(a.config);
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.batch) rc.train.batch_size = *a.batch;
  if (a.lr) rc.train.learning_rate = *a.lr;
  if (a.weight_decay) rc.train.weight_decay = *a.weight_decay;
  if (a.seed) rc.train.seed = *a.seed;
  const double val_fraction = a.val_fraction.value_or(0.2);

  std::optional<DatasetManifest> manifest, val_manifest;
  if (!a.manifest.empty()) {
    manifest = load_manifest(a.manifest);
    if (!a.val_manifest.empty()) val_manifest = load_manifest(a.val_manifest);
    rc.model.num_classes = manifest->num_classes();
  }

  Json resolved = rc.resolved();
  resolved["data"] = {{"manifest", a.manifest},
                      {"val_manifest", a.val_manifest},
                      {"val_fraction", a.val_manifest.empty() ? Json(val_fraction) : Json(nullptr)},
                      {"workers", 4}};
  resolved["outputs"] = {{"best_checkpoint", a.out},
                         {"final_checkpoint", sibling(a.out, ".final.ckpt")},
                         {"curves", a.curves},
                         {"payload", a.f32 ? "f32" : "f64"}};
  print_config(resolved);
  rc.train.validate();
  rc.model.validate();
  if (a.print_only) return kExitOk;
  if (!manifest) throw ValidationError("train: --manifest is required");

  DatasetManifest train_m, val_m;
  if (val_manifest) {
    if (val_manifest->class_index != manifest->class_index) {
      throw ValidationError("train: validation manifest classes differ from the training manifest");
    }
    train_m = *manifest;
    val_m = *val_manifest;
  } else {
    auto split = stratified_split(*manifest, val_fraction, rc.train.seed);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    train_m = std::move(split.train);
    val_m = std::move(split.val);
    if (val_m.rows.empty()) throw ValidationError("train: validation split is empty");
    write_manifest(absolute_manifest(train_m), sibling(a.out, ".train.csv"));
    write_manifest(absolute_manifest(val_m), sibling(a.out, ".val.csv"));
  }

  const Dataset train_set = load_dataset(train_m, rc.model.image_size);
  const Dataset val_set = load_dataset(val_m, rc.model.image_size);
  std::cout << "train samples " << train_set.size() << ", validation samples " << val_set.size() << std::endl;

  Model model(rc.model, rc.train.seed);
  const auto result = train(
      model, train_set, val_set, rc.train,
      [](const CurveRow& r) {
        std::printf("epoch %zu train_loss %.6f train_acc %.6f val_loss %.6f val_acc %.6f\n", r.epoch, r.train_loss,
                    r.train_acc, r.val_loss, r.val_acc);
        std::fflush(stdout);
      },
      a.f32 ? PayloadType::F32 : PayloadType::F64);

  image::write_file(a.out, result.best_checkpoint);
  image::write_file(sibling(a.out, ".final.ckpt"), result.final_checkpoint);
  write_curves_csv(result.curves, a.curves);
  std::printf("best epoch %zu val_acc %.9f\n", result.best_epoch, result.best_val_acc);
  std::printf("final epoch %zu val_acc %.9f\n", result.curves.back().epoch, result.curves.back().val_acc);
  return kExitOk;
}

void check_classes(const LoadedCheckpoint& ckpt, const DatasetManifest& m) {
  if (ckpt.model.config().num_classes != m.num_classes()) {
    throw ValidationError("class count mismatch: checkpoint has " + std::to_string(ckpt.model.config().num_classes) +
                          " classes, manifest has " + std::to_string(m.num_classes()));
  }
  if (!ckpt.class_names.empty() && ckpt.class_names != m.class_index) {
    throw ValidationError("class name mismatch between checkpoint and manifest");
  }
}

struct EvalArgs {
  std::string checkpoint, manifest, report, predictions;
  std::optional<std::size_t> batch;
};

int run_eval(const EvalArgs& a) {
  LoadedCheckpoint ckpt = load_checkpoint(a.checkpoint);
  const std::size_t batch = a.batch.value_or(ckpt.train.batch_size);
  Json cfg;
  cfg["checkpoint"] = a.checkpoint;
  cfg["manifest"] = a.manifest;
  cfg["report"] = a.report;
  cfg["batch_size"] = batch;
  cfg["model"] = to_json(ckpt.model.config());
  print_config(cfg);
  if (batch == 0) throw ValidationError("eval: --batch must be positive");

  const DatasetManifest m = load_manifest(a.manifest);
  check_classes(ckpt, m);
  const Dataset data = load_dataset(m, ckpt.model.config().image_size);
  const EvalResult r = evaluate(ckpt.model, data, batch);

  Predictions preds;
  preds.sample_ids = data.ids;
  preds.labels = data.labels;
  preds.predicted = r.predicted;
  preds.scores = r.probabilities;
  preds.num_classes = m.num_classes();
  const MetricsReport report = evaluate_predictions(preds, m.class_index);

  std::printf("samples %zu loss %.9f accuracy %.9f\n", data.size(), r.loss, r.accuracy);
  std::cout << report_to_json(report).dump(2) << "\n";
  std::cout << compare_to_baselines(as_row(report));
  if (!a.report.empty()) emit_report(report, a.report);
  if (!a.predictions.empty()) {
    const std::string csv = format_predictions_csv(preds);
    image::write_file(a.predictions, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  }
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint, image;
  std::size_t topk = 3;
};

int run_predict(const PredictArgs& a) {
  LoadedCheckpoint ckpt = load_checkpoint(a.checkpoint);
  const auto& mc = ckpt.model.config();
  Json cfg;
  cfg["checkpoint"] = a.checkpoint;
  cfg["image"] = a.image;
  cfg["topk"] = a.topk;
  cfg["model"] = to_json(mc);
  print_config(cfg);
  if (a.topk == 0 || a.topk > mc.num_classes) {
    throw ValidationError("predict: --topk must lie in [1," + std::to_string(mc.num_classes) + "]");
  }
  const Tensor img = image::load_image(a.image, mc.image_size);
  const Tensor batch = reshape(img, {1, 3, mc.image_size, mc.image_size});
  const Tensor probs = softmax(ckpt.model.forward(batch, Mode::Eval).logits, 1);
  auto p = probs.data();
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p[x] > p[y]; });
  double total = 0;
  for (double v : p) total += v;
  std::cout << "rank,class,probability\n";
  for (std::size_t k = 0; k < a.topk; ++k) {
    const std::size_t c = order[k];
    const std::string name = c < ckpt.class_names.size() ? ckpt.class_names[c] : std::to_string(c);
    std::printf("%zu,%s,%.9f\n", k + 1, name.c_str(), p[c]);
  }
  std::printf("total probability over %zu classes: %.12f\n", p.size(), total);
  return kExitOk;
}

struct WaveletArgs {
  std::string image, transform = "dwt", wavelet = "haar", out;
  std::size_t levels = 1;
  std::size_t size = 0;
};

int run_wavelet(const WaveletArgs& a) {
  Json cfg;
  cfg["image"] = a.image;
  cfg["transform"] = a.transform;
  cfg["wavelet"] = a.wavelet;
  cfg["levels"] = a.levels;
  cfg["size"] = a.size;
  cfg["out"] = a.out;
  print_config(cfg);
  const auto& bank = wavelet::FilterBank::by_name(a.wavelet);
  if (a.levels == 0) throw ValidationError("wavelet: --levels must be at least 1");

  Tensor img = image::to_tensor(image::decode(image::read_file(a.image)));
  if (a.size > 0) img = image::resize_bilinear(img, a.size, a.size);
  const auto pyramids =
      a.transform == "dwt" ? wavelet::dwt2d(img, bank, a.levels) : wavelet::swt2d(img, bank, a.levels);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create '" + a.out + "': " + ec.message());
  Json planes = Json::array();
  auto dump = [&](std::size_t channel, std::size_t level, wavelet::Band band, const wavelet::Plane& plane) {
    const std::string file =
        std::to_string(channel) + "_" + std::to_string(level) + "_" + std::string(wavelet::band_name(band)) + ".f32";
    std::vector<std::uint8_t> bytes;
    bytes.reserve(plane.values.size() * 4);
    for (double v : plane.values) {
      auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    }
    image::write_file((fs::path(a.out) / file).string(), bytes);
    planes.push_back({{"file", file},
                      {"channel", channel},
                      {"level", level},
                      {"band", wavelet::band_name(band)},
                      {"rows", plane.rows},
                      {"cols", plane.cols}});
  };
  for (std::size_t c = 0; c < pyramids.size(); ++c) {
    const auto& pyr = pyramids[c];
    dump(c, pyr.levels, wavelet::Band::LL, pyr.approx);
    for (std::size_t j = 1; j <= pyr.levels; ++j) {
      for (auto band : {wavelet::Band::LH, wavelet::Band::HL, wavelet::Band::HH}) dump(c, j, band, pyr.plane(j, band));
    }
  }
  Json sidecar;
  sidecar["transform"] = a.transform;
  sidecar["wavelet"] = a.wavelet;
  sidecar["levels"] = a.levels;
  sidecar["source_rows"] = img.dim(1);
  sidecar["source_cols"] = img.dim(2);
  sidecar["dtype"] = "f32le";
  sidecar["planes"] = std::move(planes);
  const std::string text = sidecar.dump(2) + "\n";
  image::write_file((fs::path(a.out) / "subbands.json").string(),
                    std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::cout << "wrote " << sidecar["planes"].size() << " planes to " << a.out << "\n";
  return kExitOk;
}

int run_gradcheck(std::uint64_t seed, double tolerance) {
  print_config({{"seed", seed}, {"tolerance", tolerance}, {"epsilon", 1e-5}});
  bool ok = true;
  double worst = 0;
  std::size_t checked = 0;
  for (const auto& c : run_gradcheck_battery(seed)) {
    const bool pass = c.result.passed(tolerance);
    ok = ok && pass;
    worst = std::max(worst, c.result.max_relative_error);
    checked += c.result.checked;
    std::printf("%-24s max_rel_err %.3e checked %zu skipped_at_kinks %zu %s\n", c.name.c_str(),
                c.result.max_relative_error, c.result.checked, c.result.skipped_at_kinks, pass ? "PASS" : "FAIL");
    if (!pass) std::printf("  worst: %s\n", c.result.worst.c_str());
  }
  std::printf("summary: max_rel_err %.6e over %zu coordinates: %s\n", worst, checked, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitGradcheck;
}

int run_synth(const std::string& out, std::size_t classes, std::size_t per_class, std::size_t size,
              std::uint64_t seed) {
  print_config({{"out", out}, {"classes", classes}, {"per_class", per_class}, {"size", size}, {"seed", seed}});
  const auto m = generate_synthetic(out, classes, per_class, size, seed);
  std::cout << "wrote " << m.rows.size() << " images in " << m.num_classes() << " classes to " << out << "\n";
  return kExitOk;
}

int run_report(const std::string& predictions, const std::string& out) {
  print_config({{"predictions", predictions}, {"out", out}});
  const auto bytes = image::read_file(predictions);
  const Predictions p = parse_predictions_csv(std::string(bytes.begin(), bytes.end()));
  const MetricsReport report = evaluate_predictions(p);
  std::cout << report_to_json(report).dump(2) << "\n";
  std::cout << compare_to_baselines(as_row(report));
  if (!out.empty()) emit_report(report, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-fused gated attention image classifier"};
  app.require_subcommand(1);
  std::function<int()> action;

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
  train_cmd->add_option("--manifest", ta.manifest, "Training manifest CSV (path,label)");
  auto* val_m = train_cmd->add_option("--val-manifest", ta.val_manifest, "Validation manifest CSV");
  auto* val_f = train_cmd->add_option("--val-fraction", ta.val_fraction, "Stratified validation fraction (default 0.2)");
  val_m->excludes(val_f);
  train_cmd->add_option("--config", ta.config, "JSON config with model/train sections");
  train_cmd->add_option("--out", ta.out, "Best-validation checkpoint path");
  train_cmd->add_option("--curves", ta.curves, "Curve CSV path");
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--batch", ta.batch);
  train_cmd->add_option("--lr", ta.lr);
  train_cmd->add_option("--weight-decay", ta.weight_decay);
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_flag("--f32-payload", ta.f32, "Store checkpoint values as 32-bit floats");
  train_cmd->add_flag("--print-config", ta.print_only, "Print the resolved config and exit");
  train_cmd->callback([&] { action = [&] { return run_train(ta); }; });

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--manifest", ea.manifest)->required();
  eval_cmd->add_option("--report", ea.report, "Metrics JSON output");
  eval_cmd->add_option("--predictions", ea.predictions, "Predictions CSV output");
  eval_cmd->add_option("--batch", ea.batch);
  eval_cmd->callback([&] { action = [&] { return run_eval(ea); }; });

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Classify one image");
  predict_cmd->add_option("--checkpoint", pa.checkpoint)->required();
  predict_cmd->add_option("--image", pa.image)->required();
  predict_cmd->add_option("--topk", pa.topk);
  predict_cmd->callback([&] { action = [&] { return run_predict(pa); }; });

  WaveletArgs wa;
  auto* wavelet_cmd = app.add_subcommand("wavelet", "Dump wavelet subbands of an image");
  wavelet_cmd->add_option("--image", wa.image)->required();
  wavelet_cmd->add_option("--transform", wa.transform)->check(CLI::IsMember({"dwt", "swt"}));
  wavelet_cmd->add_option("--wavelet", wa.wavelet)->check(CLI::IsMember({"haar", "db2"}));
  wavelet_cmd->add_option("--levels", wa.levels);
  wavelet_cmd->add_option("--size", wa.size, "Resize to size×size first (0 keeps the native size)");
  wavelet_cmd->add_option("--out", wa.out)->required();
  wavelet_cmd->callback([&] { action = [&] { return run_wavelet(wa); }; });

  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-5;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--tolerance", gc_tol);
  gc_cmd->callback([&] { action = [&] { return run_gradcheck(gc_seed, gc_tol); }; });

  std::string synth_out;
  std::size_t classes = 10, per_class = 20, size = 64;
  std::uint64_t synth_seed = 42;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic grating dataset");
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--classes", classes);
  synth_cmd->add_option("--per-class", per_class);
  synth_cmd->add_option("--size", size);
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->callback([&] { action = [&] { return run_synth(synth_out, classes, per_class, size, synth_seed); }; });

  std::string pred_csv, report_out;
  auto* report_cmd = app.add_subcommand("report", "Metrics from a predictions CSV");
  report_cmd->add_option("--predictions", pred_csv)->required();
  report_cmd->add_option("--out", report_out);
  report_cmd->callback([&] { action = [&] { return run_report(pred_csv, report_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    return action();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
