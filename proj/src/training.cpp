#include "ogaw/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ogaw/error.hpp"
#include "ogaw/rng.hpp"

namespace ogaw {

std::string format_curves_csv(std::span<const CurveRow> rows) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                  r.val_acc);
    out += buf;
  }
  return out;
}

void write_curves_csv(std::span<const CurveRow> rows, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write curves '" + path + "'");
  out << format_curves_csv(rows);
  if (!out) throw IoError("failed writing curves '" + path + "'");
}

namespace {

std::size_t argmax_row(std::span<const double> logits, std::size_t row, std::size_t c) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c; ++k) {
    if (logits[row * c + k] > logits[row * c + best]) best = k;
  }
  return best;
}

std::size_t count_correct(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto d = logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += static_cast<int>(argmax_row(d, i, c)) == labels[i];
  return correct;
}

void check_dataset(const Dataset& d, const Model& model, const char* what) {
  if (d.size() == 0) throw ValidationError(std::string("train: ") + what + " set is empty");
  const auto& mc = model.config();
  const Shape want{d.size(), mc.in_channels, mc.image_size, mc.image_size};
  if (d.images.shape() != want) {
    throw DimensionError(std::string("train: ") + what + " images are " + shape_string(d.images.shape()) +
                         ", model expects " + shape_string(want));
  }
  for (int l : d.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= mc.num_classes) {
      throw ValidationError(std::string("train: ") + what + " label " + std::to_string(l) +
                            " exceeds the model's class count");
    }
  }
}

}  // namespace

EvalResult evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ValidationError("evaluate: empty dataset");
  if (batch_size == 0) throw ValidationError("evaluate: batch_size must be positive");
  const std::size_t n = data.size(), c = model.config().num_classes;
  EvalResult r;
  std::vector<double> probs(n * c);
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const Dataset batch = data.subset(idx);
    const auto loss = model.forward_loss(batch.images, batch.labels, Mode::Eval);
    loss_sum += loss.cross_entropy.item() * static_cast<double>(idx.size());
    correct += count_correct(loss.logits, batch.labels);
    const Tensor p = softmax(loss.logits, 1);
    std::copy(p.data().begin(), p.data().end(), probs.begin() + static_cast<std::ptrdiff_t>(start * c));
  }
  r.loss = loss_sum / static_cast<double>(n);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.probabilities = Tensor(Shape{n, c}, std::move(probs));
  auto pd = r.probabilities.data();
  for (std::size_t i = 0; i < n; ++i) r.predicted.push_back(static_cast<int>(argmax_row(pd, i, c)));
  return r;
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::function<void(const CurveRow&)>& on_epoch, PayloadType payload) {
  cfg.validate();
  check_dataset(train_set, model, "train");
  check_dataset(val_set, model, "validation");
  const auto& class_names = train_set.class_names;

  TrainResult result;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      Rng rng = Rng::derived(cfg.seed, epoch);
      rng.shuffle(order);
    }
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const Dataset batch =
          train_set.subset(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                    order.begin() + static_cast<std::ptrdiff_t>(end)));
      model.store().zero_grad();
      Tape tape;
      const auto loss = model.forward_loss(batch.images, batch.labels, Mode::Train);
      tape.backward(loss.total);
      adam_step_all(model.store(), cfg);
      loss_sum += loss.cross_entropy.item() * static_cast<double>(end - start);
      correct += count_correct(loss.logits, batch.labels);
    }
    CurveRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n);
    row.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    const EvalResult val = evaluate(model, val_set, cfg.batch_size);
    row.val_loss = val.loss;
    row.val_acc = val.accuracy;
    result.curves.push_back(row);
    if (epoch == 1 || row.val_acc > result.best_val_acc) {
      result.best_val_acc = row.val_acc;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(model, cfg, class_names, payload);
    }
    if (on_epoch) on_epoch(row);
  }
  model.store().zero_grad();
  result.final_checkpoint = serialize_checkpoint(model, cfg, class_names, payload);
  return result;
}

}  // namespace ogaw
