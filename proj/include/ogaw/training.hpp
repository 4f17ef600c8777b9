#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ogaw/checkpoint.hpp"
#include "ogaw/data.hpp"
#include "ogaw/model.hpp"
#include "ogaw/optim.hpp"

namespace ogaw {

struct CurveRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
};

/// Header `epoch,train_loss,train_acc,val_loss,val_acc`, six decimals.
std::string format_curves_csv(std::span<const CurveRow> rows);
void write_curves_csv(std::span<const CurveRow> rows, const std::string& path);

struct EvalResult {
  double loss = 0, accuracy = 0;
  Tensor probabilities;  // [N,C]
  std::vector<int> predicted;
};

/// Eval-mode pass in batches, no gradient tracking.
EvalResult evaluate(Model& model, const Dataset& data, std::size_t batch_size);

struct TrainResult {
  std::vector<CurveRow> curves;
  std::size_t best_epoch = 0;
  double best_val_acc = 0;
  std::vector<std::uint8_t> best_checkpoint, final_checkpoint;
};

/// Mini-batch Adam over `train_set`. Epoch e visits samples in the order of
/// Rng::derived(cfg.seed, e) when cfg.shuffle is set. train_loss/train_acc
/// average over the epoch's train-mode batches; val_* come from evaluate().
/// The best checkpoint is the first epoch with the highest val accuracy.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::function<void(const CurveRow&)>& on_epoch = {},
                  PayloadType payload = PayloadType::F64);

}  // namespace ogaw
