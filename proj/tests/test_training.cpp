#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "ogaw/error.hpp"
#include "ogaw/optim.hpp"
#include "ogaw/training.hpp"

using namespace ogaw;

namespace {

Parameter scalar_param(double theta) { return Parameter("p", Tensor(Shape{1}, theta)); }

TrainConfig plain(double lr, double wd) {
  TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.weight_decay = wd;
  return cfg;
}

ModelConfig mini() {
  ModelConfig c;
  c.image_size = 16;
  c.num_classes = 3;
  c.encoder_widths = {4, 8};
  c.classifier_widths = {4, 4};
  c.oga_reduction_ratio = 2;
  return c;
}

Dataset random_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.images = oracle::random_tensor({n, 3, 16, 16}, rng, 0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<int>(i % 3));
    d.ids.push_back("img" + std::to_string(i));
  }
  d.class_names = {"a", "b", "c"};
  return d;
}

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Adam, FirstStepUnitGradient) {
  Parameter p = scalar_param(0.0);
  const std::vector<double> g{1.0};
  adam_step(p, g, plain(0.001, 0.0));
  EXPECT_NEAR(p.tensor.item(), -0.001 / (1 + 1e-8), 1e-18);
  EXPECT_NEAR(p.tensor.item(), -0.000999999990, 1e-14);
  EXPECT_EQ(p.step_count, 1u);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  Parameter p = scalar_param(0.75);
  const std::vector<double> g{0.0};
  for (int i = 0; i < 5; ++i) adam_step(p, g, plain(0.001, 0.0));
  EXPECT_EQ(p.tensor.item(), 0.75);
}

TEST(Adam, WeightDecayOnlyStep) {
  Parameter p = scalar_param(1.0);
  const std::vector<double> g{0.0};
  adam_step(p, g, plain(0.001, 1e-5));
  oracle::AdamTrace ref{1.0};
  ref.step(0.0, 0.001, 1e-5);
  EXPECT_NEAR(p.tensor.item(), ref.theta, 1e-15);
  EXPECT_NEAR(1.0 - p.tensor.item(), 0.001 * 1e-5 / (1e-5 + 1e-8), 1e-15);
}

TEST(Adam, MatchesTraceOracle) {
  Rng rng(3);
  Parameter p = scalar_param(0.3);
  oracle::AdamTrace ref{0.3};
  for (int i = 0; i < 100; ++i) {
    const double grad = rng.uniform(-2, 2), lr = rng.uniform(0, 0.01), wd = rng.uniform(0, 1e-3);
    const std::vector<double> g{grad};
    adam_step(p, g, plain(lr, wd));
    ref.step(grad, lr, wd);
    ASSERT_LE(std::abs(p.tensor.item() - ref.theta), 1e-12) << "step " << i;
  }
  EXPECT_LE(std::abs(p.adam_m[0] - ref.m), 1e-12);
  EXPECT_LE(std::abs(p.adam_v[0] - ref.v), 1e-12);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter p("encoder.stem.conv.weight", Tensor(Shape{2}, 0.0));
  const std::vector<double> g{0.0, NAN};
  try {
    adam_step(p, g, plain(0.001, 0.0));
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.stem.conv.weight"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.learning_rate = -0.1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.weight_decay = -1e-5;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Training, ZeroLearningRateFreezesParameters) {
  Model m(mini(), 1);
  std::vector<std::vector<double>> before;
  for (const auto& p : m.store().parameters()) before.push_back(vec(p.tensor));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  cfg.shuffle = false;
  const auto r = train(m, random_dataset(10, 1), random_dataset(6, 2), cfg);
  ASSERT_EQ(r.curves.size(), 3u);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_EQ(vec(m.store().parameters()[i].tensor), before[i]) << m.store().parameters()[i].name;
  for (const auto& row : r.curves) EXPECT_NEAR(row.train_loss, r.curves[0].train_loss, 1e-12);
}

TEST(Training, SameSeedIsBitwiseReproducible) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 9;
  auto run = [&] {
    Model m(mini(), 5);
    return train(m, random_dataset(12, 3), random_dataset(6, 4), cfg);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(format_curves_csv(a.curves), format_curves_csv(b.curves));
  for (std::size_t i = 0; i < a.curves.size(); ++i) {
    EXPECT_EQ(a.curves[i].train_loss, b.curves[i].train_loss);
    EXPECT_EQ(a.curves[i].val_loss, b.curves[i].val_loss);
  }
  EXPECT_EQ(a.final_checkpoint, b.final_checkpoint);
  EXPECT_EQ(a.best_checkpoint, b.best_checkpoint);
}

TEST(Training, CurvesAndBestCheckpoint) {
  Model m(mini(), 6);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 5;
  cfg.learning_rate = 0.01;
  std::vector<std::size_t> seen;
  const auto r = train(m, random_dataset(12, 5), random_dataset(9, 6), cfg,
                       [&](const CurveRow& row) { seen.push_back(row.epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& row : r.curves) {
    EXPECT_GE(row.train_acc, 0.0);
    EXPECT_LE(row.train_acc, 1.0);
    EXPECT_GE(row.val_acc, 0.0);
    EXPECT_LE(row.val_acc, 1.0);
    EXPECT_GE(row.train_loss, 0.0);
    EXPECT_GE(row.val_loss, 0.0);
    if (row.val_acc > best) {
      best = row.val_acc;
      best_epoch = row.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_acc, best);

  // The final checkpoint holds the trained weights.
  const auto loaded = parse_checkpoint(r.final_checkpoint);
  for (const auto& p : m.store().parameters()) EXPECT_EQ(vec(loaded.model.store().tensor(p.name)), vec(p.tensor));
  EXPECT_EQ(loaded.class_names, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Training, EmptyDatasetRejected) {
  Model m(mini(), 7);
  Dataset empty;
  empty.class_names = {"a", "b", "c"};
  EXPECT_THROW(train(m, empty, random_dataset(3, 1), TrainConfig{}), ValidationError);
}

TEST(Training, LabelOutOfRangeRejected) {
  Model m(mini(), 7);
  Dataset d = random_dataset(4, 1);
  d.labels[2] = 5;
  EXPECT_THROW(train(m, d, random_dataset(3, 1), TrainConfig{}), ValidationError);
}

TEST(Evaluate, ProbabilitiesAndPredictions) {
  Model m(mini(), 8);
  const Dataset d = random_dataset(7, 9);
  const auto a = evaluate(m, d, 3);
  const auto b = evaluate(m, d, 7);
  ASSERT_EQ(a.probabilities.shape(), (Shape{7, 3}));
  EXPECT_LE(oracle::max_abs_diff(a.probabilities.data(), b.probabilities.data()), 1e-12);
  double nll = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0;
    int arg = 0;
    for (int k = 0; k < 3; ++k) {
      s += a.probabilities.at(i * 3 + k);
      if (a.probabilities.at(i * 3 + k) > a.probabilities.at(i * 3 + arg)) arg = k;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(a.predicted[i], arg);
    nll -= std::log(a.probabilities.at(i * 3 + d.labels[i]));
    correct += arg == d.labels[i];
  }
  EXPECT_NEAR(a.loss, nll / 7, 1e-12);
  EXPECT_DOUBLE_EQ(a.accuracy, correct / 7.0);
}

TEST(CurvesCsv, Format) {
  const std::vector<CurveRow> rows{{1, 2.302585, 0.1, 2.25, 0.125}, {2, 1.5, 0.5, 1.75, 1.0 / 3}};
  EXPECT_EQ(format_curves_csv(rows),
            "epoch,train_loss,train_acc,val_loss,val_acc\n"
            "1,2.302585,0.100000,2.250000,0.125000\n"
            "2,1.500000,0.500000,1.750000,0.333333\n");
}
