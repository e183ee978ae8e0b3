#include <gtest/gtest.h>

#include <cmath>

#include "edit/errors.hpp"
#include "edit/train.hpp"
#include "support/fixtures.hpp"

using namespace edit;
using namespace edit::testing;

namespace {

ModelConfig shapes_config() {
  ModelConfig c;
  c.image_h = c.image_w = 32;
  c.channels = 1;
  c.patch = 8;
  c.width = 16;
  c.heads = 2;
  c.depth = 2;
  c.classes = 3;
  return c;
}

TrainConfig short_run(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.warmup_epochs = 1;
  t.batch_size = 16;
  t.base_lr = 2e-3;
  t.seed = 4;
  return t;
}

template <typename Model>
Model initialized(const ModelConfig& c, std::uint64_t seed) {
  Model m(c);
  Rng rng(seed);
  initialize_parameters(m.parameters(), rng);
  return m;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Tensor> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- loss

TEST(LossTest, UniformLogitsGiveLogK) {
  for (double eps : {0.0, 0.1, 0.5}) {
    const float logits[] = {0.3f, 0.3f, 0.3f, 0.3f, 0.3f};
    EXPECT_NEAR(cross_entropy_label_smoothing(logits, 2, eps), std::log(5.0), 1e-12);
  }
}

TEST(LossTest, PeakedLogitsGiveZero) {
  const float logits[] = {0.0f, 100.0f, 0.0f};
  EXPECT_NEAR(cross_entropy_label_smoothing(logits, 1, 0.0), 0.0, 1e-6);
}

TEST(LossTest, MatchesLongDoubleOracle) {
  const float logits[] = {1.0f, 2.0f, 3.0f};
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  long double want = 0;
  for (int k = 0; k < 3; ++k)
    want -= (0.1L / 3 + (k == 0 ? 0.9L : 0.0L)) * std::log(std::exp(static_cast<long double>(k + 1)) / z);
  EXPECT_NEAR(cross_entropy_label_smoothing(logits, 0, 0.1), static_cast<double>(want), 1e-12);

  Tape t;
  Var v = t.constant(Tensor::matrix({{1, 2, 3}}));
  EXPECT_NEAR(cross_entropy(v, 0, 0.1f).value()[0], static_cast<double>(want), 1e-6);
}

TEST(LossTest, BadArguments) {
  const float logits[] = {1.0f, 2.0f};
  EXPECT_THROW(cross_entropy_label_smoothing(logits, 2, 0.1), BoundsError);
  EXPECT_ANY_THROW(cross_entropy_label_smoothing(logits, 0, 1.0));
}

// ---------------------------------------------------------------- schedule

TEST(ScheduleTest, Landmarks) {
  EXPECT_EQ(cosine_schedule(10, 110, 10, 1e-3, 1e-5), 1e-3);
  EXPECT_EQ(cosine_schedule(110, 110, 10, 1e-3, 1e-5), 1e-5);
  EXPECT_NEAR(cosine_schedule(60, 110, 10, 1e-3, 1e-5), (1e-3 + 1e-5) / 2, 1e-15);
  EXPECT_EQ(cosine_schedule(0, 110, 10, 1e-3, 1e-5), 0.0);
  EXPECT_NEAR(cosine_schedule(5, 110, 10, 1e-3, 1e-5), 5e-4, 1e-18);
  EXPECT_EQ(cosine_schedule(0, 50, 0, 2e-3, 0.0), 2e-3);
}

TEST(ScheduleTest, MonotoneAfterWarmup) {
  double prev = cosine_schedule(20, 200, 20, 1.0, 0.1);
  for (std::size_t s = 21; s <= 200; ++s) {
    const double lr = cosine_schedule(s, 200, 20, 1.0, 0.1);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

// ---------------------------------------------------------------- optimizer

TEST(OptimizerTest, ZeroGradientsWithoutDecayChangeNothing) {
  for (auto kind : {OptimizerKind::SgdMomentum, OptimizerKind::AdamW}) {
    Parameter p("w", Tensor::matrix({{0.3f, -1.7f}}));
    const Tensor before = p.value;
    OptimizerState state(kind);
    Parameter* params[] = {&p};
    for (int i = 0; i < 3; ++i) optimizer_step(params, state, 0.1, 0.0);
    EXPECT_EQ(p.value, before);
  }
}

TEST(OptimizerTest, SgdFirstStepAndMomentum) {
  Parameter p("w", Tensor::matrix({{1.0f, -2.0f}}));
  p.grad = Tensor::matrix({{0.5f, 0.25f}});
  OptimizerState state(OptimizerKind::SgdMomentum);
  Parameter* params[] = {&p};
  optimizer_step(params, state, 0.1, 0.0);
  EXPECT_EQ(p.value[0], 1.0f - 0.1f * 0.5f);
  EXPECT_EQ(p.value[1], -2.0f - 0.1f * 0.25f);
  const float after_first = p.value[0];
  optimizer_step(params, state, 0.1, 0.0);
  EXPECT_FLOAT_EQ(p.value[0], after_first - 0.1f * (0.9f * 0.5f + 0.5f));
}

TEST(OptimizerTest, AdamWTwoStepsMatchHandRecurrence) {
  Parameter p("w", Tensor({1}, 0.8f));
  OptimizerState state(OptimizerKind::AdamW);
  Parameter* params[] = {&p};
  const double grads[] = {0.3, -0.1};
  const double lr = 0.01, wd = 0.05;
  double x = 0.8, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    p.grad[0] = static_cast<float>(grads[t - 1]);
    optimizer_step(params, state, lr, wd);
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= lr * wd * x;
    x -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value[0], x, 1e-6) << "step " << t;
  }
}

TEST(OptimizerTest, WeightDecayExclusion) {
  for (auto kind : {OptimizerKind::SgdMomentum, OptimizerKind::AdamW}) {
    ModelConfig c = micro_config();
    c.layer_scale = true;
    EditModel m = initialized<EditModel>(c, 1);
    for (Parameter* p : m.parameters()) {
      if (p->name.ends_with(".gamma") || p->name.ends_with(".beta") || p->name.ends_with(".scale"))
        p->value.fill(0.7f);
      if (p->name.ends_with(".bias")) p->value.fill(0.2f);
    }
    const auto params = m.parameters();
    const auto before = snapshot(params);
    OptimizerState state(kind);
    optimizer_step(params, state, 0.1, 0.5);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Parameter& p = *params[i];
      const bool excluded = p.name.ends_with(".gamma") || p.name.ends_with(".beta") ||
                            p.name.ends_with(".scale") || p.name == "cls_token";
      EXPECT_EQ(p.weight_decay, !excluded) << p.name;
      if (excluded) {
        EXPECT_EQ(p.value, before[i]) << p.name;
      } else {
        for (std::size_t k = 0; k < p.value.size(); ++k)
          if (before[i][k] != 0.0f) EXPECT_LT(std::abs(p.value[k]), std::abs(before[i][k])) << p.name;
      }
    }
  }
}

// ---------------------------------------------------------------- train

TEST(TrainConfigTest, Validation) {
  TrainConfig t;
  t.warmup_epochs = t.epochs + 1;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.label_smoothing = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.stochastic_depth_rate = 1.0f;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(TrainTest, ZeroLearningRateKeepsParameters) {
  const auto train_set = generate_synthetic_shapes(40, 1);
  auto m = initialized<EditModel>(shapes_config(), 2);
  const auto before = snapshot(m.parameters());
  TrainConfig t = short_run(1);
  t.base_lr = t.min_lr = 0.0;
  train(m, train_set, train_set, t);
  EXPECT_EQ(snapshot(m.parameters()), before);
}

TEST(TrainTest, DeterministicMetricsAndCheckpoints) {
  TempDir dir;
  const auto train_set = generate_synthetic_shapes(48, 1);
  const auto val_set = generate_synthetic_shapes(12, 2, Split::Val);
  TrainConfig t = short_run(2);
  t.horizontal_flip = true;
  t.stochastic_depth_rate = 0.2f;
  std::string csv[2], ckpt[2];
  for (int run = 0; run < 2; ++run) {
    auto m = initialized<EditModel>(shapes_config(), 3);
    const auto path = dir / ("m" + std::to_string(run) + ".edt");
    const auto result = train(m, train_set, val_set, t, path);
    csv[run] = encode_metrics_csv(result.history);
    ckpt[run] = slurp(path);
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_EQ(ckpt[0], ckpt[1]);
  EXPECT_FALSE(ckpt[0].empty());
}

TEST(TrainTest, LearningRateTraceFollowsSchedule) {
  const auto train_set = generate_synthetic_shapes(50, 1);
  auto m = initialized<BaselineVitModel>(shapes_config(), 4);
  TrainConfig t = short_run(3);
  const auto result = train(m, train_set, train_set, t);
  const std::size_t per_epoch = 4;  // ceil(50 / 16)
  ASSERT_EQ(result.lr_trace.size(), 3 * per_epoch);
  for (std::size_t s = 0; s < result.lr_trace.size(); ++s)
    EXPECT_EQ(result.lr_trace[s], cosine_schedule(s, 3 * per_epoch, per_epoch, t.base_lr, t.min_lr));
  ASSERT_EQ(result.history.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(result.history[e].epoch, e + 1);
    EXPECT_EQ(result.history[e].lr, result.lr_trace[(e + 1) * per_epoch - 1]);
    EXPECT_GE(result.history[e].val_top1, 0.0);
    EXPECT_LE(result.history[e].val_top1, 1.0);
  }
}

TEST(TrainTest, LossFallsOverFirstEpochs) {
  const auto train_set = generate_synthetic_shapes(300, 11);
  const auto val_set = generate_synthetic_shapes(30, 12, Split::Val);
  for (bool edit : {true, false}) {
    TrainConfig t = short_run(6);
    t.warmup_epochs = 2;
    t.batch_size = 32;
    ModelConfig c = shapes_config();
    c.width = 48;
    const auto result = edit ? [&] {
      auto m = initialized<EditModel>(c, 5);
      return train(m, train_set, val_set, t);
    }() : [&] {
      auto m = initialized<BaselineVitModel>(c, 5);
      return train(m, train_set, val_set, t);
    }();
    int rises = 0;
    for (std::size_t e = 1; e < 5; ++e)
      rises += result.history[e].train_loss > result.history[e - 1].train_loss;
    EXPECT_LE(rises, 1) << (edit ? "edit" : "baseline");
    EXPECT_LT(result.history[4].train_loss, result.history[0].train_loss);
  }
}

TEST(TrainTest, GeometryAndEmptySplits) {
  auto m = initialized<EditModel>(micro_config(), 6);
  const auto shapes = generate_synthetic_shapes(6, 1);
  EXPECT_THROW(train(m, shapes, shapes, short_run(1)), GeometryError);
  LabeledDataset empty;
  EXPECT_ANY_THROW(train(m, empty, empty, short_run(1)));
  EXPECT_ANY_THROW(evaluate(m, empty));
}

TEST(TrainTest, CopiesStandardizationIntoModel) {
  const auto shapes = generate_synthetic_shapes(6, 1);
  auto m = initialized<EditModel>(shapes_config(), 7);
  TrainConfig t = short_run(1);
  t.base_lr = 0;
  train(m, shapes, shapes, t);
  EXPECT_EQ(m.input_mean, std::vector<float>{kShapesMean});
  EXPECT_EQ(m.input_std, std::vector<float>{kShapesStd});
}

// ---------------------------------------------------------------- evaluate

TEST(EvaluateTest, ConstantPredictionOnBalancedSet) {
  EditModel m(shapes_config());
  zero_all(m.parameters());
  m.backbone.head_b.value = Tensor::matrix({{0, 0, 1}}).reshaped({3});
  EXPECT_NEAR(evaluate(m, generate_synthetic_shapes(30, 1)), 1.0 / 3.0, 1e-12);
  // Ties go to class 0.
  m.backbone.head_b.value.fill(0.0f);
  auto ds = generate_synthetic_shapes(9, 1);
  std::fill(ds.labels.begin(), ds.labels.end(), 0);
  EXPECT_EQ(evaluate(m, ds), 1.0);
}

TEST(EvaluateTest, MatchesExplicitLoop) {
  const auto m = random_model<BaselineVitModel>(shapes_config(), 8, 0.2);
  const auto ds = generate_synthetic_shapes(24, 9);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto logits = baseline_vit_forward(ds.images[i], m).logits;
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (logits[k] > logits[best]) best = k;
    correct += best == ds.labels[i];
  }
  EXPECT_EQ(evaluate(m, ds), static_cast<double>(correct) / 24.0);
  EXPECT_EQ(evaluate(AnyModel(m), ds), evaluate(m, ds));
}

TEST(EvaluateTest, ArgmaxTiesGoLow) {
  const float v[] = {1.0f, 3.0f, 3.0f, 2.0f};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(MetricsCsvTest, Format) {
  const EpochMetrics rows[] = {{1, 1.0986122886681098, 0.5, 0.001}, {2, 0.25, 1.0, 1e-5}};
  EXPECT_EQ(encode_metrics_csv(rows),
            "epoch,train_loss,val_top1,lr\n1,1.09861229,0.5,0.001\n2,0.25,1,1e-05\n");
}
