#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edit/checkpoint.hpp"
#include "edit/data.hpp"
#include "edit/model.hpp"

namespace edit {

/// −Σ t_k log p_k with t = (1−ε)·onehot(target) + ε/K, via a stable
/// log-softmax.
double cross_entropy_label_smoothing(std::span<const float> logits, std::size_t target,
                                     double smoothing);

/// Linear warmup from 0 to base_lr over warmup_steps, then cosine decay to
/// min_lr at total_steps.
double cosine_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
                       double base_lr, double min_lr);

enum class OptimizerKind { SgdMomentum, AdamW };

/// SGD uses momentum 0.9 with weight decay added to the gradient; AdamW
/// uses β=(0.9, 0.999), eps 1e-8 and decoupled decay. Parameters with
/// weight_decay == false are never decayed.
struct OptimizerState {
  explicit OptimizerState(OptimizerKind kind = OptimizerKind::AdamW) : kind(kind) {}

  OptimizerKind kind;
  std::uint64_t steps = 0;
  std::vector<Tensor> first_moment;   // momentum buffer for SGD
  std::vector<Tensor> second_moment;  // AdamW only
};

void optimizer_step(std::span<Parameter* const> params, OptimizerState& state, double lr,
                    double weight_decay);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double base_lr = 1e-3;
  double min_lr = 1e-5;
  std::size_t warmup_epochs = 5;
  double weight_decay = 0.05;
  double label_smoothing = 0.1;
  float stochastic_depth_rate = 0.0f;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  bool horizontal_flip = false;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double lr = 0.0;  // learning rate of the epoch's last step
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::vector<double> lr_trace;  // one entry per optimizer step
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch training. Samples of a batch are processed in shuffled order,
/// one tape each, and their gradients summed in that order before being
/// divided by the batch size. Everything random derives from config.seed.
/// Writes a checkpoint when `checkpoint` is non-empty.
TrainResult train(EditModel& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config, const std::filesystem::path& checkpoint = {},
                  const EpochCallback& on_epoch = {});
TrainResult train(BaselineVitModel& model, const LabeledDataset& train_set,
                  const LabeledDataset& val_set, const TrainConfig& config,
                  const std::filesystem::path& checkpoint = {},
                  const EpochCallback& on_epoch = {});

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const float> values);

/// Top-1 accuracy.
double evaluate(const EditModel& model, const LabeledDataset& dataset);
double evaluate(const BaselineVitModel& model, const LabeledDataset& dataset);
double evaluate(const AnyModel& model, const LabeledDataset& dataset);

/// "epoch,train_loss,val_top1,lr" with 9 significant digits.
std::string encode_metrics_csv(std::span<const EpochMetrics> history);

}  // namespace edit
