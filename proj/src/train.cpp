#include "edit/train.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace edit {

double cross_entropy_label_smoothing(std::span<const float> logits, std::size_t target,
                                     double smoothing) {
  const std::size_t k = logits.size();
  if (target >= k) {
    throw BoundsError("target " + std::to_string(target) + " outside " + std::to_string(k) +
                      " classes");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw std::invalid_argument("label smoothing must lie in [0, 1)");
  }
  double mx = logits[0];
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double total = 0.0;
  for (float v : logits) total += std::exp(v - mx);
  const double log_total = std::log(total) + mx;
  double loss = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double t = smoothing / static_cast<double>(k) + (c == target ? 1.0 - smoothing : 0.0);
    loss -= t * (logits[c] - log_total);
  }
  return loss;
}

double cosine_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
                       double base_lr, double min_lr) {
  if (warmup_steps > total_steps) {
    throw std::invalid_argument("warmup_steps exceeds total_steps");
  }
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (step >= total_steps) return min_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return min_lr + (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

void optimizer_step(std::span<Parameter* const> params, OptimizerState& state, double lr,
                    double weight_decay) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      if (state.kind == OptimizerKind::AdamW) state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  ++state.steps;
  const float lr_f = static_cast<float>(lr);
  if (state.kind == OptimizerKind::SgdMomentum) {
    constexpr float momentum = 0.9f;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      Tensor& buf = state.first_moment[i];
      const float wd = p.weight_decay ? static_cast<float>(weight_decay) : 0.0f;
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        float g = p.grad[k];
        if (wd != 0.0f) g += wd * p.value[k];
        buf[k] = state.steps == 1 ? g : momentum * buf[k] + g;
        p.value[k] -= lr_f * buf[k];
      }
    }
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.steps));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const bool decay = p.weight_decay && weight_decay != 0.0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = static_cast<float>(beta1 * m[k] + (1.0 - beta1) * g);
      v[k] = static_cast<float>(beta2 * v[k] + (1.0 - beta2) * g * g);
      double x = p.value[k];
      if (decay) x -= lr * weight_decay * x;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      x -= lr * m_hat / (std::sqrt(v_hat) + eps);
      p.value[k] = static_cast<float>(x);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (warmup_epochs > epochs) throw ConfigError("warmup_epochs exceeds epochs");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label_smoothing must lie in [0, 1)");
  }
  if (!(stochastic_depth_rate >= 0.0f && stochastic_depth_rate < 1.0f)) {
    throw ConfigError("stochastic_depth_rate must lie in [0, 1)");
  }
  if (base_lr < 0.0 || min_lr < 0.0 || weight_decay < 0.0) {
    throw ConfigError("learning rates and weight decay must be non-negative");
  }
}

std::size_t argmax(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

TapeForward run_forward(Tape& tape, EditModel& m, const Image& img, const ForwardOptions& o) {
  return edit_forward(tape, m, img, o);
}
TapeForward run_forward(Tape& tape, BaselineVitModel& m, const Image& img,
                        const ForwardOptions& o) {
  return baseline_vit_forward(tape, m, img, o);
}
ForwardOutput run_inference(const EditModel& m, const Image& img) { return edit_forward(img, m); }
ForwardOutput run_inference(const BaselineVitModel& m, const Image& img) {
  return baseline_vit_forward(img, m);
}

template <typename Model>
double evaluate_impl(const Model& model, const LabeledDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ForwardOutput out = run_inference(model, dataset.images[i]);
    if (argmax(out.logits.data()) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

void check_dataset(const ModelConfig& c, const LabeledDataset& ds, const char* which) {
  if (ds.empty()) throw std::invalid_argument(std::string(which) + " split is empty");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image& img = ds.images[i];
    if (img.height != c.image_h || img.width != c.image_w || img.channels != c.channels) {
      throw GeometryError(std::string(which) + " image " + std::to_string(i) +
                          " does not match the model input geometry");
    }
    if (ds.labels[i] >= c.classes) {
      throw BoundsError(std::string(which) + " label " + std::to_string(ds.labels[i]) +
                        " outside " + std::to_string(c.classes) + " classes");
    }
  }
}

Image flipped(const Image& img) {
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

template <typename Model>
TrainResult train_impl(Model& model, const LabeledDataset& train_set,
                       const LabeledDataset& val_set, const TrainConfig& config,
                       const std::filesystem::path& checkpoint, const EpochCallback& on_epoch) {
  config.validate();
  check_dataset(model.config(), train_set, "train");
  check_dataset(model.config(), val_set, "val");
  if (!train_set.mean.empty()) {
    model.input_mean = train_set.mean;
    model.input_std = train_set.std;
  }

  Rng rng(config.seed ^ 0x5DEECE66DULL);
  const auto params = model.parameters();
  OptimizerState opt(config.optimizer);
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const std::size_t warmup_steps = steps_per_epoch * config.warmup_epochs;

  ForwardOptions fwd;
  fwd.mode = Mode::Train;
  fwd.rng = &rng;
  fwd.capture_attention = false;
  fwd.stochastic_depth_rate = config.stochastic_depth_rate;

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - start);
      for (Parameter* p : params) p->zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const bool flip = config.horizontal_flip && rng.uniform() < 0.5;
        const Image& img = train_set.images[idx];
        Tape tape;
        TapeForward f = flip ? run_forward(tape, model, flipped(img), fwd)
                             : run_forward(tape, model, img, fwd);
        Var loss = cross_entropy(f.logits, train_set.labels[idx],
                                 static_cast<float>(config.label_smoothing));
        loss_sum += loss.value()[0];
        tape.backward(scale(loss, inv_batch));
      }
      lr = cosine_schedule(step, total_steps, warmup_steps, config.base_lr, config.min_lr);
      result.lr_trace.push_back(lr);
      optimizer_step(params, opt, lr, config.weight_decay);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.val_top1 = evaluate_impl(model, val_set);
    m.lr = lr;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  if (!checkpoint.empty()) save_checkpoint(model, checkpoint);
  return result;
}

}  // namespace

TrainResult train(EditModel& model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config, const std::filesystem::path& checkpoint,
                  const EpochCallback& on_epoch) {
  return train_impl(model, train_set, val_set, config, checkpoint, on_epoch);
}

TrainResult train(BaselineVitModel& model, const LabeledDataset& train_set,
                  const LabeledDataset& val_set, const TrainConfig& config,
                  const std::filesystem::path& checkpoint, const EpochCallback& on_epoch) {
  return train_impl(model, train_set, val_set, config, checkpoint, on_epoch);
}

double evaluate(const EditModel& model, const LabeledDataset& dataset) {
  return evaluate_impl(model, dataset);
}
double evaluate(const BaselineVitModel& model, const LabeledDataset& dataset) {
  return evaluate_impl(model, dataset);
}
double evaluate(const AnyModel& model, const LabeledDataset& dataset) {
  return std::visit([&](const auto& m) { return evaluate_impl(m, dataset); }, model);
}

std::string encode_metrics_csv(std::span<const EpochMetrics> history) {
  std::string out = "epoch,train_loss,val_top1,lr\n";
  char buf[128];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", m.epoch, m.train_loss, m.val_top1,
                  m.lr);
    out += buf;
  }
  return out;
}

}  // namespace edit
