#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "edit/attention_record.hpp"
#include "edit/autodiff.hpp"
#include "edit/config.hpp"
#include "edit/random.hpp"

namespace edit {

/// h×w×c image, row-major with channels innermost.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

Image make_image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);

/// Splits an image into n = hw/p² rows of p²·c values. Patches run
/// top-left to bottom-right; inside a patch, pixels are row-major with
/// channels innermost.
Tensor patchify(const Image& image, std::size_t patch);

struct EncoderLayerParams {
  Parameter norm1_gamma, norm1_beta;
  Parameter query_w, query_b, key_w, key_b, value_w, value_b, out_w, out_b;
  Parameter norm2_gamma, norm2_beta;
  Parameter ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  std::optional<Parameter> scale1, scale2;  // layer scale

  EncoderLayerParams(std::size_t index, const ModelConfig& config);
  std::vector<Parameter*> parameters();
};

/// Cross-attention weights shared by every decoder layer.
struct DecoderLayerParams {
  Parameter norm_gamma, norm_beta;
  Parameter key_w, value_w;
  std::optional<Parameter> query_w, out_w;  // Qkvo layout only

  explicit DecoderLayerParams(const ModelConfig& config);
  std::vector<Parameter*> parameters();
};

/// Tokenizer, encoder stack and classification head common to both
/// architectures.
struct Backbone {
  Parameter patch_w, patch_b;
  Parameter pos_embed;
  Parameter cls_token;
  std::vector<EncoderLayerParams> encoder;
  std::optional<Parameter> norm_gamma, norm_beta;
  Parameter head_w, head_b;

  explicit Backbone(const ModelConfig& config);
};

/// Encoder-decoder ViT: patch tokens run through the encoder, the [CLS]
/// stream runs through a weight-shared cross-attention decoder aligned
/// layer by layer with the encoder.
class EditModel {
 public:
  explicit EditModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Backbone backbone;
  DecoderLayerParams decoder;
  /// Per-channel input standardization stored alongside the weights.
  std::vector<float> input_mean, input_std;

 private:
  ModelConfig config_;
};

/// Standard ViT with [CLS] at token 0 of the encoder sequence.
class BaselineVitModel {
 public:
  explicit BaselineVitModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Backbone backbone;
  std::vector<float> input_mean, input_std;

 private:
  ModelConfig config_;
};

/// Fills weights with truncated-normal(0.02), biases with zeros, norm
/// gains with ones. Layer-scale gains start at 1e-4.
void initialize_parameters(std::span<Parameter* const> params, Rng& rng);

std::size_t allocated_scalars(std::span<const Parameter* const> params);

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Stochastic-depth draws in training mode; required when the rate is > 0.
  Rng* rng = nullptr;
  bool capture_attention = true;
  bool capture_states = false;
  /// Overrides the config's stochastic-depth rate when >= 0.
  float stochastic_depth_rate = -1.0f;
};

/// Result of a forward pass built on a caller-owned tape.
struct TapeForward {
  Var logits;
  std::vector<AttentionRecord> attention;
  std::vector<Tensor> patch_states;  // p_0 .. p_l
  std::vector<Tensor> cls_states;    // c_0 .. c_l
};

struct ForwardOutput {
  Tensor logits;
  Tensor probabilities;
  std::vector<AttentionRecord> attention;
  std::vector<Tensor> patch_states;
  std::vector<Tensor> cls_states;
};

// Training entry points: parameters are bound to the tape so backward()
// accumulates their gradients.
TapeForward edit_forward(Tape& tape, EditModel& model, const Image& image,
                         const ForwardOptions& options = {});
TapeForward baseline_vit_forward(Tape& tape, BaselineVitModel& model, const Image& image,
                                 const ForwardOptions& options = {});

// Inference entry points; the model is read-only.
ForwardOutput edit_forward(const Image& image, const EditModel& model, Mode mode = Mode::Eval,
                           Rng* rng = nullptr);
ForwardOutput baseline_vit_forward(const Image& image, const BaselineVitModel& model,
                                   Mode mode = Mode::Eval, Rng* rng = nullptr);

// Building blocks, exposed so each sub-layer can be checked on its own.

/// x·E + b + pos
Var embed(Var patches, Var patch_w, Var patch_b, Var pos_embed);

struct SelfAttentionWeights {
  Var query_w, query_b, key_w, key_b, value_w, value_b, out_w, out_b;
};

struct SelfAttentionResult {
  Var output;
  std::vector<Tensor> maps;  // one m×m matrix per head
};

/// Multi-head scaled dot-product self-attention, scaled by sqrt(d/heads).
SelfAttentionResult multi_head_self_attention(Var x, const SelfAttentionWeights& w,
                                              std::size_t heads);

struct EncoderLayerWeights {
  Var norm1_gamma, norm1_beta;
  SelfAttentionWeights attention;
  Var norm2_gamma, norm2_beta;
  Var ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  Var scale1, scale2;  // invalid unless layer scale is on
};

/// Residual branch multipliers; 1 keeps a branch, 0 drops it, 1/(1-rate)
/// keeps and rescales under stochastic depth.
struct BranchScale {
  float attention = 1.0f;
  float ffn = 1.0f;
};

struct EncoderLayerResult {
  Var output;
  std::vector<Tensor> maps;
};

/// a = MSA(LN(z)) + z; z' = FFN(LN(a)) + a
EncoderLayerResult encoder_layer_forward(Var z, const EncoderLayerWeights& w, std::size_t heads,
                                         BranchScale branch = {});

struct DecoderLayerWeights {
  Var norm_gamma, norm_beta, key_w, value_w;
  Var query_w, out_w;  // invalid for KvOnly
};

struct DecoderLayerResult {
  Var cls;
  Tensor map;  // 1×(n+1), or 1×n when [CLS] is excluded from keys/values
};

/// One step of the [CLS] stream: single-head cross-attention from the
/// previous [CLS] state onto itself plus the aligned encoder output.
DecoderLayerResult decoder_layer_forward(Var cls_prev, Var patches, const DecoderLayerWeights& w,
                                         const ModelConfig& config);

}  // namespace edit
