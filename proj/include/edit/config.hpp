#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace edit {

enum class DecoderLayout { KvOnly, Qkvo };
enum class DecoderNorm { Pre, Post };
enum class Architecture { Edit, Baseline };

/// Geometry and layout of an EDIT or baseline ViT model.
struct ModelConfig {
  std::size_t image_h = 32;
  std::size_t image_w = 32;
  std::size_t channels = 1;
  std::size_t patch = 8;
  std::size_t width = 16;
  std::size_t heads = 2;
  std::size_t depth = 2;
  std::size_t classes = 3;
  DecoderLayout decoder_layout = DecoderLayout::KvOnly;
  bool decoder_includes_cls_in_kv = true;
  DecoderNorm decoder_norm = DecoderNorm::Pre;
  bool final_norm = true;
  bool layer_scale = false;
  float stochastic_depth_rate = 0.0f;

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t num_patches() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t head_dim() const { return width / heads; }
  std::size_t ffn_dim() const { return 4 * width; }

  /// Throws GeometryError / ConfigError when an invariant is violated.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Presets: tiny (192/3), small (384/6), base (768/12); depth 12,
/// patch 16, 224² RGB input, 1000 classes.
ModelConfig preset_config(std::string_view name);

std::string_view to_string(DecoderLayout v);
std::string_view to_string(DecoderNorm v);
std::string_view to_string(Architecture v);

}  // namespace edit
