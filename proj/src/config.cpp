#include "edit/config.hpp"

#include "edit/errors.hpp"

namespace edit {

void ModelConfig::validate() const {
  if (patch == 0) throw GeometryError("patch size must be positive");
  if (image_h == 0 || image_w == 0 || channels == 0) {
    throw GeometryError("image dimensions must be positive");
  }
  if (image_h % patch != 0 || image_w % patch != 0) {
    throw GeometryError("image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                        " is not divisible by patch size " + std::to_string(patch));
  }
  if (width == 0 || heads == 0 || width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (classes == 0) throw ConfigError("classes must be positive");
  if (!(stochastic_depth_rate >= 0.0f && stochastic_depth_rate < 1.0f)) {
    throw ConfigError("stochastic_depth_rate must lie in [0, 1)");
  }
}

ModelConfig preset_config(std::string_view name) {
  ModelConfig c;
  c.image_h = c.image_w = 224;
  c.channels = 3;
  c.patch = 16;
  c.depth = 12;
  c.classes = 1000;
  if (name == "tiny") {
    c.width = 192;
    c.heads = 3;
  } else if (name == "small") {
    c.width = 384;
    c.heads = 6;
  } else if (name == "base") {
    c.width = 768;
    c.heads = 12;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected tiny, small or base)");
  }
  return c;
}

std::string_view to_string(DecoderLayout v) {
  return v == DecoderLayout::KvOnly ? "kv_only" : "qkvo";
}
std::string_view to_string(DecoderNorm v) { return v == DecoderNorm::Pre ? "pre" : "post"; }
std::string_view to_string(Architecture v) {
  return v == Architecture::Edit ? "edit" : "baseline";
}

}  // namespace edit
