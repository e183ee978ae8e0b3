#include "edit/accounting.hpp"

namespace edit {

std::uint64_t CountBreakdown::get(const std::string& component) const {
  for (const auto& item : items)
    if (item.component == component) return item.count;
  return 0;
}

namespace {

void push(CountBreakdown& b, std::string name, std::uint64_t count) {
  b.items.push_back({std::move(name), count});
  b.total += count;
}

}  // namespace

CountBreakdown count_params(const ModelConfig& c, Architecture arch) {
  c.validate();
  const std::uint64_t d = c.width, f = c.ffn_dim();
  CountBreakdown b;
  push(b, "patch_embed", c.patch_dim() * d + d);
  push(b, "pos_embed", c.num_patches() * d);
  push(b, "cls_token", d);
  // q, k, v, out projections with biases; FFN; two norms; optional layer scale.
  std::uint64_t per_layer = 4 * (d * d + d) + (d * f + f) + (f * d + d) + 4 * d;
  if (c.layer_scale) per_layer += 2 * d;
  push(b, "encoder", c.depth * per_layer);
  if (arch == Architecture::Edit) {
    // A depth-0 model has no decoder layer to share.
    std::uint64_t dec = 2 * d * d + 2 * d;
    if (c.decoder_layout == DecoderLayout::Qkvo) dec += 2 * d * d;
    push(b, "decoder_shared", c.depth > 0 ? dec : 0);
  }
  push(b, "final_norm", c.final_norm ? 2 * d : 0);
  push(b, "head", d * c.classes + c.classes);
  return b;
}

CountBreakdown estimate_macs(const ModelConfig& c, Architecture arch) {
  c.validate();
  const std::uint64_t d = c.width, n = c.num_patches(), l = c.depth;
  const std::uint64_t m = arch == Architecture::Edit ? n : n + 1;  // encoder tokens
  CountBreakdown b;
  push(b, "patch_embed", n * c.patch_dim() * d);
  push(b, "encoder_qkv", l * 3 * m * d * d);
  push(b, "encoder_scores", l * m * m * d);
  push(b, "encoder_weighted_values", l * m * m * d);
  push(b, "encoder_out_proj", l * m * d * d);
  push(b, "encoder_ffn", l * 2 * m * d * c.ffn_dim());
  if (arch == Architecture::Edit) {
    const std::uint64_t kv = c.decoder_includes_cls_in_kv ? n + 1 : n;
    const bool qkvo = c.decoder_layout == DecoderLayout::Qkvo;
    if (qkvo) push(b, "decoder_query_proj", l * d * d);
    push(b, "decoder_kv", l * 2 * kv * d * d);
    push(b, "decoder_scores", l * kv * d);
    push(b, "decoder_weighted_values", l * kv * d);
    if (qkvo) push(b, "decoder_out_proj", l * d * d);
  }
  push(b, "head", d * c.classes);
  return b;
}

}  // namespace edit
