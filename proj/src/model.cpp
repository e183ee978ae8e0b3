#include "edit/model.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace edit {

Image make_image(std::size_t height, std::size_t width, std::size_t channels, float fill) {
  return Image{height, width, channels, std::vector<float>(height * width * channels, fill)};
}

Tensor patchify(const Image& image, std::size_t patch) {
  if (patch == 0 || image.height == 0 || image.width == 0 || image.channels == 0 ||
      image.height % patch != 0 || image.width % patch != 0) {
    throw GeometryError("image " + std::to_string(image.height) + "x" +
                        std::to_string(image.width) + " cannot be tiled by " +
                        std::to_string(patch) + "-pixel patches");
  }
  if (image.pixels.size() != image.height * image.width * image.channels) {
    throw GeometryError("image pixel buffer does not match its dimensions");
  }
  const std::size_t gh = image.height / patch, gw = image.width / patch;
  const std::size_t c = image.channels;
  Tensor out({gh * gw, patch * patch * c});
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      auto row = out.row(py * gw + px);
      std::size_t k = 0;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t ch = 0; ch < c; ++ch)
            row[k++] = image.at(py * patch + y, px * patch + x, ch);
    }
  }
  return out;
}

// ---------------------------------------------------------------- params

namespace {

Parameter weight(std::string name, std::size_t rows, std::size_t cols) {
  return Parameter(std::move(name), Tensor({rows, cols}));
}
Parameter bias(std::string name, std::size_t n) { return Parameter(std::move(name), Tensor({n})); }
Parameter norm_gain(std::string name, std::size_t n) {
  return Parameter(std::move(name), Tensor({n}, 1.0f), false);
}
Parameter norm_shift(std::string name, std::size_t n) {
  return Parameter(std::move(name), Tensor({n}), false);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

EncoderLayerParams::EncoderLayerParams(std::size_t index, const ModelConfig& c)
    : norm1_gamma(norm_gain("encoder." + std::to_string(index) + ".norm1.gamma", c.width)),
      norm1_beta(norm_shift("encoder." + std::to_string(index) + ".norm1.beta", c.width)),
      query_w(weight("encoder." + std::to_string(index) + ".attn.query.weight", c.width, c.width)),
      query_b(bias("encoder." + std::to_string(index) + ".attn.query.bias", c.width)),
      key_w(weight("encoder." + std::to_string(index) + ".attn.key.weight", c.width, c.width)),
      key_b(bias("encoder." + std::to_string(index) + ".attn.key.bias", c.width)),
      value_w(weight("encoder." + std::to_string(index) + ".attn.value.weight", c.width, c.width)),
      value_b(bias("encoder." + std::to_string(index) + ".attn.value.bias", c.width)),
      out_w(weight("encoder." + std::to_string(index) + ".attn.out.weight", c.width, c.width)),
      out_b(bias("encoder." + std::to_string(index) + ".attn.out.bias", c.width)),
      norm2_gamma(norm_gain("encoder." + std::to_string(index) + ".norm2.gamma", c.width)),
      norm2_beta(norm_shift("encoder." + std::to_string(index) + ".norm2.beta", c.width)),
      ffn_in_w(weight("encoder." + std::to_string(index) + ".ffn.in.weight", c.width, c.ffn_dim())),
      ffn_in_b(bias("encoder." + std::to_string(index) + ".ffn.in.bias", c.ffn_dim())),
      ffn_out_w(weight("encoder." + std::to_string(index) + ".ffn.out.weight", c.ffn_dim(), c.width)),
      ffn_out_b(bias("encoder." + std::to_string(index) + ".ffn.out.bias", c.width)) {
  if (c.layer_scale) {
    scale1.emplace("encoder." + std::to_string(index) + ".attn.scale", Tensor({c.width}, 1e-4f), false);
    scale2.emplace("encoder." + std::to_string(index) + ".ffn.scale", Tensor({c.width}, 1e-4f), false);
  }
}

std::vector<Parameter*> EncoderLayerParams::parameters() {
  std::vector<Parameter*> out{&norm1_gamma, &norm1_beta, &query_w, &query_b, &key_w,
                              &key_b,       &value_w,    &value_b, &out_w,   &out_b};
  if (scale1) out.push_back(&*scale1);
  for (Parameter* p : {&norm2_gamma, &norm2_beta, &ffn_in_w, &ffn_in_b, &ffn_out_w, &ffn_out_b})
    out.push_back(p);
  if (scale2) out.push_back(&*scale2);
  return out;
}

DecoderLayerParams::DecoderLayerParams(const ModelConfig& c)
    : norm_gamma(norm_gain("decoder.norm.gamma", c.width)),
      norm_beta(norm_shift("decoder.norm.beta", c.width)),
      key_w(weight("decoder.key.weight", c.width, c.width)),
      value_w(weight("decoder.value.weight", c.width, c.width)) {
  if (c.decoder_layout == DecoderLayout::Qkvo) {
    query_w.emplace(weight("decoder.query.weight", c.width, c.width));
    out_w.emplace(weight("decoder.out.weight", c.width, c.width));
  }
}

std::vector<Parameter*> DecoderLayerParams::parameters() {
  std::vector<Parameter*> out{&norm_gamma, &norm_beta};
  if (query_w) out.push_back(&*query_w);
  out.push_back(&key_w);
  out.push_back(&value_w);
  if (out_w) out.push_back(&*out_w);
  return out;
}

Backbone::Backbone(const ModelConfig& c)
    : patch_w(weight("patch_embed.weight", c.patch_dim(), c.width)),
      patch_b(bias("patch_embed.bias", c.width)),
      pos_embed(weight("pos_embed", c.num_patches(), c.width)),
      cls_token(Parameter("cls_token", Tensor({c.width}), false)),
      head_w(weight("head.weight", c.width, c.classes)),
      head_b(bias("head.bias", c.classes)) {
  encoder.reserve(c.depth);
  for (std::size_t i = 0; i < c.depth; ++i) encoder.emplace_back(i, c);
  if (c.final_norm) {
    norm_gamma.emplace(norm_gain("norm.gamma", c.width));
    norm_beta.emplace(norm_shift("norm.beta", c.width));
  }
}

namespace {

void append_backbone_head(Backbone& b, std::vector<Parameter*>& out) {
  if (b.norm_gamma) {
    out.push_back(&*b.norm_gamma);
    out.push_back(&*b.norm_beta);
  }
  out.push_back(&b.head_w);
  out.push_back(&b.head_b);
}

void append_backbone_body(Backbone& b, std::vector<Parameter*>& out) {
  for (Parameter* p : {&b.patch_w, &b.patch_b, &b.pos_embed, &b.cls_token}) out.push_back(p);
  for (auto& layer : b.encoder) {
    auto ps = layer.parameters();
    out.insert(out.end(), ps.begin(), ps.end());
  }
}

template <typename Model>
std::vector<const Parameter*> as_const(const Model& m) {
  auto ps = const_cast<Model&>(m).parameters();
  return {ps.begin(), ps.end()};
}

const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}

}  // namespace

EditModel::EditModel(const ModelConfig& config)
    : backbone(validated(config)),
      decoder(config),
      input_mean(config.channels, 0.0f),
      input_std(config.channels, 1.0f),
      config_(config) {}

std::vector<Parameter*> EditModel::parameters() {
  std::vector<Parameter*> out;
  append_backbone_body(backbone, out);
  if (config_.depth > 0) {
    auto dec = decoder.parameters();
    out.insert(out.end(), dec.begin(), dec.end());
  }
  append_backbone_head(backbone, out);
  return out;
}

std::vector<const Parameter*> EditModel::parameters() const { return as_const(*this); }

BaselineVitModel::BaselineVitModel(const ModelConfig& config)
    : backbone(validated(config)),
      input_mean(config.channels, 0.0f),
      input_std(config.channels, 1.0f),
      config_(config) {}

std::vector<Parameter*> BaselineVitModel::parameters() {
  std::vector<Parameter*> out;
  append_backbone_body(backbone, out);
  append_backbone_head(backbone, out);
  return out;
}

std::vector<const Parameter*> BaselineVitModel::parameters() const { return as_const(*this); }

void initialize_parameters(std::span<Parameter* const> params, Rng& rng) {
  for (Parameter* p : params) {
    const std::string& n = p->name;
    if (ends_with(n, ".gamma")) {
      p->value.fill(1.0f);
    } else if (ends_with(n, ".beta") || ends_with(n, ".bias")) {
      p->value.fill(0.0f);
    } else if (ends_with(n, ".scale")) {
      p->value.fill(1e-4f);
    } else {
      for (float& v : p->value.data()) v = static_cast<float>(rng.truncated_normal(0.02));
    }
  }
}

std::size_t allocated_scalars(std::span<const Parameter* const> params) {
  std::size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  return total;
}

// ---------------------------------------------------------------- layers

Var embed(Var patches, Var patch_w, Var patch_b, Var pos_embed) {
  return add(linear(patches, patch_w, patch_b), pos_embed);
}

SelfAttentionResult multi_head_self_attention(Var x, const SelfAttentionWeights& w,
                                              std::size_t heads) {
  const std::size_t d = x.value().cols();
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("width " + std::to_string(d) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  const float inv_scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Var q = linear(x, w.query_w, w.query_b);
  Var k = linear(x, w.key_w, w.key_b);
  Var v = linear(x, w.value_w, w.value_b);

  SelfAttentionResult result;
  std::vector<Var> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_scale));
    result.maps.push_back(attn.value());
    head_out.push_back(matmul(attn, vh));
  }
  Var merged = heads == 1 ? head_out[0] : concat_cols(head_out);
  result.output = linear(merged, w.out_w, w.out_b);
  return result;
}

EncoderLayerResult encoder_layer_forward(Var z, const EncoderLayerWeights& w, std::size_t heads,
                                         BranchScale branch) {
  EncoderLayerResult result;
  auto attn = multi_head_self_attention(layer_norm(z, w.norm1_gamma, w.norm1_beta), w.attention,
                                        heads);
  result.maps = std::move(attn.maps);
  Var branch1 = attn.output;
  if (w.scale1.valid()) branch1 = mul_row(branch1, w.scale1);
  if (branch.attention != 1.0f) branch1 = scale(branch1, branch.attention);
  Var a = add(z, branch1);

  Var hidden = gelu(linear(layer_norm(a, w.norm2_gamma, w.norm2_beta), w.ffn_in_w, w.ffn_in_b));
  Var branch2 = linear(hidden, w.ffn_out_w, w.ffn_out_b);
  if (w.scale2.valid()) branch2 = mul_row(branch2, w.scale2);
  if (branch.ffn != 1.0f) branch2 = scale(branch2, branch.ffn);
  result.output = add(a, branch2);
  return result;
}

DecoderLayerResult decoder_layer_forward(Var cls_prev, Var patches, const DecoderLayerWeights& w,
                                         const ModelConfig& config) {
  const std::size_t d = patches.value().cols();
  if (cls_prev.value().size() != d) {
    throw DimensionError("decoder: [CLS] state " + shape_string(cls_prev.value().shape()) +
                         " does not match patch width " + shape_string(patches.value().shape()));
  }
  const std::size_t n = patches.value().rows();
  const bool pre = config.decoder_norm == DecoderNorm::Pre;
  Var cls_row = cls_prev.value().rank() == 2 ? cls_prev : reshape(cls_prev, {1, d});
  const Var parts[] = {cls_row, patches};
  Var rows = concat_rows(parts);
  if (pre) rows = layer_norm(rows, w.norm_gamma, w.norm_beta);

  Var query = slice_rows(rows, 0, 1);
  if (w.query_w.valid()) query = matmul(query, w.query_w);
  Var source = config.decoder_includes_cls_in_kv ? rows : slice_rows(rows, 1, n);
  Var keys = matmul(source, w.key_w);
  Var values = matmul(source, w.value_w);
  const float inv_scale = 1.0f / std::sqrt(static_cast<float>(d));
  Var attn = softmax_rows(scale(matmul(query, transpose(keys)), inv_scale));
  Var context = matmul(attn, values);
  if (w.out_w.valid()) context = matmul(context, w.out_w);
  if (!pre) context = layer_norm(context, w.norm_gamma, w.norm_beta);
  return DecoderLayerResult{add(cls_row, context), attn.value()};
}

// ---------------------------------------------------------------- forward

namespace {

/// Maps parameters to tape nodes. Tracked binding attaches gradients to the
/// parameters; untracked binding copies values in as constants.
class Binder {
 public:
  Binder(Tape& tape, bool track) : tape_(tape), track_(track) {}

  Var operator()(const Parameter& p) {
    if (track_) return tape_.parameter(const_cast<Parameter&>(p));
    auto [it, inserted] = constants_.try_emplace(&p);
    if (inserted) it->second = tape_.constant(p.value);
    return it->second;
  }
  Var operator()(const std::optional<Parameter>& p) { return p ? (*this)(*p) : Var{}; }

 private:
  Tape& tape_;
  bool track_;
  std::unordered_map<const Parameter*, Var> constants_;
};

EncoderLayerWeights bind_encoder(Binder& bind, const EncoderLayerParams& p) {
  return EncoderLayerWeights{
      bind(p.norm1_gamma), bind(p.norm1_beta),
      SelfAttentionWeights{bind(p.query_w), bind(p.query_b), bind(p.key_w), bind(p.key_b),
                           bind(p.value_w), bind(p.value_b), bind(p.out_w), bind(p.out_b)},
      bind(p.norm2_gamma), bind(p.norm2_beta), bind(p.ffn_in_w), bind(p.ffn_in_b),
      bind(p.ffn_out_w), bind(p.ffn_out_b), bind(p.scale1), bind(p.scale2)};
}

BranchScale draw_branches(const ModelConfig& c, const ForwardOptions& opt) {
  BranchScale s;
  const float rate =
      opt.stochastic_depth_rate >= 0.0f ? opt.stochastic_depth_rate : c.stochastic_depth_rate;
  if (opt.mode != Mode::Train || rate <= 0.0f) return s;
  if (opt.rng == nullptr) throw UsageError("stochastic depth in training mode needs an Rng");
  const float keep = 1.0f / (1.0f - rate);
  s.attention = opt.rng->uniform() < rate ? 0.0f : keep;
  s.ffn = opt.rng->uniform() < rate ? 0.0f : keep;
  return s;
}

void check_image(const Image& image, const ModelConfig& c) {
  if (image.height != c.image_h || image.width != c.image_w || image.channels != c.channels) {
    throw GeometryError("image " + std::to_string(image.height) + "x" +
                        std::to_string(image.width) + "x" + std::to_string(image.channels) +
                        " does not match model input " + std::to_string(c.image_h) + "x" +
                        std::to_string(c.image_w) + "x" + std::to_string(c.channels));
  }
}

Var classify(Binder& bind, const Backbone& b, Var cls) {
  if (b.norm_gamma) cls = layer_norm(cls, bind(*b.norm_gamma), bind(*b.norm_beta));
  if (cls.value().rank() == 1) cls = reshape(cls, {1, cls.value().size()});
  return linear(cls, bind(b.head_w), bind(b.head_b));
}

TapeForward run_edit(Tape& tape, const EditModel& model, const Image& image,
                     const ForwardOptions& opt, bool track) {
  const ModelConfig& c = model.config();
  check_image(image, c);
  Binder bind(tape, track);
  const Backbone& b = model.backbone;

  TapeForward out;
  Var p = embed(tape.constant(patchify(image, c.patch)), bind(b.patch_w), bind(b.patch_b),
                bind(b.pos_embed));
  Var cls = bind(b.cls_token);
  if (opt.capture_states) {
    out.patch_states.push_back(p.value());
    out.cls_states.push_back(cls.value().reshaped({c.width}));
  }
  // One binding for all layers: every decoder step reads the same nodes.
  const DecoderLayerWeights dec{bind(model.decoder.norm_gamma), bind(model.decoder.norm_beta),
                                bind(model.decoder.key_w), bind(model.decoder.value_w),
                                bind(model.decoder.query_w), bind(model.decoder.out_w)};
  for (std::size_t i = 0; i < c.depth; ++i) {
    auto enc = encoder_layer_forward(p, bind_encoder(bind, b.encoder[i]), c.heads,
                                     draw_branches(c, opt));
    p = enc.output;
    auto step = decoder_layer_forward(cls, p, dec, c);
    cls = step.cls;
    if (opt.capture_attention) {
      for (std::size_t h = 0; h < enc.maps.size(); ++h)
        out.attention.push_back({i, h, AttentionSource::EncoderSelf, std::move(enc.maps[h])});
      out.attention.push_back({i, 0, AttentionSource::DecoderCross, std::move(step.map)});
    }
    if (opt.capture_states) {
      out.patch_states.push_back(p.value());
      out.cls_states.push_back(cls.value().reshaped({c.width}));
    }
  }
  out.logits = classify(bind, b, cls);
  return out;
}

TapeForward run_baseline(Tape& tape, const BaselineVitModel& model, const Image& image,
                         const ForwardOptions& opt, bool track) {
  const ModelConfig& c = model.config();
  check_image(image, c);
  Binder bind(tape, track);
  const Backbone& b = model.backbone;
  const std::size_t n = c.num_patches();

  TapeForward out;
  Var p = embed(tape.constant(patchify(image, c.patch)), bind(b.patch_w), bind(b.patch_b),
                bind(b.pos_embed));
  // [CLS] carries no positional embedding and sits at token 0.
  const Var parts[] = {reshape(bind(b.cls_token), {1, c.width}), p};
  Var z = concat_rows(parts);
  auto capture_states = [&](const Tensor& zv) {
    Tensor cls({c.width});
    Tensor patches({n, c.width});
    std::copy_n(zv.data().begin(), c.width, cls.data().begin());
    std::copy(zv.data().begin() + c.width, zv.data().end(), patches.data().begin());
    out.cls_states.push_back(std::move(cls));
    out.patch_states.push_back(std::move(patches));
  };
  if (opt.capture_states) capture_states(z.value());
  for (std::size_t i = 0; i < c.depth; ++i) {
    auto enc = encoder_layer_forward(z, bind_encoder(bind, b.encoder[i]), c.heads,
                                     draw_branches(c, opt));
    z = enc.output;
    if (opt.capture_attention) {
      for (std::size_t h = 0; h < enc.maps.size(); ++h)
        out.attention.push_back({i, h, AttentionSource::BaselineSelf, std::move(enc.maps[h])});
    }
    if (opt.capture_states) capture_states(z.value());
  }
  out.logits = classify(bind, b, slice_rows(z, 0, 1));
  return out;
}

ForwardOutput finish(TapeForward&& f) {
  ForwardOutput out;
  const Tensor& z = f.logits.value();
  out.logits = z.reshaped({z.size()});
  out.probabilities = softmax_rows(out.logits);
  out.attention = std::move(f.attention);
  out.patch_states = std::move(f.patch_states);
  out.cls_states = std::move(f.cls_states);
  return out;
}

}  // namespace

TapeForward edit_forward(Tape& tape, EditModel& model, const Image& image,
                         const ForwardOptions& options) {
  return run_edit(tape, model, image, options, true);
}

TapeForward baseline_vit_forward(Tape& tape, BaselineVitModel& model, const Image& image,
                                 const ForwardOptions& options) {
  return run_baseline(tape, model, image, options, true);
}

ForwardOutput edit_forward(const Image& image, const EditModel& model, Mode mode, Rng* rng) {
  Tape tape;
  ForwardOptions opt{mode, rng, true, true, -1.0f};
  return finish(run_edit(tape, model, image, opt, false));
}

ForwardOutput baseline_vit_forward(const Image& image, const BaselineVitModel& model, Mode mode,
                                   Rng* rng) {
  Tape tape;
  ForwardOptions opt{mode, rng, true, true, -1.0f};
  return finish(run_baseline(tape, model, image, opt, false));
}

}  // namespace edit
