#include "edit/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "edit/errors.hpp"

namespace edit {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "' (expected " + expected + ")");
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double out = std::stod(s, &used);
    if (used != s.size()) bad_value(key, v, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  ModelConfig& m = model;
  TrainConfig& t = train;
  if (key == "model") {
    if (v == "edit") arch = Architecture::Edit;
    else if (v == "baseline") arch = Architecture::Baseline;
    else bad_value(key, v, "edit or baseline");
  } else if (key == "image_h") m.image_h = parse_count(key, v);
  else if (key == "image_w") m.image_w = parse_count(key, v);
  else if (key == "channels") m.channels = parse_count(key, v);
  else if (key == "patch") m.patch = parse_count(key, v);
  else if (key == "width") m.width = parse_count(key, v);
  else if (key == "heads") m.heads = parse_count(key, v);
  else if (key == "depth") m.depth = parse_count(key, v);
  else if (key == "classes") m.classes = parse_count(key, v);
  else if (key == "decoder_layout") {
    if (v == "kv_only") m.decoder_layout = DecoderLayout::KvOnly;
    else if (v == "qkvo") m.decoder_layout = DecoderLayout::Qkvo;
    else bad_value(key, v, "kv_only or qkvo");
  } else if (key == "decoder_includes_cls_in_kv") m.decoder_includes_cls_in_kv = parse_bool(key, v);
  else if (key == "decoder_norm") {
    if (v == "pre") m.decoder_norm = DecoderNorm::Pre;
    else if (v == "post") m.decoder_norm = DecoderNorm::Post;
    else bad_value(key, v, "pre or post");
  } else if (key == "final_norm") m.final_norm = parse_bool(key, v);
  else if (key == "layer_scale") m.layer_scale = parse_bool(key, v);
  else if (key == "stochastic_depth_rate") {
    t.stochastic_depth_rate = static_cast<float>(parse_real(key, v));
  } else if (key == "epochs") t.epochs = parse_count(key, v);
  else if (key == "batch_size") t.batch_size = parse_count(key, v);
  else if (key == "base_lr") t.base_lr = parse_real(key, v);
  else if (key == "min_lr") t.min_lr = parse_real(key, v);
  else if (key == "warmup_epochs") t.warmup_epochs = parse_count(key, v);
  else if (key == "weight_decay") t.weight_decay = parse_real(key, v);
  else if (key == "label_smoothing") t.label_smoothing = parse_real(key, v);
  else if (key == "seed") t.seed = parse_count(key, v);
  else if (key == "optimizer") {
    if (v == "adamw") t.optimizer = OptimizerKind::AdamW;
    else if (v == "sgd") t.optimizer = OptimizerKind::SgdMomentum;
    else bad_value(key, v, "adamw or sgd");
  } else if (key == "horizontal_flip") t.horizontal_flip = parse_bool(key, v);
  else if (key == "dataset") dataset = std::string(v);
  else if (key == "train_count") train_count = parse_count(key, v);
  else if (key == "val_count") val_count = parse_count(key, v);
  else if (key == "out") out = std::string(v);
  else if (key == "checkpoint") checkpoint = std::string(v);
  else if (key == "image") image = std::string(v);
  else if (key == "samples") samples = parse_count(key, v);
  else if (key == "format") {
    if (v == "pgm") format = ExportFormat::Pgm;
    else if (v == "csv") format = ExportFormat::Csv;
    else bad_value(key, v, "pgm or csv");
  } else if (key == "svg") svg = parse_bool(key, v);
  else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
  given.insert(std::string(key));
}

void RunConfig::require(std::string_view key) const {
  if (!has(key)) throw ConfigError("missing required key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

}  // namespace edit
