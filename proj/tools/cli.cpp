#include "edit/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <sstream>

#include "edit/accounting.hpp"
#include "edit/attention.hpp"
#include "edit/checkpoint.hpp"
#include "edit/data.hpp"
#include "edit/io.hpp"
#include "edit/run_config.hpp"
#include "edit/train.hpp"

namespace edit {

namespace fs = std::filesystem;

Image read_pnm(const fs::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::exception& e) {
    throw FormatError(e.what());
  }
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") {
    throw FormatError(path.string() + ": expected a binary PGM (P5) or PPM (P6)");
  }
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed header");
  }
  ++pos;  // single whitespace before the raster
  if (maxval == 0 || maxval > 255) throw FormatError(path.string() + ": only 8-bit images supported");
  const std::size_t c = magic == "P5" ? 1 : 3;
  if (w == 0 || h == 0 || bytes.size() < pos + w * h * c) {
    throw FormatError(path.string() + ": raster truncated");
  }
  Image img = make_image(h, w, c);
  for (std::size_t i = 0; i < w * h * c; ++i)
    img.pixels[i] = static_cast<float>(bytes[pos + i]) / static_cast<float>(maxval);
  return img;
}

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> preset;
  bool baseline = false;
  std::vector<std::string> sets;
  std::optional<std::string> checkpoint, image, dataset, format;
  std::optional<std::size_t> samples;
};

RunConfig resolve(const Options& o) {
  RunConfig rc;
  if (!o.config_path.empty()) apply_config_file(rc, o.config_path);
  if (o.preset) {
    rc.model = preset_config(*o.preset);
    rc.given.insert("preset");
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    rc.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) rc.set("seed", std::to_string(*o.seed));
  if (o.out) rc.set("out", *o.out);
  if (o.checkpoint) rc.set("checkpoint", *o.checkpoint);
  if (o.image) rc.set("image", *o.image);
  if (o.dataset) rc.set("dataset", *o.dataset);
  if (o.format) rc.set("format", *o.format);
  if (o.samples) rc.set("samples", std::to_string(*o.samples));
  if (o.baseline) rc.arch = Architecture::Baseline;
  return rc;
}

void prepare_out_dir(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.out, ec);
  if (!fs::is_directory(rc.out)) {
    throw ConfigError("output directory '" + rc.out.string() + "' cannot be created");
  }
}

void require_file(const RunConfig& rc, const char* key, const fs::path& p) {
  rc.require(key);
  if (!fs::is_regular_file(p)) {
    throw ConfigError("key '" + std::string(key) + "': file '" + p.string() + "' does not exist");
  }
}

void validate_dataset_key(const RunConfig& rc) {
  rc.require("dataset");
  if (rc.dataset != "shapes" && !fs::is_directory(rc.dataset)) {
    throw ConfigError("key 'dataset': '" + rc.dataset +
                      "' is neither 'shapes' nor an existing CIFAR-10 directory");
  }
}

LabeledDataset load_split(const RunConfig& rc, Split split) {
  if (rc.dataset == "shapes") {
    const std::size_t count = split == Split::Train ? rc.train_count : rc.val_count;
    const std::uint64_t seed = rc.train.seed + (split == Split::Train ? 1000 : 2000);
    return generate_synthetic_shapes(count, seed, split);
  }
  return load_cifar10_binary(rc.dataset, split);
}

std::string format_count(std::uint64_t v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string scaled(std::uint64_t v, double unit, const char* suffix) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << static_cast<double>(v) / unit << suffix;
  return os.str();
}

void print_breakdown(std::ostream& out, const std::string& title, const CountBreakdown& b,
                     double unit, const char* suffix) {
  out << title << "\n";
  for (const auto& item : b.items) {
    out << "  " << std::left << std::setw(26) << item.component << std::right << std::setw(16)
        << format_count(item.count) << "\n";
  }
  out << "  " << std::left << std::setw(26) << "total" << std::right << std::setw(16)
      << format_count(b.total) << "  (" << scaled(b.total, unit, suffix) << ")\n";
}

std::string breakdown_csv(const CountBreakdown& b) {
  std::string s = "component,count\n";
  for (const auto& item : b.items) s += item.component + "," + format_count(item.count) + "\n";
  s += "total," + format_count(b.total) + "\n";
  return s;
}

// ---------------------------------------------------------------- commands

int cmd_train(const RunConfig& rc, std::ostream& out) {
  validate_dataset_key(rc);
  rc.model.validate();
  rc.train.validate();
  prepare_out_dir(rc);
  const fs::path checkpoint = rc.has("checkpoint") ? rc.checkpoint : rc.out / "model.edt";

  const LabeledDataset train_set = load_split(rc, Split::Train);
  const LabeledDataset val_set = load_split(rc, Split::Val);
  const auto report = [&out](const EpochMetrics& m) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  loss %.4f  val_top1 %.4f  lr %.3e\n", m.epoch,
                  m.train_loss, m.val_top1, m.lr);
    out << line << std::flush;
  };
  Rng init(rc.train.seed);
  TrainResult result;
  if (rc.arch == Architecture::Edit) {
    EditModel model(rc.model);
    initialize_parameters(model.parameters(), init);
    result = train(model, train_set, val_set, rc.train, checkpoint, report);
  } else {
    BaselineVitModel model(rc.model);
    initialize_parameters(model.parameters(), init);
    result = train(model, train_set, val_set, rc.train, checkpoint, report);
  }
  write_file_atomic(rc.out / "metrics.csv", encode_metrics_csv(result.history));
  out << "wrote " << (rc.out / "metrics.csv").string() << " and " << checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  require_file(rc, "checkpoint", rc.checkpoint);
  validate_dataset_key(rc);
  const AnyModel model = load_checkpoint(rc.checkpoint);
  const double top1 = evaluate(model, load_split(rc, Split::Val));
  char line[64];
  std::snprintf(line, sizeof line, "val_top1 %.6f\n", top1);
  out << line;
  return kExitOk;
}

Image load_input_image(const RunConfig& rc, std::span<const float> mean,
                       std::span<const float> std) {
  Image img = read_pnm(rc.image);
  if (img.channels == mean.size()) standardize(img, mean, std);
  return img;
}

int cmd_attn_export(const RunConfig& rc, std::ostream& out) {
  require_file(rc, "checkpoint", rc.checkpoint);
  require_file(rc, "image", rc.image);
  prepare_out_dir(rc);
  const AnyModel any = load_checkpoint(rc.checkpoint);
  const auto* model = std::get_if<EditModel>(&any);
  if (!model) {
    throw UsageError("attn-export needs an EDIT checkpoint; decoder [CLS] maps do not exist in "
                     "the baseline");
  }
  const ModelConfig& c = model->config();
  const Image img = load_input_image(rc, model->input_mean, model->input_std);
  const ForwardOutput fwd = edit_forward(img, *model);
  const std::size_t digits = std::max<std::size_t>(2, std::to_string(c.depth - 1).size());
  const char* ext = rc.format == ExportFormat::Pgm ? "pgm" : "csv";
  for (const auto& r : fwd.attention) {
    if (r.source != AttentionSource::DecoderCross) continue;
    std::string idx = std::to_string(r.layer);
    idx.insert(0, digits - idx.size(), '0');
    const fs::path path = rc.out / ("layer_" + idx + "." + ext);
    export_attention(cls_attention_grid(r, c), r.layer, path, rc.format);
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

int cmd_sink_stats(const RunConfig& rc, std::ostream& out) {
  require_file(rc, "checkpoint", rc.checkpoint);
  if (rc.samples == 0) throw ConfigError("key 'samples' must be at least 1");
  if (!rc.has("dataset") && !rc.has("image")) {
    throw ConfigError("missing required key 'dataset' (or 'image')");
  }
  if (rc.has("dataset")) validate_dataset_key(rc);
  prepare_out_dir(rc);
  const AnyModel any = load_checkpoint(rc.checkpoint);
  const auto* model = std::get_if<BaselineVitModel>(&any);
  if (!model) {
    throw UsageError("sink-stats needs a baseline checkpoint: EDIT keeps [CLS] out of encoder "
                     "self-attention, so there is no [CLS] column to measure");
  }
  std::vector<Image> images;
  if (rc.has("image")) {
    images.push_back(load_input_image(rc, model->input_mean, model->input_std));
  } else {
    LabeledDataset ds = load_split(rc, Split::Val);
    if (ds.size() < rc.samples) {
      throw ConfigError("key 'samples': dataset has only " + std::to_string(ds.size()) + " images");
    }
    ds.images.resize(rc.samples);
    images = std::move(ds.images);
  }
  std::vector<SinkStats> per_image;
  for (const Image& img : images) {
    const ForwardOutput fwd = baseline_vit_forward(img, *model);
    per_image.push_back(compute_sink_stats(fwd.attention, model->config()));
  }
  const SinkStats stats = average_sink_stats(per_image);
  const std::string csv = encode_sink_csv(stats);
  write_file_atomic(rc.out / "sink_stats.csv", csv);
  if (rc.svg) write_file_atomic(rc.out / "sink_stats.svg", render_sink_svg(stats));
  out << csv;
  return kExitOk;
}

int cmd_count(const RunConfig& rc, std::ostream& out, bool macs) {
  const CountBreakdown b =
      macs ? estimate_macs(rc.model, rc.arch) : count_params(rc.model, rc.arch);
  const std::string title = std::string(to_string(rc.arch)) + (macs ? " MACs" : " parameters");
  print_breakdown(out, title, b, macs ? 1e9 : 1e6, macs ? "G" : "M");
  if (rc.has("preset") && rc.arch == Architecture::Edit) {
    const CountBreakdown base = macs ? estimate_macs(rc.model, Architecture::Baseline)
                                     : count_params(rc.model, Architecture::Baseline);
    char line[96];
    std::snprintf(line, sizeof line, "  ratio vs baseline %.4f\n",
                  static_cast<double>(b.total) / static_cast<double>(base.total));
    out << line;
  }
  if (rc.has("out")) {
    prepare_out_dir(rc);
    write_file_atomic(rc.out / (macs ? "flops.csv" : "params.csv"), breakdown_csv(b));
  }
  return kExitOk;
}

int cmd_compare(const RunConfig& rc, std::ostream& out) {
  const auto params_edit = count_params(rc.model, Architecture::Edit);
  const auto params_base = count_params(rc.model, Architecture::Baseline);
  const auto macs_edit = estimate_macs(rc.model, Architecture::Edit);
  const auto macs_base = estimate_macs(rc.model, Architecture::Baseline);
  const double pr = static_cast<double>(params_edit.total) / static_cast<double>(params_base.total);
  const double mr = static_cast<double>(macs_edit.total) / static_cast<double>(macs_base.total);
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "params  edit " << params_edit.total << "  baseline " << params_base.total
     << "  ratio " << pr << "\n";
  os << "macs    edit " << macs_edit.total << "  baseline " << macs_base.total << "  ratio " << mr
     << "\n";
  out << os.str();
  if (rc.has("out")) {
    prepare_out_dir(rc);
    std::ostringstream csv;
    csv << std::setprecision(9);
    csv << "quantity,edit,baseline,ratio\n";
    csv << "params," << params_edit.total << "," << params_base.total << "," << pr << "\n";
    csv << "macs," << macs_edit.total << "," << macs_base.total << "," << mr << "\n";
    write_file_atomic(rc.out / "compare.csv", csv.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EDIT / ViT reference tool", "edit-vit"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "key = value configuration file");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--preset", o.preset, "tiny | small | base");
  app.add_flag("--baseline", o.baseline, "use the [CLS]-token baseline ViT");
  app.add_option("--set", o.sets, "override: key=value")->take_all();
  app.add_option("--checkpoint", o.checkpoint, "checkpoint file");
  app.add_option("--image", o.image, "input image (binary PGM/PPM)");
  app.add_option("--dataset", o.dataset, "'shapes' or a CIFAR-10 binary directory");
  app.add_option("--format", o.format, "pgm | csv");
  app.add_option("--samples", o.samples, "number of images for sink statistics");

  const std::pair<const char*, const char*> commands[] = {
      {"train", "train on the configured dataset, write metrics.csv and a checkpoint"},
      {"eval", "report val top-1 of --checkpoint"},
      {"attn-export", "write per-layer decoder [CLS] attention grids for --image"},
      {"sink-stats", "per-layer [CLS] attention share of a baseline checkpoint"},
      {"params", "parameter count breakdown"},
      {"flops", "multiply-accumulate breakdown"},
      {"compare", "EDIT vs baseline parameter and MAC totals"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const RunConfig rc = resolve(o);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "train") return cmd_train(rc, out);
    if (cmd == "eval") return cmd_eval(rc, out);
    if (cmd == "attn-export") return cmd_attn_export(rc, out);
    if (cmd == "sink-stats") return cmd_sink_stats(rc, out);
    if (cmd == "params") return cmd_count(rc, out, false);
    if (cmd == "flops") return cmd_count(rc, out, true);
    return cmd_compare(rc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace edit
