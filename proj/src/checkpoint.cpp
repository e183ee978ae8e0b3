#include "edit/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <map>

#include "edit/io.hpp"

namespace edit {

namespace {

using Kind = CheckpointError::Kind;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t crc_of(const void* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
    if (n > remaining()) {
      throw CheckpointError(Kind::Truncated, "checkpoint truncated while reading " + what +
                                                 " at byte " + std::to_string(pos_));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32(const std::string& what) {
    auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  std::uint64_t u64(const std::string& what) {
    auto b = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(std::span<const NamedTensor> tensors) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put_u64(out, d);
    for (float v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc_of(out.data(), out.size()));
  return out;
}

std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes,
                                        const HeaderCheck& check) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError(Kind::BadMagic, "not a checkpoint: magic bytes differ from \"EDT1\"");
  }
  const auto version = in.u32("format version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::BadVersion, "unsupported checkpoint version " +
                                                std::to_string(version) + " (expected " +
                                                std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = in.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = in.u32("name length of tensor #" + std::to_string(t));
    auto name_bytes = in.take(name_len, "name of tensor #" + std::to_string(t));
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = in.u32("rank of " + name);
    if (rank == 0 || rank > 8) {
      throw CheckpointError(Kind::ShapeMismatch,
                            "tensor '" + name + "' has invalid rank " + std::to_string(rank), name);
    }
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = in.u64("dims of " + name);
      if (d == 0 || d > (std::uint64_t{1} << 40) || elements > (std::uint64_t{1} << 40) / d) {
        throw CheckpointError(Kind::ShapeMismatch,
                              "tensor '" + name + "' has invalid dimension " + std::to_string(d),
                              name);
      }
      elements *= d;
      shape.push_back(static_cast<std::size_t>(d));
    }
    if (check) check(name, shape, out);
    auto raw = in.take(elements * 4, "data of " + name);
    std::vector<float> data(elements);
    for (std::size_t i = 0; i < elements; ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | raw[i * 4 + static_cast<std::size_t>(b)];
      data[i] = std::bit_cast<float>(bits);
    }
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  const std::size_t body = in.position();
  const auto stored = in.u32("checksum");
  if (in.remaining() != 0) {
    throw CheckpointError(Kind::ChecksumMismatch,
                          std::to_string(in.remaining()) + " unexpected bytes after checksum");
  }
  if (stored != crc_of(bytes.data(), body)) {
    throw CheckpointError(Kind::ChecksumMismatch, "checkpoint CRC-32 does not match contents");
  }
  return out;
}

// ---------------------------------------------------------------- models

namespace {

constexpr std::size_t kConfigFields = 14;

Tensor encode_config(const ModelConfig& c) {
  return Tensor({kConfigFields},
                std::vector<float>{
                    static_cast<float>(c.image_h), static_cast<float>(c.image_w),
                    static_cast<float>(c.channels), static_cast<float>(c.patch),
                    static_cast<float>(c.width), static_cast<float>(c.heads),
                    static_cast<float>(c.depth), static_cast<float>(c.classes),
                    c.decoder_layout == DecoderLayout::Qkvo ? 1.0f : 0.0f,
                    c.decoder_includes_cls_in_kv ? 1.0f : 0.0f,
                    c.decoder_norm == DecoderNorm::Post ? 1.0f : 0.0f, c.final_norm ? 1.0f : 0.0f,
                    c.layer_scale ? 1.0f : 0.0f, c.stochastic_depth_rate});
}

ModelConfig decode_config(const Tensor& t) {
  auto count = [&](std::size_t i) {
    const float v = t[i];
    if (!(v >= 0.0f && v <= 16777216.0f) || std::floor(v) != v) {
      throw CheckpointError(Kind::BadMetadata, "meta.config field " + std::to_string(i) +
                                                   " is not a valid count", "meta.config");
    }
    return static_cast<std::size_t>(v);
  };
  auto flag = [&](std::size_t i) {
    if (t[i] != 0.0f && t[i] != 1.0f) {
      throw CheckpointError(Kind::BadMetadata,
                            "meta.config field " + std::to_string(i) + " is not 0 or 1",
                            "meta.config");
    }
    return t[i] == 1.0f;
  };
  ModelConfig c;
  c.image_h = count(0);
  c.image_w = count(1);
  c.channels = count(2);
  c.patch = count(3);
  c.width = count(4);
  c.heads = count(5);
  c.depth = count(6);
  c.classes = count(7);
  c.decoder_layout = flag(8) ? DecoderLayout::Qkvo : DecoderLayout::KvOnly;
  c.decoder_includes_cls_in_kv = flag(9);
  c.decoder_norm = flag(10) ? DecoderNorm::Post : DecoderNorm::Pre;
  c.final_norm = flag(11);
  c.layer_scale = flag(12);
  c.stochastic_depth_rate = t[13];
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::BadMetadata, std::string("meta.config: ") + e.what(),
                          "meta.config");
  }
  return c;
}

template <typename Model>
std::vector<NamedTensor> model_tensors(const Model& model, Architecture arch) {
  const ModelConfig& c = model.config();
  std::vector<NamedTensor> out;
  out.push_back({"meta.arch", Tensor({1}, arch == Architecture::Edit ? 0.0f : 1.0f)});
  out.push_back({"meta.config", encode_config(c)});
  out.push_back({"meta.input_mean", Tensor({c.channels}, model.input_mean)});
  out.push_back({"meta.input_std", Tensor({c.channels}, model.input_std)});
  for (const Parameter* p : model.parameters()) out.push_back({p->name, p->value});
  return out;
}

const char* kMetaOrder[] = {"meta.arch", "meta.config", "meta.input_mean", "meta.input_std"};

template <typename Model>
AnyModel fill_model(Model model, std::vector<NamedTensor>& tensors) {
  model.input_mean = tensors[2].value.storage();
  model.input_std = tensors[3].value.storage();
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name[p->name] = p;
  for (std::size_t i = 4; i < tensors.size(); ++i) {
    auto it = by_name.find(tensors[i].name);
    if (it == by_name.end()) {
      throw CheckpointError(Kind::UnknownTensor,
                            "duplicate or unknown tensor '" + tensors[i].name + "'",
                            tensors[i].name);
    }
    it->second->value = std::move(tensors[i].value);
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw CheckpointError(Kind::MissingTensor,
                          "checkpoint lacks tensor '" + by_name.begin()->first + "'",
                          by_name.begin()->first);
  }
  return AnyModel(std::move(model));
}

}  // namespace

void save_checkpoint(const EditModel& model, const std::filesystem::path& path) {
  const auto tensors = model_tensors(model, Architecture::Edit);
  write_file_atomic(path, encode_tensors(tensors));
}

void save_checkpoint(const BaselineVitModel& model, const std::filesystem::path& path) {
  const auto tensors = model_tensors(model, Architecture::Baseline);
  write_file_atomic(path, encode_tensors(tensors));
}

void save_checkpoint(const AnyModel& model, const std::filesystem::path& path) {
  std::visit([&](const auto& m) { save_checkpoint(m, path); }, model);
}

AnyModel load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::Io, e.what());
  }
  return load_checkpoint(bytes);
}

AnyModel load_checkpoint(std::span<const std::uint8_t> bytes) {
  // Meta tensors come first; each weight header is checked against the
  // decoded config before the data behind it is consumed.
  Architecture arch = Architecture::Edit;
  ModelConfig config;
  std::map<std::string, Shape> expected;

  auto check = [&](const std::string& name, const Shape& shape,
                   std::span<const NamedTensor> decoded) {
    const std::size_t index = decoded.size();
    if (index < 4) {
      if (name != kMetaOrder[index]) {
        throw CheckpointError(Kind::BadMetadata,
                              "expected '" + std::string(kMetaOrder[index]) + "' as tensor #" +
                                  std::to_string(index) + ", found '" + name + "'",
                              name);
      }
      Shape want = index == 0 ? Shape{1} : index == 1 ? Shape{kConfigFields} : Shape{};
      if (index >= 2) want = Shape{decode_config(decoded[1].value).channels};
      if (shape != want) {
        throw CheckpointError(Kind::ShapeMismatch,
                              "tensor '" + name + "' has shape " + shape_string(shape) +
                                  ", expected " + shape_string(want),
                              name);
      }
      return;
    }
    if (expected.empty()) {
      const float a = decoded[0].value[0];
      if (a != 0.0f && a != 1.0f) {
        throw CheckpointError(Kind::BadMetadata, "meta.arch is neither 0 nor 1", "meta.arch");
      }
      arch = a == 0.0f ? Architecture::Edit : Architecture::Baseline;
      config = decode_config(decoded[1].value);
      auto collect = [&](auto model) {
        for (const Parameter* p : model.parameters()) expected[p->name] = p->value.shape();
      };
      if (arch == Architecture::Edit) {
        collect(EditModel(config));
      } else {
        collect(BaselineVitModel(config));
      }
    }
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw CheckpointError(Kind::UnknownTensor, "unknown tensor '" + name + "'", name);
    }
    if (it->second != shape) {
      throw CheckpointError(Kind::ShapeMismatch,
                            "tensor '" + name + "' has shape " + shape_string(shape) +
                                ", config expects " + shape_string(it->second),
                            name);
    }
  };

  std::vector<NamedTensor> tensors = decode_tensors(bytes, check);
  if (tensors.size() < 4) {
    throw CheckpointError(Kind::BadMetadata, "checkpoint has no model metadata");
  }
  if (expected.empty()) {
    arch = tensors[0].value[0] == 0.0f ? Architecture::Edit : Architecture::Baseline;
    config = decode_config(tensors[1].value);
  }
  if (arch == Architecture::Edit) return fill_model(EditModel(config), tensors);
  return fill_model(BaselineVitModel(config), tensors);
}

}  // namespace edit
