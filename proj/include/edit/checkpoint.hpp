#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "edit/model.hpp"

namespace edit {

// File layout, all integers little-endian:
//   "EDT1" | version u32 | count u32 |
//   count × { name_len u32 | name | rank u32 | dims u64[rank] | f32[prod(dims)] } |
//   crc32 u32 over every preceding byte
inline constexpr char kCheckpointMagic[4] = {'E', 'D', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind {
    Io,
    BadMagic,
    BadVersion,
    Truncated,
    ShapeMismatch,
    UnknownTensor,
    MissingTensor,
    ChecksumMismatch,
    BadMetadata,
  };

  CheckpointError(Kind kind, const std::string& message, std::string tensor = {})
      : std::runtime_error(message), kind_(kind), tensor_(std::move(tensor)) {}

  Kind kind() const { return kind_; }
  /// Offending tensor name, when the error concerns one tensor.
  const std::string& tensor() const { return tensor_; }

 private:
  Kind kind_;
  std::string tensor_;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::string encode_tensors(std::span<const NamedTensor> tensors);

/// Called with each tensor's name and shape before its data is read, along
/// with the tensors decoded so far; may throw to reject the tensor.
using HeaderCheck = std::function<void(const std::string& name, const Shape& shape,
                                       std::span<const NamedTensor> decoded)>;

std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes,
                                        const HeaderCheck& check = {});

using AnyModel = std::variant<EditModel, BaselineVitModel>;

/// Architecture, config and input standardization travel as "meta.*"
/// tensors ahead of the weights, so a checkpoint is self-describing.
void save_checkpoint(const EditModel& model, const std::filesystem::path& path);
void save_checkpoint(const BaselineVitModel& model, const std::filesystem::path& path);
void save_checkpoint(const AnyModel& model, const std::filesystem::path& path);

AnyModel load_checkpoint(const std::filesystem::path& path);
AnyModel load_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace edit
