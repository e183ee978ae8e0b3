#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "edit/attention.hpp"
#include "edit/config.hpp"
#include "edit/train.hpp"

namespace edit {

/// Everything a command needs: model, training and path settings, read
/// from "key = value" lines and then overridden from the command line.
struct RunConfig {
  Architecture arch = Architecture::Edit;
  ModelConfig model;
  TrainConfig train;
  std::string dataset;  // "shapes" or a CIFAR-10 binary directory
  std::size_t train_count = 600;
  std::size_t val_count = 150;
  std::filesystem::path out = ".";
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::size_t samples = 1;
  ExportFormat format = ExportFormat::Pgm;
  bool svg = false;

  /// Keys that were explicitly set, by file or flag.
  std::set<std::string> given;

  /// Throws ConfigError naming the key when it is unknown or its value
  /// does not parse.
  void set(std::string_view key, std::string_view value);
  bool has(std::string_view key) const { return given.count(std::string(key)) != 0; }
  /// Throws ConfigError naming `key` when it was never set.
  void require(std::string_view key) const;
};

/// Applies every "key = value" line of `text`; '#' starts a comment.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace edit
