#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "edit/model.hpp"

namespace edit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command (train, eval, attn-export, sink-stats, params, flops,
/// compare). `args` excludes the program name. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 8-bit binary PGM (P5, one channel) or PPM (P6, three channels), scaled
/// to [0, 1].
Image read_pnm(const std::filesystem::path& path);

}  // namespace edit
