#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edit/config.hpp"

namespace edit {

struct CountItem {
  std::string component;
  std::uint64_t count = 0;
};

/// Itemized closed-form count. Items sum to `total`.
struct CountBreakdown {
  std::vector<CountItem> items;
  std::uint64_t total = 0;

  std::uint64_t get(const std::string& component) const;
};

/// Exact number of scalars the model constructor allocates.
CountBreakdown count_params(const ModelConfig& config, Architecture arch = Architecture::Edit);

/// Multiply-accumulate count of one forward pass. Only matrix products are
/// counted; norms, softmax, GELU and residual adds are not.
CountBreakdown estimate_macs(const ModelConfig& config, Architecture arch = Architecture::Edit);

}  // namespace edit
