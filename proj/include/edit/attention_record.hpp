#pragma once

#include <cstddef>

#include "edit/tensor.hpp"

namespace edit {

enum class AttentionSource { EncoderSelf, DecoderCross, BaselineSelf };

/// One captured attention matrix. Decoder records use head 0. Baseline
/// records keep the [CLS] token at row/column 0.
struct AttentionRecord {
  std::size_t layer = 0;
  std::size_t head = 0;
  AttentionSource source = AttentionSource::EncoderSelf;
  Tensor matrix;
};

}  // namespace edit
