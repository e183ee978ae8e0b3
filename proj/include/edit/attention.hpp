#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "edit/attention_record.hpp"
#include "edit/config.hpp"

namespace edit {

struct LayerSinkStats {
  std::size_t layer = 0;
  double cls_share = 0.0;   // mean attention on the [CLS] column
  double mean_other = 0.0;  // mean attention on every other column
  double ratio = 0.0;       // +inf when mean_other is 0
};

struct SinkStats {
  std::vector<LayerSinkStats> layers;
};

/// Per-layer [CLS] attention share from baseline self-attention records.
/// Averages run over all heads and query rows at once; the non-[CLS] mean
/// includes the diagonal.
SinkStats compute_sink_stats(std::span<const AttentionRecord> records, const ModelConfig& config);

/// Element-wise mean of per-image statistics; ratios are recomputed from
/// the averaged shares.
SinkStats average_sink_stats(std::span<const SinkStats> per_image);

/// Top-left size×size block of a record's matrix.
Tensor extract_submatrix(const AttentionRecord& record, std::size_t size);

/// Decoder [CLS] attention over patches laid out on the (h/p)×(w/p) grid
/// and min-max normalized to [0, 1]. A constant row maps to all zeros.
Tensor cls_attention_grid(const AttentionRecord& record, const ModelConfig& config);

/// Binary PGM ("P5", maxval 255); v maps to round(v·255). Values must lie
/// in [0, 1].
std::string encode_pgm(const Tensor& grid);
/// "layer,row,col,value" rows with 9 significant digits.
std::string encode_attention_csv(const Tensor& matrix, std::size_t layer);
/// "layer,cls_share,mean_other,ratio" rows; an infinite ratio prints "inf".
std::string encode_sink_csv(const SinkStats& stats);
/// Line chart of cls_share and mean_other per layer.
std::string render_sink_svg(const SinkStats& stats);

enum class ExportFormat { Pgm, Csv };

void export_attention(const Tensor& matrix, std::size_t layer, const std::filesystem::path& path,
                      ExportFormat format);

}  // namespace edit
