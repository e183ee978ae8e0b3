#include "edit/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "edit/errors.hpp"
#include "edit/io.hpp"

namespace edit {

namespace {

std::string format_g9(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double ratio_of(double cls, double other) {
  return other == 0.0 ? std::numeric_limits<double>::infinity() : cls / other;
}

}  // namespace

SinkStats compute_sink_stats(std::span<const AttentionRecord> records, const ModelConfig& config) {
  const std::size_t tokens = config.num_patches() + 1;
  std::vector<double> cls_sum(config.depth, 0.0), other_sum(config.depth, 0.0);
  std::vector<std::size_t> rows_seen(config.depth, 0);
  for (const auto& r : records) {
    if (r.source != AttentionSource::BaselineSelf) {
      throw UsageError("sink statistics need baseline self-attention records");
    }
    if (r.layer >= config.depth) {
      throw BoundsError("record layer " + std::to_string(r.layer) + " outside depth " +
                        std::to_string(config.depth));
    }
    if (r.matrix.rows() != tokens || r.matrix.cols() != tokens) {
      throw DimensionError("record shape " + shape_string(r.matrix.shape()) + ", expected " +
                           std::to_string(tokens) + "x" + std::to_string(tokens));
    }
    for (std::size_t row = 0; row < tokens; ++row) {
      auto values = r.matrix.row(row);
      cls_sum[r.layer] += values[0];
      double rest = 0.0;
      for (std::size_t c = 1; c < tokens; ++c) rest += values[c];
      other_sum[r.layer] += rest;
    }
    rows_seen[r.layer] += tokens;
  }
  std::string gaps;
  for (std::size_t l = 0; l < config.depth; ++l) {
    if (rows_seen[l] == 0) gaps += (gaps.empty() ? "" : ", ") + std::to_string(l);
  }
  if (!gaps.empty()) throw CoverageError("no attention records for layer(s) " + gaps);

  SinkStats stats;
  for (std::size_t l = 0; l < config.depth; ++l) {
    const double rows = static_cast<double>(rows_seen[l]);
    LayerSinkStats s;
    s.layer = l;
    s.cls_share = cls_sum[l] / rows;
    s.mean_other = other_sum[l] / (rows * static_cast<double>(tokens - 1));
    s.ratio = ratio_of(s.cls_share, s.mean_other);
    stats.layers.push_back(s);
  }
  return stats;
}

SinkStats average_sink_stats(std::span<const SinkStats> per_image) {
  if (per_image.empty()) throw std::invalid_argument("no statistics to average");
  SinkStats out = per_image[0];
  for (std::size_t i = 1; i < per_image.size(); ++i) {
    if (per_image[i].layers.size() != out.layers.size()) {
      throw DimensionError("sink statistics disagree on layer count");
    }
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      out.layers[l].cls_share += per_image[i].layers[l].cls_share;
      out.layers[l].mean_other += per_image[i].layers[l].mean_other;
    }
  }
  const double k = static_cast<double>(per_image.size());
  for (auto& s : out.layers) {
    s.cls_share /= k;
    s.mean_other /= k;
    s.ratio = ratio_of(s.cls_share, s.mean_other);
  }
  return out;
}

Tensor extract_submatrix(const AttentionRecord& record, std::size_t size) {
  const Tensor& m = record.matrix;
  if (size == 0 || size > m.rows() || size > m.cols()) {
    throw BoundsError("submatrix size " + std::to_string(size) + " does not fit " +
                      shape_string(m.shape()));
  }
  Tensor out({size, size});
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) out.at(r, c) = m.at(r, c);
  return out;
}

Tensor cls_attention_grid(const AttentionRecord& record, const ModelConfig& config) {
  if (record.source != AttentionSource::DecoderCross) {
    throw UsageError("cls_attention_grid needs a decoder cross-attention record");
  }
  const std::size_t n = config.num_patches();
  const Tensor& m = record.matrix;
  if (m.rows() != 1 || (m.cols() != n + 1 && m.cols() != n)) {
    throw DimensionError("decoder record shape " + shape_string(m.shape()) + " does not match " +
                         std::to_string(n) + " patches");
  }
  const std::size_t offset = m.cols() - n;  // skip the [CLS]-to-[CLS] entry
  Tensor grid({config.grid_h(), config.grid_w()});
  for (std::size_t i = 0; i < n; ++i) grid[i] = m[offset + i];
  const auto [lo, hi] = std::minmax_element(grid.data().begin(), grid.data().end());
  const float lo_v = *lo, hi_v = *hi;
  if (hi_v == lo_v) {
    grid.fill(0.0f);
    return grid;
  }
  for (float& v : grid.data()) v = (v - lo_v) / (hi_v - lo_v);
  return grid;
}

std::string encode_pgm(const Tensor& grid) {
  std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) +
                    "\n255\n";
  for (float v : grid.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw BoundsError("PGM values must lie in [0, 1], got " + format_g9(v));
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
  }
  return out;
}

std::string encode_attention_csv(const Tensor& matrix, std::size_t layer) {
  std::string out = "layer,row,col,value\n";
  for (std::size_t r = 0; r < matrix.rows(); ++r)
    for (std::size_t c = 0; c < matrix.cols(); ++c)
      out += std::to_string(layer) + "," + std::to_string(r) + "," + std::to_string(c) + "," +
             format_g9(matrix.at(r, c)) + "\n";
  return out;
}

std::string encode_sink_csv(const SinkStats& stats) {
  std::string out = "layer,cls_share,mean_other,ratio\n";
  for (const auto& s : stats.layers) {
    out += std::to_string(s.layer) + "," + format_g9(s.cls_share) + "," +
           format_g9(s.mean_other) + "," + format_g9(s.ratio) + "\n";
  }
  return out;
}

std::string render_sink_svg(const SinkStats& stats) {
  constexpr double w = 640, h = 360, left = 60, right = 20, top = 20, bottom = 50;
  double ymax = 0.0;
  for (const auto& s : stats.layers) ymax = std::max({ymax, s.cls_share, s.mean_other});
  if (ymax <= 0.0) ymax = 1.0;
  const std::size_t count = stats.layers.size();
  auto x_of = [&](std::size_t i) {
    return left + (count > 1 ? (w - left - right) * static_cast<double>(i) / (count - 1) : 0.0);
  };
  auto y_of = [&](double v) { return top + (h - top - bottom) * (1.0 - v / ymax); };
  auto polyline = [&](auto field, const char* color) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < count; ++i)
      os << (i ? " " : "") << x_of(i) << "," << y_of(field(stats.layers[i]));
    os << "\"/>\n";
    return os.str();
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right
     << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">layer</text>\n";
  os << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2
     << ")\" text-anchor=\"middle\">attention</text>\n";
  os << polyline([](const LayerSinkStats& s) { return s.cls_share; }, "#d62728");
  os << polyline([](const LayerSinkStats& s) { return s.mean_other; }, "#1f77b4");
  os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 15
     << "\" fill=\"#d62728\">[CLS] share</text>\n";
  os << "<text x=\"" << w - right - 150 << "\" y=\"" << top + 35
     << "\" fill=\"#1f77b4\">mean other</text>\n";
  os << "</svg>\n";
  return os.str();
}

void export_attention(const Tensor& matrix, std::size_t layer, const std::filesystem::path& path,
                      ExportFormat format) {
  write_file_atomic(path, format == ExportFormat::Pgm ? encode_pgm(matrix)
                                                      : encode_attention_csv(matrix, layer));
}

}  // namespace edit
