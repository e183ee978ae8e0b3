#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "edit/attention.hpp"
#include "edit/errors.hpp"
#include "support/fixtures.hpp"

using namespace edit;
using namespace edit::testing;

namespace {

// n = 3 patches, so baseline records are 4×4.
ModelConfig sink_config(std::size_t depth = 2) {
  ModelConfig c = micro_config();
  c.image_h = 4;
  c.image_w = 12;
  c.depth = depth;
  return c;
}

Tensor random_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor m({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0;
    for (float& v : m.row(r)) total += (v = static_cast<float>(std::exp(3.0 * rng.normal())));
    for (float& v : m.row(r)) v = static_cast<float>(v / total);
  }
  return m;
}

std::vector<AttentionRecord> random_records(const ModelConfig& c, Rng& rng) {
  std::vector<AttentionRecord> out;
  const std::size_t t = c.num_patches() + 1;
  for (std::size_t l = 0; l < c.depth; ++l)
    for (std::size_t h = 0; h < c.heads; ++h)
      out.push_back({l, h, AttentionSource::BaselineSelf, random_stochastic(t, t, rng)});
  return out;
}

AttentionRecord decoder_record(std::vector<float> row) {
  const std::size_t n = row.size();
  return {0, 0, AttentionSource::DecoderCross, Tensor({1, n}, std::move(row))};
}

}  // namespace

TEST(SinkStatsTest, UniformAttention) {
  const ModelConfig c = sink_config();
  std::vector<AttentionRecord> records;
  for (std::size_t l = 0; l < 2; ++l)
    records.push_back({l, 0, AttentionSource::BaselineSelf, Tensor({4, 4}, 0.25f)});
  const auto stats = compute_sink_stats(records, c);
  ASSERT_EQ(stats.layers.size(), 2u);
  for (const auto& s : stats.layers) {
    EXPECT_NEAR(s.cls_share, 0.25, 1e-12);
    EXPECT_NEAR(s.mean_other, 0.25, 1e-12);
    EXPECT_NEAR(s.ratio, 1.0, 1e-6);
  }
}

TEST(SinkStatsTest, OneHotOnClsIsInfiniteRatio) {
  const ModelConfig c = sink_config(1);
  Tensor m({4, 4});
  for (std::size_t r = 0; r < 4; ++r) m.at(r, 0) = 1.0f;
  const AttentionRecord rec{0, 0, AttentionSource::BaselineSelf, m};
  const auto stats = compute_sink_stats(std::span(&rec, 1), c);
  EXPECT_EQ(stats.layers[0].cls_share, 1.0);
  EXPECT_EQ(stats.layers[0].mean_other, 0.0);
  EXPECT_TRUE(std::isinf(stats.layers[0].ratio));
  EXPECT_EQ(encode_sink_csv(stats), "layer,cls_share,mean_other,ratio\n0,1,0,inf\n");
}

TEST(SinkStatsTest, MatchesBruteForceAverage) {
  Rng rng(77);
  for (int fixture = 0; fixture < 50; ++fixture) {
    ModelConfig c = sink_config(1 + rng.below(4));
    c.heads = 1 + rng.below(2);
    const auto records = random_records(c, rng);
    const auto stats = compute_sink_stats(records, c);
    const std::size_t n = c.num_patches();
    for (std::size_t l = 0; l < c.depth; ++l) {
      double cls = 0, other = 0, queries = 0;
      for (std::size_t col = 0; col <= n; ++col)
        for (const auto& r : records) {
          if (r.layer != l) continue;
          for (std::size_t row = 0; row <= n; ++row) {
            if (col == 0) {
              cls += r.matrix.at(row, 0);
              queries += 1;
            } else {
              other += r.matrix.at(row, col);
            }
          }
        }
      const auto& s = stats.layers[l];
      EXPECT_NEAR(s.cls_share, cls / queries, 1e-9);
      EXPECT_NEAR(s.mean_other, other / (queries * n), 1e-9);
      EXPECT_NEAR(s.cls_share + static_cast<double>(n) * s.mean_other, 1.0, 1e-5);
      EXPECT_GE(s.cls_share, 0.0);
      EXPECT_LE(s.mean_other, 1.0);
    }
  }
}

TEST(SinkStatsTest, InvariantUnderPatchPermutation) {
  Rng rng(78);
  const ModelConfig c = sink_config(3);
  const auto records = random_records(c, rng);
  const std::size_t perm[] = {0, 3, 1, 2};
  auto permuted = records;
  for (auto& r : permuted)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        r.matrix.at(i, j) = records[&r - permuted.data()].matrix.at(perm[i], perm[j]);
  const auto a = compute_sink_stats(records, c), b = compute_sink_stats(permuted, c);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_NEAR(a.layers[l].cls_share, b.layers[l].cls_share, 1e-12);
    EXPECT_NEAR(a.layers[l].mean_other, b.layers[l].mean_other, 1e-12);
  }
}

TEST(SinkStatsTest, MissingLayersAreListed) {
  Rng rng(79);
  const ModelConfig c = sink_config(4);
  auto records = random_records(c, rng);
  std::erase_if(records, [](const AttentionRecord& r) { return r.layer == 1 || r.layer == 3; });
  try {
    compute_sink_stats(records, c);
    FAIL();
  } catch (const CoverageError& e) {
    EXPECT_NE(std::string(e.what()).find("1, 3"), std::string::npos) << e.what();
  }
}

TEST(SinkStatsTest, RejectsOtherSources) {
  const ModelConfig c = sink_config(1);
  const AttentionRecord rec{0, 0, AttentionSource::EncoderSelf, Tensor({3, 3}, 1.0f / 3)};
  EXPECT_THROW(compute_sink_stats(std::span(&rec, 1), c), UsageError);
}

TEST(SinkStatsTest, AveragingRecomputesRatio) {
  SinkStats a{{{0, 0.4, 0.2, 2.0}}}, b{{{0, 0.2, 0.2, 1.0}}};
  const SinkStats both[] = {a, b};
  const auto avg = average_sink_stats(both);
  EXPECT_NEAR(avg.layers[0].cls_share, 0.3, 1e-12);
  EXPECT_NEAR(avg.layers[0].ratio, 1.5, 1e-12);
}

TEST(SubmatrixTest, FullSizeAndSingleEntry) {
  Rng rng(80);
  const AttentionRecord rec{0, 0, AttentionSource::BaselineSelf, random_stochastic(5, 5, rng)};
  EXPECT_EQ(extract_submatrix(rec, 5), rec.matrix);
  const Tensor one = extract_submatrix(rec, 1);
  EXPECT_EQ(one.shape(), (Shape{1, 1}));
  EXPECT_EQ(one[0], rec.matrix[0]);
  EXPECT_THROW(extract_submatrix(rec, 6), BoundsError);
}

TEST(SubmatrixTest, TopLeftBlockOf197) {
  Rng rng(81);
  const AttentionRecord rec{0, 0, AttentionSource::BaselineSelf, random_stochastic(197, 197, rng)};
  const Tensor block = extract_submatrix(rec, 16);
  ASSERT_EQ(block.shape(), (Shape{16, 16}));
  for (std::size_t k = 0; k < 256; ++k) EXPECT_EQ(block[k], rec.matrix[(k / 16) * 197 + k % 16]);
}

TEST(ClsGridTest, UniformRowGivesZeros) {
  const ModelConfig c = micro_config();  // 2×2 grid
  const Tensor g = cls_attention_grid(decoder_record(std::vector<float>(5, 0.2f)), c);
  EXPECT_EQ(g, Tensor({2, 2}));
}

TEST(ClsGridTest, OneHotOnFirstPatch) {
  const ModelConfig c = micro_config();
  const Tensor g = cls_attention_grid(decoder_record({0, 1, 0, 0, 0}), c);
  EXPECT_EQ(g, Tensor::matrix({{1, 0}, {0, 0}}));
}

TEST(ClsGridTest, MatchesReshapeAndNormalize) {
  ModelConfig c = preset_config("tiny");
  Rng rng(82);
  const Tensor row = random_stochastic(1, 197, rng);
  const Tensor g = cls_attention_grid(decoder_record({row.data().begin(), row.data().end()}), c);
  ASSERT_EQ(g.shape(), (Shape{14, 14}));
  const float lo = *std::min_element(row.data().begin() + 1, row.data().end());
  const float hi = *std::max_element(row.data().begin() + 1, row.data().end());
  for (std::size_t y = 0; y < 14; ++y)
    for (std::size_t x = 0; x < 14; ++x)
      EXPECT_NEAR(g.at(y, x), (row[1 + y * 14 + x] - lo) / (hi - lo), 1e-6);
}

TEST(ClsGridTest, KeysWithoutClsUseEveryColumn) {
  ModelConfig c = micro_config();
  c.decoder_includes_cls_in_kv = false;
  const Tensor g = cls_attention_grid(decoder_record({0.1f, 0.2f, 0.3f, 0.4f}), c);
  EXPECT_NEAR(g[0], 0.0, 1e-7);
  EXPECT_NEAR(g[3], 1.0, 1e-7);
}

TEST(ClsGridTest, WrongSourceIsUsageError) {
  AttentionRecord rec = decoder_record({0.2f, 0.2f, 0.2f, 0.2f, 0.2f});
  rec.source = AttentionSource::BaselineSelf;
  EXPECT_THROW(cls_attention_grid(rec, micro_config()), UsageError);
}

TEST(ExportTest, PgmBytes) {
  EXPECT_EQ(encode_pgm(Tensor::matrix({{1.0f}})), std::string("P5\n1 1\n255\n\xff", 12));
  EXPECT_EQ(encode_pgm(Tensor({2, 2})), std::string("P5\n2 2\n255\n") + std::string(4, '\0'));
  EXPECT_EQ(encode_pgm(Tensor::matrix({{0.5f, 0.2f, 0.8f}})).substr(11),
            std::string("\x80\x33\xcc", 3));  // round(127.5)=128, 51, 204
  EXPECT_THROW(encode_pgm(Tensor::matrix({{1.5f}})), BoundsError);
  EXPECT_THROW(encode_pgm(Tensor::matrix({{-0.1f}})), BoundsError);
}

TEST(ExportTest, GoldenPgm) {
  Rng rng(2024);
  Tensor grid({4, 4});
  for (float& v : grid.data()) v = static_cast<float>(rng.uniform());
  TempDir dir;
  export_attention(grid, 0, dir / "grid.pgm", ExportFormat::Pgm);
  EXPECT_EQ(slurp(dir / "grid.pgm"), slurp(std::filesystem::path(EDIT_TEST_DATA) / "golden_grid4x4.pgm"));
}

TEST(ExportTest, CsvFormat) {
  const std::string csv = encode_attention_csv(Tensor::matrix({{0.123456789012f, 1}}), 3);
  EXPECT_EQ(csv, "layer,row,col,value\n3,0,0,0.123456791\n3,0,1,1\n");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST(ExportTest, SinkCsvAndSvg) {
  const SinkStats s{{{0, 0.5, 0.25, 2.0}, {1, 0.125, 0.375, 1.0 / 3}}};
  EXPECT_EQ(encode_sink_csv(s),
            "layer,cls_share,mean_other,ratio\n0,0.5,0.25,2\n1,0.125,0.375,0.333333333\n");
  const std::string svg = render_sink_svg(s);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t lines = 0;
  for (std::size_t at = svg.find("<polyline"); at != std::string::npos;
       at = svg.find("<polyline", at + 1))
    ++lines;
  EXPECT_EQ(lines, 2u);
}

TEST(ExportTest, UnwritablePathThrows) {
  EXPECT_ANY_THROW(export_attention(Tensor({1, 1}), 0, "/nonexistent/dir/x.pgm", ExportFormat::Pgm));
}
