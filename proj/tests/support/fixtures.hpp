#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "edit/model.hpp"
#include "edit/random.hpp"

namespace edit::testing {

/// d=8, heads=2, n=4 (8×8 image, patch 4), depth 2, 3 classes.
inline ModelConfig micro_config() {
  ModelConfig c;
  c.image_h = 8;
  c.image_w = 8;
  c.channels = 1;
  c.patch = 4;
  c.width = 8;
  c.heads = 2;
  c.depth = 2;
  c.classes = 3;
  return c;
}

inline Image random_image(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Image img = make_image(c.image_h, c.image_w, c.channels);
  for (float& v : img.pixels) v = static_cast<float>(rng.normal());
  return img;
}

/// Fills every parameter, norms included, with N(mean, sigma) so that no
/// gradient is trivially small.
inline void scramble(std::span<Parameter* const> params, std::uint64_t seed, double sigma = 0.5) {
  Rng rng(seed);
  for (Parameter* p : params) {
    const bool gain = p->name.ends_with(".gamma") || p->name.ends_with(".scale");
    for (float& v : p->value.data())
      v = static_cast<float>((gain ? 1.0 : 0.0) + sigma * rng.normal());
  }
}

template <typename Model>
Model random_model(const ModelConfig& c, std::uint64_t seed, double sigma = 0.5) {
  Model m(c);
  scramble(m.parameters(), seed, sigma);
  return m;
}

inline void zero_all(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->value.fill(0.0f);
}

inline double max_row_sum_error(const Tensor& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double total = 0.0;
    for (float v : m.row(r)) {
      if (v < 0.0f) return 1.0;
      total += v;
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "tmp";
    path_ = std::filesystem::temp_directory_path() / ("edit_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

}  // namespace edit::testing
