#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "edit/model.hpp"

namespace edit {

enum class Split { Train, Val };

/// Images scaled to [0, 1] and then standardized per channel with `mean`
/// and `std`, which are kept so a model can apply the same transform.
struct LabeledDataset {
  std::vector<Image> images;
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  std::vector<float> mean;
  std::vector<float> std;
  Split split = Split::Train;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

/// (x - mean[c]) / std[c] per channel, in place.
void standardize(Image& image, std::span<const float> mean, std::span<const float> std);

// ---------------------------------------------------------------- shapes

enum class ShapeKind { Square = 0, Circle = 1, Cross = 2 };

inline constexpr std::size_t kShapesImageSize = 32;
inline constexpr std::size_t kShapesClasses = 3;
inline constexpr float kShapesNoiseSigma = 0.05f;
/// Shapes are drawn at 1.0 over a 0.0 background before noise.
inline constexpr float kShapesFillContrast = 1.0f;
/// Fixed standardization constants for the shapes task, measured once over
/// 20000 generated images.
inline constexpr float kShapesMean = 0.191f;
inline constexpr float kShapesStd = 0.368f;

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Square;
  double center_x = 16.0;
  double center_y = 16.0;
  double half_extent = 6.0;
};

/// Whether pixel (x, y) lies inside the shape; pixels are sampled at their
/// centers.
bool shape_covers(const ShapeSpec& shape, std::size_t x, std::size_t y);

/// 32×32×1 image in [0, 1]: fill contrast inside the shape, 0 outside, plus
/// Gaussian noise (clamped) when `noise_sigma` > 0.
Image render_shape(const ShapeSpec& shape, float noise_sigma, Rng& rng);

/// Balanced round-robin labels (square, circle, cross, ...), random
/// position and size, standardized with the fixed shapes constants.
LabeledDataset generate_synthetic_shapes(std::size_t count, std::uint64_t seed,
                                         Split split = Split::Train);

// ---------------------------------------------------------------- CIFAR-10

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr float kCifarMean[3] = {0.4914f, 0.4822f, 0.4465f};
inline constexpr float kCifarStd[3] = {0.2470f, 0.2435f, 0.2616f};

/// Parses one CIFAR-10 binary batch file (label byte + 3×1024 channel
/// planes per record). Throws FormatError on a bad length or label.
LabeledDataset load_cifar10_file(const std::filesystem::path& file, Split split = Split::Train);

/// data_batch_1..5.bin for Train, test_batch.bin for Val.
LabeledDataset load_cifar10_binary(const std::filesystem::path& directory,
                                   Split split = Split::Train);

}  // namespace edit
