#include "edit/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edit/io.hpp"

namespace edit {

void standardize(Image& image, std::span<const float> mean, std::span<const float> std) {
  if (mean.size() != image.channels || std.size() != image.channels) {
    throw DimensionError("standardization constants do not match " +
                         std::to_string(image.channels) + " channels");
  }
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const std::size_t c = i % image.channels;
    image.pixels[i] = (image.pixels[i] - mean[c]) / std[c];
  }
}

bool shape_covers(const ShapeSpec& s, std::size_t x, std::size_t y) {
  const double dx = std::abs(static_cast<double>(x) + 0.5 - s.center_x);
  const double dy = std::abs(static_cast<double>(y) + 0.5 - s.center_y);
  const double r = s.half_extent;
  switch (s.kind) {
    case ShapeKind::Square:
      return dx <= r && dy <= r;
    case ShapeKind::Circle:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::Cross: {
      const double arm = std::max(1.0, r / 3.0);
      return (dx <= arm && dy <= r) || (dy <= arm && dx <= r);
    }
  }
  return false;
}

Image render_shape(const ShapeSpec& shape, float noise_sigma, Rng& rng) {
  Image img = make_image(kShapesImageSize, kShapesImageSize, 1);
  for (std::size_t y = 0; y < kShapesImageSize; ++y) {
    for (std::size_t x = 0; x < kShapesImageSize; ++x) {
      float v = shape_covers(shape, x, y) ? kShapesFillContrast : 0.0f;
      if (noise_sigma > 0.0f) {
        v += noise_sigma * static_cast<float>(rng.normal());
        v = std::clamp(v, 0.0f, 1.0f);
      }
      img.at(y, x, 0) = v;
    }
  }
  return img;
}

LabeledDataset generate_synthetic_shapes(std::size_t count, std::uint64_t seed, Split split) {
  if (count < kShapesClasses) {
    throw std::invalid_argument("synthetic shapes need at least one image per class");
  }
  Rng rng(seed);
  LabeledDataset ds;
  ds.classes = kShapesClasses;
  ds.mean = {kShapesMean};
  ds.std = {kShapesStd};
  ds.split = split;
  ds.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ShapeSpec s;
    s.kind = static_cast<ShapeKind>(i % kShapesClasses);
    s.half_extent = 5.0 + 5.0 * rng.uniform();
    const double span = static_cast<double>(kShapesImageSize) - 2.0 * s.half_extent;
    s.center_x = s.half_extent + span * rng.uniform();
    s.center_y = s.half_extent + span * rng.uniform();
    Image img = render_shape(s, kShapesNoiseSigma, rng);
    standardize(img, ds.mean, ds.std);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(i % kShapesClasses);
  }
  return ds;
}

LabeledDataset load_cifar10_file(const std::filesystem::path& file, Split split) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(file);
  } catch (const std::exception& e) {
    throw FormatError(e.what());
  }
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError(file.string() + ": length " + std::to_string(bytes.size()) +
                      " is not a positive multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  LabeledDataset ds;
  ds.classes = 10;
  ds.mean.assign(std::begin(kCifarMean), std::end(kCifarMean));
  ds.std.assign(std::begin(kCifarStd), std::end(kCifarStd));
  ds.split = split;
  ds.images.reserve(records);
  constexpr std::size_t plane = 32 * 32;
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError(file.string() + ": record " + std::to_string(r) + " has label " +
                        std::to_string(rec[0]));
    }
    Image img = make_image(32, 32, 3);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < plane; ++p)
        img.at(p / 32, p % 32, c) = static_cast<float>(rec[1 + c * plane + p]) / 255.0f;
    standardize(img, ds.mean, ds.std);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(rec[0]);
  }
  return ds;
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& directory, Split split) {
  std::vector<std::filesystem::path> files;
  if (split == Split::Train) {
    for (int i = 1; i <= 5; ++i) files.push_back(directory / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(directory / "test_batch.bin");
  }
  LabeledDataset all;
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw FormatError("missing CIFAR-10 file " + f.string());
    LabeledDataset part = load_cifar10_file(f, split);
    if (all.images.empty()) {
      all = std::move(part);
      continue;
    }
    std::move(part.images.begin(), part.images.end(), std::back_inserter(all.images));
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

}  // namespace edit
