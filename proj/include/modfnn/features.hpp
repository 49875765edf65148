#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace modfnn {

// Largest RGB weight sum in the built-in catalog (the Z row).
inline constexpr double kMaxFeatureWeightSum = 1.0887;

// One linear RGB feature channel. The weight texts are kept verbatim so the
// catalog can be exported with the exact decimals it was defined with.
struct FeatureSpec {
  std::string name;
  double wr = 0.0;
  double wg = 0.0;
  double wb = 0.0;
  std::array<std::string, 3> weight_text;

  FeatureSpec() = default;
  // Parses decimal or "a/b" weight texts; validates the weight invariants.
  FeatureSpec(std::string name, std::string r, std::string g, std::string b);

  double weight_sum() const { return wr + wg + wb; }
};

// The 17 built-in features, in catalog order (R, G, B, RGg1, ..., Z).
const std::vector<FeatureSpec>& feature_catalog();

// Catalog lookup by name; throws ConfigError for an unknown name.
const FeatureSpec& feature_by_name(std::string_view name);
// 0-based position in the catalog, or -1.
int feature_index(std::string_view name);

// Plain-text table, one `name wr wg wb` line per feature.
std::string export_catalog(const std::vector<FeatureSpec>& specs);
std::vector<FeatureSpec> import_catalog(std::string_view text);

// 8-bit RGB image, stored interleaved row-major (r, g, b per pixel).
class RgbImage {
 public:
  RgbImage() = default;
  // Throws DimensionError unless height and width are even and >= 4.
  RgbImage(int height, int width);
  RgbImage(int height, int width, std::vector<std::uint8_t> interleaved);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t& at(int row, int col, int channel) {
    return pixels_[index(row, col, channel)];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return pixels_[index(row, col, channel)];
  }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) * 3 + static_cast<std::size_t>(channel);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

using Plane = Eigen::MatrixXd;
using FeatureVector = Eigen::VectorXd;

Plane downsample_mean(const Plane& plane);
Plane trim_border(const Plane& plane);
Plane apply_feature(const FeatureSpec& spec, const RgbImage& image);
// Affine map of [0, 255*S] onto [-1, 1]. Throws RangeError for entries
// outside the theoretical range (beyond a relative rounding slack).
Plane scale_to_unit(const Plane& plane, const FeatureSpec& spec);

// Full preprocessing: feature -> 2x2 mean pooling -> border trim -> scaling,
// flattened row-major. A 64x64 image yields 900 entries.
FeatureVector transform_image(const FeatureSpec& spec, const RgbImage& image);

// Output length of transform_image for an image of the given size.
constexpr int feature_vector_length(int height, int width) {
  return (height / 2 - 2) * (width / 2 - 2);
}

}  // namespace modfnn
