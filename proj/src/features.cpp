#include "modfnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"

namespace modfnn {

FeatureSpec::FeatureSpec(std::string name_, std::string r, std::string g, std::string b)
    : name(std::move(name_)),
      wr(parse_real(r)),
      wg(parse_real(g)),
      wb(parse_real(b)),
      weight_text{std::move(r), std::move(g), std::move(b)} {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
    throw ConfigError("feature name must be a non-empty token");
  if (wr < 0 || wg < 0 || wb < 0)
    throw ConfigError("feature '" + name + "' has a negative weight");
  const double s = weight_sum();
  if (!(s > 0.0) || s > kMaxFeatureWeightSum + 1e-12)
    throw ConfigError("feature '" + name + "' weight sum out of (0, 1.0887]");
}

const std::vector<FeatureSpec>& feature_catalog() {
  static const std::vector<FeatureSpec> catalog = {
      {"R", "1", "0", "0"},
      {"G", "0", "1", "0"},
      {"B", "0", "0", "1"},
      {"RGg1", "0.618", "0.382", "0"},
      {"RBg1", "0.618", "0", "0.382"},
      {"GBg1", "0", "0.618", "0.382"},
      {"RGg2", "0.382", "0.618", "0"},
      {"RBg2", "0.382", "0", "0.618"},
      {"GBg2", "0", "0.382", "0.618"},
      {"RG", "0.5", "0.5", "0"},
      {"RB", "0.5", "0", "0.5"},
      {"GB", "0", "0.5", "0.5"},
      {"eRGB", "1/3", "1/3", "1/3"},
      {"BW", "0.299", "0.587", "0.114"},
      {"X", "0.4125", "0.3576", "0.1804"},
      {"Y", "0.2126", "0.7152", "0.0722"},
      {"Z", "0.0193", "0.1192", "0.9502"},
  };
  return catalog;
}

int feature_index(std::string_view name) {
  const auto& cat = feature_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i)
    if (cat[i].name == name) return static_cast<int>(i);
  return -1;
}

const FeatureSpec& feature_by_name(std::string_view name) {
  const int i = feature_index(name);
  if (i < 0) throw ConfigError("unknown feature '" + std::string(name) + "'");
  return feature_catalog()[static_cast<std::size_t>(i)];
}

std::string export_catalog(const std::vector<FeatureSpec>& specs) {
  std::string out;
  for (const auto& f : specs) {
    out += f.name;
    for (const auto& w : f.weight_text) out += " " + w;
    out += "\n";
  }
  return out;
}

std::vector<FeatureSpec> import_catalog(std::string_view text) {
  std::vector<FeatureSpec> specs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name, r, g, b, extra;
    if (!(fields >> name >> r >> g >> b) || (fields >> extra))
      throw DataError("catalog line " + std::to_string(lineno) + ": expected `name wr wg wb`");
    specs.emplace_back(name, r, g, b);
  }
  return specs;
}

RgbImage::RgbImage(int height, int width)
    : RgbImage(height, width,
               std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) *
                                         static_cast<std::size_t>(std::max(width, 0)) * 3)) {}

RgbImage::RgbImage(int height, int width, std::vector<std::uint8_t> interleaved)
    : height_(height), width_(width), pixels_(std::move(interleaved)) {
  if (height < 4 || width < 4 || height % 2 != 0 || width % 2 != 0)
    throw DimensionError("image must have even height and width >= 4, got " +
                         std::to_string(height) + "x" + std::to_string(width));
  if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3)
    throw DimensionError("pixel buffer size does not match image dimensions");
}

Plane downsample_mean(const Plane& plane) {
  if (plane.rows() % 2 != 0 || plane.cols() % 2 != 0)
    throw DimensionError("downsample_mean needs even dimensions");
  Plane out(plane.rows() / 2, plane.cols() / 2);
  for (Eigen::Index a = 0; a < out.rows(); ++a)
    for (Eigen::Index b = 0; b < out.cols(); ++b)
      out(a, b) = (plane(2 * a, 2 * b) + plane(2 * a, 2 * b + 1) + plane(2 * a + 1, 2 * b) +
                   plane(2 * a + 1, 2 * b + 1)) / 4.0;
  return out;
}

Plane trim_border(const Plane& plane) {
  if (plane.rows() < 3 || plane.cols() < 3)
    throw DimensionError("trim_border needs at least 3x3");
  return plane.block(1, 1, plane.rows() - 2, plane.cols() - 2);
}

Plane apply_feature(const FeatureSpec& spec, const RgbImage& image) {
  Plane out(image.height(), image.width());
  for (int a = 0; a < image.height(); ++a)
    for (int b = 0; b < image.width(); ++b)
      out(a, b) = spec.wr * image.at(a, b, 0) + spec.wg * image.at(a, b, 1) +
                  spec.wb * image.at(a, b, 2);
  return out;
}

Plane scale_to_unit(const Plane& plane, const FeatureSpec& spec) {
  const double top = 255.0 * spec.weight_sum();
  // Weighted sums of integers can overshoot 255*S by a few ulps.
  const double slack = 1e-9 * top;
  Plane out(plane.rows(), plane.cols());
  for (Eigen::Index a = 0; a < plane.rows(); ++a) {
    for (Eigen::Index b = 0; b < plane.cols(); ++b) {
      const double v = plane(a, b);
      if (!(v >= -slack && v <= top + slack))
        throw RangeError("feature value " + std::to_string(v) + " outside [0, " +
                         std::to_string(top) + "]");
      out(a, b) = std::clamp(2.0 * v / top - 1.0, -1.0, 1.0);
    }
  }
  return out;
}

FeatureVector transform_image(const FeatureSpec& spec, const RgbImage& image) {
  const Plane m = scale_to_unit(trim_border(downsample_mean(apply_feature(spec, image))), spec);
  FeatureVector v(m.size());
  Eigen::Index t = 0;
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) v(t++) = m(a, b);
  return v;
}

}  // namespace modfnn
