#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace a2pm {

struct ImageDims {
  int width = 0;
  int height = 0;

  std::int64_t pixels() const { return std::int64_t(width) * height; }
  bool valid() const { return width >= 1 && height >= 1; }
  bool operator==(const ImageDims&) const = default;
};

/// Half-open integer pixel rectangle [x_min, x_max) x [y_min, y_max).
struct Area {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  std::int64_t size() const { return std::int64_t(width()) * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }

  /// Continuous center of the pixel span.
  Eigen::Vector2d center() const {
    return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)};
  }

  /// max(W/H, H/W); always >= 1 for a valid area.
  double aspect() const;

  bool contains(const Area& other) const {
    return x_min <= other.x_min && y_min <= other.y_min && x_max >= other.x_max &&
           y_max >= other.y_max;
  }
  bool inside(const ImageDims& dims) const {
    return x_min >= 0 && y_min >= 0 && x_max <= dims.width && y_max <= dims.height;
  }

  static Area full(const ImageDims& dims) { return {0, 0, dims.width, dims.height}; }

  bool operator==(const Area&) const = default;
  auto operator<=>(const Area&) const = default;
};

std::string to_string(const Area& a);

/// Number of pixels shared by both rectangles.
std::int64_t intersection_size(const Area& a, const Area& b);

/// Overlap size over the smaller of the two sizes; 0 for disjoint areas.
double overlap_ratio(const Area& a, const Area& b);

double iou(const Area& a, const Area& b);

/// Smallest rectangle containing both inputs.
Area fuse(const Area& a, const Area& b);

/// Ordered size thresholds TL_0 < ... < TL_L in pixels^2. Level i covers
/// [TL_i, TL_{i+1}); the top level L-1 is open above.
class LevelThresholds {
 public:
  explicit LevelThresholds(std::vector<std::int64_t> thresholds);

  /// {80^2, 130^2, 256^2, 390^2, 560^2}, four usable levels.
  static LevelThresholds defaults();

  int level_count() const { return int(thresholds_.size()) - 1; }
  int top_level() const { return level_count() - 1; }
  std::int64_t threshold(int i) const { return thresholds_.at(std::size_t(i)); }
  const std::vector<std::int64_t>& values() const { return thresholds_; }

 private:
  std::vector<std::int64_t> thresholds_;
};

/// Size level of an area, or nullopt when it is below TL_0. Areas at or
/// above TL_{L-1} are clamped to the top level.
std::optional<int> assign_level(const Area& a, const LevelThresholds& t);

/// Smallest integer s with s*s >= v.
std::int64_t ceil_sqrt(std::int64_t v);

/// Grows an area to the smallest size of `target_level` keeping its center,
/// then shifts it back inside the image if needed. Throws GeometryError when
/// the grown rectangle cannot fit in the image.
Area expand_to_level(const Area& a, int target_level, const LevelThresholds& t,
                     const ImageDims& dims);

/// Expands the shorter side so that W/H == aspect_ratio (up to rounding),
/// keeping the center and shifting inside the image. Throws GeometryError
/// when no such rectangle fits.
Area expand_to_aspect(const Area& a, double aspect_ratio, const ImageDims& dims);

/// Resizes `a` to (width, height) around its center and shifts it minimally
/// along each axis to lie inside `dims`.
Area recenter_within(const Area& a, int width, int height, const ImageDims& dims);

}  // namespace a2pm
