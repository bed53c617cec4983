#include "a2pm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "a2pm/error.hpp"

namespace a2pm {

namespace {

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Places a span of `length` starting at `start` inside [0, limit).
int shift_into(int start, int length, int limit) {
  if (start < 0) return 0;
  if (start + length > limit) return limit - length;
  return start;
}

}  // namespace

double Area::aspect() const {
  const double w = width();
  const double h = height();
  return std::max(w / h, h / w);
}

std::string to_string(const Area& a) {
  std::ostringstream os;
  os << '[' << a.x_min << ',' << a.y_min << ',' << a.x_max << ',' << a.y_max << ')';
  return os.str();
}

std::int64_t intersection_size(const Area& a, const Area& b) {
  const int w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const int h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0 || h <= 0) return 0;
  return std::int64_t(w) * h;
}

double overlap_ratio(const Area& a, const Area& b) {
  const auto inter = intersection_size(a, b);
  if (inter == 0) return 0.0;
  return double(inter) / double(std::min(a.size(), b.size()));
}

double iou(const Area& a, const Area& b) {
  const auto inter = intersection_size(a, b);
  if (inter == 0) return 0.0;
  return double(inter) / double(a.size() + b.size() - inter);
}

Area fuse(const Area& a, const Area& b) {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
          std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

LevelThresholds::LevelThresholds(std::vector<std::int64_t> thresholds)
    : thresholds_(std::move(thresholds)) {
  if (thresholds_.size() < 2) {
    throw ConfigError("level thresholds need at least two values");
  }
  if (thresholds_.front() <= 0) throw ConfigError("level thresholds must be positive");
  for (std::size_t i = 1; i < thresholds_.size(); ++i) {
    if (thresholds_[i] <= thresholds_[i - 1]) {
      throw ConfigError("level thresholds must be strictly increasing");
    }
  }
}

LevelThresholds LevelThresholds::defaults() {
  return LevelThresholds({80 * 80, 130 * 130, 256 * 256, 390 * 390, 560 * 560});
}

std::optional<int> assign_level(const Area& a, const LevelThresholds& t) {
  const auto s = a.size();
  if (s < t.threshold(0)) return std::nullopt;
  int level = 0;
  for (int i = 1; i < t.level_count(); ++i) {
    if (s >= t.threshold(i)) level = i;
  }
  return level;
}

std::int64_t ceil_sqrt(std::int64_t v) {
  if (v <= 0) return 0;
  auto s = std::int64_t(std::sqrt(double(v)));
  while (s * s < v) ++s;
  while (s > 0 && (s - 1) * (s - 1) >= v) --s;
  return s;
}

Area recenter_within(const Area& a, int width, int height, const ImageDims& dims) {
  if (width > dims.width || height > dims.height) {
    throw GeometryError("rectangle " + std::to_string(width) + "x" + std::to_string(height) +
                        " does not fit in " + std::to_string(dims.width) + "x" +
                        std::to_string(dims.height) + " image");
  }
  const int x0 = shift_into(a.x_min - floor_div(width - a.width(), 2), width, dims.width);
  const int y0 = shift_into(a.y_min - floor_div(height - a.height(), 2), height, dims.height);
  return {x0, y0, x0 + width, y0 + height};
}

Area expand_to_level(const Area& a, int target_level, const LevelThresholds& t,
                     const ImageDims& dims) {
  if (target_level < 0 || target_level >= t.level_count()) {
    throw ConfigError("target level out of range");
  }
  const auto s = ceil_sqrt(t.threshold(target_level));
  const auto s2 = s * s;
  std::int64_t w = a.width();
  std::int64_t h = a.height();
  if (w < s && h < s) {
    w = s;
    h = s;
  } else if (w >= s && h < s) {
    h = std::max<std::int64_t>(h, (s2 + w - 1) / w);
  } else if (h >= s && w < s) {
    w = std::max<std::int64_t>(w, (s2 + h - 1) / h);
  }
  if (w == a.width() && h == a.height() && a.inside(dims)) return a;
  return recenter_within(a, int(w), int(h), dims);
}

Area expand_to_aspect(const Area& a, double aspect_ratio, const ImageDims& dims) {
  if (!(aspect_ratio > 0.0)) throw ConfigError("aspect ratio must be positive");
  int w = a.width();
  int h = a.height();
  if (double(w) / h > aspect_ratio) {
    h = std::max(h, int(std::lround(w / aspect_ratio)));
  } else {
    w = std::max(w, int(std::lround(h * aspect_ratio)));
  }
  return recenter_within(a, w, h, dims);
}

}  // namespace a2pm
