#include "a2pm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <opencv2/imgproc.hpp>

#include "a2pm/error.hpp"

namespace a2pm {

std::string to_string(WarpFamily f) {
  switch (f) {
    case WarpFamily::identity: return "identity";
    case WarpFamily::translation: return "translation";
    case WarpFamily::similarity: return "similarity";
    case WarpFamily::homography: return "homography";
  }
  return "identity";
}

WarpFamily warp_family_from_string(const std::string& s) {
  if (s == "identity") return WarpFamily::identity;
  if (s == "translation") return WarpFamily::translation;
  if (s == "similarity") return WarpFamily::similarity;
  if (s == "homography") return WarpFamily::homography;
  throw ConfigError("unknown warp family '" + s + "'");
}

GroundTruth SyntheticScene::truth() const {
  GroundTruth gt;
  gt.dims0 = {image0.cols, image0.rows};
  gt.dims1 = {image1.cols, image1.rows};
  gt.homography = homography;
  return gt;
}

cv::Mat procedural_texture(int width, int height, double density, std::uint64_t seed) {
  if (width <= 0 || height <= 0 || !(density > 0.0)) throw ConfigError("invalid texture spec");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  cv::Mat acc = cv::Mat::zeros(height, width, CV_64FC1);

  // Soft global gradient.
  const double gx = unit(rng) - 0.5;
  const double gy = unit(rng) - 0.5;
  for (int y = 0; y < height; ++y) {
    auto* row = acc.ptr<double>(y);
    for (int x = 0; x < width; ++x) row[x] = 0.6 * (gx * x / width + gy * y / height);
  }

  const auto blobs = std::int64_t(density * double(width) * double(height) / 1000.0);
  for (std::int64_t b = 0; b < blobs; ++b) {
    const double cx = unit(rng) * width;
    const double cy = unit(rng) * height;
    // Log-uniform radius so the texture has structure at several scales.
    const double sigma = 1.5 * std::pow(8.0, unit(rng));
    const double amp = 2.0 * unit(rng) - 1.0;
    const int r = int(std::ceil(3.0 * sigma));
    const int x0 = std::max(0, int(cx) - r), x1 = std::min(width - 1, int(cx) + r);
    const int y0 = std::max(0, int(cy) - r), y1 = std::min(height - 1, int(cy) + r);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y) {
      auto* row = acc.ptr<double>(y);
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        row[x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  double lo = 0.0, hi = 0.0;
  cv::minMaxLoc(acc, &lo, &hi);
  cv::Mat out;
  acc.convertTo(out, CV_8UC1, hi > lo ? 255.0 / (hi - lo) : 0.0, hi > lo ? -lo * 255.0 / (hi - lo) : 0.0);
  return out;
}

namespace {

constexpr int kMargin = 256;

Eigen::Matrix3d translation(double dx, double dy) {
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = dx;
  t(1, 2) = dy;
  return t;
}

Eigen::Matrix3d rotation_scale(double angle, double s) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = s * std::cos(angle);
  m(0, 1) = -s * std::sin(angle);
  m(1, 0) = s * std::sin(angle);
  m(1, 1) = s * std::cos(angle);
  return m;
}

Eigen::Matrix3d sample_warp(const SceneSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = spec.width, h = spec.height;
  switch (spec.family) {
    case WarpFamily::identity: return Eigen::Matrix3d::Identity();
    case WarpFamily::translation: {
      const int t = int(std::floor(spec.max_translation));
      std::uniform_int_distribution<int> shift(-t, t);
      const int dx = shift(rng);
      const int dy = shift(rng);
      return translation(dx, dy);
    }
    case WarpFamily::similarity: {
      const double angle = (unit(rng) - 0.5) * 30.0 * std::numbers::pi / 180.0;
      const double s = 0.85 + 0.3 * unit(rng);
      const double tx = (2.0 * unit(rng) - 1.0) * spec.max_translation;
      const double ty = (2.0 * unit(rng) - 1.0) * spec.max_translation;
      return translation(w / 2 + tx, h / 2 + ty) * rotation_scale(angle, s) *
             translation(-w / 2, -h / 2);
    }
    case WarpFamily::homography: {
      const double s = spec.scale;
      const double half_w = w / (2.0 * s), half_h = h / (2.0 * s);
      const double cx = half_w + unit(rng) * std::max(0.0, w - 2.0 * half_w);
      const double cy = half_h + unit(rng) * std::max(0.0, h - 2.0 * half_h);
      const double angle = (unit(rng) - 0.5) * 20.0 * std::numbers::pi / 180.0;
      Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
      p(2, 0) = (unit(rng) - 0.5) * 2e-4 * s;
      p(2, 1) = (unit(rng) - 0.5) * 2e-4 * s;
      return translation(w / 2, h / 2) * p * rotation_scale(angle, s) * translation(-cx, -cy);
    }
  }
  return Eigen::Matrix3d::Identity();
}

cv::Matx33d to_cv(const Eigen::Matrix3d& m) {
  cv::Matx33d out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out(r, c) = m(r, c);
  }
  return out;
}

// Image-1 pixels whose preimage falls in the continuous footprint of `a`.
cv::Mat warp_rect_mask(const Area& a, const Eigen::Matrix3d& h, const ImageDims& dims1) {
  cv::Mat mask = cv::Mat::zeros(dims1.height, dims1.width, CV_8UC1);
  const auto box = reproject_area(h, a, dims1);
  if (!box) return mask;
  const Eigen::Matrix3d inv = h.inverse();
  for (int y = std::max(0, box->y_min - 2); y < std::min(dims1.height, box->y_max + 2); ++y) {
    for (int x = std::max(0, box->x_min - 2); x < std::min(dims1.width, box->x_max + 2); ++x) {
      const auto p = apply_homography(inv, {double(x), double(y)});
      if (!p) continue;
      if (p->x() >= a.x_min - 0.5 && p->x() < a.x_max - 0.5 && p->y() >= a.y_min - 0.5 &&
          p->y() < a.y_max - 0.5) {
        mask.at<std::uint8_t>(y, x) = 255;
      }
    }
  }
  return mask;
}

bool footprint_inside(const Area& a, const Eigen::Matrix3d& h, const ImageDims& dims1) {
  const Eigen::Vector2d corners[4] = {{a.x_min - 0.5, a.y_min - 0.5},
                                      {a.x_max - 0.5, a.y_min - 0.5},
                                      {a.x_max - 0.5, a.y_max - 0.5},
                                      {a.x_min - 0.5, a.y_max - 0.5}};
  for (const auto& c : corners) {
    const auto p = apply_homography(h, c);
    if (!p || p->x() < -0.5 || p->y() < -0.5 || p->x() > dims1.width - 0.5 ||
        p->y() > dims1.height - 0.5) {
      return false;
    }
  }
  return true;
}

SyntheticScene make_scene(const SceneSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ImageDims dims{spec.width, spec.height};
  SyntheticScene s;
  s.homography = sample_warp(spec, rng);

  const cv::Mat canvas = procedural_texture(spec.width + 2 * kMargin, spec.height + 2 * kMargin,
                                            spec.texture_density, rng());
  s.image0 = canvas(cv::Rect(kMargin, kMargin, spec.width, spec.height)).clone();
  if (spec.family == WarpFamily::identity) {
    s.image1 = s.image0.clone();
  } else {
    const Eigen::Matrix3d back = translation(kMargin, kMargin) * s.homography.inverse();
    cv::warpPerspective(canvas, s.image1, to_cv(back), cv::Size(spec.width, spec.height),
                        cv::INTER_LINEAR | cv::WARP_INVERSE_MAP, cv::BORDER_REFLECT);
  }

  // Rectangles sized relative to the part of image 0 that stays visible.
  const double zoom = std::max(1.0, std::abs(s.homography.block<2, 2>(0, 0).determinant()));
  const double reach = 1.0 / std::sqrt(zoom);
  const int min_side = 90;
  const int max_side = std::max(min_side + 10, int(std::min(spec.width, spec.height) * 0.55 * reach));
  for (int attempt = 0; attempt < 400 && int(s.areas0.size()) < spec.n_segments; ++attempt) {
    const int w = min_side + int(unit(rng) * (max_side - min_side));
    const int h = min_side + int(unit(rng) * (max_side - min_side));
    if (double(std::max(w, h)) / std::min(w, h) > 3.0) continue;
    if (w >= spec.width || h >= spec.height) continue;
    const int x = int(unit(rng) * (spec.width - w));
    const int y = int(unit(rng) * (spec.height - h));
    const Area a{x, y, x + w, y + h};
    if (!footprint_inside(a, s.homography, dims)) continue;
    const bool clash = std::any_of(s.areas0.begin(), s.areas0.end(),
                                   [&](const Area& b) { return iou(a, b) > 0.5; });
    if (clash) continue;
    char id[16];
    std::snprintf(id, sizeof id, "seg_%03d", int(s.areas0.size()));
    SegmentMask m1{id, warp_rect_mask(a, s.homography, dims)};
    SegmentMask m0{id, cv::Mat::zeros(spec.height, spec.width, CV_8UC1)};
    m0.bitmap(cv::Rect(a.x_min, a.y_min, w, h)).setTo(255);
    s.areas0.push_back(a);
    s.areas1.push_back(mask_to_area(m1));
    s.masks0.push_back(std::move(m0));
    s.masks1.push_back(std::move(m1));
  }
  return s;
}

}  // namespace

std::vector<SyntheticScene> gen_synthetic(const SceneSpec& spec) {
  if (spec.n_scenes < 0 || spec.n_segments < 0) throw ConfigError("negative scene counts");
  if (spec.width < 128 || spec.height < 128) throw ConfigError("scene images must be at least 128 px");
  if (!(spec.scale > 0.0)) throw ConfigError("scene scale must be positive");
  if (spec.max_translation < 0.0) throw ConfigError("max_translation must be non-negative");
  std::vector<SyntheticScene> out;
  for (int i = 0; i < spec.n_scenes; ++i) out.push_back(make_scene(spec, spec.seed + std::uint64_t(i)));
  return out;
}

PoseScene gen_pose_scene(int n_points, std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PoseScene s;
  s.dims = {width, height};
  Eigen::Matrix3d k;
  k << 500.0, 0.0, width / 2.0, 0.0, 500.0, height / 2.0, 0.0, 0.0, 1.0;
  s.truth.k0 = k;
  s.truth.k1 = k;
  Eigen::Vector3d axis(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
  axis.normalize();
  const double angle = (5.0 + 15.0 * unit(rng)) * std::numbers::pi / 180.0;
  s.truth.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  Eigen::Vector3d t(unit(rng) - 0.5, unit(rng) - 0.5, 0.3 * (unit(rng) - 0.5));
  s.truth.translation = t.normalized();

  const Eigen::Matrix3d kinv = k.inverse();
  for (int attempt = 0; attempt < 100 * n_points && int(s.matches.size()) < n_points; ++attempt) {
    const Eigen::Vector2d p0(unit(rng) * (width - 1), unit(rng) * (height - 1));
    const double depth = 4.0 + 6.0 * unit(rng);
    const Eigen::Vector3d x0 = kinv * Eigen::Vector3d(p0.x(), p0.y(), 1.0) * depth;
    const Eigen::Vector3d x1 = s.truth.rotation * x0 + s.truth.translation;
    if (x1.z() < 0.5) continue;
    const Eigen::Vector3d q = k * x1;
    const Eigen::Vector2d p1(q.x() / q.z(), q.y() / q.z());
    if (p1.x() < 0 || p1.y() < 0 || p1.x() > width - 1 || p1.y() > height - 1) continue;
    s.matches.push_back({p0, p1, 1.0, kGlobalProvenance});
  }
  return s;
}

double OracleSimilarityProvider::similarity(const AreaPair& pair) const {
  const auto r = reproject_area(h_, pair.area0, dims1_);
  return r ? iou(*r, pair.area1) : 0.0;
}

}  // namespace a2pm
