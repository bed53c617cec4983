#include "a2pm/eval.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "a2pm/error.hpp"

namespace a2pm {

void GroundTruth::validate() const {
  if (!dims0.valid() || !dims1.valid()) throw DataError("ground truth needs valid image dims");
  if (homography && std::abs(homography->determinant()) < 1e-12) {
    throw DataError("ground-truth homography is singular");
  }
  if (pose) {
    const Eigen::Matrix3d& r = pose->rotation;
    if ((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
        std::abs(r.determinant() - 1.0) > 1e-6) {
      throw DataError("ground-truth rotation is not orthonormal with det +1");
    }
  }
  if (!homography && !pose) throw DataError("ground truth needs a homography or a pose");
}

std::optional<Eigen::Vector2d> apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (!(q.z() > 1e-12)) return std::nullopt;
  return Eigen::Vector2d(q.x() / q.z(), q.y() / q.z());
}

namespace {

bool in_frame(const Eigen::Vector2d& p, const ImageDims& d) {
  return p.x() >= -0.5 && p.y() >= -0.5 && p.x() <= d.width - 0.5 && p.y() <= d.height - 0.5;
}

}  // namespace

std::optional<Eigen::Vector2d> reproject(const GroundTruth& gt, const Eigen::Vector2d& p0) {
  std::optional<Eigen::Vector2d> p1;
  if (gt.homography) {
    p1 = apply_homography(*gt.homography, p0);
  } else if (gt.pose && !gt.pose->depth0.empty()) {
    const auto& pose = *gt.pose;
    const int x = int(std::lround(p0.x()));
    const int y = int(std::lround(p0.y()));
    if (x < 0 || y < 0 || x >= pose.depth0.cols || y >= pose.depth0.rows) return std::nullopt;
    const double d = pose.depth0.at<double>(y, x);
    if (!(d > 0.0)) return std::nullopt;
    const Eigen::Vector3d ray = pose.k0.inverse() * Eigen::Vector3d(p0.x(), p0.y(), 1.0);
    const Eigen::Vector3d x1 = pose.rotation * (ray * d) + pose.translation;
    if (!(x1.z() > 0.0)) return std::nullopt;
    const Eigen::Vector3d q = pose.k1 * x1;
    p1 = Eigen::Vector2d(q.x() / q.z(), q.y() / q.z());
  }
  if (!p1 || !in_frame(*p1, gt.dims1)) return std::nullopt;
  return p1;
}

std::optional<Area> reproject_area(const Eigen::Matrix3d& h, const Area& a, const ImageDims& dims1) {
  // Corners of the covered pixel block, in continuous coordinates.
  const Eigen::Vector2d corners[4] = {{a.x_min - 0.5, a.y_min - 0.5},
                                      {a.x_max - 0.5, a.y_min - 0.5},
                                      {a.x_max - 0.5, a.y_max - 0.5},
                                      {a.x_min - 0.5, a.y_max - 0.5}};
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& c : corners) {
    const auto w = apply_homography(h, c);
    if (!w) return std::nullopt;
    x0 = std::min(x0, w->x());
    y0 = std::min(y0, w->y());
    x1 = std::max(x1, w->x());
    y1 = std::max(y1, w->y());
  }
  Area r{int(std::lround(x0 + 0.5)), int(std::lround(y0 + 0.5)), int(std::lround(x1 + 0.5)),
         int(std::lround(y1 + 0.5))};
  r.x_min = std::max(r.x_min, 0);
  r.y_min = std::max(r.y_min, 0);
  r.x_max = std::min(r.x_max, dims1.width);
  r.y_max = std::min(r.y_max, dims1.height);
  if (!r.valid()) return std::nullopt;
  return r;
}

double aor(const AreaMatch& m, const Eigen::Matrix3d& h, const ImageDims& dims1) {
  const auto r = reproject_area(h, m.source, dims1);
  if (!r || !m.target.valid()) return 0.0;
  return iou(*r, m.target);
}

Percentage amp(const std::vector<double>& aors, double tau) {
  if (aors.empty()) return {0.0, true};
  const auto hits = std::count_if(aors.begin(), aors.end(), [&](double v) { return v > tau; });
  return {100.0 * double(hits) / double(aors.size()), false};
}

double acr(const std::vector<AreaMatch>& matches, const ImageDims& dims0) {
  return 100.0 * covered_fraction(matches, dims0);
}

MmaResult mma(const std::vector<PointMatch>& matches, const GroundTruth& gt,
              const std::vector<double>& thresholds) {
  MmaResult r;
  r.thresholds = thresholds;
  std::vector<std::size_t> hits(thresholds.size(), 0);
  for (const auto& m : matches) {
    const auto p1 = reproject(gt, m.p0);
    if (!p1) {
      ++r.undefined;
      continue;
    }
    ++r.evaluated;
    const double e = (*p1 - m.p1).norm();
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      if (e <= thresholds[k]) ++hits[k];
    }
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    r.percent.push_back(r.evaluated ? 100.0 * double(hits[k]) / double(r.evaluated) : 0.0);
  }
  return r;
}

std::optional<RelativePose> estimate_pose(const std::vector<PointMatch>& matches,
                                          const Eigen::Matrix3d& k0, const Eigen::Matrix3d& k1,
                                          double threshold_px, int iterations, std::uint64_t seed) {
  if (matches.size() < 8) return std::nullopt;
  const Eigen::Matrix3d k0i = k0.inverse();
  const Eigen::Matrix3d k1i = k1.inverse();
  Points2 x0, x1;
  for (const auto& m : matches) {
    const Eigen::Vector3d a = k0i * Eigen::Vector3d(m.p0.x(), m.p0.y(), 1.0);
    const Eigen::Vector3d b = k1i * Eigen::Vector3d(m.p1.x(), m.p1.y(), 1.0);
    x0.push_back(a.hnormalized());
    x1.push_back(b.hnormalized());
  }
  const double f = 0.25 * (k0(0, 0) + k0(1, 1) + k1(0, 0) + k1(1, 1));
  const auto fit = ransac_essential(x0, x1, threshold_px / f, iterations, seed);
  if (!fit) return std::nullopt;
  return decompose_essential(fit->model, x0, x1, fit->inliers);
}

double pose_error(const RelativePose& estimate, const PoseTruth& gt) {
  return std::max(rotation_angle_deg(estimate.rotation, gt.rotation),
                  translation_angle_deg(estimate.translation, gt.translation));
}

double pair_pose_error(const std::vector<PointMatch>& matches, const PoseTruth& gt,
                       std::uint64_t seed) {
  if (matches.size() < 5) return kFailedPoseError;
  const auto est = estimate_pose(matches, gt.k0, gt.k1, 1.0, 1000, seed);
  if (!est) return kFailedPoseError;
  return pose_error(*est, gt);
}

std::vector<double> pose_auc(const std::vector<double>& errors,
                             const std::vector<double>& thresholds) {
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  std::vector<double> out;
  for (double t : thresholds) {
    if (!(t > 0.0)) throw ConfigError("AUC thresholds must be positive");
    if (sorted.empty()) {
      out.push_back(0.0);
      continue;
    }
    // Recall curve: (0, 0), then (e_i, i/n) for each sorted error below t.
    std::vector<double> xs{0.0};
    std::vector<double> ys{0.0};
    for (std::size_t i = 0; i < sorted.size() && sorted[i] < t; ++i) {
      xs.push_back(sorted[i]);
      ys.push_back(double(i + 1) / n);
    }
    xs.push_back(t);
    ys.push_back(ys.back());
    double area = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) area += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    out.push_back(100.0 * area / t);
  }
  return out;
}

}  // namespace a2pm
