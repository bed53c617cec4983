#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/epipolar.hpp"
#include "a2pm/geometry.hpp"
#include "a2pm/mesa.hpp"
#include "a2pm/pipeline.hpp"

namespace a2pm {

struct PoseTruth {
  Eigen::Matrix3d k0 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d k1 = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // X1 = R X0 + t
  Eigen::Vector3d translation = Eigen::Vector3d::UnitX();
  cv::Mat depth0;  // optional CV_64FC1 depth of image 0; <= 0 means unknown
};

/// Ground truth for one image pair: a homography (image 0 -> image 1) and/or
/// a relative pose. Throws DataError from validate() for a singular
/// homography or a non-rotation.
struct GroundTruth {
  ImageDims dims0;
  ImageDims dims1;
  std::optional<Eigen::Matrix3d> homography;
  std::optional<PoseTruth> pose;

  void validate() const;
};

/// H * (x, y, 1) dehomogenized; nullopt when the point maps to infinity or
/// behind the plane at infinity (w <= 0).
std::optional<Eigen::Vector2d> apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);

/// Image-1 location of an image-0 pixel under the ground truth; nullopt when
/// it is undefined (out of frame, or no depth for a pose-only truth).
std::optional<Eigen::Vector2d> reproject(const GroundTruth& gt, const Eigen::Vector2d& p0);

/// Bounding box of the warped rectangle corners, clipped to image 1; nullopt
/// when nothing of it is left.
std::optional<Area> reproject_area(const Eigen::Matrix3d& h, const Area& a, const ImageDims& dims1);

/// IoU between the reprojected source rectangle and the matched target.
double aor(const AreaMatch& m, const Eigen::Matrix3d& h, const ImageDims& dims1);

struct Percentage {
  double value = 0.0;  // in [0, 100]
  bool empty = false;
};

/// Share of AOR values strictly above `tau`.
Percentage amp(const std::vector<double>& aors, double tau = 0.6);

/// Union coverage of matched source areas over image 0, in percent.
double acr(const std::vector<AreaMatch>& matches, const ImageDims& dims0);

struct MmaResult {
  std::vector<double> thresholds;
  std::vector<double> percent;
  std::size_t evaluated = 0;
  std::size_t undefined = 0;
};

MmaResult mma(const std::vector<PointMatch>& matches, const GroundTruth& gt,
              const std::vector<double>& thresholds = {3.0, 5.0, 7.0});

inline constexpr double kFailedPoseError = 180.0;

/// Relative pose from pixel matches through a robust essential-matrix fit on
/// normalized coordinates. nullopt with fewer than 8 matches or when
/// estimation fails.
std::optional<RelativePose> estimate_pose(const std::vector<PointMatch>& matches,
                                          const Eigen::Matrix3d& k0, const Eigen::Matrix3d& k1,
                                          double threshold_px = 1.0, int iterations = 1000,
                                          std::uint64_t seed = 0);

/// max(rotation angle, translation angle) in degrees.
double pose_error(const RelativePose& estimate, const PoseTruth& gt);

/// Pose error of one pair, 180 when estimation fails or fewer than 5
/// matches are given.
double pair_pose_error(const std::vector<PointMatch>& matches, const PoseTruth& gt,
                       std::uint64_t seed = 0);

/// Exact area under the piecewise-linear recall curve of pooled errors up to
/// each threshold, normalized by the threshold, in percent.
std::vector<double> pose_auc(const std::vector<double>& errors,
                             const std::vector<double>& thresholds = {5.0, 10.0, 20.0});

}  // namespace a2pm
