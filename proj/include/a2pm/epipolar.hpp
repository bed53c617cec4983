#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace a2pm {

using Points2 = std::vector<Eigen::Vector2d>;

/// Hartley normalization: centroid to the origin, mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const Points2& pts);

/// Normalized 8-point estimate from >= 8 correspondences with x1^T F x0 = 0
/// and rank 2 enforced. Returns nullopt for degenerate input.
std::optional<Eigen::Matrix3d> fundamental_8point(const Points2& p0, const Points2& p1);

/// First-order geometric (Sampson) distance of a correspondence to F, in the
/// units of the input points.
double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x0,
                        const Eigen::Vector2d& x1);

struct RansacResult {
  Eigen::Matrix3d model = Eigen::Matrix3d::Zero();
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

/// Fixed-iteration consensus over 8-point minimal samples followed by one
/// refit on the consensus set. Returns nullopt when fewer than 8 matches are
/// given or no sample yields a model with 8 inliers.
std::optional<RansacResult> ransac_fundamental(const Points2& p0, const Points2& p1,
                                               double threshold, int iterations,
                                               std::uint64_t seed);

/// Same estimator for the essential matrix on calibrated (normalized image)
/// coordinates: singular values projected to (1, 1, 0).
std::optional<RansacResult> ransac_essential(const Points2& x0, const Points2& x1,
                                             double threshold, int iterations,
                                             std::uint64_t seed);

struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::UnitX();  // unit length
};

/// Picks the decomposition of E that puts most correspondences in front of
/// both cameras (x1 ~ R x0 + t).
std::optional<RelativePose> decompose_essential(const Eigen::Matrix3d& e, const Points2& x0,
                                                const Points2& x1,
                                                const std::vector<bool>& use);

/// Angle of R_a^T R_b in degrees.
double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
/// Angle between translation directions in degrees, ignoring the sign.
double translation_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace a2pm
