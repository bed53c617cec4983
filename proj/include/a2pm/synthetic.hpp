#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/eval.hpp"
#include "a2pm/seg_ingest.hpp"
#include "a2pm/similarity.hpp"

namespace a2pm {

enum class WarpFamily { identity, translation, similarity, homography };

std::string to_string(WarpFamily f);
WarpFamily warp_family_from_string(const std::string& s);

struct SceneSpec {
  int n_scenes = 1;
  WarpFamily family = WarpFamily::identity;
  double texture_density = 1.0;  // blobs per 1000 px^2 of canvas
  int n_segments = 6;
  int width = 640;
  int height = 480;
  double max_translation = 40.0;  // px, translation and similarity families
  double scale = 1.0;             // zoom of the homography family
  std::uint64_t seed = 0;
};

struct SyntheticScene {
  cv::Mat image0;
  cv::Mat image1;
  Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();  // image 0 -> image 1
  std::vector<SegmentMask> masks0;
  std::vector<SegmentMask> masks1;
  std::vector<Area> areas0;  // bounding boxes; areas0[i] corresponds to areas1[i]
  std::vector<Area> areas1;

  GroundTruth truth() const;
};

/// Textured canvas of `width` x `height`: smoothed random blobs over a soft
/// gradient, stretched to the full 8-bit range.
cv::Mat procedural_texture(int width, int height, double density, std::uint64_t seed);

/// Deterministic scenes; scene i uses seed `spec.seed + i`. Segments are
/// rectangles whose warped footprint lies fully inside image 1.
std::vector<SyntheticScene> gen_synthetic(const SceneSpec& spec);

/// Exact correspondences of random 3-D points seen by two cameras with a
/// known relative pose.
struct PoseScene {
  PoseTruth truth;
  ImageDims dims;
  std::vector<PointMatch> matches;
};

PoseScene gen_pose_scene(int n_points, std::uint64_t seed, int width = 640, int height = 480);

/// Similarity oracle: IoU between the ground-truth reprojection of the image-0
/// area and the image-1 area.
class OracleSimilarityProvider final : public SimilarityProvider {
 public:
  OracleSimilarityProvider(Eigen::Matrix3d homography, ImageDims dims1)
      : h_(std::move(homography)), dims1_(dims1) {}
  double similarity(const AreaPair& pair) const override;

 private:
  Eigen::Matrix3d h_;
  ImageDims dims1_;
};

}  // namespace a2pm
