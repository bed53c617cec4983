#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/image.hpp"
#include "a2pm/mesa.hpp"

namespace a2pm {

inline constexpr int kGlobalProvenance = -1;

struct PointMatch {
  Eigen::Vector2d p0 = Eigen::Vector2d::Zero();
  Eigen::Vector2d p1 = Eigen::Vector2d::Zero();
  double score = 1.0;
  int provenance = kGlobalProvenance;  // index of the area match, or global
};

std::string provenance_label(int provenance);
int provenance_from_label(const std::string& s);

/// (imgA, imgB) -> matches in the local pixel coordinates of the inputs.
class PointMatcherProvider {
 public:
  virtual ~PointMatcherProvider() = default;
  virtual std::vector<PointMatch> match(const cv::Mat& a, const cv::Mat& b) const = 0;
};

/// Coarse NCC patch matches read as point matches at patch centers.
class BaselinePointMatcher final : public PointMatcherProvider {
 public:
  explicit BaselinePointMatcher(double min_correlation = 0.2) : min_correlation_(min_correlation) {}
  std::vector<PointMatch> match(const cv::Mat& a, const cv::Mat& b) const override;

 private:
  double min_correlation_;
};

struct PipelineConfig {
  double aspect_ratio = 1.0;     // r_a
  int pm_input_side = 480;
  double occupancy_ratio = 0.6;
  double phi = 3.5;              // Sampson threshold of the geometric filter
  int ransac_iterations = 1000;
  std::uint64_t seed = 0;
  bool global_collection = true;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

struct CropPair {
  cv::Mat a;
  cv::Mat b;
  CropTransform ta;
  CropTransform tb;
  Area area_a;  // region of the full image behind the crop
  Area area_b;
  bool letterboxed = false;
  int valid_width_a = 0;  // crop pixels outside these bounds are padding
  int valid_height_a = 0;
  int valid_width_b = 0;
  int valid_height_b = 0;
};

/// Expands both areas to the aspect ratio, crops them at full resolution and
/// resamples to pm_input_side x round(pm_input_side / r_a). An area that
/// cannot take the aspect ratio inside its image falls back to the whole
/// image, scaled to fit and padded with zeros at the right/bottom.
CropPair crop_area_pair(const cv::Mat& img0, const cv::Mat& img1, const AreaMatch& m,
                        const PipelineConfig& cfg);

struct FilterReport {
  bool applied = false;
  std::string warning;
  std::size_t removed = 0;
};

/// Keeps matches whose Sampson distance to a robustly estimated fundamental
/// matrix is at most phi. Fewer than 8 matches, an infinite phi or a failed
/// estimate leave the input unchanged.
std::vector<PointMatch> geometric_filter(const std::vector<PointMatch>& matches, double phi,
                                         int iterations, std::uint64_t seed,
                                         FilterReport* report = nullptr);

/// Fraction of image-0 pixels covered by the union of the matched source areas.
double covered_fraction(const std::vector<AreaMatch>& area_matches, const ImageDims& dims);

/// Appends full-image matches (on images resized to pm_input_side width)
/// whose image-0 point falls outside the matched source areas, when those
/// areas cover less than the occupancy ratio.
std::vector<PointMatch> global_collection(const cv::Mat& img0, const cv::Mat& img1,
                                          const std::vector<AreaMatch>& area_matches,
                                          const std::vector<PointMatch>& matches,
                                          const PointMatcherProvider& pm,
                                          const PipelineConfig& cfg, bool* triggered = nullptr);

/// Keeps the highest-scoring match per (1-px cell in image 0, 1-px cell in
/// image 1); earlier matches win ties. Output keeps input order.
std::vector<PointMatch> dedupe_matches(const std::vector<PointMatch>& matches);

/// Matches over the whole images, resized to pm_input_side width, mapped
/// back to full coordinates.
std::vector<PointMatch> match_full_images(const cv::Mat& img0, const cv::Mat& img1,
                                          const PointMatcherProvider& pm, int side);

struct PairFailure {
  int area_match = -1;
  std::string reason;
};

struct PipelineResult {
  std::vector<PointMatch> matches;
  std::vector<PairFailure> failures;
  std::vector<int> letterboxed;
  std::size_t raw_matches = 0;
  std::size_t after_dedupe = 0;
  FilterReport filter;
  bool global_triggered = false;
};

PipelineResult run_a2pm(const cv::Mat& img0, const cv::Mat& img1,
                        const std::vector<AreaMatch>& area_matches,
                        const PointMatcherProvider& pm, const PipelineConfig& cfg);

}  // namespace a2pm
