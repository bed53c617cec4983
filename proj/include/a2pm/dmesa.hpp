#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/geometry.hpp"
#include "a2pm/gmm.hpp"
#include "a2pm/mesa.hpp"

namespace a2pm {

inline constexpr int kPatchSide = 8;
/// Context stride of the coarse matcher's patch descriptors (see
/// extract_context_patches).
inline constexpr int kDefaultPatchContext = 9;

struct PatchMatch {
  Eigen::Vector2d src_center = Eigen::Vector2d::Zero();
  Eigen::Vector2d tgt_center = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

/// Which way a coarse match call runs relative to the area being matched.
enum class CoarseDirection { forward, reverse };

class PatchMatchProvider {
 public:
  virtual ~PatchMatchProvider() = default;
  /// Patch matches from `src` into `tgt`; must be deterministic.
  virtual std::vector<PatchMatch> match(const cv::Mat& src, const cv::Mat& tgt,
                                        CoarseDirection direction) const = 0;
  /// Forward matches of `area` into `image` and reverse matches of `image`
  /// into `area`. The default makes two `match` calls.
  virtual std::pair<std::vector<PatchMatch>, std::vector<PatchMatch>> match_both(
      const cv::Mat& area, const cv::Mat& image) const {
    return {match(area, image, CoarseDirection::forward),
            match(image, area, CoarseDirection::reverse)};
  }
};

/// Mutual nearest neighbours of 8x8 patches under zero-mean NCC, confidence
/// = correlation, pairs below `min_correlation` dropped. With `context` > 1
/// each patch is described by samples of a `context` times wider window
/// (extract_context_patches). Image remainders beyond the last full patch
/// are ignored. Throws DataError when either
/// image holds no full patch.
std::vector<PatchMatch> baseline_coarse_match(const cv::Mat& src, const cv::Mat& tgt,
                                              double min_correlation = 0.2, int context = 1);

class NccPatchMatcher final : public PatchMatchProvider {
 public:
  explicit NccPatchMatcher(double min_correlation = 0.2, int context = kDefaultPatchContext)
      : min_correlation_(min_correlation), context_(context) {}
  std::vector<PatchMatch> match(const cv::Mat& src, const cv::Mat& tgt,
                                CoarseDirection) const override {
    return baseline_coarse_match(src, tgt, min_correlation_, context_);
  }
  /// Mutual nearest neighbours are symmetric, so one correlation pass serves
  /// both directions.
  std::pair<std::vector<PatchMatch>, std::vector<PatchMatch>> match_both(
      const cv::Mat& area, const cv::Mat& image) const override;

 private:
  double min_correlation_;
  int context_;
};

/// Externally computed coarse matches, one list per direction. File format:
/// {"forward": [{"src": [x, y], "tgt": [x, y], "confidence": c}, ...],
///  "reverse": [...]}.
class InjectedPatchMatcher final : public PatchMatchProvider {
 public:
  InjectedPatchMatcher(std::vector<PatchMatch> forward, std::vector<PatchMatch> reverse)
      : forward_(std::move(forward)), reverse_(std::move(reverse)) {}
  std::vector<PatchMatch> match(const cv::Mat&, const cv::Mat&,
                                CoarseDirection direction) const override {
    return direction == CoarseDirection::forward ? forward_ : reverse_;
  }

 private:
  std::vector<PatchMatch> forward_;
  std::vector<PatchMatch> reverse_;
};

InjectedPatchMatcher load_patch_matches(const std::filesystem::path& path);

/// One component per match: mean at the target center, covariance
/// diag(8/c, 8/c), uniform weights. Returns nullopt for an empty list and
/// throws DataError for a non-positive confidence.
std::optional<GMMParams> build_gmm(const std::vector<PatchMatch>& matches);

struct DmesaParams {
  double confidence_threshold = std::exp(-1.0) / (2.0 * 3.14159265358979323846);  // T_c
  int em_steps = 3;                                                                 // S_EM
  int samples = 1024;                // observation floor
  int samples_per_component = 8;     // observations per mixture component
  std::uint64_t seed = 0;
  int link_radius = kPatchSide;  // gap bridged when isolating the matched region
};

struct DmesaResult {
  Area target;         // in target image coordinates
  Area source;         // refined, in source area image coordinates
  std::size_t forward_matches = 0;
  std::size_t reverse_matches = 0;
};

/// Dense matching of one source area image against a target image, with
/// cycle-consistency refinement in both images. Returns nullopt (and a
/// reason in `why`) when coarse matching finds nothing or either extraction
/// is empty.
std::optional<DmesaResult> match_area_dmesa(const cv::Mat& src_area_img, const cv::Mat& tgt_img,
                                            const PatchMatchProvider& provider,
                                            const DmesaParams& params, std::string* why = nullptr);

/// DMESA over every source area of `g0` at `source_level`, each cropped at
/// full resolution from `img0` and matched against `img1`.
MatchReport match_areas_dmesa(const AreaGraph& g0, const cv::Mat& img0, const cv::Mat& img1,
                              const PatchMatchProvider& provider, const DmesaParams& params,
                              int source_level);

}  // namespace a2pm
