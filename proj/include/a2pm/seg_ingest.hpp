#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "a2pm/geometry.hpp"

namespace a2pm {

/// One binary segmentation region; nonzero pixels are foreground.
struct SegmentMask {
  std::string id;
  cv::Mat bitmap;  // CV_8UC1, sized to the image

  ImageDims dims() const { return {bitmap.cols, bitmap.rows}; }
};

struct MaskIssue {
  std::string id;
  std::string reason;
};

struct MaskLoadResult {
  std::vector<SegmentMask> masks;
  std::vector<MaskIssue> rejected;
  std::optional<ImageDims> dims;
};

/// Loads masks from
///  - a directory holding `manifest.json` plus one raster per mask,
///  - a directory of raster files (no manifest),
///  - a manifest file, or
///  - a JSON file of column-major RLE records (`size` = [h, w], `counts`).
/// Masks come back sorted by filename (or id for RLE input). Masks without
/// foreground are reported in `rejected` instead of failing the load.
/// Throws DataError for a missing path, unreadable/malformed masks, and masks
/// whose size disagrees with the declared or expected image dims.
MaskLoadResult load_masks(const std::filesystem::path& path,
                          std::optional<ImageDims> expected_dims = std::nullopt);

/// Decodes an uncompressed column-major RLE (zeros run first).
cv::Mat decode_rle(const std::vector<long long>& counts, ImageDims dims);

/// Tight bounding box of the foreground. Throws DataError on an empty mask.
Area mask_to_area(const SegmentMask& m);

enum class AreaSource { segmentation, fused };

std::string to_string(AreaSource s);
AreaSource area_source_from_string(const std::string& s);

struct Candidate {
  Area area;
  AreaSource source = AreaSource::segmentation;

  bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
  ImageDims dims;
  std::vector<Candidate> candidates;
  std::vector<std::string> warnings;

  std::vector<Area> areas() const;
};

struct PreprocessParams {
  std::int64_t min_size = 80 * 80;  // T_s
  double max_aspect = 4.0;          // T_r
};

bool passes_filter(const Area& a, const PreprocessParams& p);

/// Drops exact duplicates, keeping first occurrences in order.
std::vector<Area> dedupe_areas(const std::vector<Area>& areas);

/// Screens areas that are too small or too elongated and fuses each one into
/// its nearest surviving candidate (by center distance), repeating until
/// every area passes. Screened areas with nothing to fuse into are dropped
/// with a warning.
CandidateSet preprocess(const std::vector<Area>& areas, const PreprocessParams& params,
                        const ImageDims& dims);

}  // namespace a2pm
