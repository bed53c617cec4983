#pragma once

#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

namespace a2pm {

/// Non-overlapping square patches of a grayscale image on a regular grid.
/// Rows of `normalized` hold zero-mean unit-norm patch vectors; flat patches
/// (standard deviation below `flat_std`) get a zero row.
struct PatchGrid {
  int patch = 8;
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd normalized;
  std::vector<double> means;
  std::vector<bool> flat;

  int count() const { return rows * cols; }
  /// Pixel-coordinate center of patch `index` (row-major).
  Eigen::Vector2d center(int index) const {
    return {(index % cols) * patch + 0.5 * (patch - 1), (index / cols) * patch + 0.5 * (patch - 1)};
  }
};

inline constexpr double kFlatPatchStd = 1.0;

/// Tiles the image with `patch` x `patch` blocks, ignoring any remainder on
/// the right and bottom edges.
PatchGrid extract_patches(const cv::Mat& gray, int patch = 8, double flat_std = kFlatPatchStd);

/// Same grid, but each cell is described by `patch` x `patch` samples taken
/// at stride `context` from a box-filtered copy of the image, centered on
/// the cell. `context` must be odd; 1 gives extract_patches.
PatchGrid extract_context_patches(const cv::Mat& gray, int patch, int context,
                                  double flat_std = kFlatPatchStd);

/// Raw context samples of every grid cell (see extract_context_patches) and
/// whether each sample's filter window lies inside the image.
struct ContextSamples {
  int patch = 8;
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd values;                // count() x patch^2
  std::vector<std::vector<bool>> valid;  // per cell, per sample

  int count() const { return rows * cols; }
  Eigen::Vector2d center(int index) const {
    return {(index % cols) * patch + 0.5 * (patch - 1), (index / cols) * patch + 0.5 * (patch - 1)};
  }
};

ContextSamples context_samples(const cv::Mat& gray, int patch, int context);

/// NCC of every cell pair computed over the samples that are valid in the
/// `a` cell; samples of `b` falling outside its image are replaced by the
/// mean of its remaining ones. Cells that are flat on those samples score 0.
Eigen::MatrixXd masked_ncc_matrix(const ContextSamples& a, const ContextSamples& b,
                                  double flat_std = kFlatPatchStd);

/// Zero-mean normalized cross-correlation between every patch pair
/// (a.count() x b.count()); pairs involving a flat patch are 0.
Eigen::MatrixXd ncc_matrix(const PatchGrid& a, const PatchGrid& b);

}  // namespace a2pm
