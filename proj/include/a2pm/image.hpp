#pragma once

#include <filesystem>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/geometry.hpp"

namespace a2pm {

/// Reads any raster OpenCV decodes and converts it to 8-bit grayscale.
/// Throws DataError when the file is missing or undecodable.
cv::Mat load_gray(const std::filesystem::path& path);

/// 8-bit single-channel copy of `img`.
cv::Mat to_gray(const cv::Mat& img);

ImageDims dims_of(const cv::Mat& img);

/// Deep copy of the pixels inside `a` (which must lie inside the image).
cv::Mat crop(const cv::Mat& img, const Area& a);

/// Area-averaging for shrinking, bilinear for enlarging.
cv::Mat resize_to(const cv::Mat& img, int width, int height);

/// Local <-> full-image mapping for a crop of `source` resampled to
/// `target_width` x `target_height`. Pixel centers sit at integer coordinates,
/// matching OpenCV's resize convention.
struct CropTransform {
  Eigen::Vector2d scale{1.0, 1.0};
  Eigen::Vector2d offset{0.0, 0.0};

  static CropTransform for_crop(const Area& source, int target_width, int target_height);

  Eigen::Vector2d to_full(const Eigen::Vector2d& local) const {
    return local.cwiseProduct(scale) + offset;
  }
  Eigen::Vector2d to_local(const Eigen::Vector2d& full) const {
    return (full - offset).cwiseQuotient(scale);
  }
};

}  // namespace a2pm
