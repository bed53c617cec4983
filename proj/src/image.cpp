#include "a2pm/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "a2pm/error.hpp"

namespace a2pm {

cv::Mat load_gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("image not found: " + path.string());
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw DataError("cannot decode image " + path.string());
  return img;
}

cv::Mat to_gray(const cv::Mat& img) {
  cv::Mat out;
  if (img.channels() == 3) {
    cv::cvtColor(img, out, cv::COLOR_BGR2GRAY);
  } else if (img.channels() == 4) {
    cv::cvtColor(img, out, cv::COLOR_BGRA2GRAY);
  } else {
    out = img.clone();
  }
  if (out.depth() != CV_8U) out.convertTo(out, CV_8U);
  return out;
}

ImageDims dims_of(const cv::Mat& img) { return {img.cols, img.rows}; }

cv::Mat crop(const cv::Mat& img, const Area& a) {
  if (!a.valid() || !a.inside(dims_of(img))) {
    throw GeometryError("crop " + to_string(a) + " outside image");
  }
  return img(cv::Rect(a.x_min, a.y_min, a.width(), a.height())).clone();
}

cv::Mat resize_to(const cv::Mat& img, int width, int height) {
  if (img.cols == width && img.rows == height) return img.clone();
  cv::Mat out;
  const bool shrink = width < img.cols && height < img.rows;
  cv::resize(img, out, cv::Size(width, height), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  return out;
}

CropTransform CropTransform::for_crop(const Area& source, int target_width, int target_height) {
  CropTransform t;
  t.scale = {double(source.width()) / target_width, double(source.height()) / target_height};
  t.offset = {source.x_min + 0.5 * t.scale.x() - 0.5, source.y_min + 0.5 * t.scale.y() - 0.5};
  return t;
}

}  // namespace a2pm
