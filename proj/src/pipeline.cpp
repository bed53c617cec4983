#include "a2pm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include <opencv2/imgproc.hpp>

#include "a2pm/dmesa.hpp"
#include "a2pm/epipolar.hpp"
#include "a2pm/error.hpp"

namespace a2pm {

std::string provenance_label(int provenance) {
  return provenance == kGlobalProvenance ? "global" : "area:" + std::to_string(provenance);
}

int provenance_from_label(const std::string& s) {
  if (s == "global") return kGlobalProvenance;
  if (s.rfind("area:", 0) == 0) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s.substr(5), &used);
      if (used == s.size() - 5 && v >= 0) return v;
    } catch (const std::exception&) {
    }
  }
  throw DataError("bad provenance '" + s + "'");
}

std::vector<PointMatch> BaselinePointMatcher::match(const cv::Mat& a, const cv::Mat& b) const {
  std::vector<PointMatch> out;
  for (const auto& m : baseline_coarse_match(a, b, min_correlation_)) {
    out.push_back({m.src_center, m.tgt_center, m.confidence, kGlobalProvenance});
  }
  return out;
}

void PipelineConfig::validate() const {
  if (!(aspect_ratio > 0.0)) throw ConfigError("r_a must be positive");
  if (pm_input_side < 8) throw ConfigError("pm_input_side must be at least 8");
  if (!(occupancy_ratio >= 0.0 && occupancy_ratio <= 1.0)) {
    throw ConfigError("occupancy_ratio must lie in [0, 1]");
  }
  if (!(phi > 0.0)) throw ConfigError("phi must be positive");
  if (ransac_iterations < 1) throw ConfigError("ransac_iterations must be positive");
}

namespace {

struct SideCrop {
  cv::Mat img;
  CropTransform t;
  Area area;
  bool letterboxed = false;
  int valid_w = 0;
  int valid_h = 0;
};

SideCrop crop_side(const cv::Mat& gray, const Area& area, int out_w, int out_h, double r_a) {
  const ImageDims dims = dims_of(gray);
  SideCrop s;
  try {
    s.area = expand_to_aspect(area, r_a, dims);
    s.img = resize_to(crop(gray, s.area), out_w, out_h);
    s.t = CropTransform::for_crop(s.area, out_w, out_h);
    s.valid_w = out_w;
    s.valid_h = out_h;
    return s;
  } catch (const GeometryError&) {
  }
  s.letterboxed = true;
  s.area = Area::full(dims);
  const double f = std::min(double(out_w) / dims.width, double(out_h) / dims.height);
  s.valid_w = std::clamp(int(std::lround(dims.width * f)), 1, out_w);
  s.valid_h = std::clamp(int(std::lround(dims.height * f)), 1, out_h);
  s.img = cv::Mat::zeros(out_h, out_w, CV_8UC1);
  resize_to(gray, s.valid_w, s.valid_h).copyTo(s.img(cv::Rect(0, 0, s.valid_w, s.valid_h)));
  s.t = CropTransform::for_crop(s.area, s.valid_w, s.valid_h);
  return s;
}

bool inside_local(const Eigen::Vector2d& p, int w, int h) {
  return p.x() >= -0.5 && p.y() >= -0.5 && p.x() <= w - 0.5 && p.y() <= h - 0.5;
}

bool inside_full(const Eigen::Vector2d& p, const ImageDims& d) {
  return p.x() >= -0.5 && p.y() >= -0.5 && p.x() <= d.width - 0.5 && p.y() <= d.height - 0.5;
}

std::vector<std::uint8_t> coverage_mask(const std::vector<AreaMatch>& area_matches,
                                        const ImageDims& dims) {
  std::vector<std::uint8_t> mask(std::size_t(dims.pixels()), 0);
  for (const auto& m : area_matches) {
    const int x0 = std::max(0, m.source.x_min);
    const int x1 = std::min(dims.width, m.source.x_max);
    const int y0 = std::max(0, m.source.y_min);
    const int y1 = std::min(dims.height, m.source.y_max);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) mask[std::size_t(y) * std::size_t(dims.width) + std::size_t(x)] = 1;
    }
  }
  return mask;
}

int pixel_index(double v, int limit) {
  return std::clamp(int(std::lround(v)), 0, limit - 1);
}

}  // namespace

CropPair crop_area_pair(const cv::Mat& img0, const cv::Mat& img1, const AreaMatch& m,
                        const PipelineConfig& cfg) {
  cfg.validate();
  const int out_w = cfg.pm_input_side;
  const int out_h = std::max(8, int(std::lround(cfg.pm_input_side / cfg.aspect_ratio)));
  const SideCrop a = crop_side(to_gray(img0), m.source, out_w, out_h, cfg.aspect_ratio);
  const SideCrop b = crop_side(to_gray(img1), m.target, out_w, out_h, cfg.aspect_ratio);
  CropPair p;
  p.a = a.img;
  p.b = b.img;
  p.ta = a.t;
  p.tb = b.t;
  p.area_a = a.area;
  p.area_b = b.area;
  p.letterboxed = a.letterboxed || b.letterboxed;
  p.valid_width_a = a.valid_w;
  p.valid_height_a = a.valid_h;
  p.valid_width_b = b.valid_w;
  p.valid_height_b = b.valid_h;
  return p;
}

std::vector<PointMatch> geometric_filter(const std::vector<PointMatch>& matches, double phi,
                                         int iterations, std::uint64_t seed,
                                         FilterReport* report) {
  FilterReport local;
  FilterReport& r = report ? *report : local;
  r = {};
  if (matches.size() < 8 || std::isinf(phi)) return matches;
  Points2 p0, p1;
  for (const auto& m : matches) {
    p0.push_back(m.p0);
    p1.push_back(m.p1);
  }
  const auto fit = ransac_fundamental(p0, p1, phi, iterations, seed);
  if (!fit) {
    r.warning = "fundamental matrix estimation degenerate; matches passed through";
    return matches;
  }
  r.applied = true;
  std::vector<PointMatch> out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (fit->inliers[i]) out.push_back(matches[i]);
  }
  r.removed = matches.size() - out.size();
  return out;
}

double covered_fraction(const std::vector<AreaMatch>& area_matches, const ImageDims& dims) {
  if (!dims.valid()) throw DataError("invalid image dims");
  const auto mask = coverage_mask(area_matches, dims);
  std::size_t covered = 0;
  for (auto v : mask) covered += v;
  return double(covered) / double(dims.pixels());
}

std::vector<PointMatch> match_full_images(const cv::Mat& img0, const cv::Mat& img1,
                                          const PointMatcherProvider& pm, int side) {
  const ImageDims d0 = dims_of(img0);
  const ImageDims d1 = dims_of(img1);
  const int h0 = std::max(1, int(std::lround(double(side) * d0.height / d0.width)));
  const int h1 = std::max(1, int(std::lround(double(side) * d1.height / d1.width)));
  const auto t0 = CropTransform::for_crop(Area::full(d0), side, h0);
  const auto t1 = CropTransform::for_crop(Area::full(d1), side, h1);
  std::vector<PointMatch> out;
  for (auto m : pm.match(resize_to(to_gray(img0), side, h0), resize_to(to_gray(img1), side, h1))) {
    m.p0 = t0.to_full(m.p0);
    m.p1 = t1.to_full(m.p1);
    m.provenance = kGlobalProvenance;
    if (inside_full(m.p0, d0) && inside_full(m.p1, d1)) out.push_back(m);
  }
  return out;
}

std::vector<PointMatch> global_collection(const cv::Mat& img0, const cv::Mat& img1,
                                          const std::vector<AreaMatch>& area_matches,
                                          const std::vector<PointMatch>& matches,
                                          const PointMatcherProvider& pm,
                                          const PipelineConfig& cfg, bool* triggered) {
  const ImageDims d0 = dims_of(img0);
  if (triggered) *triggered = false;
  if (covered_fraction(area_matches, d0) >= cfg.occupancy_ratio) return matches;
  if (triggered) *triggered = true;
  const auto mask = coverage_mask(area_matches, d0);
  std::vector<PointMatch> out = matches;
  for (const auto& m : match_full_images(img0, img1, pm, cfg.pm_input_side)) {
    const int x = pixel_index(m.p0.x(), d0.width);
    const int y = pixel_index(m.p0.y(), d0.height);
    if (!mask[std::size_t(y) * std::size_t(d0.width) + std::size_t(x)]) out.push_back(m);
  }
  return out;
}

std::vector<PointMatch> dedupe_matches(const std::vector<PointMatch>& matches) {
  using Cell = std::tuple<long, long, long, long>;
  std::map<Cell, std::size_t> best;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto& m = matches[i];
    const Cell c{long(std::floor(m.p0.x())), long(std::floor(m.p0.y())), long(std::floor(m.p1.x())),
                 long(std::floor(m.p1.y()))};
    auto [it, fresh] = best.emplace(c, i);
    if (!fresh && m.score > matches[it->second].score) it->second = i;
  }
  std::vector<std::size_t> keep;
  for (const auto& [cell, i] : best) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  std::vector<PointMatch> out;
  for (std::size_t i : keep) out.push_back(matches[i]);
  return out;
}

PipelineResult run_a2pm(const cv::Mat& img0, const cv::Mat& img1,
                        const std::vector<AreaMatch>& area_matches,
                        const PointMatcherProvider& pm, const PipelineConfig& cfg) {
  cfg.validate();
  const ImageDims d0 = dims_of(img0);
  const ImageDims d1 = dims_of(img1);
  PipelineResult result;
  std::vector<PointMatch> raw;
  for (std::size_t i = 0; i < area_matches.size(); ++i) {
    try {
      const CropPair c = crop_area_pair(img0, img1, area_matches[i], cfg);
      if (c.letterboxed) result.letterboxed.push_back(int(i));
      for (auto m : pm.match(c.a, c.b)) {
        if (!inside_local(m.p0, c.valid_width_a, c.valid_height_a) ||
            !inside_local(m.p1, c.valid_width_b, c.valid_height_b)) {
          continue;
        }
        m.p0 = c.ta.to_full(m.p0);
        m.p1 = c.tb.to_full(m.p1);
        m.provenance = int(i);
        if (inside_full(m.p0, d0) && inside_full(m.p1, d1)) raw.push_back(m);
      }
    } catch (const Error& e) {
      result.failures.push_back({int(i), e.what()});
    }
  }
  result.raw_matches = raw.size();
  auto fused = dedupe_matches(raw);
  result.after_dedupe = fused.size();
  fused = geometric_filter(fused, cfg.phi, cfg.ransac_iterations, cfg.seed, &result.filter);
  if (cfg.global_collection) {
    fused = global_collection(img0, img1, area_matches, fused, pm, cfg, &result.global_triggered);
  }
  result.matches = std::move(fused);
  return result;
}

}  // namespace a2pm
