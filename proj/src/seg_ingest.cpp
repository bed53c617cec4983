#include "a2pm/seg_ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "a2pm/error.hpp"

namespace a2pm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_raster(const fs::path& p) {
  static const std::set<std::string> exts = {".png", ".bmp", ".pgm", ".pbm", ".tif", ".tiff"};
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return exts.count(ext) > 0;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void check_dims(const std::string& id, ImageDims got, std::optional<ImageDims>& expected) {
  if (!expected) {
    expected = got;
    return;
  }
  if (!(got == *expected)) {
    throw DataError("mask " + id + " is " + std::to_string(got.width) + "x" +
                    std::to_string(got.height) + ", expected " + std::to_string(expected->width) +
                    "x" + std::to_string(expected->height));
  }
}

void accept_or_reject(SegmentMask m, MaskLoadResult& out) {
  if (cv::countNonZero(m.bitmap) == 0) {
    out.rejected.push_back({m.id, "mask has no foreground pixels"});
    return;
  }
  out.masks.push_back(std::move(m));
}

void load_raster_files(std::vector<fs::path> files, MaskLoadResult& out) {
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  for (const auto& f : files) {
    if (!fs::exists(f)) throw DataError("mask file missing: " + f.string());
    cv::Mat img = cv::imread(f.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw DataError("cannot decode mask " + f.string());
    SegmentMask m{f.filename().string(), img};
    check_dims(m.id, m.dims(), out.dims);
    accept_or_reject(std::move(m), out);
  }
}

void load_manifest(const fs::path& manifest, const json& j, MaskLoadResult& out) {
  try {
    const ImageDims declared{j.at("width").get<int>(), j.at("height").get<int>()};
    if (!declared.valid()) throw DataError("manifest declares invalid image dims");
    check_dims("manifest", declared, out.dims);
    std::vector<fs::path> files;
    for (const auto& name : j.at("masks")) {
      files.push_back(manifest.parent_path() / name.get<std::string>());
    }
    load_raster_files(std::move(files), out);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest.string() + ": " + e.what());
  }
}

void load_rle(const fs::path& file, const json& records, MaskLoadResult& out) {
  std::vector<SegmentMask> masks;
  try {
    std::size_t index = 0;
    for (const auto& r : records) {
      char fallback[32];
      std::snprintf(fallback, sizeof(fallback), "rle_%04zu", index++);
      const std::string id = r.contains("id") ? r.at("id").get<std::string>() : fallback;
      const auto size = r.at("size").get<std::vector<int>>();
      if (size.size() != 2) throw DataError("RLE size must be [height, width] in " + id);
      const ImageDims dims{size[1], size[0]};
      if (!dims.valid()) throw DataError("RLE mask " + id + " has invalid size");
      check_dims(id, dims, out.dims);
      masks.push_back({id, decode_rle(r.at("counts").get<std::vector<long long>>(), dims)});
    }
  } catch (const json::exception& e) {
    throw DataError("malformed RLE file " + file.string() + ": " + e.what());
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](const SegmentMask& a, const SegmentMask& b) { return a.id < b.id; });
  for (auto& m : masks) accept_or_reject(std::move(m), out);
}

}  // namespace

cv::Mat decode_rle(const std::vector<long long>& counts, ImageDims dims) {
  const long long total = dims.pixels();
  long long sum = 0;
  for (auto c : counts) {
    if (c < 0) throw DataError("negative RLE run");
    sum += c;
  }
  if (sum != total) {
    throw DataError("RLE runs cover " + std::to_string(sum) + " pixels, image has " +
                    std::to_string(total));
  }
  cv::Mat m(dims.height, dims.width, CV_8UC1, cv::Scalar(0));
  long long pos = 0;
  bool fg = false;
  for (auto c : counts) {
    if (fg) {
      for (long long k = pos; k < pos + c; ++k) {
        // column-major
        m.at<std::uint8_t>(int(k % dims.height), int(k / dims.height)) = 255;
      }
    }
    pos += c;
    fg = !fg;
  }
  return m;
}

MaskLoadResult load_masks(const fs::path& path, std::optional<ImageDims> expected_dims) {
  if (!fs::exists(path)) throw DataError("mask path does not exist: " + path.string());
  MaskLoadResult out;
  out.dims = expected_dims;

  if (fs::is_directory(path)) {
    const auto manifest = path / "manifest.json";
    if (fs::exists(manifest)) {
      load_manifest(manifest, read_json(manifest), out);
      return out;
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && is_raster(e.path())) files.push_back(e.path());
    }
    load_raster_files(std::move(files), out);
    return out;
  }

  const json j = read_json(path);
  if (j.is_array()) {
    load_rle(path, j, out);
  } else if (j.is_object() && j.contains("masks") && j.at("masks").is_array()) {
    const auto& masks = j.at("masks");
    if (!masks.empty() && masks.front().is_object()) {
      if (j.contains("width") && j.contains("height")) {
        check_dims("file", {j.at("width").get<int>(), j.at("height").get<int>()}, out.dims);
      }
      load_rle(path, masks, out);
    } else {
      load_manifest(path, j, out);
    }
  } else {
    throw DataError("unrecognised mask file format: " + path.string());
  }
  return out;
}

Area mask_to_area(const SegmentMask& m) {
  if (m.bitmap.empty()) throw DataError("mask " + m.id + " is empty");
  int x0 = std::numeric_limits<int>::max(), y0 = x0;
  int x1 = -1, y1 = -1;
  for (int y = 0; y < m.bitmap.rows; ++y) {
    const auto* row = m.bitmap.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.bitmap.cols; ++x) {
      if (row[x] == 0) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw DataError("mask " + m.id + " has no foreground pixels");
  return {x0, y0, x1 + 1, y1 + 1};
}

std::string to_string(AreaSource s) {
  return s == AreaSource::segmentation ? "segmentation" : "fused";
}

AreaSource area_source_from_string(const std::string& s) {
  if (s == "segmentation") return AreaSource::segmentation;
  if (s == "fused") return AreaSource::fused;
  throw DataError("unknown area source '" + s + "'");
}

std::vector<Area> CandidateSet::areas() const {
  std::vector<Area> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.area);
  return out;
}

bool passes_filter(const Area& a, const PreprocessParams& p) {
  return a.valid() && a.size() >= p.min_size && a.aspect() <= p.max_aspect;
}

std::vector<Area> dedupe_areas(const std::vector<Area>& areas) {
  std::vector<Area> out;
  std::set<Area> seen;
  for (const auto& a : areas) {
    if (seen.insert(a).second) out.push_back(a);
  }
  return out;
}

CandidateSet preprocess(const std::vector<Area>& areas, const PreprocessParams& params,
                        const ImageDims& dims) {
  CandidateSet out;
  out.dims = dims;
  for (const auto& a : dedupe_areas(areas)) {
    if (!a.valid()) {
      out.warnings.push_back("dropped invalid area " + to_string(a));
      continue;
    }
    out.candidates.push_back({a, AreaSource::segmentation});
  }

  // Every pass merges each failing area into a passing one, so the list
  // shrinks by at least one per pass.
  while (true) {
    std::vector<Candidate> passing;
    std::vector<Candidate> screened;
    for (const auto& c : out.candidates) {
      (passes_filter(c.area, params) ? passing : screened).push_back(c);
    }
    if (screened.empty()) break;
    if (passing.empty()) {
      for (const auto& c : screened) {
        out.warnings.push_back("dropped " + to_string(c.area) +
                               ": fails size/aspect filter and has no candidate to fuse with");
      }
      out.candidates.clear();
      break;
    }
    for (const auto& s : screened) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < passing.size(); ++i) {
        const double d = (passing[i].area.center() - s.area.center()).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      passing[best] = {fuse(passing[best].area, s.area), AreaSource::fused};
    }
    out.candidates.clear();
    std::set<Area> seen;
    for (const auto& c : passing) {
      if (seen.insert(c.area).second) out.candidates.push_back(c);
    }
  }
  return out;
}

}  // namespace a2pm
