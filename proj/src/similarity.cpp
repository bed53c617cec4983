#include "a2pm/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "a2pm/error.hpp"
#include "a2pm/image.hpp"
#include "a2pm/patches.hpp"

namespace a2pm {

double ActivityMap::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
}

namespace {

ActivityMap activity_of(const PatchGrid& self, const PatchGrid& other, const Eigen::MatrixXd& ncc,
                        bool rows_are_self) {
  ActivityMap m;
  m.rows = self.rows;
  m.cols = self.cols;
  m.values.resize(std::size_t(self.count()));
  for (int p = 0; p < self.count(); ++p) {
    double act = 0.0;
    if (self.flat[std::size_t(p)]) {
      double closest = std::numeric_limits<double>::infinity();
      for (int q = 0; q < other.count(); ++q) {
        closest = std::min(closest, std::abs(self.means[std::size_t(p)] - other.means[std::size_t(q)]));
      }
      act = 1.0 - closest / 255.0;
    } else {
      for (int q = 0; q < other.count(); ++q) {
        act = std::max(act, rows_are_self ? ncc(p, q) : ncc(q, p));
      }
    }
    m.values[std::size_t(p)] = std::clamp(act, 0.0, 1.0);
  }
  return m;
}

}  // namespace

std::pair<ActivityMap, ActivityMap> baseline_activity(const cv::Mat& a, const cv::Mat& b) {
  if (a.size() != b.size()) throw DataError("activity inputs must have equal dims");
  if (a.cols % 8 != 0 || a.rows % 8 != 0 || a.empty()) {
    throw DataError("activity inputs must have sides that are multiples of 8");
  }
  const auto ga = extract_patches(to_gray(a));
  const auto gb = extract_patches(to_gray(b));
  const Eigen::MatrixXd ncc = ncc_matrix(ga, gb);
  return {activity_of(ga, gb, ncc, true), activity_of(gb, ga, ncc, false)};
}

double area_similarity(const cv::Mat& a0, const cv::Mat& a1, const ActivityModel& model) {
  const auto [m0, m1] = model.activities(a0, a1);
  return std::clamp(m0.mean() * m1.mean(), 0.0, 1.0);
}

ImageSimilarityProvider::ImageSimilarityProvider(cv::Mat image0, cv::Mat image1,
                                                 std::shared_ptr<const ActivityModel> model,
                                                 int side)
    : image0_(to_gray(image0)),
      image1_(to_gray(image1)),
      model_(model ? std::move(model) : std::make_shared<NccActivityModel>()),
      side_(side) {
  if (side_ <= 0 || side_ % 8 != 0) throw ConfigError("similarity side must be a multiple of 8");
}

double ImageSimilarityProvider::similarity(const AreaPair& pair) const {
  const cv::Mat a = resize_to(crop(image0_, pair.area0), side_, side_);
  const cv::Mat b = resize_to(crop(image1_, pair.area1), side_, side_);
  return area_similarity(a, b, *model_);
}

TableSimilarityProvider::TableSimilarityProvider(std::map<std::pair<int, int>, double> table,
                                                 std::shared_ptr<const SimilarityProvider> fallback)
    : table_(std::move(table)), fallback_(std::move(fallback)) {
  for (const auto& [key, v] : table_) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("similarity values must lie in [0, 1]");
  }
}

double TableSimilarityProvider::similarity(const AreaPair& pair) const {
  if (auto it = table_.find({pair.node0, pair.node1}); it != table_.end()) return it->second;
  if (fallback_) return fallback_->similarity(pair);
  throw DataError("no similarity for node pair (" + std::to_string(pair.node0) + ", " +
                  std::to_string(pair.node1) + ")");
}

TableSimilarityProvider load_similarity_table(const std::filesystem::path& path,
                                              std::shared_ptr<const SimilarityProvider> fallback) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open similarity file " + path.string());
  std::map<std::pair<int, int>, double> table;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& e : j.at("similarities")) {
      table[{e.at("node0").get<int>(), e.at("node1").get<int>()}] = e.at("value").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed similarity file " + path.string() + ": " + e.what());
  }
  return TableSimilarityProvider(std::move(table), std::move(fallback));
}

SimilarityMatrix::SimilarityMatrix(const AreaGraph& g0, const AreaGraph& g1,
                                   const SimilarityProvider& provider, double threshold,
                                   bool pruning)
    : g0_(g0),
      g1_(g1),
      provider_(provider),
      threshold_(threshold),
      pruning_(pruning),
      rows_(g0.size()),
      cols_(g1.size()),
      states_(rows_ * cols_, CellState::uncomputed),
      values_(rows_ * cols_, 0.0) {}

std::size_t SimilarityMatrix::index(int i, int j) const {
  if (i < 0 || j < 0 || std::size_t(i) >= rows_ || std::size_t(j) >= cols_) {
    throw DataError("similarity index (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") out of range");
  }
  return std::size_t(i) * cols_ + std::size_t(j);
}

std::vector<int> SimilarityMatrix::next_level_children(const AreaGraph& g, int id) const {
  std::vector<int> out;
  const int level = g.node(id).level;
  for (int c : g.children(id)) {
    if (g.node(c).level == level - 1) out.push_back(c);
  }
  return out;
}

double SimilarityMatrix::get_or_compute(int i, int j) {
  const std::size_t idx = index(i, j);
  {
    std::lock_guard lock(mutex_);
    if (states_[idx] == CellState::computed) return values_[idx];
    if (states_[idx] == CellState::pruned) {
      ++pruned_hits_;
      return 0.0;
    }
  }

  ++provider_calls_;
  const double v =
      std::clamp(provider_.similarity({i, j, g0_.node(i).area, g1_.node(j).area}), 0.0, 1.0);

  std::lock_guard lock(mutex_);
  if (states_[idx] != CellState::uncomputed) {
    return states_[idx] == CellState::computed ? values_[idx] : 0.0;
  }
  states_[idx] = CellState::computed;
  values_[idx] = v;
  if (pruning_ && v < threshold_) {
    for (int h : next_level_children(g0_, i)) {
      for (int k : next_level_children(g1_, j)) {
        const std::size_t c = std::size_t(h) * cols_ + std::size_t(k);
        if (states_[c] != CellState::uncomputed) continue;
        states_[c] = CellState::pruned;
        log_.push_back({i, j, h, k});
      }
    }
  }
  return v;
}

CellState SimilarityMatrix::state(int i, int j) const {
  const std::size_t idx = index(i, j);
  std::lock_guard lock(mutex_);
  return states_[idx];
}

std::optional<double> SimilarityMatrix::value(int i, int j) const {
  const std::size_t idx = index(i, j);
  std::lock_guard lock(mutex_);
  switch (states_[idx]) {
    case CellState::uncomputed: return std::nullopt;
    case CellState::pruned: return 0.0;
    case CellState::computed: return values_[idx];
  }
  return std::nullopt;
}

std::vector<PruneRecord> SimilarityMatrix::prune_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace a2pm
