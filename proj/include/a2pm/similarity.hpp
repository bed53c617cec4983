#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "a2pm/area_graph.hpp"
#include "a2pm/geometry.hpp"

namespace a2pm {

/// Per-patch probabilities that a patch of one area image appears in the
/// other, on the 8x8 patch grid of the resized area image.
struct ActivityMap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double mean() const;
};

/// Image-pair -> activity maps. Implementations must be stateless.
class ActivityModel {
 public:
  virtual ~ActivityModel() = default;
  virtual std::pair<ActivityMap, ActivityMap> activities(const cv::Mat& a,
                                                         const cv::Mat& b) const = 0;
};

/// Deterministic correlation baseline: a textured patch's activity is its
/// best zero-mean NCC against the other image's patches (negative -> 0); a
/// flat patch scores 1 - |mean difference|/255 against the patch with the
/// closest mean. Inputs: same square size, side a multiple of 8.
std::pair<ActivityMap, ActivityMap> baseline_activity(const cv::Mat& a, const cv::Mat& b);

class NccActivityModel final : public ActivityModel {
 public:
  std::pair<ActivityMap, ActivityMap> activities(const cv::Mat& a,
                                                 const cv::Mat& b) const override {
    return baseline_activity(a, b);
  }
};

/// Sim = mean(activity A) * mean(activity B).
double area_similarity(const cv::Mat& a0, const cv::Mat& a1, const ActivityModel& model);

struct AreaPair {
  int node0 = -1;
  int node1 = -1;
  Area area0;
  Area area1;
};

/// Similarity between an area of image 0 and an area of image 1, in [0, 1].
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double similarity(const AreaPair& pair) const = 0;
};

/// Crops both areas, resizes them to `side` x `side` grayscale and applies an
/// activity model.
class ImageSimilarityProvider final : public SimilarityProvider {
 public:
  ImageSimilarityProvider(cv::Mat image0, cv::Mat image1,
                          std::shared_ptr<const ActivityModel> model = nullptr, int side = 64);
  double similarity(const AreaPair& pair) const override;

 private:
  cv::Mat image0_;
  cv::Mat image1_;
  std::shared_ptr<const ActivityModel> model_;
  int side_;
};

/// Externally computed similarities keyed by (node0, node1). Pairs missing
/// from the table go to `fallback` when set; otherwise they are a DataError.
class TableSimilarityProvider final : public SimilarityProvider {
 public:
  explicit TableSimilarityProvider(std::map<std::pair<int, int>, double> table,
                                   std::shared_ptr<const SimilarityProvider> fallback = nullptr);
  double similarity(const AreaPair& pair) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::pair<int, int>, double> table_;
  std::shared_ptr<const SimilarityProvider> fallback_;
};

/// Reads `{"similarities": [{"node0": i, "node1": j, "value": s}, ...]}`.
TableSimilarityProvider load_similarity_table(
    const std::filesystem::path& path,
    std::shared_ptr<const SimilarityProvider> fallback = nullptr);

enum class CellState : std::uint8_t { uncomputed, pruned, computed };

struct PruneRecord {
  int parent0 = -1;
  int parent1 = -1;
  int child0 = -1;
  int child1 = -1;
};

/// Lazily filled |V0| x |V1| similarity table. A computed value below the
/// threshold marks every pair of next-level children as pruned (value 0)
/// unless that cell was already computed. Cells are write-once; concurrent
/// callers may duplicate a computation but never change a stored value.
class SimilarityMatrix {
 public:
  SimilarityMatrix(const AreaGraph& g0, const AreaGraph& g1, const SimilarityProvider& provider,
                   double threshold = 0.05, bool pruning = true);

  double get_or_compute(int i, int j);

  CellState state(int i, int j) const;
  /// Stored value; 0 for pruned cells, nullopt when uncomputed.
  std::optional<double> value(int i, int j) const;

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint64_t provider_calls() const { return provider_calls_.load(); }
  std::uint64_t pruned_hits() const { return pruned_hits_.load(); }
  std::vector<PruneRecord> prune_log() const;

  const AreaGraph& graph0() const { return g0_; }
  const AreaGraph& graph1() const { return g1_; }

 private:
  std::size_t index(int i, int j) const;
  std::vector<int> next_level_children(const AreaGraph& g, int id) const;

  const AreaGraph& g0_;
  const AreaGraph& g1_;
  const SimilarityProvider& provider_;
  double threshold_;
  bool pruning_;
  std::size_t rows_;
  std::size_t cols_;
  mutable std::mutex mutex_;
  std::vector<CellState> states_;
  std::vector<double> values_;
  std::vector<PruneRecord> log_;
  std::atomic<std::uint64_t> provider_calls_{0};
  std::atomic<std::uint64_t> pruned_hits_{0};
};

}  // namespace a2pm
