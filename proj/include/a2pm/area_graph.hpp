#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "a2pm/geometry.hpp"
#include "a2pm/seg_ingest.hpp"

namespace a2pm {

enum class EdgeKind { none, adjacency, inclusion };

/// Edge kind from the overlap ratio: inclusion at or above `delta_high`,
/// adjacency strictly between the thresholds, nothing at or below `delta_low`.
EdgeKind link_predict(const Area& a, const Area& b, double delta_low, double delta_high);

enum class NodeOrigin { segmentation, generated, image };

std::string to_string(NodeOrigin o);
NodeOrigin node_origin_from_string(const std::string& s);

struct AreaNode {
  int id = 0;
  Area area;
  int level = 0;
  NodeOrigin origin = NodeOrigin::segmentation;
};

struct GraphParams {
  LevelThresholds levels = LevelThresholds::defaults();
  double delta_low = 0.1;   // δ_l
  double delta_high = 0.8;  // δ_h
};

/// Multi-relational graph over image areas. Inclusion edges are stored as
/// (parent, child) with the parent being the larger area; adjacency edges are
/// undirected pairs (i < j).
class AreaGraph {
 public:
  AreaGraph() = default;
  AreaGraph(ImageDims dims, int level_count) : dims_(dims), level_count_(level_count) {}

  /// Appends a node and returns its id. No edges are created.
  int add_node(const Area& area, int level, NodeOrigin origin);
  void add_inclusion(int parent, int child);
  void add_adjacency(int a, int b);

  /// Runs link prediction between `id` and every other node and installs the
  /// resulting edges. Inclusion direction: larger level, then larger area,
  /// then lower id is the parent.
  void link_node(int id, double delta_low, double delta_high);

  const std::vector<AreaNode>& nodes() const { return nodes_; }
  const AreaNode& node(int id) const;
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  ImageDims dims() const { return dims_; }
  int level_count() const { return level_count_; }
  int top_level() const { return level_count_ - 1; }

  const std::vector<int>& parents(int id) const;
  const std::vector<int>& children(int id) const;
  const std::vector<int>& neighbors(int id) const;
  /// Adjacency and inclusion relations treated as undirected.
  std::vector<int> general_neighbors(int id) const;

  std::vector<int> nodes_at_level(int level) const;
  /// Nodes used as matching sources (those at `level`).
  std::vector<int> source_nodes(int level) const { return nodes_at_level(level); }

  const std::set<std::pair<int, int>>& inclusion_edges() const { return inclusion_; }
  const std::set<std::pair<int, int>>& adjacency_edges() const { return adjacency_; }

  bool has_parent_above(int id) const;
  /// Node ids below the top level without any parent.
  std::vector<int> parentless_nodes() const;
  bool inclusion_is_acyclic() const;

  std::optional<int> image_node() const { return image_node_; }
  /// Full-image node at the top, created on first request.
  int ensure_image_node(double delta_low, double delta_high);

 private:
  void check_id(int id) const;

  ImageDims dims_;
  int level_count_ = 0;
  std::vector<AreaNode> nodes_;
  std::set<std::pair<int, int>> inclusion_;
  std::set<std::pair<int, int>> adjacency_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> neighbors_;
  std::optional<int> image_node_;
};

/// Creates one node per candidate (level from the thresholds; areas below
/// TL_0 are placed at level 0) and link-predicts every pair.
AreaGraph build_initial_graph(const CandidateSet& c, const GraphParams& params);

struct KMeansResult {
  int k = 1;
  std::vector<int> labels;
  std::vector<double> wcss;  // wcss[k-1] for k = 1..k_max
};

/// Lloyd k-means for k = 1..k_max with farthest-point seeding from the first
/// point; k is chosen at the largest second difference of the within-cluster
/// sum of squares.
KMeansResult kmeans_elbow(const std::vector<Eigen::Vector2d>& points, int k_max,
                          int max_iterations = 50);

/// Generates parent nodes level by level until every node below the top
/// level has a parent at a higher level. Nodes that cannot be grown inside
/// the image are adopted by a full-image node.
AreaGraph complete_graph(AreaGraph g, const GraphParams& params);

}  // namespace a2pm
