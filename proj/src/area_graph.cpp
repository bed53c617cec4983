#include "a2pm/area_graph.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>

#include "a2pm/error.hpp"

namespace a2pm {

EdgeKind link_predict(const Area& a, const Area& b, double delta_low, double delta_high) {
  const double delta = overlap_ratio(a, b);
  if (delta >= delta_high) return EdgeKind::inclusion;
  if (delta > delta_low) return EdgeKind::adjacency;
  return EdgeKind::none;
}

std::string to_string(NodeOrigin o) {
  switch (o) {
    case NodeOrigin::segmentation: return "segmentation";
    case NodeOrigin::generated: return "generated";
    case NodeOrigin::image: return "image";
  }
  return "segmentation";
}

NodeOrigin node_origin_from_string(const std::string& s) {
  if (s == "segmentation") return NodeOrigin::segmentation;
  if (s == "generated") return NodeOrigin::generated;
  if (s == "image") return NodeOrigin::image;
  throw DataError("unknown node origin '" + s + "'");
}

void AreaGraph::check_id(int id) const {
  if (id < 0 || std::size_t(id) >= nodes_.size()) {
    throw DataError("unknown area node id " + std::to_string(id));
  }
}

const AreaNode& AreaGraph::node(int id) const {
  check_id(id);
  return nodes_[std::size_t(id)];
}

int AreaGraph::add_node(const Area& area, int level, NodeOrigin origin) {
  if (!area.valid()) throw DataError("invalid node area " + to_string(area));
  const int id = int(nodes_.size());
  nodes_.push_back({id, area, level, origin});
  parents_.emplace_back();
  children_.emplace_back();
  neighbors_.emplace_back();
  if (origin == NodeOrigin::image && !image_node_) image_node_ = id;
  return id;
}

void AreaGraph::add_inclusion(int parent, int child) {
  check_id(parent);
  check_id(child);
  if (parent == child) throw DataError("self inclusion edge");
  if (!inclusion_.insert({parent, child}).second) return;
  parents_[std::size_t(child)].push_back(parent);
  children_[std::size_t(parent)].push_back(child);
  std::sort(parents_[std::size_t(child)].begin(), parents_[std::size_t(child)].end());
  std::sort(children_[std::size_t(parent)].begin(), children_[std::size_t(parent)].end());
}

void AreaGraph::add_adjacency(int a, int b) {
  check_id(a);
  check_id(b);
  if (a == b) throw DataError("self adjacency edge");
  if (!adjacency_.insert({std::min(a, b), std::max(a, b)}).second) return;
  neighbors_[std::size_t(a)].push_back(b);
  neighbors_[std::size_t(b)].push_back(a);
  std::sort(neighbors_[std::size_t(a)].begin(), neighbors_[std::size_t(a)].end());
  std::sort(neighbors_[std::size_t(b)].begin(), neighbors_[std::size_t(b)].end());
}

void AreaGraph::link_node(int id, double delta_low, double delta_high) {
  check_id(id);
  const auto& n = nodes_[std::size_t(id)];
  // (level, size, -id) is a strict total order, so inclusion stays acyclic.
  auto rank = [](const AreaNode& v) { return std::make_tuple(v.level, v.area.size(), -v.id); };
  for (const auto& other : nodes_) {
    if (other.id == id || other.origin == NodeOrigin::image) continue;
    switch (link_predict(n.area, other.area, delta_low, delta_high)) {
      case EdgeKind::inclusion:
        if (rank(n) > rank(other)) {
          add_inclusion(id, other.id);
        } else {
          add_inclusion(other.id, id);
        }
        break;
      case EdgeKind::adjacency:
        add_adjacency(id, other.id);
        break;
      case EdgeKind::none:
        break;
    }
  }
}

const std::vector<int>& AreaGraph::parents(int id) const {
  check_id(id);
  return parents_[std::size_t(id)];
}

const std::vector<int>& AreaGraph::children(int id) const {
  check_id(id);
  return children_[std::size_t(id)];
}

const std::vector<int>& AreaGraph::neighbors(int id) const {
  check_id(id);
  return neighbors_[std::size_t(id)];
}

std::vector<int> AreaGraph::general_neighbors(int id) const {
  std::vector<int> out = neighbors(id);
  out.insert(out.end(), parents(id).begin(), parents(id).end());
  out.insert(out.end(), children(id).begin(), children(id).end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> AreaGraph::nodes_at_level(int level) const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.level == level) out.push_back(n.id);
  }
  return out;
}

bool AreaGraph::has_parent_above(int id) const {
  const int level = node(id).level;
  for (int p : parents(id)) {
    if (nodes_[std::size_t(p)].level > level) return true;
  }
  return false;
}

std::vector<int> AreaGraph::parentless_nodes() const {
  std::vector<int> out;
  for (const auto& n : nodes_) {
    if (n.level < top_level() && parents_[std::size_t(n.id)].empty()) out.push_back(n.id);
  }
  return out;
}

bool AreaGraph::inclusion_is_acyclic() const {
  // Kahn's algorithm over parent -> child edges.
  std::vector<int> indegree(nodes_.size(), 0);
  for (const auto& [p, c] : inclusion_) ++indegree[std::size_t(c)];
  std::vector<int> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (indegree[i] == 0) ready.push_back(int(i));
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++visited;
    for (int c : children_[std::size_t(v)]) {
      if (--indegree[std::size_t(c)] == 0) ready.push_back(c);
    }
  }
  return visited == nodes_.size();
}

int AreaGraph::ensure_image_node(double, double) {
  if (image_node_) return *image_node_;
  return add_node(Area::full(dims_), std::max(top_level(), 0), NodeOrigin::image);
}

AreaGraph build_initial_graph(const CandidateSet& c, const GraphParams& params) {
  if (!c.dims.valid()) throw DataError("candidate set has invalid image dims");
  AreaGraph g(c.dims, params.levels.level_count());
  for (const auto& cand : c.candidates) {
    const int level = assign_level(cand.area, params.levels).value_or(0);
    g.add_node(cand.area, level, NodeOrigin::segmentation);
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.link_node(int(i), params.delta_low, params.delta_high);
  }
  return g;
}

namespace {

struct LloydResult {
  std::vector<int> labels;
  double wcss = 0.0;
};

LloydResult lloyd(const std::vector<Eigen::Vector2d>& pts, int k, int max_iterations) {
  const std::size_t n = pts.size();
  std::vector<Eigen::Vector2d> centers{pts.front()};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (int(centers.size()) < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (pts[i] - centers.back()).squaredNorm());
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    centers.push_back(pts[best]);
  }

  LloydResult r;
  r.labels.assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (pts[i] - centers[std::size_t(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.labels[i] != best) {
        r.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Eigen::Vector2d> sums(std::size_t(k), Eigen::Vector2d::Zero());
    std::vector<int> counts(std::size_t(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[std::size_t(r.labels[i])] += pts[i];
      ++counts[std::size_t(r.labels[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] > 0) centers[std::size_t(c)] = sums[std::size_t(c)] / counts[std::size_t(c)];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.wcss += (pts[i] - centers[std::size_t(r.labels[i])]).squaredNorm();
  }
  return r;
}

std::vector<int> compact_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto it = remap.emplace(l, int(remap.size())).first;
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

KMeansResult kmeans_elbow(const std::vector<Eigen::Vector2d>& points, int k_max,
                          int max_iterations) {
  KMeansResult out;
  const int n = int(points.size());
  if (n == 0) {
    out.k = 0;
    return out;
  }
  k_max = std::clamp(k_max, 1, n);
  // One extra run so the second difference at k_max is defined.
  const int k_eval = std::min(n, k_max + 1);
  std::vector<LloydResult> runs;
  for (int k = 1; k <= k_eval; ++k) runs.push_back(lloyd(points, k, max_iterations));
  for (int k = 1; k <= k_max; ++k) out.wcss.push_back(runs[std::size_t(k - 1)].wcss);

  auto w = [&](int k) { return k <= k_eval ? runs[std::size_t(k - 1)].wcss : 0.0; };
  int chosen = 1;
  if (n > 2) {
    double best = 1e-9 * std::max(w(1), 1.0);
    for (int k = 2; k <= k_max; ++k) {
      const double d2 = w(k - 1) - 2.0 * w(k) + w(k + 1);
      if (d2 > best) {
        best = d2;
        chosen = k;
      }
    }
  }
  out.k = chosen;
  out.labels = compact_labels(runs[std::size_t(chosen - 1)].labels);
  out.k = 1 + *std::max_element(out.labels.begin(), out.labels.end());
  return out;
}

namespace {

int nearest_in(const AreaGraph& g, int id, const std::vector<int>& cluster) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  const auto c = g.node(id).area.center();
  for (int other : cluster) {
    if (other == id) continue;
    const double d = (g.node(other).area.center() - c).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = other;
    }
  }
  return best;
}

}  // namespace

AreaGraph complete_graph(AreaGraph g, const GraphParams& params) {
  const auto& t = params.levels;
  const int top = t.top_level();
  const ImageDims dims = g.dims();

  auto adopt = [&](int child) {
    const int root = g.ensure_image_node(params.delta_low, params.delta_high);
    if (root != child) g.add_inclusion(root, child);
  };

  // Creates (or reuses) a node for `area` one level above `level` at least.
  auto make_parent = [&](Area area, int level, const std::vector<int>& children) {
    if (assign_level(area, t).value_or(0) <= level) {
      try {
        area = expand_to_level(area, level + 1, t, dims);
      } catch (const GeometryError&) {
        for (int c : children) adopt(c);
        return;
      }
    }
    for (const auto& n : g.nodes()) {
      if (n.area == area && n.level > level && n.origin != NodeOrigin::image) return;
    }
    const int id = g.add_node(area, assign_level(area, t).value_or(0), NodeOrigin::generated);
    g.link_node(id, params.delta_low, params.delta_high);
  };

  for (int level = 0; level < top; ++level) {
    std::vector<int> orphans;
    for (int id : g.nodes_at_level(level)) {
      if (!g.has_parent_above(id)) orphans.push_back(id);
    }
    if (orphans.empty()) continue;

    std::vector<Eigen::Vector2d> centers;
    for (int id : orphans) centers.push_back(g.node(id).area.center());
    const auto km = kmeans_elbow(centers, int(orphans.size()));
    std::vector<std::vector<int>> clusters(std::size_t(km.k));
    for (std::size_t i = 0; i < orphans.size(); ++i) {
      clusters[std::size_t(km.labels[i])].push_back(orphans[i]);
    }

    for (const auto& cluster : clusters) {
      if (cluster.size() >= 2) {
        std::set<int> fused;
        for (int id : cluster) {
          if (fused.count(id)) continue;
          const int mate = nearest_in(g, id, cluster);
          fused.insert(id);
          fused.insert(mate);
          make_parent(fuse(g.node(id).area, g.node(mate).area), level, {id, mate});
        }
      } else {
        make_parent(g.node(cluster.front()).area, level, {cluster.front()});
      }
    }

    for (int id : orphans) {
      if (!g.has_parent_above(id)) adopt(id);
    }
  }
  return g;
}

}  // namespace a2pm
