#pragma once

#include <vector>

namespace a2pm {

/// Dinic max-flow on a graph with real capacities. After `solve`, the
/// source side of a minimum cut is available through `on_source_side`.
class MaxFlow {
 public:
  explicit MaxFlow(int node_count);

  void add_edge(int from, int to, double capacity, double reverse_capacity = 0.0);
  double solve(int source, int sink);
  bool on_source_side(int node) const { return reachable_.at(std::size_t(node)); }

 private:
  struct Edge {
    int to;
    int rev;
    double cap;
  };

  bool build_levels(int source, int sink);
  double push(int v, int sink, double limit);

  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
  std::vector<bool> reachable_;
};

}  // namespace a2pm
