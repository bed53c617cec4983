#include "a2pm/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace a2pm {

namespace {
constexpr double kEps = 1e-12;
}

MaxFlow::MaxFlow(int node_count) : adj_(std::size_t(node_count)) {}

void MaxFlow::add_edge(int from, int to, double capacity, double reverse_capacity) {
  auto& a = adj_[std::size_t(from)];
  auto& b = adj_[std::size_t(to)];
  a.push_back({to, int(b.size()), capacity});
  b.push_back({from, int(a.size()) - 1, reverse_capacity});
}

bool MaxFlow::build_levels(int source, int sink) {
  level_.assign(adj_.size(), -1);
  std::queue<int> q;
  level_[std::size_t(source)] = 0;
  q.push(source);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& e : adj_[std::size_t(v)]) {
      if (e.cap > kEps && level_[std::size_t(e.to)] < 0) {
        level_[std::size_t(e.to)] = level_[std::size_t(v)] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[std::size_t(sink)] >= 0;
}

double MaxFlow::push(int v, int sink, double limit) {
  if (v == sink) return limit;
  auto& edges = adj_[std::size_t(v)];
  for (auto& i = cursor_[std::size_t(v)]; i < edges.size(); ++i) {
    auto& e = edges[i];
    if (e.cap <= kEps || level_[std::size_t(e.to)] != level_[std::size_t(v)] + 1) continue;
    const double pushed = push(e.to, sink, std::min(limit, e.cap));
    if (pushed > kEps) {
      e.cap -= pushed;
      adj_[std::size_t(e.to)][std::size_t(e.rev)].cap += pushed;
      return pushed;
    }
  }
  return 0.0;
}

double MaxFlow::solve(int source, int sink) {
  double flow = 0.0;
  while (build_levels(source, sink)) {
    cursor_.assign(adj_.size(), 0);
    while (true) {
      const double f = push(source, sink, std::numeric_limits<double>::infinity());
      if (f <= kEps) break;
      flow += f;
    }
  }
  // Residual reachability from the source defines the minimum cut.
  reachable_.assign(adj_.size(), false);
  std::queue<int> q;
  reachable_[std::size_t(source)] = true;
  q.push(source);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& e : adj_[std::size_t(v)]) {
      if (e.cap > kEps && !reachable_[std::size_t(e.to)]) {
        reachable_[std::size_t(e.to)] = true;
        q.push(e.to);
      }
    }
  }
  return flow;
}

}  // namespace a2pm
