#include "a2pm/mesa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "a2pm/error.hpp"
#include "a2pm/maxflow.hpp"

namespace a2pm {

Amrf build_amrf(const AreaGraph& target, const std::vector<int>& nodes,
                const std::vector<double>& similarities, double lambda) {
  if (nodes.size() != similarities.size()) {
    throw DataError("AMRF needs one similarity per node");
  }
  Amrf amrf;
  amrf.nodes = nodes;
  amrf.unary = similarities;
  amrf.lambda = lambda;
  std::map<int, int> index;
  for (std::size_t k = 0; k < nodes.size(); ++k) index[nodes[k]] = int(k);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (int other : target.general_neighbors(nodes[k])) {
      auto it = index.find(other);
      if (it == index.end() || it->second <= int(k)) continue;
      amrf.edges.push_back(
          {int(k), it->second, iou(target.node(nodes[k]).area, target.node(other).area)});
    }
  }
  return amrf;
}

double total_energy(const Labeling& x, const Amrf& amrf) {
  if (x.size() != amrf.unary.size()) throw DataError("labeling size does not match AMRF");
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) e += std::abs(double(x[i]) - amrf.unary[i]);
  double pairwise = 0.0;
  for (const auto& edge : amrf.edges) {
    if (x[std::size_t(edge.i)] != x[std::size_t(edge.j)]) pairwise += edge.weight;
  }
  return e + amrf.lambda * pairwise;
}

Labeling min_cut_solve(const Amrf& amrf) {
  const int n = int(amrf.unary.size());
  const int source = n;
  const int sink = n + 1;
  MaxFlow flow(n + 2);
  // Source side means x = 1: cutting s->i pays E(0) = S_i, cutting i->t
  // pays E(1) = 1 - S_i.
  for (int i = 0; i < n; ++i) {
    const double s = amrf.unary[std::size_t(i)];
    flow.add_edge(source, i, std::abs(0.0 - s));
    flow.add_edge(i, sink, std::abs(1.0 - s));
  }
  for (const auto& e : amrf.edges) {
    const double c = amrf.lambda * e.weight;
    if (c > 0.0) flow.add_edge(e.i, e.j, c, c);
  }
  flow.solve(source, sink);
  Labeling x(std::size_t(n), 0);
  for (int i = 0; i < n; ++i) x[std::size_t(i)] = flow.on_source_side(i) ? 1 : 0;
  return x;
}

double e_self(int src, int h, const OrientedSimilarity& sim) {
  return std::abs(1.0 - sim(src, h));
}

namespace {

std::optional<double> pair_energy(const std::vector<int>& a, const std::vector<int>& b,
                                  const OrientedSimilarity& sim) {
  if (a.empty() || b.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (int u : a) {
    for (int r : b) best = std::min(best, std::abs(1.0 - sim(u, r)));
  }
  return best;
}

}  // namespace

std::optional<double> e_parent(int src, int h, const OrientedSimilarity& sim) {
  return pair_energy(sim.source_graph().parents(src), sim.target_graph().parents(h), sim);
}

std::optional<double> e_children(int src, int h, const OrientedSimilarity& sim) {
  return pair_energy(sim.source_graph().children(src), sim.target_graph().children(h), sim);
}

std::optional<double> e_neighbor(int src, int h, const OrientedSimilarity& sim) {
  return pair_energy(sim.source_graph().neighbors(src), sim.target_graph().neighbors(h), sim);
}

EnergyTerms energy_terms(int src, int h, const OrientedSimilarity& sim) {
  return {e_self(src, h, sim), e_parent(src, h, sim), e_children(src, h, sim),
          e_neighbor(src, h, sim)};
}

double global_energy(const EnergyTerms& t, const EnergyWeights& w) {
  double sum = w.self * t.self;
  double z = w.self;
  auto add = [&](const std::optional<double>& term, double weight) {
    if (!term) return;
    sum += weight * *term;
    z += weight;
  };
  add(t.parent, w.parent);
  add(t.children, w.children);
  add(t.neighbor, w.neighbor);
  return z > 0.0 ? sum / z : 0.0;
}

std::string to_string(MatchDirection d) {
  switch (d) {
    case MatchDirection::forward: return "forward";
    case MatchDirection::backward: return "backward";
    case MatchDirection::mutual: return "mutual";
  }
  return "forward";
}

MatchDirection match_direction_from_string(const std::string& s) {
  if (s == "forward") return MatchDirection::forward;
  if (s == "backward") return MatchDirection::backward;
  if (s == "mutual") return MatchDirection::mutual;
  throw DataError("unknown match direction '" + s + "'");
}

Area fuse_weighted(const std::vector<Area>& areas, const std::vector<double>& energies) {
  if (areas.empty() || areas.size() != energies.size()) {
    throw DataError("weighted fusion needs one energy per area");
  }
  if (areas.size() == 1) return areas.front();
  const double e_min = *std::min_element(energies.begin(), energies.end());
  std::vector<double> w(areas.size());
  double total = 0.0;
  for (std::size_t k = 0; k < areas.size(); ++k) {
    w[k] = std::exp(-(energies[k] - e_min));
    total += w[k];
  }
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  for (std::size_t k = 0; k < areas.size(); ++k) {
    const double wk = w[k] / total;
    x0 += wk * areas[k].x_min;
    y0 += wk * areas[k].y_min;
    x1 += wk * areas[k].x_max;
    y1 += wk * areas[k].y_max;
  }
  return {int(std::lround(x0)), int(std::lround(y0)), int(std::lround(x1)), int(std::lround(y1))};
}

std::optional<AreaMatch> refine_and_fuse(const std::vector<int>& candidates, int src,
                                         const OrientedSimilarity& sim, const MesaParams& params,
                                         std::vector<CandidateEnergy>* energies) {
  if (candidates.empty()) return std::nullopt;
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  std::vector<CandidateEnergy> scored;
  for (int h : sorted) {
    scored.push_back({h, global_energy(energy_terms(src, h, sim), params.weights)});
  }
  if (energies) *energies = scored;

  // First minimum in id order, so ties go to the lowest id.
  const auto best = *std::min_element(
      scored.begin(), scored.end(),
      [](const CandidateEnergy& a, const CandidateEnergy& b) { return a.energy < b.energy; });
  if (best.energy > params.max_energy) return std::nullopt;

  std::vector<Area> areas;
  std::vector<double> es;
  for (const auto& c : scored) {
    if (std::abs(c.energy - best.energy) <= params.energy_range) {
      areas.push_back(sim.target_graph().node(c.node).area);
      es.push_back(c.energy);
    }
  }
  AreaMatch m;
  m.source = sim.source_graph().node(src).area;
  m.target = fuse_weighted(areas, es);
  m.energy = best.energy;
  m.source_node = src;
  m.target_node = best.node;
  m.direction = sim.reversed() ? MatchDirection::backward : MatchDirection::forward;
  return m;
}

std::optional<AreaMatch> match_source(int src, const OrientedSimilarity& sim,
                                      const MesaParams& params, std::string* why) {
  const auto& target = sim.target_graph();
  if (target.empty()) {
    if (why) *why = "target graph is empty";
    return std::nullopt;
  }
  // Coarse levels first so inclusion-based pruning can apply to finer ones.
  std::vector<int> order(target.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = int(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return target.node(a).level > target.node(b).level;
  });
  std::vector<double> s(target.size());
  for (int id : order) s[std::size_t(id)] = sim(src, id);

  std::vector<int> all(target.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = int(k);
  const Amrf amrf = build_amrf(target, all, s, params.lambda);
  const Labeling x = min_cut_solve(amrf);
  std::vector<int> matched;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k]) matched.push_back(amrf.nodes[k]);
  }
  if (matched.empty()) {
    if (why) *why = "minimum cut selects no candidate";
    return std::nullopt;
  }
  auto m = refine_and_fuse(matched, src, sim, params);
  if (!m && why) *why = "best global energy exceeds T_Emax";
  return m;
}

namespace {

Area average(const Area& a, const Area& b) {
  auto mid = [](int u, int v) { return int(std::lround(0.5 * (u + v))); };
  return {mid(a.x_min, b.x_min), mid(a.y_min, b.y_min), mid(a.x_max, b.x_max),
          mid(a.y_max, b.y_max)};
}

std::vector<AreaMatch> run_direction(SimilarityMatrix& matrix, const MesaParams& params,
                                     bool reversed, std::vector<MatchFailure>& failures) {
  const OrientedSimilarity sim(matrix, reversed);
  std::vector<AreaMatch> out;
  for (int src : sim.source_graph().source_nodes(params.source_level)) {
    std::string why;
    auto m = match_source(src, sim, params, &why);
    if (!m) {
      failures.push_back({src, (reversed ? "backward: " : "forward: ") + why});
      continue;
    }
    if (reversed) {
      std::swap(m->source, m->target);
      std::swap(m->source_node, m->target_node);
    }
    out.push_back(*m);
  }
  return out;
}

}  // namespace

std::vector<AreaMatch> merge_bidirectional(const std::vector<AreaMatch>& forward,
                                           const std::vector<AreaMatch>& backward,
                                           double min_iou) {
  std::vector<AreaMatch> out;
  std::vector<bool> used(backward.size(), false);
  for (const auto& f : forward) {
    int best = -1;
    double best_iou = min_iou;
    for (std::size_t k = 0; k < backward.size(); ++k) {
      if (used[k]) continue;
      const double v = iou(f.target, backward[k].target);
      if (v >= best_iou) {
        if (best >= 0 && v == best_iou) continue;
        best_iou = v;
        best = int(k);
      }
    }
    if (best < 0) {
      out.push_back(f);
      continue;
    }
    const auto& b = backward[std::size_t(best)];
    used[std::size_t(best)] = true;
    AreaMatch m = f;
    m.source = average(f.source, b.source);
    m.target = average(f.target, b.target);
    m.energy = 0.5 * (f.energy + b.energy);
    m.direction = MatchDirection::mutual;
    out.push_back(m);
  }
  for (std::size_t k = 0; k < backward.size(); ++k) {
    if (!used[k]) out.push_back(backward[k]);
  }
  return out;
}

MatchReport match_source_areas(SimilarityMatrix& matrix, const MesaParams& params) {
  MatchReport report;
  auto forward = run_direction(matrix, params, false, report.failures);
  if (!params.bidirectional) {
    report.matches = std::move(forward);
    return report;
  }
  auto backward = run_direction(matrix, params, true, report.failures);
  report.matches = merge_bidirectional(forward, backward, params.mutual_iou);
  return report;
}

}  // namespace a2pm
