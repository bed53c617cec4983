#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "a2pm/area_graph.hpp"
#include "a2pm/similarity.hpp"

namespace a2pm {

struct AmrfEdge {
  int i = 0;  // indices into Amrf::nodes
  int j = 0;
  double weight = 0.0;  // IoU of the two areas
};

/// Binary MRF over the target graph for one source area: x_i = 1 marks a
/// match. Energy = sum_i |x_i - S_i| + lambda * sum_edges w_ij [x_i != x_j].
struct Amrf {
  std::vector<int> nodes;       // target graph node ids
  std::vector<double> unary;    // S_i, similarity with the source area
  std::vector<AmrfEdge> edges;
  double lambda = 0.1;
};

/// Edges come from the target graph's adjacency and inclusion relations,
/// both taken as undirected, weighted by IoU.
Amrf build_amrf(const AreaGraph& target, const std::vector<int>& nodes,
                const std::vector<double>& similarities, double lambda);

using Labeling = std::vector<std::uint8_t>;

/// Throws DataError when the labeling size does not match the node count.
double total_energy(const Labeling& x, const Amrf& amrf);

/// Exact minimizer via s-t minimum cut.
Labeling min_cut_solve(const Amrf& amrf);

struct EnergyWeights {
  double self = 4.0;      // μ
  double parent = 2.0;    // α
  double children = 2.0;  // β
  double neighbor = 2.0;  // γ
};

struct MesaParams {
  double lambda = 0.1;
  double similarity_threshold = 0.05;  // T_as
  EnergyWeights weights;
  double max_energy = 0.35;    // T_Emax
  double energy_range = 0.1;   // T_Er
  int source_level = 1;        // l*
  bool bidirectional = false;
  bool pruning = true;
  double mutual_iou = 0.5;
};

/// Similarity access from one graph's perspective. `reversed` swaps the roles
/// of the two graphs so matching can also run from image 1 to image 0 while
/// sharing one matrix.
class OrientedSimilarity {
 public:
  OrientedSimilarity(SimilarityMatrix& matrix, bool reversed) : m_(matrix), reversed_(reversed) {}

  const AreaGraph& source_graph() const { return reversed_ ? m_.graph1() : m_.graph0(); }
  const AreaGraph& target_graph() const { return reversed_ ? m_.graph0() : m_.graph1(); }
  double operator()(int source_node, int target_node) const {
    return reversed_ ? m_.get_or_compute(target_node, source_node)
                     : m_.get_or_compute(source_node, target_node);
  }
  bool reversed() const { return reversed_; }

 private:
  SimilarityMatrix& m_;
  bool reversed_;
};

/// |1 - Sim| and the minimum of |1 - Sim| over parent, children and neighbor
/// pairs; a relation term is absent when either side has no such relatives.
struct EnergyTerms {
  double self = 1.0;
  std::optional<double> parent;
  std::optional<double> children;
  std::optional<double> neighbor;
};

double e_self(int src, int h, const OrientedSimilarity& sim);
std::optional<double> e_parent(int src, int h, const OrientedSimilarity& sim);
std::optional<double> e_children(int src, int h, const OrientedSimilarity& sim);
std::optional<double> e_neighbor(int src, int h, const OrientedSimilarity& sim);
EnergyTerms energy_terms(int src, int h, const OrientedSimilarity& sim);

/// Weighted mean of the present terms (Z = sum of their weights).
double global_energy(const EnergyTerms& terms, const EnergyWeights& w);

enum class MatchDirection { forward, backward, mutual };

std::string to_string(MatchDirection d);
MatchDirection match_direction_from_string(const std::string& s);

/// A matched rectangle pair; `source` lies in image 0 and `target` in
/// image 1 whatever the direction it was found in.
struct AreaMatch {
  Area source;
  Area target;
  double energy = 0.0;
  MatchDirection direction = MatchDirection::forward;
  int source_node = -1;
  int target_node = -1;
};

struct CandidateEnergy {
  int node = -1;
  double energy = 0.0;
};

/// Picks the lowest-energy candidate (ties: lowest node id). Returns nullopt
/// when the candidate set is empty or its best energy exceeds `max_energy`;
/// otherwise fuses every candidate within `energy_range` of the best by
/// softmin-weighted corner averaging. The match is expressed in the
/// orientation of `sim` (source graph -> target graph).
std::optional<AreaMatch> refine_and_fuse(const std::vector<int>& candidates, int src,
                                         const OrientedSimilarity& sim, const MesaParams& params,
                                         std::vector<CandidateEnergy>* energies = nullptr);

/// Softmin-weighted corner average of rectangles.
Area fuse_weighted(const std::vector<Area>& areas, const std::vector<double>& energies);

struct MatchFailure {
  int source_node = -1;
  std::string reason;
};

struct MatchReport {
  std::vector<AreaMatch> matches;
  std::vector<MatchFailure> failures;
};

/// Matches one source node against the whole target graph.
std::optional<AreaMatch> match_source(int src, const OrientedSimilarity& sim,
                                      const MesaParams& params, std::string* why = nullptr);

/// MESA over all source nodes of g0 at the source level (and optionally from
/// g1 back to g0, merging mutually consistent results). All similarities go
/// through `matrix`, so they are reused across source nodes and directions.
MatchReport match_source_areas(SimilarityMatrix& matrix, const MesaParams& params);

/// Combines forward and backward matches: pairs whose image-1 rectangles have
/// IoU >= `min_iou` are averaged into a mutual match, the rest are kept.
std::vector<AreaMatch> merge_bidirectional(const std::vector<AreaMatch>& forward,
                                           const std::vector<AreaMatch>& backward,
                                           double min_iou);

}  // namespace a2pm
