#include "a2pm/io.hpp"

#include <fstream>

#include "a2pm/error.hpp"

namespace a2pm {

namespace {

using nlohmann::json;

template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed ") + what + ": " + e.what());
  }
}

json dims_json(const ImageDims& d) { return json::array({d.width, d.height}); }

ImageDims dims_from(const json& j) {
  ImageDims d{j.at(0).get<int>(), j.at(1).get<int>()};
  if (!d.valid()) throw DataError("invalid image dims");
  return d;
}

json point_json(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }

Eigen::Vector2d point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json matrix_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Eigen::Matrix3d matrix_from(const json& j) {
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

json to_json(const Area& a) { return json::array({a.x_min, a.y_min, a.x_max, a.y_max}); }

Area area_from_json(const json& j) {
  return guarded("rectangle", [&] {
    if (!j.is_array() || j.size() != 4) throw DataError("rectangle needs four integers");
    Area a{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
    if (!a.valid()) throw DataError("empty rectangle " + to_string(a));
    return a;
  });
}

json to_json(const CandidateSet& c) {
  json cs = json::array();
  for (const auto& cand : c.candidates) {
    cs.push_back({{"rect", to_json(cand.area)}, {"source", to_string(cand.source)}});
  }
  return {{"dims", dims_json(c.dims)}, {"candidates", cs}, {"warnings", c.warnings}};
}

CandidateSet candidate_set_from_json(const json& j) {
  return guarded("candidate set", [&] {
    CandidateSet c;
    c.dims = dims_from(j.at("dims"));
    for (const auto& e : j.at("candidates")) {
      c.candidates.push_back(
          {area_from_json(e.at("rect")), area_source_from_string(e.at("source").get<std::string>())});
    }
    if (j.contains("warnings")) c.warnings = j.at("warnings").get<std::vector<std::string>>();
    return c;
  });
}

json to_json(const AreaGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"rect", to_json(n.area)},
                     {"level", n.level},
                     {"origin", to_string(n.origin)}});
  }
  json inclusion = json::array();
  for (const auto& [p, c] : g.inclusion_edges()) inclusion.push_back(json::array({p, c}));
  json adjacency = json::array();
  for (const auto& [a, b] : g.adjacency_edges()) adjacency.push_back(json::array({a, b}));
  return {{"dims", dims_json(g.dims())},
          {"level_count", g.level_count()},
          {"nodes", nodes},
          {"inclusion", inclusion},
          {"adjacency", adjacency}};
}

AreaGraph graph_from_json(const json& j) {
  return guarded("area graph", [&] {
    AreaGraph g(dims_from(j.at("dims")), j.at("level_count").get<int>());
    for (const auto& n : j.at("nodes")) {
      const int id = g.add_node(area_from_json(n.at("rect")), n.at("level").get<int>(),
                                node_origin_from_string(n.at("origin").get<std::string>()));
      if (id != n.at("id").get<int>()) throw DataError("graph node ids must be 0..n-1 in order");
    }
    for (const auto& e : j.at("inclusion")) g.add_inclusion(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& e : j.at("adjacency")) g.add_adjacency(e.at(0).get<int>(), e.at(1).get<int>());
    return g;
  });
}

json to_json(const AreaMatch& m) {
  return {{"source", to_json(m.source)},         {"target", to_json(m.target)},
          {"energy", m.energy},                  {"direction", to_string(m.direction)},
          {"source_node", m.source_node},        {"target_node", m.target_node}};
}

AreaMatch area_match_from_json(const json& j) {
  return guarded("area match", [&] {
    AreaMatch m;
    m.source = area_from_json(j.at("source"));
    m.target = area_from_json(j.at("target"));
    m.energy = j.value("energy", 0.0);
    m.direction = match_direction_from_string(j.value("direction", std::string("forward")));
    m.source_node = j.value("source_node", -1);
    m.target_node = j.value("target_node", -1);
    return m;
  });
}

json to_json(const MatchReport& r) {
  json ms = json::array();
  for (const auto& m : r.matches) ms.push_back(to_json(m));
  json fs = json::array();
  for (const auto& f : r.failures) fs.push_back({{"source_node", f.source_node}, {"reason", f.reason}});
  return {{"matches", ms}, {"failures", fs}};
}

MatchReport match_report_from_json(const json& j) {
  return guarded("area match list", [&] {
    MatchReport r;
    for (const auto& m : j.at("matches")) r.matches.push_back(area_match_from_json(m));
    if (j.contains("failures")) {
      for (const auto& f : j.at("failures")) {
        r.failures.push_back({f.at("source_node").get<int>(), f.at("reason").get<std::string>()});
      }
    }
    return r;
  });
}

json to_json(const PointMatch& m) {
  return {{"p0", point_json(m.p0)},
          {"p1", point_json(m.p1)},
          {"score", m.score},
          {"provenance", provenance_label(m.provenance)}};
}

PointMatch point_match_from_json(const json& j) {
  return guarded("point match", [&] {
    PointMatch m;
    m.p0 = point_from(j.at("p0"));
    m.p1 = point_from(j.at("p1"));
    m.score = j.value("score", 1.0);
    m.provenance = provenance_from_label(j.value("provenance", std::string("global")));
    return m;
  });
}

json point_matches_to_json(const std::vector<PointMatch>& ms) {
  json list = json::array();
  for (const auto& m : ms) list.push_back(to_json(m));
  return {{"matches", list}};
}

std::vector<PointMatch> point_matches_from_json(const json& j) {
  return guarded("point match list", [&] {
    std::vector<PointMatch> out;
    for (const auto& m : j.at("matches")) out.push_back(point_match_from_json(m));
    return out;
  });
}

json to_json(const GroundTruth& gt) {
  json j = {{"dims0", dims_json(gt.dims0)}, {"dims1", dims_json(gt.dims1)}};
  j["homography"] = gt.homography ? matrix_json(*gt.homography) : json(nullptr);
  if (gt.pose) {
    j["pose"] = {{"K0", matrix_json(gt.pose->k0)},
                 {"K1", matrix_json(gt.pose->k1)},
                 {"R", matrix_json(gt.pose->rotation)},
                 {"t", json::array({gt.pose->translation.x(), gt.pose->translation.y(),
                                    gt.pose->translation.z()})}};
  } else {
    j["pose"] = nullptr;
  }
  return j;
}

GroundTruth ground_truth_from_json(const json& j) {
  return guarded("ground truth", [&] {
    GroundTruth gt;
    gt.dims0 = dims_from(j.at("dims0"));
    gt.dims1 = dims_from(j.at("dims1"));
    if (j.contains("homography") && !j.at("homography").is_null()) {
      gt.homography = matrix_from(j.at("homography"));
    }
    if (j.contains("pose") && !j.at("pose").is_null()) {
      const auto& p = j.at("pose");
      PoseTruth pose;
      pose.k0 = matrix_from(p.at("K0"));
      pose.k1 = matrix_from(p.at("K1"));
      pose.rotation = matrix_from(p.at("R"));
      const auto& t = p.at("t");
      pose.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
      gt.pose = pose;
    }
    gt.validate();
    return gt;
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace a2pm
