#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "a2pm/area_graph.hpp"
#include "a2pm/eval.hpp"
#include "a2pm/mesa.hpp"
#include "a2pm/pipeline.hpp"
#include "a2pm/seg_ingest.hpp"

namespace a2pm {

/// JSON forms used by the CLI. Rectangles are [x_min, y_min, x_max, y_max],
/// points [x, y], dims [width, height]. Every reader throws DataError on
/// malformed input.

nlohmann::json to_json(const Area& a);
Area area_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CandidateSet& c);
CandidateSet candidate_set_from_json(const nlohmann::json& j);

/// {"dims", "level_count", "nodes": [{"id", "rect", "level", "origin"}],
///  "inclusion": [[parent, child]], "adjacency": [[a, b]]}
nlohmann::json to_json(const AreaGraph& g);
AreaGraph graph_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AreaMatch& m);
AreaMatch area_match_from_json(const nlohmann::json& j);

/// {"matches": [...], "failures": [{"source_node", "reason"}]}
nlohmann::json to_json(const MatchReport& r);
MatchReport match_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PointMatch& m);
PointMatch point_match_from_json(const nlohmann::json& j);

/// {"matches": [{"p0", "p1", "score", "provenance"}]}
nlohmann::json point_matches_to_json(const std::vector<PointMatch>& ms);
std::vector<PointMatch> point_matches_from_json(const nlohmann::json& j);

/// {"dims0", "dims1", "homography": 3x3 rows | null,
///  "pose": {"K0", "K1", "R", "t"} | null}. Depth maps are not serialized.
nlohmann::json to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
/// Two-space indented dump with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace a2pm
