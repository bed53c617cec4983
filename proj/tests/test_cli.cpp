#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "a2pm/eval.hpp"
#include "a2pm/io.hpp"
#include "a2pm/synthetic.hpp"
#include "tempdir.hpp"

using namespace a2pm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const TempDir& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(A2PM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Writes a synthetic scene through the CLI and returns its directory.
fs::path scene(const TempDir& dir, const std::string& name, const json& spec) {
  write_json(dir / (name + ".spec.json"), spec);
  const Run r = cli(dir, "gen-synthetic --spec " + q(dir / (name + ".spec.json")) + " --out " + q(dir / name));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  return dir / name / "scene_000";
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  TempDir dir("cli_usage");
  CHECK(cli(dir, "").code == 1);
  CHECK(cli(dir, "frobnicate").code == 1);
  CHECK(cli(dir, "ingest --out x.json").code == 1);
  write_json(dir / "cfg.json", json{{"no_such_key", 1}});
  const Run r = cli(dir, "ingest --masks " + q(dir.path()) + " --dims 64x48 --config " + q(dir / "cfg.json") +
                             " --out " + q(dir / "c.json"));
  CHECK(r.code == 1);
  CHECK(r.output.find("no_such_key") != std::string::npos);
  CHECK(cli(dir, "ingest --masks " + q(dir.path()) + " --dims 64by48 --out " + q(dir / "c.json")).code == 1);
  write_json(dir / "spec.json", json{{"family", "shear"}});
  CHECK(cli(dir, "gen-synthetic --spec " + q(dir / "spec.json") + " --out " + q(dir / "s")).code == 1);
}

TEST_CASE("ingest of empty and broken mask sources") {
  TempDir dir("cli_ingest");
  fs::create_directories(dir / "empty");
  const Run ok = cli(dir, "ingest --masks " + q(dir / "empty") + " --dims 64x48 --out " + q(dir / "c.json"));
  REQUIRE(ok.code == 0);
  const CandidateSet c = candidate_set_from_json(read_json(dir / "c.json"));
  CHECK(c.candidates.empty());
  CHECK(c.dims == ImageDims{64, 48});

  fs::create_directories(dir / "broken");
  std::ofstream(dir / "broken" / "manifest.json") << R"({"width": 64, "masks": 3})";
  const Run bad = cli(dir, "ingest --masks " + q(dir / "broken") + " --out " + q(dir / "d.json"));
  CHECK(bad.code == 2);
  CHECK_FALSE(bad.output.empty());
  CHECK(cli(dir, "ingest --masks " + q(dir / "nowhere") + " --dims 64x48 --out " + q(dir / "e.json")).code == 2);
}

TEST_CASE("scene to graph to area matches") {
  TempDir dir("cli_chain");
  const fs::path s = scene(dir, "id", json{{"seed", 7}, {"n_segments", 5}});
  for (int k : {0, 1}) {
    const std::string i = std::to_string(k);
    REQUIRE(cli(dir, "ingest --masks " + q(s / ("masks" + i)) + " --out " + q(dir / ("c" + i + ".json"))).code == 0);
    const Run g = cli(dir, "build-graph --audit --candidates " + q(dir / ("c" + i + ".json")) + " --out " +
                               q(dir / ("g" + i + ".json")));
    REQUIRE(g.code == 0);
    CHECK(g.output.find("parent coverage: ok") != std::string::npos);
    const json gj = read_json(dir / ("g" + i + ".json"));
    CHECK(to_json(graph_from_json(gj)) == gj);
  }

  const std::string common = " --graph0 " + q(dir / "g0.json") + " --graph1 " + q(dir / "g1.json") + " --img0 " +
                             q(s / "image0.png") + " --img1 " + q(s / "image1.png");
  const Run m = cli(dir, "match-areas --method mesa" + common + " --out " + q(dir / "m.json"));
  REQUIRE_MESSAGE(m.code == 0, m.output);
  const MatchReport report = match_report_from_json(read_json(dir / "m.json"));
  REQUIRE_FALSE(report.matches.empty());
  for (const auto& am : report.matches) CHECK(aor(am, Eigen::Matrix3d::Identity(), {640, 480}) == 1.0);

  CHECK(cli(dir, "match-areas --method sift" + common + " --out " + q(dir / "x.json")).code == 1);
  const std::string missing = " --graph0 " + q(dir / "g0.json") + " --graph1 " + q(dir / "g1.json") +
                              " --img0 " + q(s / "image0.png") + " --img1 " + q(dir / "none.png");
  CHECK(cli(dir, "match-areas --method mesa" + missing + " --out " + q(dir / "x.json")).code == 2);
}

TEST_CASE("pipeline and eval commands") {
  TempDir dir("cli_pipe");
  const fs::path s = scene(dir, "tr", json{{"seed", 8}, {"family", "translation"}, {"n_segments", 4}});
  const std::string args = "run-pipeline --method mesa --img0 " + q(s / "image0.png") + " --img1 " +
                           q(s / "image1.png") + " --masks0 " + q(s / "masks0") + " --masks1 " +
                           q(s / "masks1") + " --gt " + q(s / "gt.json");
  const Run r = cli(dir, args + " --out " + q(dir / "p1.json"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const json out = read_json(dir / "p1.json");
  CHECK_FALSE(out.at("matches").empty());
  CHECK(out.at("metrics").at("mma").size() == 3);
  REQUIRE(cli(dir, args + " --out " + q(dir / "p2.json")).code == 0);
  CHECK(bytes(dir / "p1.json") == bytes(dir / "p2.json"));

  const Run nomask = cli(dir, "run-pipeline --img0 " + q(s / "image0.png") + " --img1 " + q(s / "image1.png") +
                                  " --out " + q(dir / "p3.json"));
  REQUIRE(nomask.code == 0);
  const json fallback = read_json(dir / "p3.json");
  CHECK(fallback.at("pipeline").at("global_collection") == true);
  CHECK_FALSE(fallback.at("matches").empty());

  // Exact matches under the scene's own warp score 100 at every threshold.
  const GroundTruth gt = ground_truth_from_json(read_json(s / "gt.json"));
  std::vector<PointMatch> exact;
  for (double x = 50; x < 500; x += 37) {
    const Eigen::Vector2d p0(x, 0.5 * x + 20);
    exact.push_back({p0, *apply_homography(*gt.homography, p0), 1.0, 0});
  }
  write_json(dir / "exact.json", point_matches_to_json(exact));
  REQUIRE(cli(dir, "eval --matches " + q(dir / "exact.json") + " --gt " + q(s / "gt.json") + " --report " +
                       q(dir / "r.json"))
              .code == 0);
  const json rep = read_json(dir / "r.json");
  CHECK(rep.at("pairs").at(0).at("mma") == json::array({100.0, 100.0, 100.0}));
  CHECK(fs::exists(dir / "r.json.txt"));

  CHECK(cli(dir, "eval --matches " + q(dir / "exact.json") + " --gt " + q(s / "gt.json") + " --gt " +
                     q(s / "gt.json") + " --report " + q(dir / "r2.json"))
            .code == 1);
}

TEST_CASE("pose reports have monotone AUC") {
  TempDir dir("cli_pose");
  std::string args = "eval";
  for (int k = 0; k < 3; ++k) {
    const PoseScene ps = gen_pose_scene(60, std::uint64_t(100 + k));
    GroundTruth gt;
    gt.dims0 = gt.dims1 = ps.dims;
    gt.pose = ps.truth;
    auto matches = ps.matches;
    for (std::size_t i = 0; i < matches.size(); i += 2) matches[i].p1 += Eigen::Vector2d(0.8 * k, -0.6 * k);
    const std::string i = std::to_string(k);
    write_json(dir / ("gt" + i + ".json"), to_json(gt));
    write_json(dir / ("m" + i + ".json"), point_matches_to_json(matches));
    args += " --matches " + q(dir / ("m" + i + ".json")) + " --gt " + q(dir / ("gt" + i + ".json"));
  }
  REQUIRE(cli(dir, args + " --report " + q(dir / "r.json")).code == 0);
  const auto auc = read_json(dir / "r.json").at("aggregate").at("pose_auc").get<std::vector<double>>();
  REQUIRE(auc.size() == 3);
  CHECK(auc[0] <= auc[1]);
  CHECK(auc[1] <= auc[2]);
  CHECK(auc[0] > 0.0);
}

TEST_CASE("synthetic generation is byte-identical across runs") {
  TempDir dir("cli_gen");
  const json spec{{"seed", 21}, {"family", "homography"}, {"scale", 2.0}, {"n_scenes", 2}};
  scene(dir, "a", spec);
  scene(dir, "b", spec);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path twin = dir / "b" / fs::relative(e.path(), dir / "a");
    CHECK(bytes(e.path()) == bytes(twin));
  }
  CHECK(files > 6);
}
