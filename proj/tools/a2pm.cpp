#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>

#include "a2pm/area_graph.hpp"
#include "a2pm/config.hpp"
#include "a2pm/dmesa.hpp"
#include "a2pm/error.hpp"
#include "a2pm/eval.hpp"
#include "a2pm/image.hpp"
#include "a2pm/io.hpp"
#include "a2pm/mesa.hpp"
#include "a2pm/pipeline.hpp"
#include "a2pm/seg_ingest.hpp"
#include "a2pm/similarity.hpp"
#include "a2pm/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace a2pm;

namespace {

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

ImageDims parse_dims(const std::string& s) {
  int w = 0, h = 0;
  char x = 0, extra = 0;
  if (std::sscanf(s.c_str(), "%d%c%d%c", &w, &x, &h, &extra) != 3 || (x != 'x' && x != 'X') ||
      w < 1 || h < 1) {
    throw ConfigError("--dims expects WxH, got '" + s + "'");
  }
  return {w, h};
}

CandidateSet ingest(const fs::path& masks, std::optional<ImageDims> dims, const RunConfig& cfg) {
  MaskLoadResult loaded = load_masks(masks, dims);
  if (!dims) dims = loaded.dims;
  if (!dims) throw ConfigError("image dims unknown: pass --dims or use a manifest that declares them");
  std::vector<Area> areas;
  for (const auto& m : loaded.masks) areas.push_back(mask_to_area(m));
  CandidateSet c = preprocess(dedupe_areas(areas), cfg.preprocess, *dims);
  std::vector<std::string> notes;
  for (const auto& r : loaded.rejected) notes.push_back("mask " + r.id + ": " + r.reason);
  c.warnings.insert(c.warnings.begin(), notes.begin(), notes.end());
  return c;
}

AreaGraph graph_of(const CandidateSet& c, const RunConfig& cfg) {
  return complete_graph(build_initial_graph(c, cfg.graph), cfg.graph);
}

json mesa_stats(const SimilarityMatrix& m) {
  return {{"provider_calls", m.provider_calls()},
          {"pruned_hits", m.pruned_hits()},
          {"pruned_cells", m.prune_log().size()}};
}

struct AreaMatchRun {
  MatchReport report;
  json stats;
};

AreaMatchRun match_areas(const std::string& method, const AreaGraph& g0, const AreaGraph& g1,
                         const cv::Mat& img0, const cv::Mat& img1, const RunConfig& cfg,
                         const std::string& similarity_file, const std::string& patch_file) {
  if (method == "mesa") {
    std::shared_ptr<const SimilarityProvider> provider = std::make_shared<ImageSimilarityProvider>(
        img0, img1, nullptr, cfg.similarity_side);
    if (!similarity_file.empty()) {
      provider = std::make_shared<TableSimilarityProvider>(
          load_similarity_table(similarity_file, provider));
    }
    SimilarityMatrix matrix(g0, g1, *provider, cfg.mesa.similarity_threshold, cfg.mesa.pruning);
    AreaMatchRun run{match_source_areas(matrix, cfg.mesa), mesa_stats(matrix)};
    return run;
  }
  if (method == "dmesa") {
    std::unique_ptr<PatchMatchProvider> provider;
    if (patch_file.empty()) {
      provider = std::make_unique<NccPatchMatcher>(cfg.coarse_min_correlation, cfg.patch_context);
    } else {
      provider = std::make_unique<InjectedPatchMatcher>(load_patch_matches(patch_file));
    }
    return {match_areas_dmesa(g0, img0, img1, *provider, cfg.dmesa_params(), cfg.mesa.source_level),
            json::object()};
  }
  throw ConfigError("unknown method '" + method + "' (expected mesa or dmesa)");
}

json pipeline_json(const PipelineResult& r) {
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"area_match", f.area_match}, {"reason", f.reason}});
  return {{"raw_matches", r.raw_matches},
          {"after_dedupe", r.after_dedupe},
          {"filter_applied", r.filter.applied},
          {"filter_removed", r.filter.removed},
          {"filter_warning", r.filter.warning},
          {"global_collection", r.global_triggered},
          {"letterboxed", r.letterboxed},
          {"failures", failures}};
}

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Metrics of one image pair; fills `pose_errors` when a pose is known.
json evaluate_pair(const json& matches_file, const GroundTruth& gt, std::uint64_t seed,
                   std::vector<double>& pose_errors, std::vector<double>& aors) {
  json out;
  const json& list = matches_file.at("matches");
  const bool area_list = !list.empty() && list.at(0).contains("source");
  if (area_list) {
    const MatchReport r = match_report_from_json(matches_file);
    if (!gt.homography) throw DataError("area metrics need a homography ground truth");
    std::vector<double> pair_aors;
    for (const auto& m : r.matches) pair_aors.push_back(aor(m, *gt.homography, gt.dims1));
    aors.insert(aors.end(), pair_aors.begin(), pair_aors.end());
    const Percentage p = amp(pair_aors);
    double mean = 0.0;
    for (double v : pair_aors) mean += v;
    out["area_matches"] = pair_aors.size();
    out["mean_aor"] = pair_aors.empty() ? 0.0 : mean / double(pair_aors.size());
    out["amp"] = p.value;
    out["amp_empty"] = p.empty;
    out["acr"] = acr(r.matches, gt.dims0);
    out["aor"] = pair_aors;
    return out;
  }
  const auto points = point_matches_from_json(matches_file);
  out["point_matches"] = points.size();
  if (gt.homography) {
    const MmaResult m = mma(points, gt);
    out["mma_thresholds"] = m.thresholds;
    out["mma"] = m.percent;
    out["mma_evaluated"] = m.evaluated;
    out["mma_undefined"] = m.undefined;
  }
  if (gt.pose) {
    const double e = pair_pose_error(points, *gt.pose, seed);
    pose_errors.push_back(e);
    out["pose_error"] = e;
  }
  return out;
}

std::string report_table(const json& report) {
  std::ostringstream t;
  t << "pair  metric            value\n";
  int i = 0;
  for (const auto& p : report.at("pairs")) {
    for (const auto& [k, v] : p.items()) {
      if (v.is_array() || v.is_boolean() || v.is_string()) continue;
      std::string key = k;
      key.resize(std::max<std::size_t>(key.size(), 16), ' ');
      t << std::to_string(i) << (i < 10 ? "     " : "    ") << key << "  "
        << (v.is_number_float() ? fmt(v.get<double>(), 4) : v.dump()) << "\n";
    }
    if (p.contains("mma")) {
      for (std::size_t k = 0; k < p.at("mma").size(); ++k) {
        t << std::to_string(i) << (i < 10 ? "     " : "    ") << "MMA@"
          << fmt(p.at("mma_thresholds").at(k).get<double>(), 0) << "             "
          << fmt(p.at("mma").at(k).get<double>()) << "\n";
      }
    }
    ++i;
  }
  const auto& agg = report.at("aggregate");
  if (agg.contains("pose_auc")) {
    for (std::size_t k = 0; k < agg.at("pose_auc").size(); ++k) {
      t << "all   AUC@" << fmt(agg.at("auc_thresholds").at(k).get<double>(), 0) << "           "
        << fmt(agg.at("pose_auc").at(k).get<double>()) << "\n";
    }
  }
  if (agg.contains("mean_aor")) {
    t << "all   mean_aor          " << fmt(agg.at("mean_aor").get<double>(), 4) << "\n";
    t << "all   amp               " << fmt(agg.at("amp").get<double>()) << "\n";
  }
  return t.str();
}

void write_masks(const fs::path& dir, const std::vector<SegmentMask>& masks, ImageDims dims) {
  fs::create_directories(dir);
  json names = json::array();
  for (const auto& m : masks) {
    const std::string name = m.id + ".png";
    if (!cv::imwrite((dir / name).string(), m.bitmap)) throw DataError("cannot write mask " + name);
    names.push_back(name);
  }
  write_json(dir / "manifest.json", {{"width", dims.width}, {"height", dims.height}, {"masks", names}});
}

SceneSpec scene_spec_from_json(const json& j) {
  static const std::set<std::string> keys = {"n_scenes", "family", "texture_density", "n_segments",
                                             "width",    "height", "max_translation", "scale", "seed"};
  if (!j.is_object()) throw ConfigError("scene spec must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw ConfigError("unknown scene spec key '" + k + "'");
  }
  SceneSpec s;
  try {
    s.n_scenes = j.value("n_scenes", s.n_scenes);
    if (j.contains("family")) s.family = warp_family_from_string(j.at("family").get<std::string>());
    s.texture_density = j.value("texture_density", s.texture_density);
    s.n_segments = j.value("n_segments", s.n_segments);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.max_translation = j.value("max_translation", s.max_translation);
    s.scale = j.value("scale", s.scale);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scene spec: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (s.n_scenes < 0 || s.n_segments < 0 || s.width < 64 || s.height < 64 ||
      !(s.texture_density > 0.0) || !(s.scale > 0.0) || s.max_translation < 0.0) {
    throw ConfigError("scene spec values out of range");
  }
  return s;
}

void write_image(const fs::path& path, const cv::Mat& img) {
  if (!cv::imwrite(path.string(), img)) throw DataError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic area matching and area-to-point matching"};
  app.require_subcommand(1);

  std::string config_path, out_path;

  auto* ingest_cmd = app.add_subcommand("ingest", "Masks -> filtered candidate areas");
  std::string masks_path, dims_arg;
  ingest_cmd->add_option("--masks", masks_path, "Mask directory, manifest or RLE file")->required();
  ingest_cmd->add_option("--dims", dims_arg, "Image dims as WxH");
  ingest_cmd->add_option("--config", config_path, "Run config (JSON)");
  ingest_cmd->add_option("--out", out_path, "Candidate set output")->required();

  auto* graph_cmd = app.add_subcommand("build-graph", "Candidates -> completed area graph");
  std::string candidates_path;
  bool audit = false;
  graph_cmd->add_option("--candidates", candidates_path)->required();
  graph_cmd->add_option("--config", config_path);
  graph_cmd->add_option("--out", out_path)->required();
  graph_cmd->add_flag("--audit", audit, "Print nodes that lack a parent");

  auto* match_cmd = app.add_subcommand("match-areas", "Area matching between two graphs");
  std::string method = "mesa", graph0_path, graph1_path, img0_path, img1_path, similarity_path,
              patch_path;
  match_cmd->add_option("--method", method, "mesa or dmesa");
  match_cmd->add_option("--graph0", graph0_path)->required();
  match_cmd->add_option("--graph1", graph1_path)->required();
  match_cmd->add_option("--img0", img0_path)->required();
  match_cmd->add_option("--img1", img1_path)->required();
  match_cmd->add_option("--config", config_path);
  match_cmd->add_option("--similarity", similarity_path, "Precomputed similarity table (mesa)");
  match_cmd->add_option("--patch-matches", patch_path, "Precomputed coarse matches (dmesa)");
  match_cmd->add_option("--out", out_path)->required();

  auto* pipe_cmd = app.add_subcommand("run-pipeline", "Full area-to-point matching");
  std::string masks0_path, masks1_path, gt_path;
  pipe_cmd->add_option("--img0", img0_path)->required();
  pipe_cmd->add_option("--img1", img1_path)->required();
  pipe_cmd->add_option("--masks0", masks0_path);
  pipe_cmd->add_option("--masks1", masks1_path);
  pipe_cmd->add_option("--method", method, "mesa or dmesa");
  pipe_cmd->add_option("--config", config_path);
  pipe_cmd->add_option("--gt", gt_path, "Ground truth for metrics");
  pipe_cmd->add_option("--out", out_path)->required();

  auto* eval_cmd = app.add_subcommand("eval", "Metrics of matches against ground truth");
  std::vector<std::string> match_files, gt_files;
  std::string report_path, table_path;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--matches", match_files, "Point or area match files")->required();
  eval_cmd->add_option("--gt", gt_files, "Ground truth files, one per match file")->required();
  eval_cmd->add_option("--report", report_path)->required();
  eval_cmd->add_option("--table", table_path, "Plain-text table (default: report path + .txt)");
  eval_cmd->add_option("--seed", eval_seed, "Seed of the pose estimator");

  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write seeded synthetic scenes");
  std::string spec_path;
  gen_cmd->add_option("--spec", spec_path)->required();
  gen_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      std::optional<ImageDims> dims;
      if (!dims_arg.empty()) dims = parse_dims(dims_arg);
      write_json(out_path, to_json(ingest(masks_path, dims, cfg)));
    } else if (*graph_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      const AreaGraph g = graph_of(candidate_set_from_json(read_json(candidates_path)), cfg);
      if (audit) {
        const auto orphans = g.parentless_nodes();
        std::cout << "parent coverage: " << (orphans.empty() ? "ok" : "violations");
        for (int id : orphans) std::cout << " " << id;
        std::cout << "\n";
      }
      write_json(out_path, to_json(g));
    } else if (*match_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      const AreaGraph g0 = graph_from_json(read_json(graph0_path));
      const AreaGraph g1 = graph_from_json(read_json(graph1_path));
      if (method != "mesa" && method != "dmesa") {
        throw ConfigError("unknown method '" + method + "' (expected mesa or dmesa)");
      }
      const cv::Mat img0 = load_gray(img0_path);
      const cv::Mat img1 = load_gray(img1_path);
      if (!(dims_of(img0) == g0.dims()) || !(dims_of(img1) == g1.dims())) {
        throw DataError("image dims do not match the graphs");
      }
      auto run = match_areas(method, g0, g1, img0, img1, cfg, similarity_path, patch_path);
      json j = to_json(run.report);
      j["method"] = method;
      j["stats"] = run.stats;
      write_json(out_path, j);
    } else if (*pipe_cmd) {
      const RunConfig cfg = config_or_default(config_path);
      if (method != "mesa" && method != "dmesa") {
        throw ConfigError("unknown method '" + method + "' (expected mesa or dmesa)");
      }
      const cv::Mat img0 = load_gray(img0_path);
      const cv::Mat img1 = load_gray(img1_path);
      const auto candidates = [&](const std::string& path, const cv::Mat& img) {
        if (path.empty()) return CandidateSet{dims_of(img), {}, {"no masks given"}};
        return ingest(path, dims_of(img), cfg);
      };
      const CandidateSet c0 = candidates(masks0_path, img0);
      const CandidateSet c1 = candidates(masks1_path, img1);
      MatchReport areas;
      json stats = json::object();
      if (!c0.candidates.empty() && !c1.candidates.empty()) {
        const AreaGraph g0 = graph_of(c0, cfg);
        const AreaGraph g1 = graph_of(c1, cfg);
        auto run = match_areas(method, g0, g1, img0, img1, cfg, "", "");
        areas = std::move(run.report);
        stats = std::move(run.stats);
      }
      const BaselinePointMatcher pm(cfg.coarse_min_correlation);
      const PipelineResult r = run_a2pm(img0, img1, areas.matches, pm, cfg.pipeline_config());
      json j = point_matches_to_json(r.matches);
      j["area_matches"] = to_json(areas);
      j["area_stats"] = stats;
      j["pipeline"] = pipeline_json(r);
      if (!gt_path.empty()) {
        const GroundTruth gt = ground_truth_from_json(read_json(gt_path));
        std::vector<double> errors, aors;
        j["metrics"] = evaluate_pair(point_matches_to_json(r.matches), gt, cfg.seed, errors, aors);
        if (gt.homography && !areas.matches.empty()) {
          j["area_metrics"] = evaluate_pair(to_json(areas), gt, cfg.seed, errors, aors);
        }
      }
      write_json(out_path, j);
    } else if (*eval_cmd) {
      if (match_files.size() != gt_files.size()) {
        throw ConfigError("--matches and --gt must be given the same number of times");
      }
      json pairs = json::array();
      std::vector<double> pose_errors, aors;
      for (std::size_t i = 0; i < match_files.size(); ++i) {
        const GroundTruth gt = ground_truth_from_json(read_json(gt_files[i]));
        json pair = evaluate_pair(read_json(match_files[i]), gt, eval_seed, pose_errors, aors);
        pairs.push_back(pair);
      }
      json agg = json::object();
      if (!pose_errors.empty()) {
        const std::vector<double> thresholds{5.0, 10.0, 20.0};
        agg["auc_thresholds"] = thresholds;
        agg["pose_auc"] = pose_auc(pose_errors, thresholds);
      }
      if (!aors.empty()) {
        double mean = 0.0;
        for (double v : aors) mean += v;
        agg["mean_aor"] = mean / double(aors.size());
        agg["amp"] = amp(aors).value;
      }
      const json report = {{"pairs", pairs}, {"aggregate", agg}};
      write_json(report_path, report);
      write_text(table_path.empty() ? report_path + ".txt" : table_path, report_table(report));
    } else if (*gen_cmd) {
      const SceneSpec spec = scene_spec_from_json(read_json(spec_path));
      const auto scenes = gen_synthetic(spec);
      const fs::path root(out_path);
      fs::create_directories(root);
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03zu", i);
        const fs::path dir = root / name;
        fs::create_directories(dir);
        const auto& s = scenes[i];
        write_image(dir / "image0.png", s.image0);
        write_image(dir / "image1.png", s.image1);
        write_masks(dir / "masks0", s.masks0, dims_of(s.image0));
        write_masks(dir / "masks1", s.masks1, dims_of(s.image1));
        write_json(dir / "gt.json", to_json(s.truth()));
        json pairs = json::array();
        for (std::size_t k = 0; k < s.areas0.size(); ++k) {
          pairs.push_back({{"id", s.masks0[k].id},
                           {"area0", to_json(s.areas0[k])},
                           {"area1", to_json(s.areas1[k])}});
        }
        write_json(dir / "areas.json", {{"pairs", pairs}});
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
