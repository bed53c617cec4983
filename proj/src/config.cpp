#include "a2pm/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include "a2pm/error.hpp"

namespace a2pm {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "T_s",     "T_r",       "TL",         "delta_l",         "delta_h",
      "lambda",  "T_as",      "mu",         "alpha",           "beta",
      "gamma",   "T_Emax",    "T_Er",       "l_star",          "bidirectional",
      "pruning", "mutual_iou", "similarity_side", "T_c",       "S_EM",
      "em_samples", "em_samples_per_component", "link_radius", "coarse_min_correlation",
      "patch_context", "r_a",
      "pm_input_side", "occupancy_ratio", "phi", "ransac_iterations", "global_collection",
      "seed"};
  return keys;
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::validate() const {
  require(preprocess.min_size >= 0, "T_s must be non-negative");
  require(preprocess.max_aspect >= 1.0, "T_r must be at least 1");
  require(graph.delta_low >= 0.0 && graph.delta_low < graph.delta_high && graph.delta_high <= 1.0,
          "need 0 <= delta_l < delta_h <= 1");
  require(mesa.lambda >= 0.0, "lambda must be non-negative");
  require(mesa.similarity_threshold >= 0.0 && mesa.similarity_threshold <= 1.0,
          "T_as must lie in [0, 1]");
  const auto& w = mesa.weights;
  require(w.self >= 0 && w.parent >= 0 && w.children >= 0 && w.neighbor >= 0 &&
              w.self + w.parent + w.children + w.neighbor > 0,
          "energy weights must be non-negative with a positive sum");
  require(mesa.max_energy >= 0.0, "T_Emax must be non-negative");
  require(mesa.energy_range >= 0.0, "T_Er must be non-negative");
  require(mesa.source_level >= 0 && mesa.source_level < graph.levels.level_count(),
          "l_star must name a level");
  require(mesa.mutual_iou > 0.0 && mesa.mutual_iou <= 1.0, "mutual_iou must lie in (0, 1]");
  require(similarity_side > 0 && similarity_side % 8 == 0,
          "similarity_side must be a positive multiple of 8");
  require(dmesa.confidence_threshold > 0.0, "T_c must be positive");
  require(dmesa.em_steps >= 0, "S_EM must be non-negative");
  require(dmesa.samples > 0, "em_samples must be positive");
  require(dmesa.samples_per_component >= 1, "em_samples_per_component must be at least 1");
  require(dmesa.link_radius >= 0, "link_radius must be non-negative");
  require(coarse_min_correlation >= 0.0 && coarse_min_correlation <= 1.0,
          "coarse_min_correlation must lie in [0, 1]");
  require(patch_context >= 1 && patch_context % 2 == 1, "patch_context must be odd and positive");
  pipeline.validate();
}

DmesaParams RunConfig::dmesa_params() const {
  DmesaParams p = dmesa;
  p.seed = seed;
  return p;
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig p = pipeline;
  p.seed = seed;
  return p;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  read(j, "T_s", c.preprocess.min_size);
  read(j, "T_r", c.preprocess.max_aspect);
  if (j.contains("TL")) {
    std::vector<std::int64_t> tl;
    read(j, "TL", tl);
    try {
      c.graph.levels = LevelThresholds(tl);
    } catch (const Error& e) {
      throw ConfigError(std::string("TL: ") + e.what());
    }
  }
  read(j, "delta_l", c.graph.delta_low);
  read(j, "delta_h", c.graph.delta_high);
  read(j, "lambda", c.mesa.lambda);
  read(j, "T_as", c.mesa.similarity_threshold);
  read(j, "mu", c.mesa.weights.self);
  read(j, "alpha", c.mesa.weights.parent);
  read(j, "beta", c.mesa.weights.children);
  read(j, "gamma", c.mesa.weights.neighbor);
  read(j, "T_Emax", c.mesa.max_energy);
  read(j, "T_Er", c.mesa.energy_range);
  read(j, "l_star", c.mesa.source_level);
  read(j, "bidirectional", c.mesa.bidirectional);
  read(j, "pruning", c.mesa.pruning);
  read(j, "mutual_iou", c.mesa.mutual_iou);
  read(j, "similarity_side", c.similarity_side);
  read(j, "T_c", c.dmesa.confidence_threshold);
  read(j, "S_EM", c.dmesa.em_steps);
  read(j, "em_samples", c.dmesa.samples);
  read(j, "em_samples_per_component", c.dmesa.samples_per_component);
  read(j, "link_radius", c.dmesa.link_radius);
  read(j, "coarse_min_correlation", c.coarse_min_correlation);
  read(j, "patch_context", c.patch_context);
  read(j, "r_a", c.pipeline.aspect_ratio);
  read(j, "pm_input_side", c.pipeline.pm_input_side);
  read(j, "occupancy_ratio", c.pipeline.occupancy_ratio);
  if (j.contains("phi") && j.at("phi").is_null()) {
    c.pipeline.phi = std::numeric_limits<double>::infinity();
  } else {
    read(j, "phi", c.pipeline.phi);
  }
  read(j, "ransac_iterations", c.pipeline.ransac_iterations);
  read(j, "global_collection", c.pipeline.global_collection);
  read(j, "seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["T_s"] = c.preprocess.min_size;
  j["T_r"] = c.preprocess.max_aspect;
  j["TL"] = c.graph.levels.values();
  j["delta_l"] = c.graph.delta_low;
  j["delta_h"] = c.graph.delta_high;
  j["lambda"] = c.mesa.lambda;
  j["T_as"] = c.mesa.similarity_threshold;
  j["mu"] = c.mesa.weights.self;
  j["alpha"] = c.mesa.weights.parent;
  j["beta"] = c.mesa.weights.children;
  j["gamma"] = c.mesa.weights.neighbor;
  j["T_Emax"] = c.mesa.max_energy;
  j["T_Er"] = c.mesa.energy_range;
  j["l_star"] = c.mesa.source_level;
  j["bidirectional"] = c.mesa.bidirectional;
  j["pruning"] = c.mesa.pruning;
  j["mutual_iou"] = c.mesa.mutual_iou;
  j["similarity_side"] = c.similarity_side;
  j["T_c"] = c.dmesa.confidence_threshold;
  j["S_EM"] = c.dmesa.em_steps;
  j["em_samples"] = c.dmesa.samples;
  j["em_samples_per_component"] = c.dmesa.samples_per_component;
  j["link_radius"] = c.dmesa.link_radius;
  j["coarse_min_correlation"] = c.coarse_min_correlation;
  j["patch_context"] = c.patch_context;
  j["r_a"] = c.pipeline.aspect_ratio;
  j["pm_input_side"] = c.pipeline.pm_input_side;
  j["occupancy_ratio"] = c.pipeline.occupancy_ratio;
  // JSON has no infinity; a null phi disables the geometric filter.
  if (std::isfinite(c.pipeline.phi)) {
    j["phi"] = c.pipeline.phi;
  } else {
    j["phi"] = nullptr;
  }
  j["ransac_iterations"] = c.pipeline.ransac_iterations;
  j["global_collection"] = c.pipeline.global_collection;
  j["seed"] = c.seed;
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace a2pm
