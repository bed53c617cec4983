#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "a2pm/area_graph.hpp"
#include "a2pm/dmesa.hpp"
#include "a2pm/mesa.hpp"
#include "a2pm/pipeline.hpp"
#include "a2pm/seg_ingest.hpp"

namespace a2pm {

/// Every tunable of a run under one flat key namespace. JSON keys:
///   T_s T_r TL delta_l delta_h lambda T_as mu alpha beta gamma T_Emax T_Er
///   l_star bidirectional pruning mutual_iou similarity_side T_c S_EM
///   em_samples em_samples_per_component link_radius coarse_min_correlation
///   patch_context r_a pm_input_side occupancy_ratio phi ransac_iterations
///   global_collection seed
/// Missing keys keep their defaults; unknown keys are a ConfigError.
struct RunConfig {
  PreprocessParams preprocess;
  GraphParams graph;
  MesaParams mesa;
  int similarity_side = 64;
  DmesaParams dmesa;
  double coarse_min_correlation = 0.2;
  int patch_context = kDefaultPatchContext;
  PipelineConfig pipeline;
  std::uint64_t seed = 0;

  /// Throws ConfigError for out-of-range values.
  void validate() const;

  /// DMESA and pipeline parameters with the run seed applied.
  DmesaParams dmesa_params() const;
  PipelineConfig pipeline_config() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

/// Reads and validates a JSON config file.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace a2pm
