#include "a2pm/dmesa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "a2pm/error.hpp"
#include "a2pm/image.hpp"
#include "a2pm/patches.hpp"

namespace a2pm {

std::vector<PatchMatch> baseline_coarse_match(const cv::Mat& src, const cv::Mat& tgt,
                                              double min_correlation, int context) {
  const ContextSamples a = context_samples(to_gray(src), kPatchSide, context);
  const ContextSamples b = context_samples(to_gray(tgt), kPatchSide, context);
  if (a.count() == 0 || b.count() == 0) {
    throw DataError("coarse matching needs images of at least one 8x8 patch");
  }
  const Eigen::MatrixXd ncc = masked_ncc_matrix(a, b);
  std::vector<Eigen::Index> best_in_b(std::size_t(a.count()));
  std::vector<Eigen::Index> best_in_a(std::size_t(b.count()));
  for (Eigen::Index p = 0; p < ncc.rows(); ++p) ncc.row(p).maxCoeff(&best_in_b[std::size_t(p)]);
  for (Eigen::Index q = 0; q < ncc.cols(); ++q) ncc.col(q).maxCoeff(&best_in_a[std::size_t(q)]);

  std::vector<PatchMatch> out;
  for (Eigen::Index p = 0; p < ncc.rows(); ++p) {
    const Eigen::Index q = best_in_b[std::size_t(p)];
    if (best_in_a[std::size_t(q)] != p) continue;
    const double corr = ncc(p, q);
    if (corr < min_correlation || corr <= 0.0) continue;
    out.push_back({a.center(int(p)), b.center(int(q)), std::min(1.0, corr)});
  }
  return out;
}

std::pair<std::vector<PatchMatch>, std::vector<PatchMatch>> NccPatchMatcher::match_both(
    const cv::Mat& area, const cv::Mat& image) const {
  auto forward = baseline_coarse_match(area, image, min_correlation_, context_);
  std::vector<PatchMatch> reverse;
  reverse.reserve(forward.size());
  for (const auto& m : forward) reverse.push_back({m.tgt_center, m.src_center, m.confidence});
  // Same order as a direct call: row-major over the image patches.
  std::sort(reverse.begin(), reverse.end(), [](const PatchMatch& a, const PatchMatch& b) {
    if (a.src_center.y() != b.src_center.y()) return a.src_center.y() < b.src_center.y();
    return a.src_center.x() < b.src_center.x();
  });
  return {std::move(forward), std::move(reverse)};
}

namespace {

std::vector<PatchMatch> parse_matches(const nlohmann::json& list) {
  std::vector<PatchMatch> out;
  for (const auto& e : list) {
    PatchMatch m;
    m.src_center = {e.at("src").at(0).get<double>(), e.at("src").at(1).get<double>()};
    m.tgt_center = {e.at("tgt").at(0).get<double>(), e.at("tgt").at(1).get<double>()};
    m.confidence = e.at("confidence").get<double>();
    if (!(m.confidence > 0.0 && m.confidence <= 1.0)) {
      throw DataError("patch match confidence must lie in (0, 1]");
    }
    out.push_back(m);
  }
  return out;
}

bool same_point(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - b).cwiseAbs().maxCoeff() < 1e-6;
}

GaussianComponent component_for(const Eigen::Vector2d& center, double confidence) {
  GaussianComponent c;
  c.mean = center;
  c.cov = Eigen::Matrix2d::Identity() * (double(kPatchSide) / confidence);
  return c;
}

GMMParams uniform(std::vector<GaussianComponent> cs) {
  GMMParams g;
  g.components = std::move(cs);
  for (auto& c : g.components) c.weight = 1.0 / double(g.components.size());
  return g;
}

// Reverse components expressed in the forward target frame: a reverse match
// (target point -> source point) with a forward partner on the same pair of
// patches keeps its target-side center. Unpartnered reverse matches drop out.
std::vector<GaussianComponent> transported(const std::vector<PatchMatch>& reverse,
                                           const std::vector<PatchMatch>& forward) {
  std::vector<GaussianComponent> out;
  for (const auto& r : reverse) {
    const bool partnered = std::any_of(forward.begin(), forward.end(), [&](const PatchMatch& f) {
      return same_point(f.src_center, r.tgt_center) && same_point(f.tgt_center, r.src_center);
    });
    if (partnered) out.push_back(component_for(r.src_center, r.confidence));
  }
  return out;
}

// Samples the `observed` distribution and runs EM from `init` (or from the
// observed distribution when nothing could be transported).
std::optional<Area> refine_and_extract(const GMMParams& observed,
                                       std::vector<GaussianComponent> init,
                                       const DmesaParams& params, std::uint64_t seed,
                                       const ImageDims& dims) {
  const GMMParams start = init.empty() ? observed : uniform(std::move(init));
  const int n = std::max<int>(params.samples, params.samples_per_component * int(start.size()));
  const auto xs = sample(observed, n, seed);
  const GMMParams refined = em_refine(xs, start, params.em_steps);
  return extract_dominant_area(confidence_grid(refined, dims), params.confidence_threshold,
                               params.link_radius);
}

}  // namespace

InjectedPatchMatcher load_patch_matches(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open patch match file " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return InjectedPatchMatcher(parse_matches(j.at("forward")),
                                parse_matches(j.value("reverse", nlohmann::json::array())));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed patch match file " + path.string() + ": " + e.what());
  }
}

std::optional<GMMParams> build_gmm(const std::vector<PatchMatch>& matches) {
  if (matches.empty()) return std::nullopt;
  std::vector<GaussianComponent> cs;
  for (const auto& m : matches) {
    if (!(m.confidence > 0.0)) throw DataError("patch match confidence must be positive");
    cs.push_back(component_for(m.tgt_center, m.confidence));
  }
  return uniform(std::move(cs));
}

std::optional<DmesaResult> match_area_dmesa(const cv::Mat& src_area_img, const cv::Mat& tgt_img,
                                            const PatchMatchProvider& provider,
                                            const DmesaParams& params, std::string* why) {
  auto fail = [&](const char* reason) -> std::optional<DmesaResult> {
    if (why) *why = reason;
    return std::nullopt;
  };
  if (src_area_img.empty() || tgt_img.empty()) throw DataError("empty image");
  if (params.em_steps < 0) throw ConfigError("S_EM must be non-negative");
  if (!(params.confidence_threshold > 0.0)) throw ConfigError("T_c must be positive");

  const auto [forward, reverse] = provider.match_both(src_area_img, tgt_img);
  if (forward.empty()) return fail("no forward patch matches");
  if (reverse.empty()) return fail("no reverse patch matches");

  const GMMParams fwd = *build_gmm(forward);
  const GMMParams rev = *build_gmm(reverse);

  const auto target = refine_and_extract(fwd, transported(reverse, forward), params, params.seed,
                                         dims_of(tgt_img));
  if (!target) return fail("empty target extraction");
  const auto source =
      refine_and_extract(rev, transported(forward, reverse), params,
                         params.seed ^ 0x5bd1e995ULL, dims_of(src_area_img));
  if (!source) return fail("empty source extraction");

  return DmesaResult{*target, *source, forward.size(), reverse.size()};
}

MatchReport match_areas_dmesa(const AreaGraph& g0, const cv::Mat& img0, const cv::Mat& img1,
                              const PatchMatchProvider& provider, const DmesaParams& params,
                              int source_level) {
  MatchReport report;
  const cv::Mat gray0 = to_gray(img0);
  const cv::Mat gray1 = to_gray(img1);
  for (int src : g0.source_nodes(source_level)) {
    const Area area = g0.node(src).area;
    DmesaParams p = params;
    p.seed = params.seed + std::uint64_t(src);
    std::string why;
    std::optional<DmesaResult> r;
    try {
      r = match_area_dmesa(crop(gray0, area), gray1, provider, p, &why);
    } catch (const DataError& e) {
      why = e.what();
    }
    if (!r) {
      report.failures.push_back({src, why});
      continue;
    }
    AreaMatch m;
    m.source = {area.x_min + r->source.x_min, area.y_min + r->source.y_min,
                area.x_min + r->source.x_max, area.y_min + r->source.y_max};
    m.target = r->target;
    m.energy = 0.0;
    m.direction = MatchDirection::mutual;
    m.source_node = src;
    report.matches.push_back(m);
  }
  return report;
}

}  // namespace a2pm
