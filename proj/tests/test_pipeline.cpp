#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "a2pm/epipolar.hpp"
#include "a2pm/error.hpp"
#include "a2pm/eval.hpp"
#include "a2pm/pipeline.hpp"
#include "a2pm/synthetic.hpp"
#include "oracles.hpp"

using namespace a2pm;

namespace {

// Pixel matches of a two-view scene plus uniform outliers; `truth[i]` tells
// whether match i is a true correspondence.
struct EpipolarCase {
  std::vector<PointMatch> matches;
  std::vector<bool> truth;
};

EpipolarCase epipolar_case(std::uint64_t seed, double outlier_share) {
  const PoseScene scene = gen_pose_scene(200, seed);
  EpipolarCase c;
  c.matches = scene.matches;
  c.truth.assign(c.matches.size(), true);
  oracle::Rng rng(seed + 1);
  const int outliers = int(std::lround(outlier_share / (1.0 - outlier_share) * 200.0));
  for (int i = 0; i < outliers; ++i) {
    PointMatch m;
    m.p0 = {rng.real(0, scene.dims.width - 1), rng.real(0, scene.dims.height - 1)};
    m.p1 = {rng.real(0, scene.dims.width - 1), rng.real(0, scene.dims.height - 1)};
    c.matches.push_back(m);
    c.truth.push_back(false);
  }
  return c;
}

// Fundamental matrix of the ground-truth pose, for an independent check of
// the Sampson distance.
Eigen::Matrix3d true_fundamental(const PoseTruth& t) {
  Eigen::Matrix3d tx;
  tx << 0, -t.translation.z(), t.translation.y(), t.translation.z(), 0, -t.translation.x(),
      -t.translation.y(), t.translation.x(), 0;
  return t.k1.inverse().transpose() * tx * t.rotation * t.k0.inverse();
}

class ShiftMatcher final : public PointMatcherProvider {
 public:
  std::vector<PointMatch> match(const cv::Mat& a, const cv::Mat&) const override {
    std::vector<PointMatch> out;
    for (int y = 4; y < a.rows; y += 16) {
      for (int x = 4; x < a.cols; x += 16) out.push_back({{double(x), double(y)}, {double(x), double(y)}, 1.0, 0});
    }
    return out;
  }
};

bool inside_any(const Eigen::Vector2d& p, const std::vector<AreaMatch>& ms) {
  for (const auto& m : ms) {
    const auto& a = m.source;
    if (p.x() >= a.x_min - 0.5 && p.x() < a.x_max - 0.5 && p.y() >= a.y_min - 0.5 && p.y() < a.y_max - 0.5) return true;
  }
  return false;
}

AreaMatch area_match(const Area& a0, const Area& a1) {
  AreaMatch m;
  m.source = a0;
  m.target = a1;
  return m;
}

}  // namespace

TEST_CASE("sampson distance vanishes on true correspondences") {
  const PoseScene scene = gen_pose_scene(50, 3);
  const Eigen::Matrix3d f = true_fundamental(scene.truth);
  for (const auto& m : scene.matches) CHECK(sampson_distance(f, m.p0, m.p1) < 1e-6);
  Points2 p0, p1;
  for (const auto& m : scene.matches) p0.push_back(m.p0), p1.push_back(m.p1);
  const auto est = fundamental_8point(p0, p1);
  REQUIRE(est);
  for (const auto& m : scene.matches) CHECK(sampson_distance(*est, m.p0, m.p1) < 1e-4);
  CHECK(std::abs(est->determinant()) < 1e-9 * est->norm());
}

TEST_CASE("normalizing transform centers and scales") {
  const Points2 pts{{10, 10}, {20, 10}, {10, 30}, {40, 50}};
  const Eigen::Matrix3d t = normalizing_transform(pts);
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  double dist = 0.0;
  for (const auto& p : pts) {
    const Eigen::Vector3d q = t * p.homogeneous();
    c += q.hnormalized();
    dist += q.hnormalized().norm();
  }
  CHECK(c.norm() < 1e-12);
  CHECK(dist / 4.0 == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("geometric filter separates inliers from outliers") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto c = epipolar_case(seed, 0.3);
    const auto kept = geometric_filter(c.matches, 3.5, 1000, seed);
    std::size_t true_kept = 0, false_kept = 0, true_total = 0;
    for (std::size_t i = 0; i < c.matches.size(); ++i) true_total += c.truth[i];
    for (const auto& k : kept) {
      for (std::size_t i = 0; i < c.matches.size(); ++i) {
        if (c.matches[i].p0 == k.p0 && c.matches[i].p1 == k.p1) {
          (c.truth[i] ? true_kept : false_kept) += 1;
          break;
        }
      }
    }
    const std::size_t false_total = c.matches.size() - true_total;
    CHECK(double(true_kept) >= 0.99 * double(true_total));
    CHECK(double(false_total - false_kept) >= 0.95 * double(false_total));
    CHECK(kept.size() == true_kept + false_kept);
  }
}

TEST_CASE("geometric filter pass-through rules") {
  const auto c = epipolar_case(5, 0.3);
  const std::vector<PointMatch> seven(c.matches.begin(), c.matches.begin() + 7);
  FilterReport r;
  CHECK(geometric_filter(seven, 3.5, 1000, 0, &r).size() == 7);
  CHECK_FALSE(r.applied);
  CHECK(r.removed == 0);
  CHECK(geometric_filter(c.matches, std::numeric_limits<double>::infinity(), 1000, 0).size() ==
        c.matches.size());
}

TEST_CASE("geometric filter is deterministic") {
  const auto c = epipolar_case(8, 0.4);
  const auto a = geometric_filter(c.matches, 3.5, 500, 77);
  const auto b = geometric_filter(c.matches, 3.5, 500, 77);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].p0 == b[i].p0);
}

TEST_CASE("crop transform examples") {
  const CropTransform same = CropTransform::for_crop({10, 20, 490, 500}, 480, 480);
  CHECK(same.scale == Eigen::Vector2d(1, 1));
  CHECK(same.to_full({0, 0}) == Eigen::Vector2d(10, 20));

  const cv::Mat img0(480, 640, CV_8UC1, cv::Scalar(0));
  PipelineConfig cfg;
  const auto pair = crop_area_pair(img0, img0, area_match({100, 100, 300, 200}, {100, 100, 300, 200}), cfg);
  CHECK(pair.area_a == Area{100, 50, 300, 250});
  CHECK(pair.a.cols == 480);
  CHECK(pair.a.rows == 480);
  CHECK(pair.ta.scale.x() == doctest::Approx(200.0 / 480.0));
  // Centers map to centers under the pixel-center convention.
  const Eigen::Vector2d center = pair.ta.to_full({239.5, 239.5});
  CHECK(center.x() == doctest::Approx(199.5));
  CHECK(center.y() == doctest::Approx(149.5));
  CHECK_FALSE(pair.letterboxed);
}

TEST_CASE("crop transforms round-trip") {
  oracle::Rng rng(14);
  for (int i = 0; i < 300; ++i) {
    const Area a = rng.rect({640, 480}, 1, 400);
    const auto t = CropTransform::for_crop(a, rng.uniform(16, 800), rng.uniform(16, 800));
    const Eigen::Vector2d p(rng.real(-10, 900), rng.real(-10, 900));
    CHECK((t.to_full(t.to_local(p)) - p).norm() < 1e-9);
    CHECK((t.to_local(t.to_full(p)) - p).norm() < 1e-9);
  }
}

TEST_CASE("areas that cannot become square fall back to a letterboxed image") {
  const cv::Mat img0(480, 640, CV_8UC1, cv::Scalar(50));
  PipelineConfig cfg;
  const auto pair = crop_area_pair(img0, img0, area_match({0, 0, 600, 100}, {0, 0, 100, 100}), cfg);
  CHECK(pair.letterboxed);
  CHECK(pair.area_a == Area::full({640, 480}));
  CHECK(pair.valid_width_a == 480);
  CHECK(pair.valid_height_a == 360);
}

TEST_CASE("dedupe keeps the best match per cell pair") {
  const std::vector<PointMatch> in{{{1.2, 1.2}, {5.5, 5.5}, 0.4, 0},
                                   {{1.7, 1.9}, {5.1, 5.9}, 0.9, 1},
                                   {{1.7, 1.9}, {6.1, 5.9}, 0.3, 1},
                                   {{3.0, 3.0}, {3.0, 3.0}, 0.5, 2},
                                   {{3.2, 3.3}, {3.4, 3.5}, 0.5, 2}};
  const auto out = dedupe_matches(in);
  REQUIRE(out.size() == 3);
  CHECK(out[0].score == 0.9);
  CHECK(out[1].p1.x() == 6.1);
  CHECK(out[2].p0.x() == 3.0);
}

TEST_CASE("covered fraction and global collection") {
  const cv::Mat img(480, 640, CV_8UC1, cv::Scalar(0));
  PipelineConfig cfg;
  ShiftMatcher pm;
  CHECK(covered_fraction({}, {640, 480}) == 0.0);

  const std::vector<AreaMatch> big{area_match({0, 0, 640, 432}, {0, 0, 640, 432})};
  CHECK(covered_fraction(big, {640, 480}) == doctest::Approx(0.9));
  bool triggered = true;
  CHECK(global_collection(img, img, big, {}, pm, cfg, &triggered).empty());
  CHECK_FALSE(triggered);

  const auto all = global_collection(img, img, {}, {}, pm, cfg, &triggered);
  CHECK(triggered);
  CHECK(all.size() == match_full_images(img, img, pm, cfg.pm_input_side).size());
  for (const auto& m : all) CHECK(m.provenance == kGlobalProvenance);

  const std::vector<AreaMatch> part{area_match({0, 0, 320, 288}, {0, 0, 320, 288})};
  CHECK(covered_fraction(part, {640, 480}) == doctest::Approx(0.3));
  const std::vector<PointMatch> existing{{{5, 5}, {5, 5}, 1.0, 0}};
  const auto grown = global_collection(img, img, part, existing, pm, cfg);
  REQUIRE(grown.size() > 1);
  CHECK(grown[0].p0 == existing[0].p0);
  for (std::size_t i = 1; i < grown.size(); ++i) CHECK_FALSE(inside_any(grown[i].p0, part));
}

TEST_CASE("pipeline on an identity scene with true area matches") {
  SceneSpec spec;
  spec.seed = 12;
  const auto scene = gen_synthetic(spec).front();
  std::vector<AreaMatch> ams;
  for (std::size_t i = 0; i < scene.areas0.size(); ++i) ams.push_back(area_match(scene.areas0[i], scene.areas1[i]));
  PipelineConfig cfg;
  const auto r = run_a2pm(scene.image0, scene.image1, ams, BaselinePointMatcher(), cfg);
  REQUIRE(r.matches.size() > 50);
  const auto acc = mma(r.matches, scene.truth(), {3.0});
  CHECK(acc.percent[0] >= 95.0);
  for (const auto& m : r.matches) {
    CHECK(m.p0.x() >= -0.5);
    CHECK(m.p0.x() < 639.5);
    CHECK(m.p1.y() >= -0.5);
    CHECK(m.p1.y() < 479.5);
  }

  const auto again = run_a2pm(scene.image0, scene.image1, ams, BaselinePointMatcher(), cfg);
  REQUIRE(again.matches.size() == r.matches.size());
  for (std::size_t i = 0; i < r.matches.size(); ++i) CHECK(again.matches[i].p0 == r.matches[i].p0);
}

TEST_CASE("pipeline with no area matches") {
  const cv::Mat img = procedural_texture(640, 480, 1.0, 2);
  PipelineConfig cfg;
  cfg.global_collection = false;
  CHECK(run_a2pm(img, img, {}, BaselinePointMatcher(), cfg).matches.empty());
  cfg.global_collection = true;
  const auto r = run_a2pm(img, img, {}, BaselinePointMatcher(), cfg);
  CHECK(r.global_triggered);
  CHECK_FALSE(r.matches.empty());
}

TEST_CASE("pipeline config validation") {
  PipelineConfig cfg;
  cfg.aspect_ratio = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.occupancy_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("provenance labels round-trip") {
  CHECK(provenance_from_label(provenance_label(kGlobalProvenance)) == kGlobalProvenance);
  CHECK(provenance_from_label(provenance_label(7)) == 7);
  CHECK_THROWS_AS(provenance_from_label("somewhere"), DataError);
}
