#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "a2pm/error.hpp"
#include "a2pm/eval.hpp"
#include "a2pm/seg_ingest.hpp"
#include "a2pm/synthetic.hpp"
#include "oracles.hpp"

using namespace a2pm;

namespace {

const ImageDims kVga{640, 480};

Eigen::Matrix3d shift(double dx, double dy) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  h(0, 2) = dx;
  h(1, 2) = dy;
  return h;
}

AreaMatch am(const Area& s, const Area& t) {
  AreaMatch m;
  m.source = s;
  m.target = t;
  return m;
}

GroundTruth homography_truth(const Eigen::Matrix3d& h) {
  GroundTruth gt;
  gt.dims0 = kVga;
  gt.dims1 = kVga;
  gt.homography = h;
  return gt;
}

PointMatch pm(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y1}, 1.0, 0}; }

// Reprojected box by warping the four block corners and rounding outward to
// whole pixels, then clipping to the frame.
std::optional<Area> box_oracle(const Eigen::Matrix3d& h, const Area& a, const ImageDims& d) {
  std::vector<double> xs, ys;
  for (double x : {a.x_min - 0.5, a.x_max - 0.5}) {
    for (double y : {a.y_min - 0.5, a.y_max - 0.5}) {
      const Eigen::Vector3d q = h * Eigen::Vector3d(x, y, 1.0);
      xs.push_back(q.x() / q.z() + 0.5);
      ys.push_back(q.y() / q.z() + 0.5);
    }
  }
  Area r{int(std::lround(*std::min_element(xs.begin(), xs.end()))),
         int(std::lround(*std::min_element(ys.begin(), ys.end()))),
         int(std::lround(*std::max_element(xs.begin(), xs.end()))),
         int(std::lround(*std::max_element(ys.begin(), ys.end())))};
  r = {std::max(r.x_min, 0), std::max(r.y_min, 0), std::min(r.x_max, d.width), std::min(r.y_max, d.height)};
  if (r.x_min >= r.x_max || r.y_min >= r.y_max) return std::nullopt;
  return r;
}

// Area under the recall curve by dense sampling: linear between consecutive
// sorted errors, flat after the last error below `t`.
double auc_oracle(std::vector<double> errors, double t) {
  std::sort(errors.begin(), errors.end());
  const double n = double(errors.size());
  auto recall = [&](double x) {
    double px = 0.0, py = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (errors[i] >= t) return py;
      if (errors[i] > x) {
        const double span = errors[i] - px;
        const double ny = double(i + 1) / n;
        return span > 0 ? py + (ny - py) * (x - px) / span : py;
      }
      px = errors[i];
      py = double(i + 1) / n;
    }
    return py;
  };
  const int steps = 20000;
  double area = 0.0;
  for (int i = 0; i < steps; ++i) area += recall((i + 0.5) * t / steps);
  return 100.0 * area / steps;
}

}  // namespace

TEST_CASE("aor examples") {
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  CHECK(aor(am({10, 10, 110, 90}, {10, 10, 110, 90}), id, kVga) == 1.0);
  CHECK(aor(am({10, 10, 110, 90}, {300, 300, 400, 400}), id, kVga) == 0.0);
  CHECK(aor(am({100, 100, 200, 200}, {110, 100, 210, 200}), shift(20, 0), kVga) ==
        doctest::Approx(90.0 / 110.0));
  CHECK(aor(am({100, 100, 200, 200}, {100, 100, 200, 200}), shift(1000, 0), kVga) == 0.0);
}

TEST_CASE("reprojected boxes agree with the corner oracle") {
  oracle::Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    Eigen::Matrix3d h;
    h << rng.real(0.7, 1.4), rng.real(-0.2, 0.2), rng.real(-60, 60), rng.real(-0.2, 0.2),
        rng.real(0.7, 1.4), rng.real(-60, 60), rng.real(-3e-4, 3e-4), rng.real(-3e-4, 3e-4), 1.0;
    const Area a = rng.rect(kVga, 4, 300);
    const auto got = reproject_area(h, a, kVga);
    const auto want = box_oracle(h, a, kVga);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    CHECK(*got == *want);
    const Area t = rng.rect(kVga, 4, 300);
    CHECK(aor(am(a, t), h, kVga) == doctest::Approx(oracle::iou(*want, t)));
  }
}

TEST_CASE("aor is invariant under a common translation") {
  oracle::Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    const double dx = rng.uniform(-30, 30), dy = rng.uniform(-30, 30);
    const int sx = rng.uniform(-80, 80), sy = rng.uniform(-80, 80);
    const Area a{rng.uniform(150, 250), rng.uniform(150, 200), 0, 0};
    const Area src{a.x_min, a.y_min, a.x_min + rng.uniform(10, 120), a.y_min + rng.uniform(10, 80)};
    const Area tgt{src.x_min + rng.uniform(-20, 40), src.y_min + rng.uniform(-20, 40),
                   src.x_max + rng.uniform(-20, 40), src.y_max + rng.uniform(-20, 40)};
    const Eigen::Matrix3d h = shift(dx, dy);
    const Eigen::Matrix3d moved = shift(sx, sy) * h * shift(-sx, -sy);
    const AreaMatch m2 = am({src.x_min + sx, src.y_min + sy, src.x_max + sx, src.y_max + sy},
                            {tgt.x_min + sx, tgt.y_min + sy, tgt.x_max + sx, tgt.y_max + sy});
    CHECK(aor(am(src, tgt), h, kVga) == doctest::Approx(aor(m2, moved, kVga)));
  }
}

TEST_CASE("amp examples") {
  CHECK(amp({1.0, 1.0, 1.0}).value == 100.0);
  CHECK(amp({0.7, 0.5}).value == 50.0);
  CHECK(amp({0.6}).value == 0.0);
  const Percentage none = amp({});
  CHECK(none.value == 0.0);
  CHECK(none.empty);
  CHECK_FALSE(amp({0.9}).empty);
}

TEST_CASE("acr examples") {
  CHECK(acr({am(Area::full(kVga), Area::full(kVga))}, kVga) == doctest::Approx(100.0));
  CHECK(acr({}, kVga) == 0.0);
  CHECK(acr({am({0, 0, 100, 100}, {0, 0, 1, 1}), am({300, 300, 400, 400}, {0, 0, 1, 1})}, kVga) ==
        doctest::Approx(100.0 * 20000.0 / 307200.0));
}

TEST_CASE("acr matches a pixel union oracle and ignores order") {
  oracle::Rng rng(33);
  const ImageDims d{90, 70};
  for (int i = 0; i < 100; ++i) {
    std::vector<AreaMatch> ms;
    oracle::Pixels all;
    const int n = rng.uniform(0, 6);
    for (int k = 0; k < n; ++k) {
      const Area a = rng.rect(d, 1, 60);
      ms.push_back(am(a, a));
      const auto ps = oracle::pixels(a);
      all.insert(ps.begin(), ps.end());
    }
    const double want = 100.0 * double(all.size()) / (double(d.width) * d.height);
    CHECK(acr(ms, d) == doctest::Approx(want));
    std::reverse(ms.begin(), ms.end());
    CHECK(acr(ms, d) == doctest::Approx(want));
  }
}

TEST_CASE("mma examples") {
  const GroundTruth id = homography_truth(Eigen::Matrix3d::Identity());
  const auto exact = mma({pm(10, 10, 10, 10), pm(50, 60, 50, 60)}, id);
  CHECK(exact.percent == std::vector<double>{100.0, 100.0, 100.0});

  const auto single = mma({pm(10, 10, 14, 10)}, id);
  CHECK(single.percent == std::vector<double>{0.0, 100.0, 100.0});

  const auto mixed = mma({pm(10, 10, 11, 10), pm(20, 20, 20, 24), pm(30, 30, 40, 30)}, id, {1, 4, 10});
  CHECK(mixed.percent[0] == doctest::Approx(100.0 / 3));
  CHECK(mixed.percent[1] == doctest::Approx(200.0 / 3));
  CHECK(mixed.percent[2] == 100.0);
  const auto mixed_default = mma({pm(10, 10, 11, 10), pm(20, 20, 20, 24), pm(30, 30, 40, 30)}, id);
  CHECK(mixed_default.percent[0] == doctest::Approx(100.0 / 3));
  CHECK(mixed_default.percent[1] == doctest::Approx(200.0 / 3));
  CHECK(mixed_default.percent[2] == doctest::Approx(200.0 / 3));
}

TEST_CASE("mma excludes matches without a defined reprojection") {
  const GroundTruth gt = homography_truth(shift(100, 0));
  const auto r = mma({pm(10, 10, 110, 10), pm(600, 10, 700, 10), pm(20, 20, 0, 0)}, gt);
  CHECK(r.evaluated == 2);
  CHECK(r.undefined == 1);
  CHECK(r.percent[0] == 50.0);

  GroundTruth pose_only;
  pose_only.dims0 = kVga;
  pose_only.dims1 = kVga;
  pose_only.pose = PoseTruth{};
  const auto p = mma({pm(10, 10, 10, 10)}, pose_only);
  CHECK(p.evaluated == 0);
  CHECK(p.undefined == 1);
  CHECK(p.percent[0] == 0.0);
}

TEST_CASE("mma through depth and pose") {
  const PoseScene scene = gen_pose_scene(1, 4);
  GroundTruth gt;
  gt.dims0 = scene.dims;
  gt.dims1 = scene.dims;
  PoseTruth pose = scene.truth;
  pose.depth0 = cv::Mat(scene.dims.height, scene.dims.width, CV_64FC1, cv::Scalar(5.0));
  gt.pose = pose;
  const Eigen::Vector2d p0(320, 240);
  const Eigen::Vector3d x1 = pose.rotation * (pose.k0.inverse() * p0.homogeneous() * 5.0) + pose.translation;
  const Eigen::Vector2d p1 = (pose.k1 * x1).hnormalized();
  const auto r = mma({{p0, p1, 1.0, 0}, {p0, p1 + Eigen::Vector2d(4, 0), 1.0, 0}}, gt);
  CHECK(r.evaluated == 2);
  CHECK(r.percent == std::vector<double>{50.0, 100.0, 100.0});
}

TEST_CASE("ground truth validation") {
  GroundTruth gt = homography_truth(Eigen::Matrix3d::Zero());
  CHECK_THROWS_AS(gt.validate(), DataError);
  gt.homography = Eigen::Matrix3d::Identity();
  CHECK_NOTHROW(gt.validate());
  gt.homography.reset();
  CHECK_THROWS_AS(gt.validate(), DataError);
  PoseTruth p;
  p.rotation = Eigen::Matrix3d::Identity() * 2.0;
  gt.pose = p;
  CHECK_THROWS_AS(gt.validate(), DataError);
  gt.pose->rotation = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitY()).toRotationMatrix();
  CHECK_NOTHROW(gt.validate());
}

TEST_CASE("pose from exact correspondences") {
  std::vector<double> errors;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const PoseScene scene = gen_pose_scene(200, seed);
    REQUIRE(scene.matches.size() == 200);
    const double e = pair_pose_error(scene.matches, scene.truth);
    CHECK(e < 0.5);
    errors.push_back(e);
  }
  CHECK(pose_auc(errors, {5.0})[0] > 90.0);
}

TEST_CASE("pose error of degenerate inputs") {
  const PoseScene scene = gen_pose_scene(200, 6);
  CHECK(pair_pose_error({}, scene.truth) == kFailedPoseError);
  const std::vector<PointMatch> four(scene.matches.begin(), scene.matches.begin() + 4);
  CHECK(pair_pose_error(four, scene.truth) == kFailedPoseError);
  CHECK(pose_auc({kFailedPoseError}) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(pose_auc({0.0}) == std::vector<double>{100.0, 100.0, 100.0});
  CHECK(pose_auc({}) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(pose_auc({1.0}, {0.0}), ConfigError);
}

TEST_CASE("pose error of a known estimate") {
  PoseTruth gt;
  gt.rotation = Eigen::Matrix3d::Identity();
  gt.translation = Eigen::Vector3d::UnitX();
  RelativePose est;
  est.rotation = Eigen::AngleAxisd(2.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  est.translation = Eigen::Vector3d(std::cos(5.0 * M_PI / 180.0), std::sin(5.0 * M_PI / 180.0), 0.0);
  CHECK(pose_error(est, gt) == doctest::Approx(5.0));
  est.translation = Eigen::Vector3d::UnitX();
  CHECK(pose_error(est, gt) == doctest::Approx(2.0));
}

TEST_CASE("pose auc agrees with dense integration and is monotone") {
  CHECK(pose_auc({2.0, 4.0}, {5.0})[0] == doctest::Approx(auc_oracle({2.0, 4.0}, 5.0)).epsilon(1e-6));
  oracle::Rng rng(34);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> errors;
    const int n = rng.uniform(1, 12);
    for (int k = 0; k < n; ++k) errors.push_back(rng.coin(0.1) ? 180.0 : rng.real(0.0, 25.0));
    const auto auc = pose_auc(errors);
    for (std::size_t k = 0; k < 3; ++k) {
      const double t = std::vector<double>{5.0, 10.0, 20.0}[k];
      CHECK(auc[k] == doctest::Approx(auc_oracle(errors, t)).epsilon(1e-3));
    }
    CHECK(auc[0] <= auc[1] + 1e-12);
    CHECK(auc[1] <= auc[2] + 1e-12);
    std::reverse(errors.begin(), errors.end());
    CHECK(pose_auc(errors) == auc);
  }
}

TEST_CASE("synthetic scenes") {
  SceneSpec spec;
  spec.seed = 40;
  spec.n_scenes = 2;
  const auto scenes = gen_synthetic(spec);
  REQUIRE(scenes.size() == 2);
  for (const auto& s : scenes) {
    CHECK(cv::norm(s.image0, s.image1, cv::NORM_INF) == 0.0);
    CHECK(s.homography == Eigen::Matrix3d::Identity());
    CHECK(s.areas0 == s.areas1);
  }
  CHECK(cv::norm(scenes[0].image0, scenes[1].image0, cv::NORM_INF) > 0.0);

  const auto again = gen_synthetic(spec);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(cv::norm(scenes[i].image0, again[i].image0, cv::NORM_INF) == 0.0);
    CHECK(scenes[i].areas0 == again[i].areas0);
  }
}

TEST_CASE("translation scenes shift their segments exactly") {
  SceneSpec spec;
  spec.family = WarpFamily::translation;
  spec.n_scenes = 5;
  spec.seed = 41;
  for (const auto& s : gen_synthetic(spec)) {
    const double dx = s.homography(0, 2), dy = s.homography(1, 2);
    CHECK(dx == std::round(dx));
    CHECK(dy == std::round(dy));
    REQUIRE(s.areas0.size() == s.areas1.size());
    REQUIRE(s.masks0.size() == s.areas0.size());
    for (std::size_t i = 0; i < s.areas0.size(); ++i) {
      const Area& a = s.areas0[i];
      const Area want{a.x_min + int(dx), a.y_min + int(dy), a.x_max + int(dx), a.y_max + int(dy)};
      CHECK(s.areas1[i] == want);
      CHECK(mask_to_area(s.masks1[i]) == want);
      CHECK(mask_to_area(s.masks0[i]) == a);
    }
  }
}

TEST_CASE("synthetic masks satisfy ingest invariants") {
  for (WarpFamily f : {WarpFamily::identity, WarpFamily::translation, WarpFamily::similarity,
                       WarpFamily::homography}) {
    SceneSpec spec;
    spec.family = f;
    spec.n_scenes = 3;
    spec.seed = 42;
    spec.scale = f == WarpFamily::homography ? 2.0 : 1.0;
    for (const auto& s : gen_synthetic(spec)) {
      CHECK(s.truth().homography.has_value());
      CHECK_NOTHROW(s.truth().validate());
      for (const auto* masks : {&s.masks0, &s.masks1}) {
        for (const auto& m : *masks) {
          CHECK(m.bitmap.type() == CV_8UC1);
          CHECK(m.bitmap.cols == 640);
          CHECK(m.bitmap.rows == 480);
          CHECK(cv::countNonZero(m.bitmap) > 0);
        }
      }
      for (const auto& a : s.areas1) CHECK(Area::full(kVga).contains(a));
    }
  }
  CHECK(warp_family_from_string(to_string(WarpFamily::similarity)) == WarpFamily::similarity);
  CHECK_THROWS(warp_family_from_string("shear"));
}
