#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>

#include "a2pm/dmesa.hpp"
#include "a2pm/error.hpp"
#include "a2pm/gmm.hpp"
#include "a2pm/image.hpp"
#include "a2pm/synthetic.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace a2pm;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kTc = std::exp(-1.0) / (2.0 * kPi);

GaussianComponent iso(double x, double y, double var, double w = 1.0) {
  GaussianComponent c;
  c.mean = {x, y};
  c.cov = Eigen::Matrix2d::Identity() * var;
  c.weight = w;
  return c;
}

// Direct evaluation of the mixture, independent of the library.
double mixture_at(const GMMParams& g, double x, double y) {
  double p = 0.0;
  for (const auto& c : g.components) {
    const Eigen::Vector2d d(x - c.mean.x(), y - c.mean.y());
    const double q = d.dot(c.cov.inverse() * d);
    p += c.weight * std::exp(-0.5 * q) / (2.0 * kPi * std::sqrt(c.cov.determinant()));
  }
  return p;
}

std::optional<Area> grid_oracle(const GMMParams& g, double t, const ImageDims& d) {
  oracle::Pixels ps;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      if (mixture_at(g, x, y) >= t) ps.insert({x, y});
    }
  }
  if (ps.empty()) return std::nullopt;
  return oracle::bbox(ps);
}

std::vector<Eigen::Vector2d> gaussian_cloud(int n, Eigen::Vector2d mean, double sigma,
                                            std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<Eigen::Vector2d> xs;
  for (int i = 0; i < n; ++i) xs.push_back(mean + Eigen::Vector2d(nd(gen), nd(gen)));
  return xs;
}

}  // namespace

TEST_CASE("build_gmm examples") {
  const auto one = build_gmm({{{5, 5}, {100, 100}, 1.0}});
  REQUIRE(one);
  CHECK(one->size() == 1);
  CHECK(one->components[0].mean == Eigen::Vector2d(100, 100));
  CHECK(one->components[0].cov == Eigen::Matrix2d::Identity() * 8.0);
  CHECK(one->components[0].weight == 1.0);

  const auto half = build_gmm({{{5, 5}, {10, 10}, 0.5}});
  CHECK(half->components[0].cov == Eigen::Matrix2d::Identity() * 16.0);

  std::vector<PatchMatch> four(4, PatchMatch{{0, 0}, {1, 1}, 0.9});
  for (const auto& c : build_gmm(four)->components) CHECK(c.weight == 0.25);

  CHECK_FALSE(build_gmm({}).has_value());
  CHECK_THROWS_AS(build_gmm({{{0, 0}, {1, 1}, 0.0}}), DataError);
}

TEST_CASE("density examples") {
  GMMParams g;
  g.components = {iso(100, 100, 8)};
  CHECK(density(g, {100, 100}) == doctest::Approx(1.0 / (2.0 * kPi * 8.0)).epsilon(1e-12));
  CHECK(density(g, {100, 100}) == doctest::Approx(0.019894).epsilon(1e-4));
  CHECK(density(g, {100 + 50 * std::sqrt(8.0), 100}) < 1e-12);

  double total = 0.0;
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) total += density(g, {double(x), double(y)});
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("density agrees with direct evaluation") {
  oracle::Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    GMMParams g;
    const int k = rng.uniform(1, 4);
    for (int i = 0; i < k; ++i) {
      auto c = iso(rng.real(0, 100), rng.real(0, 100), rng.real(1, 30), 1.0 / k);
      c.cov(0, 1) = c.cov(1, 0) = rng.real(-0.5, 0.5);
      g.components.push_back(c);
    }
    const double x = rng.real(0, 100), y = rng.real(0, 100);
    const double p = density(g, {x, y});
    CHECK(p >= 0.0);
    CHECK(p == doctest::Approx(mixture_at(g, x, y)).epsilon(1e-10));
  }
}

TEST_CASE("gmm validation") {
  GMMParams g;
  CHECK_THROWS_AS(validate(g), DataError);
  g.components = {iso(0, 0, 1, 0.5)};
  CHECK_THROWS_AS(validate(g), DataError);
  g.components = {iso(0, 0, -1, 1.0)};
  CHECK_THROWS_AS(validate(g), DataError);
  g.components = {iso(0, 0, 1, 0.5), iso(1, 1, 1, 0.5)};
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("extract_area examples") {
  const ImageDims d{200, 200};
  GMMParams single;
  single.components = {iso(100, 100, 8)};
  CHECK_FALSE(extract_area(single, kTc, d).has_value());

  // Closed-form level-set radius r^2 = 2 s ln(peak / t) for isotropic variance s.
  for (double t : {1e-4, 1e-3, 5e-3}) {
    const double peak = 1.0 / (2.0 * kPi * 8.0);
    const int r = int(std::floor(std::sqrt(16.0 * std::log(peak / t))));
    const auto box = extract_area(single, t, d);
    REQUIRE(box);
    CHECK(*box == Area{100 - r, 100 - r, 101 + r, 101 + r});
  }

  // Each component peaks below T_c, the overlapping sum does not.
  GMMParams cluster;
  cluster.components = {iso(100, 100, 1, 0.25), iso(101, 100, 1, 0.25), iso(100, 101, 1, 0.25),
                        iso(101, 101, 1, 0.25)};
  for (const auto& c : cluster.components) CHECK(c.weight / (2.0 * kPi) < kTc);
  const auto box = extract_area(cluster, kTc, d);
  REQUIRE(box);
  CHECK(box == grid_oracle(cluster, kTc, d));
  CHECK(box->contains(Area{100, 100, 102, 102}));
}

TEST_CASE("extract_area matches the grid oracle and holds the argmax") {
  oracle::Rng rng(21);
  const ImageDims d{120, 90};
  for (int t = 0; t < 30; ++t) {
    GMMParams g;
    const int k = rng.uniform(1, 5);
    for (int i = 0; i < k; ++i) g.components.push_back(iso(rng.real(0, 120), rng.real(0, 90), rng.real(0.5, 20), 1.0 / k));
    const double thr = rng.real(1e-4, 0.05);
    const auto got = extract_area(g, thr, d);
    CHECK(got == grid_oracle(g, thr, d));
    if (got) {
      double best = -1.0;
      int bx = 0, by = 0;
      for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
          const double p = mixture_at(g, x, y);
          if (p > best) best = p, bx = x, by = y;
        }
      }
      CHECK(got->contains(Area{bx, by, bx + 1, by + 1}));
    }
  }
}

TEST_CASE("em_refine examples") {
  const auto xs = gaussian_cloud(1024, {50, 50}, 3.0, 7);
  GMMParams init;
  init.components = {iso(55, 50, 9)};
  CHECK(em_refine(xs, init, 0).components[0].mean == init.components[0].mean);

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& x : xs) mean += x;
  mean /= double(xs.size());
  const auto out = em_refine(xs, init, 3);
  CHECK((out.components[0].mean - mean).norm() < 0.5);
}

TEST_CASE("em_refine invariants") {
  oracle::Rng rng(40);
  for (int t = 0; t < 40; ++t) {
    auto xs = gaussian_cloud(300, {rng.real(20, 80), rng.real(20, 80)}, rng.real(1, 6), 100 + t);
    const auto more = gaussian_cloud(200, {rng.real(20, 80), rng.real(20, 80)}, rng.real(1, 6), 500 + t);
    xs.insert(xs.end(), more.begin(), more.end());
    GMMParams init;
    const int k = rng.uniform(1, 4);
    for (int i = 0; i < k; ++i) init.components.push_back(iso(rng.real(0, 100), rng.real(0, 100), 8, 1.0 / k));
    EmStepLog log;
    const auto out = em_refine(xs, init, 5, &log);
    REQUIRE(log.log_likelihood.size() >= 2);
    for (std::size_t i = 1; i < log.log_likelihood.size(); ++i) {
      CHECK(log.log_likelihood[i] >= log.log_likelihood[i - 1] - 1e-9);
    }
    double sum = 0.0;
    for (const auto& c : out.components) {
      sum += c.weight;
      CHECK(c.cov(0, 1) == doctest::Approx(c.cov(1, 0)));
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c.cov);
      CHECK(es.eigenvalues().minCoeff() >= kCovarianceFloor - 1e-12);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_NOTHROW(validate(out));
  }
}

TEST_CASE("sampling and EM are deterministic for a fixed seed") {
  GMMParams g;
  g.components = {iso(10, 10, 4, 0.3), iso(40, 20, 9, 0.7)};
  const auto a = sample(g, 512, 99);
  const auto b = sample(g, 512, 99);
  REQUIRE(a.size() == 512);
  CHECK(a == b);
  CHECK(a != sample(g, 512, 100));
  const auto ra = em_refine(a, g, 3);
  const auto rb = em_refine(b, g, 3);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra.components[i].mean == rb.components[i].mean);
    CHECK(ra.components[i].cov == rb.components[i].cov);
    CHECK(ra.components[i].weight == rb.components[i].weight);
  }
}

TEST_CASE("coarse matcher examples") {
  const cv::Mat tex = procedural_texture(80, 64, 8.0, 11);
  const cv::Mat src = tex(cv::Rect(8, 0, 64, 64)).clone();

  const auto self = baseline_coarse_match(src, src);
  CHECK(self.size() == 64);
  for (const auto& m : self) {
    CHECK(m.src_center == m.tgt_center);
    CHECK(m.confidence == doctest::Approx(1.0).epsilon(1e-9));
  }

  const cv::Mat tgt = tex(cv::Rect(0, 0, 64, 64)).clone();
  const auto shifted = baseline_coarse_match(src, tgt);
  int offset = 0;
  for (const auto& m : shifted) offset += (m.tgt_center - m.src_center == Eigen::Vector2d(8, 0));
  CHECK(offset >= 48);

  std::mt19937 gen(4);
  cv::Mat n0(64, 64, CV_8UC1), n1(64, 64, CV_8UC1);
  for (auto* m : {&n0, &n1}) {
    for (auto it = m->begin<std::uint8_t>(); it != m->end<std::uint8_t>(); ++it) *it = std::uint8_t(gen() & 0xff);
  }
  // Mutual nearest neighbours of 64-sample noise often clear 0.2; none is confident.
  for (const auto& m : baseline_coarse_match(n0, n1, 0.2)) CHECK(m.confidence < 0.6);
  CHECK_THROWS_AS(baseline_coarse_match(cv::Mat(7, 64, CV_8UC1), src), DataError);
}

TEST_CASE("dmesa on an identity pair recovers the source area") {
  SceneSpec spec;
  spec.seed = 3;
  const auto scene = gen_synthetic(spec).front();
  const Area src{160, 120, 480, 360};
  const auto r = match_area_dmesa(crop(scene.image0, src), scene.image1, NccPatchMatcher(),
                                  DmesaParams{});
  REQUIRE(r);
  CHECK(iou(r->target, src) >= 0.9);
  CHECK(iou(r->source, Area{0, 0, src.width(), src.height()}) >= 0.9);
}

TEST_CASE("dmesa on a translation pair shifts the box") {
  SceneSpec spec;
  spec.family = WarpFamily::translation;
  spec.seed = 5;
  const auto scene = gen_synthetic(spec).front();
  const int dx = int(std::lround(scene.homography(0, 2)));
  const int dy = int(std::lround(scene.homography(1, 2)));
  const Area src{200, 150, 360, 310};
  const auto r = match_area_dmesa(crop(scene.image0, src), scene.image1, NccPatchMatcher(),
                                  DmesaParams{});
  REQUIRE(r);
  const auto& t = r->target;
  CHECK(std::abs(t.x_min + t.x_max - (src.x_min + src.x_max + 2 * dx)) <= 16);
  CHECK(std::abs(t.y_min + t.y_max - (src.y_min + src.y_max + 2 * dy)) <= 16);
  CHECK(std::abs(t.x_min - (src.x_min + dx)) <= 16);
  CHECK(std::abs(t.y_min - (src.y_min + dy)) <= 16);
  CHECK(std::abs(t.x_max - (src.x_max + dx)) <= 16);
  CHECK(std::abs(t.y_max - (src.y_max + dy)) <= 16);
}

TEST_CASE("dmesa on a structureless pair reports no match") {
  const cv::Mat flat0(160, 160, CV_8UC1, cv::Scalar(90));
  const cv::Mat flat1(480, 640, CV_8UC1, cv::Scalar(90));
  std::string why;
  CHECK_FALSE(match_area_dmesa(flat0, flat1, NccPatchMatcher(), DmesaParams{}, &why));
  CHECK_FALSE(why.empty());
}

TEST_CASE("dmesa is deterministic") {
  SceneSpec spec;
  spec.family = WarpFamily::translation;
  spec.seed = 9;
  const auto scene = gen_synthetic(spec).front();
  const cv::Mat src = crop(scene.image0, {100, 100, 260, 260});
  DmesaParams p;
  p.seed = 17;
  const auto a = match_area_dmesa(src, scene.image1, NccPatchMatcher(), p);
  const auto b = match_area_dmesa(src, scene.image1, NccPatchMatcher(), p);
  REQUIRE(a.has_value() == b.has_value());
  if (a) {
    CHECK(a->target == b->target);
    CHECK(a->source == b->source);
  }
}

TEST_CASE("injected patch matches") {
  TempDir dir("pm");
  std::ofstream(dir / "m.json") << R"({"forward": [{"src": [4, 4], "tgt": [100, 100], "confidence": 1.0}],
                                      "reverse": [{"src": [100, 100], "tgt": [4, 4], "confidence": 1.0}]})";
  const auto m = load_patch_matches(dir / "m.json");
  const cv::Mat dummy(8, 8, CV_8UC1, cv::Scalar(0));
  const auto f = m.match(dummy, dummy, CoarseDirection::forward);
  REQUIRE(f.size() == 1);
  CHECK(f[0].tgt_center == Eigen::Vector2d(100, 100));
  CHECK(m.match(dummy, dummy, CoarseDirection::reverse)[0].tgt_center == Eigen::Vector2d(4, 4));

  std::ofstream(dir / "bad.json") << R"({"forward": [{"src": [4], "tgt": [1, 1], "confidence": 1}]})";
  CHECK_THROWS_AS(load_patch_matches(dir / "bad.json"), DataError);
  CHECK_THROWS_AS(load_patch_matches(dir / "missing.json"), DataError);
}

TEST_CASE("confidence map scores each match as a standard Gaussian") {
  const ImageDims d{200, 200};
  const auto one = build_gmm({{{4, 4}, {100, 100}, 1.0}});
  const cv::Mat c = confidence_grid(*one, d);
  CHECK(c.at<double>(100, 100) == doctest::Approx(1.0 / (2.0 * kPi)));
  // Mahalanobis radius sqrt(2) under covariance 8 is a 4 px disc.
  CHECK(c.at<double>(100, 104) == doctest::Approx(kTc));
  CHECK(extract_dominant_area(c, kTc * (1.0 - 1e-9)) == Area{96, 96, 105, 105});

  GMMParams two;
  two.components = {iso(50, 50, 8, 0.5), iso(150, 150, 8, 0.5)};
  const cv::Mat c2 = confidence_grid(two, d);
  CHECK(c2.at<double>(50, 50) == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-9));

  // Two separated blobs: the heavier one wins.
  GMMParams uneven;
  uneven.components = {iso(50, 50, 8, 0.3), iso(150, 150, 30, 0.7)};
  const auto box = extract_dominant_area(confidence_grid(uneven, d), kTc);
  REQUIRE(box);
  CHECK(box->contains(Area{150, 150, 151, 151}));
  CHECK_FALSE(box->contains(Area{50, 50, 51, 51}));
  CHECK_FALSE(extract_dominant_area(cv::Mat::zeros(10, 10, CV_64FC1), kTc).has_value());
}
