#include "a2pm/epipolar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "a2pm/error.hpp"

namespace a2pm {

namespace {

Eigen::Vector3d homog(const Eigen::Vector2d& p) { return {p.x(), p.y(), 1.0}; }

// Least-squares solution of x1^T M x0 = 0 in the normalized frame, returned
// in the original frame with rank 2. `essential` additionally projects the
// singular values to (1, 1, 0).
std::optional<Eigen::Matrix3d> eight_point(const Points2& p0, const Points2& p1,
                                           const std::vector<std::size_t>& idx, bool essential) {
  if (idx.size() < 8) return std::nullopt;
  Points2 a, b;
  for (std::size_t i : idx) {
    a.push_back(p0[i]);
    b.push_back(p1[i]);
  }
  const Eigen::Matrix3d t0 = normalizing_transform(a);
  const Eigen::Matrix3d t1 = normalizing_transform(b);
  Eigen::MatrixXd design(Eigen::Index(idx.size()), 9);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Vector3d x = t0 * homog(a[k]);
    const Eigen::Vector3d y = t1 * homog(b[k]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) design(Eigen::Index(k), r * 3 + c) = y(r) * x(c);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  if (!v.allFinite()) return std::nullopt;
  Eigen::Matrix3d m;
  m << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);

  Eigen::JacobiSVD<Eigen::Matrix3d> s(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sv = s.singularValues();
  sv(2) = 0.0;
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0))) return std::nullopt;
  m = s.matrixU() * sv.asDiagonal() * s.matrixV().transpose();
  Eigen::Matrix3d out = t1.transpose() * m * t0;
  const double norm = out.norm();
  if (!(norm > 0.0) || !out.allFinite()) return std::nullopt;
  if (essential) {
    // Rescale so the two non-zero singular values equal 1 again.
    Eigen::JacobiSVD<Eigen::Matrix3d> e(out, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out = e.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() * e.matrixV().transpose();
    return out;
  }
  return out / norm;
}

std::vector<bool> consensus(const Eigen::Matrix3d& m, const Points2& p0, const Points2& p1,
                            double threshold, std::size_t& count) {
  std::vector<bool> in(p0.size(), false);
  count = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    if (sampson_distance(m, p0[i], p1[i]) <= threshold) {
      in[i] = true;
      ++count;
    }
  }
  return in;
}

std::optional<RansacResult> ransac(const Points2& p0, const Points2& p1, double threshold,
                                   int iterations, std::uint64_t seed, bool essential) {
  if (p0.size() != p1.size()) throw DataError("correspondence lists differ in length");
  const std::size_t n = p0.size();
  if (n < 8) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(n);
  std::optional<RansacResult> best;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 0; k < n; ++k) pool[k] = k;
    for (std::size_t k = 0; k < 8; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    const std::vector<std::size_t> sample(pool.begin(), pool.begin() + 8);
    const auto m = eight_point(p0, p1, sample, essential);
    if (!m) continue;
    std::size_t count = 0;
    auto in = consensus(*m, p0, p1, threshold, count);
    if (!best || count > best->inlier_count) best = RansacResult{*m, std::move(in), count};
  }
  if (!best || best->inlier_count < 8) return std::nullopt;

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (best->inliers[i]) idx.push_back(i);
  }
  if (const auto refit = eight_point(p0, p1, idx, essential)) {
    std::size_t count = 0;
    auto in = consensus(*refit, p0, p1, threshold, count);
    if (count >= best->inlier_count) best = RansacResult{*refit, std::move(in), count};
  }
  return best;
}

// Depths of the triangulated point in both cameras (camera 0 at the origin).
std::pair<double, double> depths(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                 const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector3d x0 = homog(a);
  const Eigen::Vector3d x1 = homog(b);
  // Solve d1 x1 = d0 R x0 + t in the least-squares sense.
  Eigen::Matrix<double, 3, 2> m;
  m.col(0) = r * x0;
  m.col(1) = -x1;
  const Eigen::Vector2d d = m.colPivHouseholderQr().solve(-t);
  return {d(0), d(1)};
}

}  // namespace

Eigen::Matrix3d normalizing_transform(const Points2& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= double(std::max<std::size_t>(pts.size(), 1));
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= double(std::max<std::size_t>(pts.size(), 1));
  const double s = mean > 0.0 ? std::sqrt(2.0) / mean : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

std::optional<Eigen::Matrix3d> fundamental_8point(const Points2& p0, const Points2& p1) {
  if (p0.size() != p1.size()) throw DataError("correspondence lists differ in length");
  std::vector<std::size_t> idx(p0.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return eight_point(p0, p1, idx, false);
}

double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& x0,
                        const Eigen::Vector2d& x1) {
  const Eigen::Vector3d a = homog(x0);
  const Eigen::Vector3d b = homog(x1);
  const Eigen::Vector3d fa = f * a;
  const Eigen::Vector3d fb = f.transpose() * b;
  const double num = b.dot(fa);
  const double den = fa.x() * fa.x() + fa.y() * fa.y() + fb.x() * fb.x() + fb.y() * fb.y();
  if (den <= 0.0) return std::abs(num) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::abs(num) / std::sqrt(den);
}

std::optional<RansacResult> ransac_fundamental(const Points2& p0, const Points2& p1,
                                               double threshold, int iterations,
                                               std::uint64_t seed) {
  return ransac(p0, p1, threshold, iterations, seed, false);
}

std::optional<RansacResult> ransac_essential(const Points2& x0, const Points2& x1,
                                             double threshold, int iterations,
                                             std::uint64_t seed) {
  return ransac(x0, x1, threshold, iterations, seed, true);
}

std::optional<RelativePose> decompose_essential(const Eigen::Matrix3d& e, const Points2& x0,
                                                const Points2& x1,
                                                const std::vector<bool>& use) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d rs[2] = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Eigen::Vector3d tu = u.col(2);

  std::optional<RelativePose> best;
  int best_count = 0;
  for (const auto& r : rs) {
    for (double sign : {1.0, -1.0}) {
      const Eigen::Vector3d t = sign * tu;
      int count = 0;
      for (std::size_t i = 0; i < x0.size(); ++i) {
        if (!use.empty() && !use[i]) continue;
        const auto [d0, d1] = depths(r, t, x0[i], x1[i]);
        if (d0 > 0.0 && d1 > 0.0) ++count;
      }
      if (count > best_count) {
        best_count = count;
        best = RelativePose{r, t.normalized()};
      }
    }
  }
  return best;
}

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double translation_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) return 180.0;
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  const double e = std::acos(c) * 180.0 / std::numbers::pi;
  return std::min(e, 180.0 - e);
}

}  // namespace a2pm
