#include "a2pm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <opencv2/imgproc.hpp>

#include "a2pm/error.hpp"

namespace a2pm {

namespace {

constexpr double kStarved = 1e-12;

// Per-component constants for repeated log-density evaluation.
struct Prepared {
  Eigen::Vector2d mean;
  Eigen::Matrix2d inv;
  double log_norm = 0.0;  // log(weight) - log(2 pi sqrt|cov|)
};

std::vector<Prepared> prepare(const GMMParams& g) {
  std::vector<Prepared> out;
  for (const auto& c : g.components) {
    const double lw = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    out.push_back({c.mean, c.cov.inverse(),
                   lw - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(c.cov.determinant())});
  }
  return out;
}

double weighted_log_pdf(const Prepared& p, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = x - p.mean;
  return p.log_norm - 0.5 * d.dot(p.inv * d);
}

double log_pdf(const GaussianComponent& c, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = x - c.mean;
  return -0.5 * d.dot(c.cov.inverse() * d) - std::log(2.0 * std::numbers::pi) -
         0.5 * std::log(c.cov.determinant());
}

double log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

}  // namespace

void validate(const GMMParams& g) {
  if (g.empty()) throw DataError("mixture has no components");
  double total = 0.0;
  for (const auto& c : g.components) {
    if (!(c.weight >= 0.0)) throw DataError("mixture weight must be non-negative");
    total += c.weight;
    if (std::abs(c.cov(0, 1) - c.cov(1, 0)) > 1e-9 * (1.0 + c.cov.cwiseAbs().maxCoeff())) {
      throw DataError("covariance is not symmetric");
    }
    if (!(c.cov(0, 0) > 0.0) || !(c.cov.determinant() > 0.0)) {
      throw DataError("covariance is not positive definite");
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("mixture weights do not sum to 1");
}

double gaussian_pdf(const GaussianComponent& c, const Eigen::Vector2d& x) {
  return std::exp(log_pdf(c, x));
}

double density(const GMMParams& g, const Eigen::Vector2d& x) {
  double p = 0.0;
  for (const auto& c : g.components) p += c.weight * gaussian_pdf(c, x);
  return p;
}

double log_likelihood(const GMMParams& g, const std::vector<Eigen::Vector2d>& xs) {
  const auto prepared = prepare(g);
  double total = 0.0;
  std::vector<double> terms(g.size());
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < g.size(); ++k) terms[k] = weighted_log_pdf(prepared[k], x);
    total += log_sum_exp(terms);
  }
  return total;
}

std::vector<Eigen::Vector2d> sample(const GMMParams& g, int n, std::uint64_t seed) {
  validate(g);
  std::mt19937_64 rng(seed);
  std::vector<double> weights;
  std::vector<Eigen::Matrix2d> chol;
  for (const auto& c : g.components) {
    weights.push_back(c.weight);
    Eigen::Matrix2d l = Eigen::Matrix2d::Zero();
    l(0, 0) = std::sqrt(c.cov(0, 0));
    l(1, 0) = c.cov(1, 0) / l(0, 0);
    l(1, 1) = std::sqrt(std::max(0.0, c.cov(1, 1) - l(1, 0) * l(1, 0)));
    chol.push_back(l);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::Vector2d> out;
  out.reserve(std::size_t(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    out.push_back(g.components[k].mean + chol[k] * Eigen::Vector2d(z0, z1));
  }
  return out;
}

Eigen::Matrix2d floor_covariance(const Eigen::Matrix2d& cov, double floor) {
  const Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  Eigen::Vector2d ev = es.eigenvalues();
  if (ev.minCoeff() >= floor) return sym;
  ev = ev.cwiseMax(floor);
  const Eigen::Matrix2d v = es.eigenvectors();
  Eigen::Matrix2d out = v * ev.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

GMMParams em_refine(const std::vector<Eigen::Vector2d>& observations, const GMMParams& init,
                    int steps, EmStepLog* log) {
  validate(init);
  if (steps < 0) throw ConfigError("EM step count must be non-negative");
  if (observations.size() < init.size()) {
    throw DataError("EM needs at least as many observations as components");
  }
  GMMParams g = init;
  if (log) log->log_likelihood.push_back(log_likelihood(g, observations));
  const std::size_t n = observations.size();
  std::vector<double> r;
  for (int step = 0; step < steps; ++step) {
    const std::size_t k_count = g.size();
    // Sufficient statistics, centered on the current means.
    std::vector<double> sum_r(k_count, 0.0);
    std::vector<Eigen::Vector2d> sum_d(k_count, Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> sum_dd(k_count, Eigen::Matrix2d::Zero());
    const auto prepared = prepare(g);
    r.resize(k_count);
    for (std::size_t i = 0; i < n; ++i) {
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < k_count; ++k) {
        r[k] = weighted_log_pdf(prepared[k], observations[i]);
        hi = std::max(hi, r[k]);
      }
      double total = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) {
        // Below e^-50 of the leading term a responsibility cannot move any sum.
        r[k] = r[k] - hi < -50.0 ? 0.0 : std::exp(r[k] - hi);
        total += r[k];
      }
      for (std::size_t k = 0; k < k_count; ++k) {
        if (r[k] == 0.0) continue;
        const double w = r[k] / total;
        const Eigen::Vector2d d = observations[i] - g.components[k].mean;
        sum_r[k] += w;
        sum_d[k] += w * d;
        sum_dd[k] += w * d * d.transpose();
      }
    }
    GMMParams next;
    double kept = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double nk = sum_r[k];
      if (nk < kStarved) {
        if (log) ++log->dropped;
        continue;
      }
      const Eigen::Vector2d shift = sum_d[k] / nk;
      const Eigen::Matrix2d cov = sum_dd[k] / nk - shift * shift.transpose();
      next.components.push_back({g.components[k].mean + shift, floor_covariance(cov), nk});
      kept += nk;
    }
    if (next.empty()) throw DataError("EM starved every component");
    for (auto& c : next.components) c.weight /= kept;
    g = std::move(next);
    if (log) log->log_likelihood.push_back(log_likelihood(g, observations));
  }
  return g;
}

std::optional<Area> extract_area(const GMMParams& g, double threshold, const ImageDims& dims) {
  validate(g);
  if (!(threshold > 0.0)) throw ConfigError("confidence threshold must be positive");
  if (!dims.valid()) throw DataError("invalid image dims");
  const int w = dims.width;
  const int h = dims.height;
  const double per_component = threshold / double(g.size());

  std::vector<std::uint8_t> candidate(std::size_t(w) * std::size_t(h), 0);
  bool any = false;
  for (const auto& c : g.components) {
    if (c.weight <= 0.0) continue;
    const double peak = c.weight / (2.0 * std::numbers::pi * std::sqrt(c.cov.determinant()));
    if (peak < per_component) continue;
    // Mahalanobis radius where pi_k N_k drops to the per-component level.
    const double r = std::sqrt(2.0 * std::log(peak / per_component));
    const double hx = r * std::sqrt(c.cov(0, 0));
    const double hy = r * std::sqrt(c.cov(1, 1));
    const int x0 = std::max(0, int(std::floor(c.mean.x() - hx)));
    const int x1 = std::min(w - 1, int(std::ceil(c.mean.x() + hx)));
    const int y0 = std::max(0, int(std::floor(c.mean.y() - hy)));
    const int y1 = std::min(h - 1, int(std::ceil(c.mean.y() + hy)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) candidate[std::size_t(y) * std::size_t(w) + std::size_t(x)] = 1;
    }
    any = any || (x0 <= x1 && y0 <= y1);
  }
  if (!any) return std::nullopt;

  int bx0 = w, by0 = h, bx1 = -1, by1 = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!candidate[std::size_t(y) * std::size_t(w) + std::size_t(x)]) continue;
      if (x >= bx0 && x <= bx1 && y >= by0 && y <= by1) continue;
      if (density(g, {double(x), double(y)}) >= threshold) {
        bx0 = std::min(bx0, x);
        bx1 = std::max(bx1, x);
        by0 = std::min(by0, y);
        by1 = std::max(by1, y);
      }
    }
  }
  if (bx1 < 0) return std::nullopt;
  return Area{bx0, by0, bx1 + 1, by1 + 1};
}

namespace {

// Adds scale_k * exp(-m_k(x)^2 / 2) of every component to the grid, inside
// the window where the term stays above `cutoff`.
void accumulate(const GMMParams& g, const std::vector<double>& scale, double cutoff, cv::Mat& grid) {
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto& c = g.components[k];
    const double norm = scale[k];
    if (norm <= 0.0 || norm < cutoff) continue;
    const double r = std::sqrt(2.0 * std::log(norm / cutoff));
    const Eigen::Matrix2d inv = c.cov.inverse();
    const int x0 = std::max(0, int(std::floor(c.mean.x() - r * std::sqrt(c.cov(0, 0)))));
    const int x1 = std::min(grid.cols - 1, int(std::ceil(c.mean.x() + r * std::sqrt(c.cov(0, 0)))));
    const int y0 = std::max(0, int(std::floor(c.mean.y() - r * std::sqrt(c.cov(1, 1)))));
    const int y1 = std::min(grid.rows - 1, int(std::ceil(c.mean.y() + r * std::sqrt(c.cov(1, 1)))));
    for (int y = y0; y <= y1; ++y) {
      auto* row = grid.ptr<double>(y);
      const double dy = y - c.mean.y();
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - c.mean.x();
        const double m = inv(0, 0) * dx * dx + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy * dy;
        row[x] += norm * std::exp(-0.5 * m);
      }
    }
  }
}

}  // namespace

cv::Mat density_grid(const GMMParams& g, const ImageDims& dims, double relative_cutoff) {
  validate(g);
  if (!dims.valid()) throw DataError("invalid image dims");
  std::vector<double> scale;
  for (const auto& c : g.components) {
    scale.push_back(c.weight / (2.0 * std::numbers::pi * std::sqrt(c.cov.determinant())));
  }
  cv::Mat grid = cv::Mat::zeros(dims.height, dims.width, CV_64FC1);
  accumulate(g, scale, relative_cutoff * *std::max_element(scale.begin(), scale.end()), grid);
  return grid;
}

cv::Mat confidence_grid(const GMMParams& g, const ImageDims& dims, double relative_cutoff) {
  validate(g);
  if (!dims.valid()) throw DataError("invalid image dims");
  std::vector<double> scale;
  for (const auto& c : g.components) {
    scale.push_back(double(g.size()) * c.weight / (2.0 * std::numbers::pi));
  }
  cv::Mat grid = cv::Mat::zeros(dims.height, dims.width, CV_64FC1);
  accumulate(g, scale, relative_cutoff * *std::max_element(scale.begin(), scale.end()), grid);
  return grid;
}

std::optional<Area> extract_dominant_area(const cv::Mat& p, double threshold, int link_radius) {
  if (!(threshold > 0.0)) throw ConfigError("confidence threshold must be positive");
  if (link_radius < 0) throw ConfigError("link radius must be non-negative");
  if (p.empty() || p.type() != CV_64FC1) throw DataError("score grid must be a non-empty double image");
  const ImageDims dims{p.cols, p.rows};
  const cv::Mat above = p >= threshold;
  cv::Mat linked = above;
  if (link_radius > 0) {
    // Dilating by r links pixels up to 2r apart; halve so the radius is the gap.
    const int r = (link_radius + 1) / 2;
    cv::dilate(above, linked, cv::getStructuringElement(cv::MORPH_RECT, {2 * r + 1, 2 * r + 1}));
  }
  cv::Mat labels;
  const int n = cv::connectedComponents(linked, labels, 8, CV_32S);
  if (n <= 1) return std::nullopt;
  std::vector<double> mass(std::size_t(n), 0.0);
  std::vector<Area> box(std::size_t(n), Area{dims.width, dims.height, -1, -1});
  for (int y = 0; y < dims.height; ++y) {
    const auto* l = labels.ptr<int>(y);
    const auto* v = p.ptr<double>(y);
    const auto* a = above.ptr<std::uint8_t>(y);
    for (int x = 0; x < dims.width; ++x) {
      if (!a[x]) continue;
      const auto k = std::size_t(l[x]);
      mass[k] += v[x];
      box[k] = {std::min(box[k].x_min, x), std::min(box[k].y_min, y), std::max(box[k].x_max, x + 1),
                std::max(box[k].y_max, y + 1)};
    }
  }
  std::size_t best = 1;
  for (std::size_t k = 2; k < mass.size(); ++k) {
    if (mass[k] > mass[best]) best = k;
  }
  return box[best];
}

}  // namespace a2pm
