#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "a2pm/geometry.hpp"

namespace a2pm {

inline constexpr double kCovarianceFloor = 1e-3;

struct GaussianComponent {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  double weight = 1.0;
};

/// 2-D Gaussian mixture. Weights sum to 1 for a valid model.
struct GMMParams {
  std::vector<GaussianComponent> components;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }
};

/// Throws DataError when the mixture has no components, weights do not sum to
/// 1 (within 1e-9) or a covariance is not symmetric positive definite.
void validate(const GMMParams& g);

double gaussian_pdf(const GaussianComponent& c, const Eigen::Vector2d& x);
double density(const GMMParams& g, const Eigen::Vector2d& x);
/// Sum of log p(x_n) over the observations.
double log_likelihood(const GMMParams& g, const std::vector<Eigen::Vector2d>& xs);

/// `n` draws from the mixture using a generator seeded with `seed`.
std::vector<Eigen::Vector2d> sample(const GMMParams& g, int n, std::uint64_t seed);

/// Clamps the eigenvalues of a symmetric matrix from below.
Eigen::Matrix2d floor_covariance(const Eigen::Matrix2d& cov, double floor = kCovarianceFloor);

struct EmStepLog {
  std::vector<double> log_likelihood;  // before the first step and after each step
  int dropped = 0;
};

/// Standard EM for `steps` iterations from `init`. Components whose total
/// responsibility falls below 1e-12 are dropped and the weights renormalized.
GMMParams em_refine(const std::vector<Eigen::Vector2d>& observations, const GMMParams& init,
                    int steps, EmStepLog* log = nullptr);

/// Tight pixel bounding box of {x on the integer grid : p(x) >= threshold},
/// or nullopt when the set is empty. Only pixels inside some component's
/// window where pi_k N_k(x) >= threshold / K are evaluated; outside the union
/// of those windows p(x) < threshold holds by pigeonhole.
std::optional<Area> extract_area(const GMMParams& g, double threshold, const ImageDims& dims);

/// Mixture density accumulated on the integer pixel grid of `dims`; each
/// component only contributes inside the window where pi_k N_k(x) stays
/// above `relative_cutoff` * (largest component peak).
cv::Mat density_grid(const GMMParams& g, const ImageDims& dims, double relative_cutoff = 1e-9);

/// Matching confidence on the integer pixel grid: every component scored
/// against the standard Gaussian in its own whitened coordinates and weighted
/// relative to a uniform mixture, C(x) = sum_k K pi_k exp(-m_k(x)^2 / 2) / (2 pi)
/// with m_k the Mahalanobis distance to component k.
cv::Mat confidence_grid(const GMMParams& g, const ImageDims& dims, double relative_cutoff = 1e-9);

/// Bounding box of the region of {score >= threshold} holding the most
/// score mass. Pixels within `link_radius` (Chebyshev) of each other belong
/// to one region; 0 means plain 8-connectivity. Ties go to the region met
/// first in row-major order. nullopt when the set is empty.
std::optional<Area> extract_dominant_area(const cv::Mat& score, double threshold,
                                          int link_radius = 0);

}  // namespace a2pm
