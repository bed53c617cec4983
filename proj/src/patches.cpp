#include "a2pm/patches.hpp"

#include <cmath>
#include <map>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "a2pm/error.hpp"

namespace a2pm {

PatchGrid extract_patches(const cv::Mat& gray, int patch, double flat_std) {
  if (gray.empty() || gray.channels() != 1) throw DataError("patch extraction needs a grayscale image");
  PatchGrid g;
  g.patch = patch;
  g.rows = gray.rows / patch;
  g.cols = gray.cols / patch;
  const int n = g.count();
  const int dim = patch * patch;
  g.normalized = Eigen::MatrixXd::Zero(n, dim);
  g.means.assign(std::size_t(n), 0.0);
  g.flat.assign(std::size_t(n), true);

  cv::Mat f;
  gray.convertTo(f, CV_64F);
  Eigen::VectorXd v(dim);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const int idx = r * g.cols + c;
      for (int y = 0; y < patch; ++y) {
        const double* row = f.ptr<double>(r * patch + y) + c * patch;
        for (int x = 0; x < patch; ++x) v[y * patch + x] = row[x];
      }
      const double mean = v.mean();
      v.array() -= mean;
      const double norm = v.norm();
      g.means[std::size_t(idx)] = mean;
      if (norm / std::sqrt(double(dim)) < flat_std) continue;
      g.flat[std::size_t(idx)] = false;
      g.normalized.row(idx) = v.transpose() / norm;
    }
  }
  return g;
}

ContextSamples context_samples(const cv::Mat& gray, int patch, int context) {
  if (context < 1 || context % 2 == 0) throw ConfigError("patch context must be an odd positive integer");
  if (gray.empty() || gray.channels() != 1) throw DataError("patch extraction needs a grayscale image");
  ContextSamples s;
  s.patch = patch;
  s.rows = gray.rows / patch;
  s.cols = gray.cols / patch;
  const int n = s.count();
  const int dim = patch * patch;
  s.values = Eigen::MatrixXd::Zero(n, dim);
  s.valid.assign(std::size_t(n), std::vector<bool>(std::size_t(dim), true));

  const int pad = (patch / 2 + 1) * context;
  cv::Mat padded, f;
  cv::copyMakeBorder(gray, padded, pad, pad, pad, pad, cv::BORDER_REFLECT_101);
  padded.convertTo(f, CV_64F);
  cv::boxFilter(f, f, -1, cv::Size(context, context), cv::Point(-1, -1), true, cv::BORDER_REFLECT_101);
  const int half = context / 2;
  auto inside = [&](int p, int limit) { return p - half >= pad && p + half < pad + limit; };
  for (int idx = 0; idx < n; ++idx) {
    const double cx = (idx % s.cols) * patch + 0.5 * (patch - 1);
    const double cy = (idx / s.cols) * patch + 0.5 * (patch - 1);
    auto& valid = s.valid[std::size_t(idx)];
    for (int y = 0; y < patch; ++y) {
      const int py = int(std::lround(cy + (y - 0.5 * (patch - 1)) * context)) + pad;
      const double* row = f.ptr<double>(py);
      for (int x = 0; x < patch; ++x) {
        const int px = int(std::lround(cx + (x - 0.5 * (patch - 1)) * context)) + pad;
        const int k = y * patch + x;
        valid[std::size_t(k)] = inside(py, gray.rows) && inside(px, gray.cols);
        s.values(idx, k) = row[px];
      }
    }
  }
  return s;
}

namespace {

// Zero-mean unit-norm vector over the samples selected by `mask`, with
// samples invalid in `own` replaced by the mean of the valid ones. Returns
// false for a flat vector.
bool masked_descriptor(const Eigen::MatrixXd& values, int idx, const std::vector<bool>& own,
                       const std::vector<int>& mask, double flat_std, Eigen::VectorXd& out) {
  double sum = 0.0;
  int count = 0;
  for (int k : mask) {
    if (own[std::size_t(k)]) sum += values(idx, k), ++count;
  }
  const double mean = count > 0 ? sum / count : 0.0;
  out.resize(Eigen::Index(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int k = mask[i];
    out[Eigen::Index(i)] = own[std::size_t(k)] ? values(idx, k) - mean : 0.0;
  }
  const double norm = out.norm();
  if (count == 0 || norm / std::sqrt(double(mask.size())) < flat_std) {
    out.setZero();
    return false;
  }
  out /= norm;
  return true;
}

}  // namespace

Eigen::MatrixXd masked_ncc_matrix(const ContextSamples& a, const ContextSamples& b, double flat_std) {
  if (a.patch != b.patch) throw DataError("patch grids use different patch sizes");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.count(), b.count());
  std::map<std::vector<bool>, std::vector<int>> groups;
  for (int i = 0; i < a.count(); ++i) groups[a.valid[std::size_t(i)]].push_back(i);

  Eigen::VectorXd d;
  for (const auto& [valid, members] : groups) {
    std::vector<int> mask;
    for (std::size_t k = 0; k < valid.size(); ++k) {
      if (valid[k]) mask.push_back(int(k));
    }
    if (mask.empty()) continue;
    const auto m = Eigen::Index(mask.size());
    Eigen::MatrixXd da(Eigen::Index(members.size()), m), db(b.count(), m);
    for (std::size_t r = 0; r < members.size(); ++r) {
      masked_descriptor(a.values, members[r], valid, mask, flat_std, d);
      da.row(Eigen::Index(r)) = d.transpose();
    }
    for (int j = 0; j < b.count(); ++j) {
      masked_descriptor(b.values, j, b.valid[std::size_t(j)], mask, flat_std, d);
      db.row(j) = d.transpose();
    }
    const Eigen::MatrixXd block = da * db.transpose();
    for (std::size_t r = 0; r < members.size(); ++r) out.row(members[r]) = block.row(Eigen::Index(r));
  }
  return out;
}

PatchGrid extract_context_patches(const cv::Mat& gray, int patch, int context, double flat_std) {
  if (context == 1) return extract_patches(gray, patch, flat_std);
  const ContextSamples s = context_samples(gray, patch, context);
  PatchGrid g;
  g.patch = patch;
  g.rows = s.rows;
  g.cols = s.cols;
  const int n = g.count();
  const int dim = patch * patch;
  g.normalized = Eigen::MatrixXd::Zero(n, dim);
  g.means.assign(std::size_t(n), 0.0);
  g.flat.assign(std::size_t(n), true);
  std::vector<int> every(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) every[std::size_t(k)] = k;
  Eigen::VectorXd v;
  for (int idx = 0; idx < n; ++idx) {
    const auto& valid = s.valid[std::size_t(idx)];
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < dim; ++k) {
      if (valid[std::size_t(k)]) sum += s.values(idx, k), ++count;
    }
    g.means[std::size_t(idx)] = count > 0 ? sum / count : 0.0;
    if (!masked_descriptor(s.values, idx, valid, every, flat_std, v)) continue;
    g.flat[std::size_t(idx)] = false;
    g.normalized.row(idx) = v.transpose();
  }
  return g;
}

Eigen::MatrixXd ncc_matrix(const PatchGrid& a, const PatchGrid& b) {
  if (a.patch != b.patch) throw DataError("patch grids use different patch sizes");
  return a.normalized * b.normalized.transpose();
}

}  // namespace a2pm
