#include "taskuq/oracles.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <vector>

namespace taskuq {

double brute_force_conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::invalid_argument("empty score list");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double target = std::ceil((1.0 - alpha) * static_cast<double>(sorted.size() + 1) - 1e-9);
  const auto needed = static_cast<std::size_t>(std::max(1.0, target));
  for (const double q : sorted) {
    std::size_t at_most = 0;
    for (const double s : sorted) {
      if (s <= q) ++at_most;
    }
    if (at_most >= needed) return q;
  }
  return kInf;
}

namespace {

struct GridBox {
  Vec lo;
  Vec hi;
  int points_per_dim;
};

// Walks the full tensor grid, calling visit(x, log_density) per point.
template <class F>
void for_each_grid_point(const GridBox& box, F&& visit) {
  const int d = static_cast<int>(box.lo.size());
  const int n = box.points_per_dim;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Vec x(d);
  const Vec step = (box.hi - box.lo) / static_cast<double>(n - 1);
  for (;;) {
    for (int i = 0; i < d; ++i) x[i] = box.lo[i] + step[i] * idx[static_cast<std::size_t>(i)];
    visit(x);
    int i = 0;
    for (; i < d; ++i) {
      if (++idx[static_cast<std::size_t>(i)] < n) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i == d) return;
  }
}

struct GridMoments {
  Vec mean;
  Mat cov;
};

GridMoments integrate(const GridBox& box, const Problem& problem, const Mat& prior_prec,
                      const Mat* a, const Vec* y) {
  const int d = problem.dim;
  const double inv_var = 1.0 / (problem.noise_std * problem.noise_std);
  auto log_density = [&](const Vec& x) {
    const Vec dx = x - problem.prior_mean;
    double lp = -0.5 * dx.dot(prior_prec * dx);
    if (a != nullptr) {
      const Vec resid = *y - (*a) * x;
      lp -= 0.5 * inv_var * resid.squaredNorm();
    }
    return lp;
  };

  double max_lp = -kInf;
  for_each_grid_point(box, [&](const Vec& x) { max_lp = std::max(max_lp, log_density(x)); });

  double total = 0.0;
  Vec mean = Vec::Zero(d);
  for_each_grid_point(box, [&](const Vec& x) {
    const double w = std::exp(log_density(x) - max_lp);
    total += w;
    mean += w * x;
  });
  mean /= total;

  Mat cov = Mat::Zero(d, d);
  for_each_grid_point(box, [&](const Vec& x) {
    const double w = std::exp(log_density(x) - max_lp);
    const Vec dx = x - mean;
    cov += w * dx * dx.transpose();
  });
  cov /= total;
  return {mean, cov};
}

}  // namespace

PosteriorMoments grid_posterior_moments(const Problem& problem, const Vec& y, int k) {
  const int d = problem.dim;
  if (d > 3) throw std::invalid_argument("grid_posterior_moments: practical only for dim <= 3");
  if (k < 0 || k > problem.num_rounds()) throw std::out_of_range("round index out of range");

  Eigen::LLT<Mat> prior_llt(problem.prior_cov);
  if (prior_llt.info() != Eigen::Success) {
    throw NumericError("grid_posterior_moments: prior covariance not positive definite");
  }
  const Mat prior_prec = prior_llt.solve(Mat::Identity(d, d));
  const Mat* a = nullptr;
  const Vec* yp = nullptr;
  if (k > 0) {
    a = &problem.configs[static_cast<std::size_t>(k - 1)].rows;
    yp = &y;
  }

  // Coarse box: prior spread widened by the data-misfit radius, which bounds
  // how far the posterior mean can travel from the prior mean.
  double shift = 0.0;
  if (a != nullptr) {
    shift = (y - (*a) * problem.prior_mean).norm() / problem.noise_std;
  }
  GridBox coarse;
  coarse.lo = Vec(d);
  coarse.hi = Vec(d);
  for (int i = 0; i < d; ++i) {
    const double half = std::sqrt(problem.prior_cov(i, i)) * (6.0 + shift);
    coarse.lo[i] = problem.prior_mean[i] - half;
    coarse.hi[i] = problem.prior_mean[i] + half;
  }
  coarse.points_per_dim = 71;
  GridMoments located = integrate(coarse, problem, prior_prec, a, yp);

  // Recenter and shrink. The extra grid steps of slack let a peak that fell
  // between coarse points (or got clipped at a box edge) pull the next box
  // over itself before the high-resolution pass.
  GridBox box = coarse;
  for (int pass = 0; pass < 4; ++pass) {
    const Vec step = (box.hi - box.lo) / static_cast<double>(box.points_per_dim - 1);
    for (int i = 0; i < d; ++i) {
      const double spread = std::max(std::sqrt(located.cov(i, i)), 1e-6);
      const double half = 8.5 * spread + 3.0 * step[i];
      box.lo[i] = located.mean[i] - half;
      box.hi[i] = located.mean[i] + half;
    }
    located = integrate(box, problem, prior_prec, a, yp);
  }

  box.points_per_dim = d == 1 ? 4001 : (d == 2 ? 501 : 151);
  const GridMoments final_pass = integrate(box, problem, prior_prec, a, yp);
  return {final_pass.mean, final_pass.cov};
}

}  // namespace taskuq
