#include "taskuq/testbed.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace taskuq {

int Problem::rows_at(int k) const {
  if (k < 1 || k > num_rounds()) throw std::out_of_range("round index out of range");
  return static_cast<int>(configs[static_cast<std::size_t>(k - 1)].rows.rows());
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Mat chol_lower(const Mat& m) {
  Mat sym = 0.5 * (m + m.transpose());
  const double scale = 1.0 + sym.diagonal().cwiseAbs().maxCoeff();
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
    Mat attempt = sym;
    attempt.diagonal().array() += jitter * scale;
    Eigen::LLT<Mat> llt(attempt);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericError("chol_lower: matrix not positive definite after jitter retries (dim=" +
                     std::to_string(sym.rows()) + ")");
}

Problem make_problem(const ProblemSpec& spec, std::uint64_t seed) {
  if (spec.dim < 1) throw std::invalid_argument("make_problem: dim must be positive");
  if (spec.round_rows.size() < 2) {
    throw std::invalid_argument("make_problem: at least two measurement rounds required");
  }
  int prev = 0;
  for (int rows : spec.round_rows) {
    if (rows <= prev) {
      throw std::invalid_argument("make_problem: per-round row counts must be strictly increasing");
    }
    prev = rows;
  }
  if (!(spec.noise_std > 0.0)) throw std::invalid_argument("make_problem: noise_std must be positive");
  if (!(spec.task_weight_scale >= 0.0)) {
    throw std::invalid_argument("make_problem: task_weight_scale must be nonnegative");
  }

  Rng rng(seed);
  Problem problem;
  problem.dim = spec.dim;
  problem.prior_mean = Vec::Zero(spec.dim);
  problem.prior_cov = Mat::Identity(spec.dim, spec.dim);
  problem.noise_std = spec.noise_std;

  const int total_rows = spec.round_rows.back();
  Mat all_rows(total_rows, spec.dim);
  for (int i = 0; i < total_rows; ++i) {
    for (int j = 0; j < spec.dim; ++j) all_rows(i, j) = rng.normal();
  }
  problem.configs.reserve(spec.round_rows.size());
  for (int rows : spec.round_rows) {
    problem.configs.push_back(
        {all_rows.topRows(rows), static_cast<double>(total_rows) / rows});
  }

  Vec w = normal_vec(spec.dim, rng);
  problem.task_weights = w * (spec.task_weight_scale / w.norm());
  problem.task_bias = spec.task_bias;
  return problem;
}

Sample draw_sample(const Problem& problem, Rng& rng) {
  const Mat prior_l = chol_lower(problem.prior_cov);
  Sample s;
  s.truth = problem.prior_mean + prior_l * normal_vec(problem.dim, rng);
  const Mat& full = problem.configs.back().rows;
  s.full_measurement =
      full * s.truth + problem.noise_std * normal_vec(full.rows(), rng);
  s.true_output = task(problem, s.truth);
  s.class_label =
      problem.task_weights.dot(s.truth) + problem.task_bias >= 0.0 ? 1 : 0;
  return s;
}

Vec measurements_at_round(const Sample& sample, const Problem& problem, int k) {
  const int rows = problem.rows_at(k);
  return sample.full_measurement.head(rows);
}

PosteriorMoments posterior_moments(const Problem& problem, const Vec& y, int k) {
  if (k < 0 || k > problem.num_rounds()) {
    throw std::out_of_range("posterior_moments: round index out of range");
  }
  const Eigen::Index d = problem.dim;
  Eigen::LLT<Mat> prior_llt(0.5 * (problem.prior_cov + problem.prior_cov.transpose()));
  if (prior_llt.info() != Eigen::Success) {
    throw NumericError("posterior_moments: prior covariance is not positive definite");
  }
  Mat precision = prior_llt.solve(Mat::Identity(d, d));
  Vec rhs = precision * problem.prior_mean;
  if (k > 0) {
    const Mat& a = problem.configs[static_cast<std::size_t>(k - 1)].rows;
    if (y.size() != a.rows()) {
      throw std::invalid_argument("posterior_moments: measurement size does not match config");
    }
    const double inv_var = 1.0 / (problem.noise_std * problem.noise_std);
    precision += inv_var * a.transpose() * a;
    rhs += inv_var * a.transpose() * y;
  }
  Eigen::LLT<Mat> post_llt(0.5 * (precision + precision.transpose()));
  if (post_llt.info() != Eigen::Success) {
    throw NumericError("posterior_moments: posterior precision factorization failed (round " +
                       std::to_string(k) + ")");
  }
  PosteriorMoments pm;
  pm.mean = post_llt.solve(rhs);
  Mat cov = post_llt.solve(Mat::Identity(d, d));
  pm.cov = 0.5 * (cov + cov.transpose());
  return pm;
}

std::vector<Vec> posterior_samples(const Problem& problem, const Vec& y, int k,
                                   int p, Rng& rng) {
  if (p < 1) throw std::invalid_argument("posterior_samples: p must be positive");
  const PosteriorMoments pm = posterior_moments(problem, y, k);
  const Mat l = chol_lower(pm.cov);
  std::vector<Vec> samples;
  samples.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    samples.push_back(pm.mean + l * normal_vec(problem.dim, rng));
  }
  return samples;
}

Vec point_estimate(const Problem& problem, const Vec& y, int k) {
  return posterior_moments(problem, y, k).mean;
}

double task(const Problem& problem, const Vec& x) {
  if (x.size() != problem.dim) throw std::invalid_argument("task: wrong input dimension");
  return sigmoid(problem.task_weights.dot(x) + problem.task_bias);
}

Dataset generate_dataset(const Problem& problem, int n, int p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be positive");
  if (p < 1) throw std::invalid_argument("generate_dataset: p must be positive");
  const int rounds = problem.num_rounds();
  Dataset dataset(static_cast<std::size_t>(rounds));
  for (auto& r : dataset) r.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const Sample s = draw_sample(problem, rng);
    for (int k = 1; k <= rounds; ++k) {
      const Vec y = measurements_at_round(s, problem, k);
      const auto recoveries = posterior_samples(problem, y, k, p, rng);
      CalibrationRecord rec;
      rec.task_samples.reserve(recoveries.size());
      for (const Vec& x_hat : recoveries) rec.task_samples.push_back(task(problem, x_hat));
      rec.true_output = s.true_output;
      rec.class_label = s.class_label;
      dataset[static_cast<std::size_t>(k - 1)].push_back(std::move(rec));
    }
  }
  return dataset;
}

}  // namespace taskuq
