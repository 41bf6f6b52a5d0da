#pragma once

#include "taskuq/rng.hpp"
#include "taskuq/types.hpp"

#include <cstdint>
#include <vector>

namespace taskuq {

struct MeasurementConfig {
  Mat rows;             // m x d measurement operator for this round
  double acceleration;  // total available rows / rows used
};

// Linear-Gaussian inverse problem with a nested measurement schedule and a
// scalar soft-classifier task. The posterior of X | Y is exactly Gaussian,
// so the synthetic pipeline plays the role of acquisition, reconstruction,
// and task network with no approximation error.
struct Problem {
  int dim = 0;
  Vec prior_mean;
  Mat prior_cov;
  double noise_std = 0.0;
  std::vector<MeasurementConfig> configs;  // strictly nested, by construction
  Vec task_weights;
  double task_bias = 0.0;

  int num_rounds() const { return static_cast<int>(configs.size()); }
  int rows_at(int k) const;  // k is 1-based
};

struct ProblemSpec {
  int dim = 16;
  std::vector<int> round_rows = {2, 4, 8, 16};
  double noise_std = 0.3;
  // ||task_weights||; the default puts the prior stddev of z near 0.25
  double task_weight_scale = 1.3;
  double task_bias = 0.0;
};

struct Sample {
  Vec truth;
  Vec full_measurement;  // all rows' responses, noise drawn once
  double true_output = 0.0;
  int class_label = 0;
};

struct PosteriorMoments {
  Vec mean;
  Mat cov;
};

double sigmoid(double t);

// Lower Cholesky factor after symmetrization, with a diagonal jitter retry.
Mat chol_lower(const Mat& m);

Problem make_problem(const ProblemSpec& spec, std::uint64_t seed);
Sample draw_sample(const Problem& problem, Rng& rng);
Vec measurements_at_round(const Sample& sample, const Problem& problem, int k);

// Exact conditional moments of X | Y = y under config k; k = 0 returns the
// prior moments.
PosteriorMoments posterior_moments(const Problem& problem, const Vec& y, int k);
std::vector<Vec> posterior_samples(const Problem& problem, const Vec& y, int k,
                                   int p, Rng& rng);
Vec point_estimate(const Problem& problem, const Vec& y, int k);
double task(const Problem& problem, const Vec& x);

// n samples, each with per-round task-sample lists of size p; sample i uses
// the stream derive_seed(seed, i), so any parallel split reproduces this.
Dataset generate_dataset(const Problem& problem, int n, int p, std::uint64_t seed);

}  // namespace taskuq
