#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taskuq/conformal.hpp"
#include "taskuq/oracles.hpp"
#include "taskuq/testbed.hpp"

#include <cmath>

using namespace taskuq;

namespace {

ProblemSpec small_spec(int dim, std::vector<int> rows, double noise = 0.3) {
  ProblemSpec spec;
  spec.dim = dim;
  spec.round_rows = std::move(rows);
  spec.noise_std = noise;
  return spec;
}

}  // namespace

TEST_CASE("sigmoid basics and numerical stability") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(900.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-900.0) == doctest::Approx(0.0));
  CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0));
  CHECK(std::isfinite(sigmoid(-1e6)));
}

TEST_CASE("make_problem validates and builds nested configs") {
  const Problem p = make_problem(ProblemSpec{}, 42);
  CHECK(p.num_rounds() == 4);
  CHECK(p.rows_at(1) == 2);
  CHECK(p.rows_at(4) == 16);
  CHECK(p.configs[0].acceleration == doctest::Approx(8.0));
  CHECK(p.configs[1].acceleration == doctest::Approx(4.0));
  CHECK(p.configs[2].acceleration == doctest::Approx(2.0));
  CHECK(p.configs[3].acceleration == doctest::Approx(1.0));
  CHECK(p.task_weights.norm() == doctest::Approx(1.3));
  // nesting: round k rows are the leading block of round k+1 rows
  for (int k = 0; k + 1 < p.num_rounds(); ++k) {
    const Mat& a = p.configs[k].rows;
    const Mat& b = p.configs[k + 1].rows;
    CHECK((b.topRows(a.rows()) - a).norm() == 0.0);
  }

  CHECK_THROWS_AS(make_problem(small_spec(4, {4}), 1), std::invalid_argument);
  CHECK_THROWS_AS(make_problem(small_spec(4, {4, 2}), 1), std::invalid_argument);
  CHECK_THROWS_AS(make_problem(small_spec(4, {2, 2}), 1), std::invalid_argument);
}

TEST_CASE("make_problem is deterministic in the seed") {
  const Problem a = make_problem(ProblemSpec{}, 7);
  const Problem b = make_problem(ProblemSpec{}, 7);
  const Problem c = make_problem(ProblemSpec{}, 8);
  CHECK((a.configs[3].rows - b.configs[3].rows).norm() == 0.0);
  CHECK((a.task_weights - b.task_weights).norm() == 0.0);
  CHECK((a.configs[3].rows - c.configs[3].rows).norm() != 0.0);
}

TEST_CASE("zero task weights give constant output 0.5") {
  ProblemSpec spec = small_spec(4, {2, 4});
  spec.task_weight_scale = 0.0;
  const Problem p = make_problem(spec, 3);
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    const Sample s = draw_sample(p, rng);
    CHECK(s.true_output == 0.5);
    CHECK(s.class_label == 1);  // zero logit sits on the inclusive side
  }
}

TEST_CASE("measurements_at_round is a prefix of the full measurement") {
  const Problem p = make_problem(ProblemSpec{}, 12);
  Rng rng(13);
  const Sample s = draw_sample(p, rng);
  CHECK(s.full_measurement.size() == 16);
  for (int k = 1; k <= p.num_rounds(); ++k) {
    const Vec y = measurements_at_round(s, p, k);
    CHECK(y.size() == p.rows_at(k));
    CHECK((y - s.full_measurement.head(y.size())).norm() == 0.0);
  }
}

TEST_CASE("noiseless full-rank round recovers the truth") {
  ProblemSpec spec = small_spec(3, {1, 3}, 1e-6);
  const Problem p = make_problem(spec, 5);
  Rng rng(6);
  const Sample s = draw_sample(p, rng);
  const Vec y = measurements_at_round(s, p, 2);
  const PosteriorMoments post = posterior_moments(p, y, 2);
  CHECK((post.mean - s.truth).norm() == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(post.cov.norm() < 1e-6);
}

TEST_CASE("posterior round 0 returns the prior") {
  const Problem p = make_problem(ProblemSpec{}, 4);
  const PosteriorMoments post = posterior_moments(p, Vec(), 0);
  CHECK((post.mean - p.prior_mean).norm() == 0.0);
  CHECK((post.cov - p.prior_cov).norm() == 0.0);
}

TEST_CASE("posterior matches the grid quadrature oracle in 2-D") {
  ProblemSpec spec = small_spec(2, {1, 2});
  const Problem p = make_problem(spec, 17);
  Rng rng(18);
  const Sample s = draw_sample(p, rng);
  for (int k = 1; k <= 2; ++k) {
    const Vec y = measurements_at_round(s, p, k);
    const PosteriorMoments exact = posterior_moments(p, y, k);
    const PosteriorMoments grid = grid_posterior_moments(p, y, k);
    CHECK((exact.mean - grid.mean).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((exact.cov - grid.cov).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("posterior samples concentrate on the posterior mean") {
  const Problem p = make_problem(ProblemSpec{}, 23);
  Rng rng(24);
  const Sample s = draw_sample(p, rng);
  const Vec y = measurements_at_round(s, p, 4);
  const PosteriorMoments post = posterior_moments(p, y, 4);
  Rng draw_rng(25);
  const auto xs = posterior_samples(p, y, 4, 4000, draw_rng);
  Vec mean = Vec::Zero(p.dim);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  // sample-mean error ~ sqrt(tr(cov)/n); allow 6x
  const double bound = 6.0 * std::sqrt(post.cov.trace() / static_cast<double>(xs.size()));
  CHECK((mean - post.mean).norm() < bound);
}

TEST_CASE("posterior uncertainty shrinks with more measurement rows") {
  const Problem p = make_problem(ProblemSpec{}, 31);
  Rng rng(32);
  const Sample s = draw_sample(p, rng);
  double prev = kInf;
  for (int k = 1; k <= p.num_rounds(); ++k) {
    const Vec y = measurements_at_round(s, p, k);
    const double tr = posterior_moments(p, y, k).cov.trace();
    CHECK(tr < prev + 1e-12);
    prev = tr;
  }
}

TEST_CASE("chol_lower factors a near-singular matrix via jitter") {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;  // rank deficient
  const Mat l = chol_lower(m);
  CHECK(((l * l.transpose()) - m).norm() < 1e-5);
  Mat bad = Mat::Identity(2, 2);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(chol_lower(bad), NumericError);
}

TEST_CASE("generate_dataset shapes and per-sample stream determinism") {
  const Problem p = make_problem(ProblemSpec{}, 41);
  const Dataset d = generate_dataset(p, 12, 7, 100);
  REQUIRE(d.size() == 4);
  for (const auto& round : d) {
    REQUIRE(round.size() == 12);
    for (const auto& rec : round) {
      CHECK(rec.task_samples.size() == 7);
      CHECK(rec.true_output >= 0.0);
      CHECK(rec.true_output <= 1.0);
      CHECK((rec.class_label == 0 || rec.class_label == 1));
    }
  }
  // the same sample index matches across dataset sizes (per-sample streams)
  const Dataset d2 = generate_dataset(p, 5, 7, 100);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (int i = 0; i < 5; ++i) {
      CHECK(d[k][i].true_output == d2[k][i].true_output);
      CHECK(d[k][i].task_samples == d2[k][i].task_samples);
    }
  }
}

TEST_CASE("task-sample spread shrinks across rounds on average") {
  const Problem p = make_problem(ProblemSpec{}, 51);
  const Dataset d = generate_dataset(p, 80, 16, 52);
  std::vector<double> mean_std;
  for (const auto& round : d) {
    double acc = 0.0;
    for (const auto& rec : round) acc += lwr_stats(rec.task_samples).stddev;
    mean_std.push_back(acc / static_cast<double>(round.size()));
  }
  for (std::size_t k = 0; k + 1 < mean_std.size(); ++k) {
    CHECK(mean_std[k + 1] < mean_std[k]);
  }
}
