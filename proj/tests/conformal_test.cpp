#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taskuq/conformal.hpp"
#include "taskuq/oracles.hpp"
#include "taskuq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace taskuq;

TEST_CASE("conformal_rank worked values") {
  CHECK(conformal_rank(5, 0.2) == 5);        // ceil(0.8 * 6)
  CHECK(conformal_rank(19, 0.05) == 19);     // 0.95 * 20 = 19 exactly
  CHECK(conformal_rank(1, 0.5) == 1);
  CHECK(conformal_rank(3, 0.01) == 4);       // exceeds n -> +inf quantile
  CHECK(conformal_rank(99, 0.1) == 90);
  // round-off guard: 0.95*20 must not become 20 via fp noise
  CHECK(conformal_rank(19, 1.0 - 0.95) == 19);
}

TEST_CASE("conformal_quantile worked examples") {
  std::vector<double> s{1, 2, 3, 4, 5};
  CHECK(conformal_quantile(s, 0.2) == 5.0);
  std::vector<double> one{7.0};
  CHECK(conformal_quantile(one, 0.5) == 7.0);
  std::vector<double> three{1, 2, 3};
  CHECK(std::isinf(conformal_quantile(three, 0.01)));
  CHECK(conformal_quantile(three, 0.01) > 0);
}

TEST_CASE("conformal_quantile rejects bad input") {
  std::vector<double> empty;
  CHECK_THROWS_AS(conformal_quantile(empty, 0.1), std::invalid_argument);
  std::vector<double> with_nan{1.0, std::nan("")};
  CHECK_THROWS_AS(conformal_quantile(with_nan, 0.1), std::invalid_argument);
}

TEST_CASE("conformal_quantile matches brute-force oracle on random inputs") {
  Rng rng(123);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_below(40));
    std::vector<double> s(n);
    for (auto& v : s) {
      v = rng.uniform() * 10.0;
      if (rng.uniform() < 0.3) v = std::floor(v);  // inject ties
    }
    const double alpha = 0.005 + 0.99 * rng.uniform();
    const double got = conformal_quantile(s, alpha);
    const double want = brute_force_conformal_quantile(s, alpha);
    if (std::isinf(want)) {
      CHECK(std::isinf(got));
    } else {
      CHECK(got == want);
    }
  }
}

TEST_CASE("conformal_quantile is nonincreasing in alpha and permutation invariant") {
  Rng rng(7);
  std::vector<double> s(25);
  for (auto& v : s) v = rng.normal();
  double prev = kInf;
  for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5, 0.9}) {
    const double q = conformal_quantile(s, alpha);
    CHECK(q <= prev);
    prev = q;
  }
  auto shuffled = s;
  shuffle(shuffled, rng);
  CHECK(conformal_quantile(shuffled, 0.1) == conformal_quantile(s, 0.1));
}

TEST_CASE("AR score and interval") {
  CHECK(ar_score(0.3, 0.5) == doctest::Approx(0.2));
  Predictor pred{Method::AR, 0.1, 0.25, 10};
  const Interval iv = ar_interval(pred, 0.6);
  CHECK(iv.lower() == doctest::Approx(0.35));
  CHECK(iv.upper() == doctest::Approx(0.85));
  CHECK(iv.length() == 0.5);  // exact: stored as 2 * qhat
  CHECK(iv.contains(0.6));
  CHECK(!iv.contains(0.9));
}

TEST_CASE("AR interval width is bitwise 2*qhat regardless of the center") {
  Rng rng(99);
  Predictor pred{Method::AR, 0.1, 0.1234567890123456, 50};
  for (int i = 0; i < 200; ++i) {
    const double center = rng.normal() * 3.0;
    CHECK(ar_interval(pred, center).length() == 2.0 * pred.qhat);
  }
}

TEST_CASE("lwr_stats worked example and population convention") {
  std::vector<double> s{0.4, 0.6};
  const LwrStats st = lwr_stats(s);
  CHECK(st.mean == doctest::Approx(0.5));
  CHECK(st.stddev == doctest::Approx(0.1));  // divide-by-p, not p-1
}

TEST_CASE("LWR calibrate/interval and degenerate samples") {
  RoundRecords records;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    CalibrationRecord r;
    for (int j = 0; j < 8; ++j) r.task_samples.push_back(0.5 + 0.1 * rng.normal());
    r.true_output = 0.5 + 0.1 * rng.normal();
    records.push_back(std::move(r));
  }
  const Predictor pred = lwr_calibrate(records, 0.1);
  CHECK(pred.method == Method::LWR);
  CHECK(pred.calibration_size == 40);
  const Interval iv = lwr_interval(pred, records[0].task_samples);
  const LwrStats st = lwr_stats(records[0].task_samples);
  CHECK(iv.lower() == doctest::Approx(st.mean - st.stddev * pred.qhat));
  CHECK(iv.upper() == doctest::Approx(st.mean + st.stddev * pred.qhat));

  std::vector<double> constant{0.5, 0.5, 0.5};
  CHECK_THROWS_AS(lwr_score(constant, 0.4), DegenerateSamplesError);
  CHECK_THROWS_AS(lwr_interval(pred, constant), DegenerateSamplesError);
}

TEST_CASE("LWR score is affine equivariant") {
  std::vector<double> s{0.1, 0.3, 0.35, 0.7};
  const double z = 0.45;
  const double base = lwr_score(s, z);
  auto scaled = s;
  const double a = 2.5, b = -0.7;
  for (auto& v : scaled) v = a * v + b;
  CHECK(lwr_score(scaled, a * z + b) == doctest::Approx(base));
}

TEST_CASE("sample_quantile worked values and properties") {
  std::vector<double> v{0.1, 0.2, 0.3, 0.4};
  CHECK(sample_quantile(0.5, v) == 0.2);    // m = ceil(0.5*4) = 2
  CHECK(sample_quantile(0.0, v) == 0.1);    // clamped to 1
  CHECK(sample_quantile(1.0, v) == 0.4);
  CHECK(sample_quantile(0.251, v) == 0.2);  // m = ceil(1.004) = 2
  // element-of and monotone in omega
  Rng rng(11);
  std::vector<double> r(9);
  for (auto& x : r) x = rng.normal();
  double prev = -kInf;
  for (double w = 0.05; w <= 1.0; w += 0.05) {
    const double q = sample_quantile(w, r);
    CHECK(std::find(r.begin(), r.end(), q) != r.end());
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("CQR score and interval, including the empty case") {
  std::vector<double> s{0.2, 0.4, 0.6, 0.8};
  const double alpha = 0.5;
  // lo = quantile(0.25) = 0.2, hi = quantile(0.75) = 0.6
  CHECK(cqr_score(s, 0.5, alpha) == doctest::Approx(-0.1));
  CHECK(cqr_score(s, 0.1, alpha) == doctest::Approx(0.1));
  CHECK(cqr_score(s, 0.9, alpha) == doctest::Approx(0.3));

  Predictor pred{Method::CQR, alpha, 0.05, 20};
  const Interval iv = cqr_interval(pred, s);
  CHECK(iv.lower() == doctest::Approx(0.15));
  CHECK(iv.upper() == doctest::Approx(0.65));

  Predictor neg{Method::CQR, alpha, -0.25, 20};
  const Interval empty = cqr_interval(neg, s);
  CHECK(empty.is_empty());
  CHECK(empty.length() == 0.0);
  CHECK(!empty.contains(0.5));
}

TEST_CASE("CQR score/interval duality: z covered iff score <= qhat") {
  Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(12);
    for (auto& v : s) v = rng.normal();
    const double alpha = 0.1 + 0.6 * rng.uniform();
    const double qhat = rng.normal() * 0.5;
    Predictor pred{Method::CQR, alpha, qhat, 30};
    const Interval iv = cqr_interval(pred, s);
    const double z = rng.normal();
    CHECK(iv.contains(z) == (cqr_score(s, z, alpha) <= qhat));
  }
}

TEST_CASE("unified calibrate/interval dispatch and method mismatch") {
  RoundRecords records;
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    CalibrationRecord r;
    for (int j = 0; j < 6; ++j) r.task_samples.push_back(rng.uniform());
    r.true_output = rng.uniform();
    records.push_back(std::move(r));
  }
  for (Method m : {Method::AR, Method::LWR, Method::CQR}) {
    const Predictor pred = calibrate(m, records, 0.2);
    CHECK(pred.method == m);
    (void)interval(pred, records[0].task_samples);
  }
  Predictor pred = calibrate(Method::AR, records, 0.2);
  CHECK_THROWS_AS(lwr_interval(pred, records[0].task_samples), MethodMismatchError);
  CHECK_THROWS_AS(cqr_interval(pred, records[0].task_samples), MethodMismatchError);
}

TEST_CASE("uncalibratable small n yields the whole line (or empty never)") {
  RoundRecords records(3);
  for (auto& r : records) {
    r.task_samples = {0.1, 0.2, 0.9};
    r.true_output = 0.3;
  }
  const Predictor pred = ar_calibrate(records, 0.01);
  CHECK(std::isinf(pred.qhat));
  const Interval iv = ar_interval(pred, 0.5);
  CHECK(std::isinf(iv.length()));
  CHECK(iv.contains(-1e9));
  CHECK(iv.contains(1e9));
}

TEST_CASE("clamp_interval") {
  const Interval iv(-0.2, 1.4);
  const Interval c = clamp_interval(iv, 0.0, 1.0);
  CHECK(c.lower() == 0.0);
  CHECK(c.upper() == 1.0);
  const Interval inside(0.2, 0.3);
  const Interval c2 = clamp_interval(inside, 0.0, 1.0);
  CHECK(c2.lower() == 0.2);
  CHECK(c2.upper() == 0.3);
  const Interval empty = clamp_interval(Interval(2.0, 3.0), 0.0, 1.0);
  CHECK(empty.is_empty());
}
