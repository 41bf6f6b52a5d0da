#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taskuq/testbed.hpp"
#include "taskuq/validation.hpp"

#include <cmath>
#include <numeric>

using namespace taskuq;

TEST_CASE("coverage_distribution parameters reuse the conformal rank") {
  const CoverageDistribution d = coverage_distribution(100, 19, 0.05);
  CHECK(d.n_test == 100);
  CHECK(d.a == 19);  // ceil(0.95 * 20)
  CHECK(d.b == 1);
  CHECK(d.mean_coverage() == doctest::Approx(19.0 / 20.0));

  const CoverageDistribution e = coverage_distribution(500, 99, 0.1);
  CHECK(e.a == 90);
  CHECK(e.b == 10);
  CHECK(e.mean_coverage() == doctest::Approx(0.9));
  // Var[EC] = ab(a+b+n)/((a+b)^2 (a+b+1) n)
  const double a = 90, b = 10, n = 500;
  const double want = a * b * (a + b + n) / ((a + b) * (a + b) * (a + b + 1) * n);
  CHECK(e.variance_coverage() == doctest::Approx(want));
}

TEST_CASE("beta_binomial_pmf normalizes and handles edge shapes") {
  for (auto [n_test, n_cal, alpha] :
       {std::tuple{50L, 19L, 0.05}, {180L, 400L, 0.1}, {1000L, 99L, 0.1}}) {
    const CoverageDistribution d = coverage_distribution(n_test, n_cal, alpha);
    double total = 0.0;
    double mean = 0.0;
    for (std::int64_t k = 0; k <= d.n_test; ++k) {
      const double p = beta_binomial_pmf(d, k);
      CHECK(p >= 0.0);
      total += p;
      mean += p * static_cast<double>(k);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mean / static_cast<double>(d.n_test) ==
          doctest::Approx(d.mean_coverage()).epsilon(1e-9));
  }
  // a = b = 1 on one test point: uniform over {0, 1}... BetaBin(1,1,1) = 1/2
  CoverageDistribution u{1, 1, 1};
  CHECK(beta_binomial_pmf(u, 0) == doctest::Approx(0.5));
  CHECK(beta_binomial_pmf(u, 1) == doctest::Approx(0.5));
}

TEST_CASE("sample_coverage matches the law's first two moments") {
  const CoverageDistribution d = coverage_distribution(200, 59, 0.1);
  Rng rng(77);
  const int reps = 20000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double c = sample_coverage(d, rng);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    s1 += c;
    s2 += c * c;
  }
  const double mean = s1 / reps;
  const double var = s2 / reps - mean * mean;
  CHECK(mean == doctest::Approx(d.mean_coverage()).epsilon(0.01));
  CHECK(var == doctest::Approx(d.variance_coverage()).epsilon(0.15));
}

TEST_CASE("empirical_coverage and mean_interval_length") {
  std::vector<Interval> ivs{Interval(0.0, 1.0), Interval(0.4, 0.5), Interval::empty_set()};
  std::vector<double> zs{0.5, 0.45, 0.2};
  CHECK(empirical_coverage(ivs, zs) == doctest::Approx(2.0 / 3.0));
  CHECK(mean_interval_length(ivs) == doctest::Approx((1.0 + 0.1 + 0.0) / 3.0));
  ivs.push_back(Interval::all_reals());
  zs.push_back(0.0);
  CHECK(std::isinf(mean_interval_length(ivs)));
  CHECK(empirical_coverage(ivs, zs) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("class_conditional_coverage splits by label") {
  std::vector<Interval> ivs{Interval(0, 1), Interval(0, 0.1), Interval(0, 1), Interval(2, 3)};
  std::vector<double> zs{0.5, 0.5, 0.5, 0.5};
  std::vector<int> labels{0, 0, 1, 1};
  const ClassCoverage cc = class_conditional_coverage(ivs, zs, labels);
  CHECK(cc.count0 == 2);
  CHECK(cc.covered0 == 1);
  CHECK(cc.count1 == 2);
  CHECK(cc.covered1 == 1);
  CHECK(*cc.coverage0() == doctest::Approx(0.5));

  const ClassCoverage only0 = class_conditional_coverage({Interval(0, 1)}, {0.5}, {0});
  CHECK(!only0.coverage1().has_value());
}

TEST_CASE("size_stratified_coverage bins by length with an overflow stratum") {
  std::vector<Interval> ivs{
      Interval(0.0, 0.04),   // bin (0, 0.05]
      Interval(0.0, 0.12),   // bin (0.1, 0.15]
      Interval(0.0, 0.5),    // bin (0.2, 1]
      Interval::all_reals()  // overflow
  };
  std::vector<double> zs{0.02, 0.5, 0.25, 0.0};
  const auto strata = size_stratified_coverage(ivs, zs, kDefaultSizeBins);
  REQUIRE(strata.size() == 6);  // 5 bins + overflow
  CHECK(strata[0].count == 1);
  CHECK(strata[0].covered == 1);
  CHECK(strata[2].count == 1);
  CHECK(strata[2].covered == 0);
  CHECK(strata[4].count == 1);
  CHECK(strata.back().overflow);
  CHECK(strata.back().count == 1);
  CHECK(strata.back().covered == 1);
  std::int64_t total = 0;
  for (const auto& s : strata) total += s.count;
  CHECK(total == 4);
}

namespace {

RoundRecords toy_records(int n, int p, std::uint64_t seed) {
  const Problem problem = make_problem(ProblemSpec{}, seed);
  const Dataset d = generate_dataset(problem, n, p, seed + 1);
  return d[1];
}

}  // namespace

TEST_CASE("monte_carlo is deterministic and worker-invariant") {
  const RoundRecords records = toy_records(80, 8, 60);
  MonteCarloOptions opts;
  opts.method = Method::LWR;
  opts.alpha = 0.1;
  opts.trials = 50;
  opts.cal_fraction = 0.7;
  opts.seed = 5;
  opts.workers = 1;
  const MonteCarloResult a = monte_carlo(records, opts);
  opts.workers = 4;
  const MonteCarloResult b = monte_carlo(records, opts);
  REQUIRE(a.trials.size() == 50);
  for (std::size_t t = 0; t < a.trials.size(); ++t) {
    CHECK(a.trials[t].ec == b.trials[t].ec);
    CHECK(a.trials[t].mil == b.trials[t].mil);
  }
  CHECK(a.summary.mean_ec == b.summary.mean_ec);
  CHECK(a.summary.ec_histogram == b.summary.ec_histogram);
}

TEST_CASE("monte_carlo summary shapes and histogram totals") {
  const RoundRecords records = toy_records(60, 8, 61);
  MonteCarloOptions opts;
  opts.method = Method::CQR;
  opts.alpha = 0.2;
  opts.trials = 30;
  opts.seed = 6;
  const MonteCarloResult r = monte_carlo(records, opts);
  CHECK(r.summary.n_cal + r.summary.n_test == 60);
  CHECK(r.summary.theory.a == static_cast<std::int64_t>(conformal_rank(
                                  static_cast<std::size_t>(r.summary.n_cal), 0.2)));
  CHECK(static_cast<std::int64_t>(r.summary.ec_histogram.size()) == r.summary.n_test + 1);
  const auto total = std::accumulate(r.summary.ec_histogram.begin(),
                                     r.summary.ec_histogram.end(), std::int64_t{0});
  CHECK(total == 30);
  CHECK(r.summary.class_total.count0 + r.summary.class_total.count1 ==
        30 * r.summary.n_test);
}

TEST_CASE("monte_carlo with one trial and truncated p") {
  const RoundRecords records = toy_records(40, 16, 62);
  MonteCarloOptions opts;
  opts.method = Method::LWR;
  opts.trials = 1;
  opts.seed = 7;
  opts.truncate_p = 4;
  const MonteCarloResult r = monte_carlo(records, opts);
  REQUIRE(r.trials.size() == 1);
  CHECK(r.summary.std_ec == 0.0);
  CHECK(r.trials[0].ec >= 0.0);
  CHECK(r.trials[0].ec <= 1.0);
}

TEST_CASE("monte_carlo mean coverage is near 1 - alpha") {
  const RoundRecords records = toy_records(150, 8, 63);
  MonteCarloOptions opts;
  opts.method = Method::AR;
  opts.alpha = 0.1;
  opts.trials = 400;
  opts.seed = 8;
  opts.workers = 4;
  const MonteCarloResult r = monte_carlo(records, opts);
  const double se = r.summary.std_ec / std::sqrt(400.0);
  CHECK(r.summary.mean_ec > r.summary.theory.mean_coverage() - 5.0 * se - 1e-12);
  CHECK(r.summary.mean_ec < r.summary.theory.mean_coverage() + 5.0 * se + 1e-12);
}
