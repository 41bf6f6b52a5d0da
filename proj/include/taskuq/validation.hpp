#pragma once

#include "taskuq/conformal.hpp"
#include "taskuq/rng.hpp"
#include "taskuq/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace taskuq {

// Default size-stratification bin edges for interval lengths.
inline const std::vector<double> kDefaultSizeBins = {0.0, 0.05, 0.1, 0.15, 0.2, 1.0};

// Beta-Binomial law of the empirical coverage under exchangeability:
// EC * n_test ~ BetaBin(n_test, a, b) with a = ceil((1-alpha)(n_cal+1)),
// b = n_cal + 1 - a, matching the rank used by the conformal quantile.
struct CoverageDistribution {
  std::int64_t n_test = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;

  double mean_coverage() const;      // E[EC]
  double variance_coverage() const;  // Var[EC]
};

struct StratumCoverage {
  double lower = 0.0;
  double upper = 0.0;
  bool overflow = false;  // lengths beyond the last edge, including infinite
  std::int64_t count = 0;
  std::int64_t covered = 0;

  std::optional<double> coverage() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(covered) / static_cast<double>(count);
  }
};

struct ClassCoverage {
  std::int64_t count0 = 0;
  std::int64_t covered0 = 0;
  std::int64_t count1 = 0;
  std::int64_t covered1 = 0;

  std::optional<double> coverage0() const {
    if (count0 == 0) return std::nullopt;
    return static_cast<double>(covered0) / static_cast<double>(count0);
  }
  std::optional<double> coverage1() const {
    if (count1 == 0) return std::nullopt;
    return static_cast<double>(covered1) / static_cast<double>(count1);
  }
};

double empirical_coverage(const std::vector<Interval>& intervals,
                          const std::vector<double>& zs);
double mean_interval_length(const std::vector<Interval>& intervals);

CoverageDistribution coverage_distribution(std::int64_t n_test, std::int64_t n_cal,
                                           double alpha);
double beta_binomial_pmf(const CoverageDistribution& dist, std::int64_t k);
double sample_coverage(const CoverageDistribution& dist, Rng& rng);

ClassCoverage class_conditional_coverage(const std::vector<Interval>& intervals,
                                         const std::vector<double>& zs,
                                         const std::vector<int>& labels);
std::vector<StratumCoverage> size_stratified_coverage(
    const std::vector<Interval>& intervals, const std::vector<double>& zs,
    const std::vector<double>& bin_edges);

struct TrialMetrics {
  double ec = 0.0;
  double mil = 0.0;
  std::int64_t covered = 0;  // covered count on the test fold
  ClassCoverage class_cov;
  std::vector<StratumCoverage> strata;
};

struct MonteCarloOptions {
  Method method = Method::AR;
  double alpha = 0.05;
  int trials = 1000;
  double cal_fraction = 0.7;
  std::uint64_t seed = 0;
  int workers = 1;
  int truncate_p = 0;  // use only the first truncate_p task samples; 0 = all
  ArReduce reduce = ArReduce::First;
  std::vector<double> size_bins = kDefaultSizeBins;
};

struct MonteCarloSummary {
  Method method = Method::AR;
  double alpha = 0.0;
  int trials = 0;
  std::int64_t n_cal = 0;
  std::int64_t n_test = 0;
  double mean_ec = 0.0;
  double std_ec = 0.0;
  double mean_mil = 0.0;
  double std_mil = 0.0;
  CoverageDistribution theory;
  // counts of the per-trial covered count, support 0..n_test
  std::vector<std::int64_t> ec_histogram;
  ClassCoverage class_total;                // pooled over trials
  std::vector<StratumCoverage> strata_total;  // pooled over trials
};

struct MonteCarloResult {
  std::vector<TrialMetrics> trials;
  MonteCarloSummary summary;
};

// T random calibration/test partitions of one round's records; deterministic
// given the seed and invariant to the worker count.
MonteCarloResult monte_carlo(const RoundRecords& records, const MonteCarloOptions& opts);

}  // namespace taskuq
