#pragma once

#include "taskuq/types.hpp"

#include <span>

namespace taskuq {

// How AR collapses p task samples to a single point estimate.
enum class ArReduce { First, Mean };

// Order-statistic rank ceil((1-alpha)(n+1)), with a small slack so that
// products like 0.95*20 that are integers in exact arithmetic do not get
// bumped up by round-off. May exceed n, in which case the quantile is +inf.
std::size_t conformal_rank(std::size_t n, double alpha);

// k-th smallest calibration score with k = conformal_rank(n, alpha),
// or +inf when k > n.
double conformal_quantile(std::span<const double> scores, double alpha);

double ar_score(double z_hat, double z);
double ar_reduce(std::span<const double> task_samples, ArReduce rule);
Predictor ar_calibrate(const RoundRecords& records, double alpha,
                       ArReduce reduce = ArReduce::First);
Interval ar_interval(const Predictor& pred, double z_hat);

// Mean and population (divide-by-p) standard deviation of the task samples.
LwrStats lwr_stats(std::span<const double> task_samples);
double lwr_score(std::span<const double> task_samples, double z);
Predictor lwr_calibrate(const RoundRecords& records, double alpha);
Interval lwr_interval(const Predictor& pred, std::span<const double> task_samples);

// m-th smallest value with m = clamp(ceil(omega * p), 1, p).
double sample_quantile(double omega, std::span<const double> values);
double cqr_score(std::span<const double> task_samples, double z, double alpha);
Predictor cqr_calibrate(const RoundRecords& records, double alpha);
Interval cqr_interval(const Predictor& pred, std::span<const double> task_samples);

Predictor calibrate(Method method, const RoundRecords& records, double alpha,
                    ArReduce reduce = ArReduce::First);
Interval interval(const Predictor& pred, std::span<const double> task_samples,
                  ArReduce reduce = ArReduce::First);

// Optional post-processor: intersect with a known output range [lo, hi].
Interval clamp_interval(const Interval& iv, double lo, double hi);

}  // namespace taskuq
