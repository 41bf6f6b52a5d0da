#include "taskuq/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace taskuq {

namespace {

constexpr double kRankSlack = 1e-9;

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
}

double kth_smallest(std::span<const double> values, std::size_t k) {
  std::vector<double> v(values.begin(), values.end());
  auto nth = v.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(v.begin(), nth, v.end());
  return *nth;
}

void require_method(const Predictor& pred, Method m) {
  if (pred.method != m) {
    throw MethodMismatchError(std::string("predictor method is ") +
                              to_string(pred.method) + ", expected " +
                              to_string(m));
  }
}

std::vector<double> require_records(const RoundRecords& records) {
  if (records.empty()) throw std::invalid_argument("empty calibration set");
  std::vector<double> scores;
  scores.reserve(records.size());
  return scores;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::AR: return "ar";
    case Method::LWR: return "lwr";
    case Method::CQR: return "cqr";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "ar" || name == "AR") return Method::AR;
  if (name == "lwr" || name == "LWR") return Method::LWR;
  if (name == "cqr" || name == "CQR") return Method::CQR;
  throw std::invalid_argument("unknown method: " + name);
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha);
  const double level = (1.0 - alpha) * static_cast<double>(n + 1);
  const double k = std::ceil(level - kRankSlack);
  if (k < 1.0) return 1;
  return static_cast<std::size_t>(k);
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::invalid_argument("conformal_quantile: empty score list");
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("conformal_quantile: scores must be finite");
    }
  }
  const std::size_t n = scores.size();
  const std::size_t k = conformal_rank(n, alpha);
  if (k > n) return kInf;
  return kth_smallest(scores, k);
}

double ar_score(double z_hat, double z) { return std::abs(z - z_hat); }

double ar_reduce(std::span<const double> task_samples, ArReduce rule) {
  if (task_samples.empty()) throw std::invalid_argument("ar_reduce: empty task samples");
  switch (rule) {
    case ArReduce::First:
      return task_samples.front();
    case ArReduce::Mean:
      return std::accumulate(task_samples.begin(), task_samples.end(), 0.0) /
             static_cast<double>(task_samples.size());
  }
  throw std::invalid_argument("ar_reduce: unknown rule");
}

Predictor ar_calibrate(const RoundRecords& records, double alpha, ArReduce reduce) {
  auto scores = require_records(records);
  for (const auto& r : records) {
    scores.push_back(ar_score(ar_reduce(r.task_samples, reduce), r.true_output));
  }
  return {Method::AR, alpha, conformal_quantile(scores, alpha), records.size()};
}

Interval ar_interval(const Predictor& pred, double z_hat) {
  require_method(pred, Method::AR);
  if (std::isinf(pred.qhat)) return Interval::all_reals();
  return {z_hat - pred.qhat, z_hat + pred.qhat, 2.0 * pred.qhat};
}

LwrStats lwr_stats(std::span<const double> task_samples) {
  if (task_samples.empty()) throw std::invalid_argument("lwr_stats: empty task samples");
  const double p = static_cast<double>(task_samples.size());
  const double mean =
      std::accumulate(task_samples.begin(), task_samples.end(), 0.0) / p;
  double ss = 0.0;
  for (double s : task_samples) ss += (s - mean) * (s - mean);
  return {mean, std::sqrt(ss / p)};
}

double lwr_score(std::span<const double> task_samples, double z) {
  const LwrStats st = lwr_stats(task_samples);
  if (st.stddev == 0.0) {
    throw DegenerateSamplesError("lwr_score: task samples are all identical");
  }
  return std::abs(z - st.mean) / st.stddev;
}

Predictor lwr_calibrate(const RoundRecords& records, double alpha) {
  auto scores = require_records(records);
  for (const auto& r : records) scores.push_back(lwr_score(r.task_samples, r.true_output));
  return {Method::LWR, alpha, conformal_quantile(scores, alpha), records.size()};
}

Interval lwr_interval(const Predictor& pred, std::span<const double> task_samples) {
  require_method(pred, Method::LWR);
  const LwrStats st = lwr_stats(task_samples);
  if (st.stddev == 0.0) {
    throw DegenerateSamplesError("lwr_interval: task samples are all identical");
  }
  if (std::isinf(pred.qhat)) return Interval::all_reals();
  const double half = st.stddev * pred.qhat;
  return {st.mean - half, st.mean + half, 2.0 * half};
}

double sample_quantile(double omega, std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty values");
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("sample_quantile: omega must lie in [0, 1]");
  }
  const std::size_t p = values.size();
  const double raw = std::ceil(omega * static_cast<double>(p) - kRankSlack);
  std::size_t m = raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
  m = std::min(m, p);
  return kth_smallest(values, m);
}

double cqr_score(std::span<const double> task_samples, double z, double alpha) {
  check_alpha(alpha);
  const double lo = sample_quantile(alpha / 2.0, task_samples);
  const double hi = sample_quantile(1.0 - alpha / 2.0, task_samples);
  return std::max(lo - z, z - hi);
}

Predictor cqr_calibrate(const RoundRecords& records, double alpha) {
  auto scores = require_records(records);
  for (const auto& r : records) {
    scores.push_back(cqr_score(r.task_samples, r.true_output, alpha));
  }
  return {Method::CQR, alpha, conformal_quantile(scores, alpha), records.size()};
}

Interval cqr_interval(const Predictor& pred, std::span<const double> task_samples) {
  require_method(pred, Method::CQR);
  if (std::isinf(pred.qhat)) return Interval::all_reals();
  const double lo = sample_quantile(pred.alpha / 2.0, task_samples);
  const double hi = sample_quantile(1.0 - pred.alpha / 2.0, task_samples);
  return {lo - pred.qhat, hi + pred.qhat};
}

Predictor calibrate(Method method, const RoundRecords& records, double alpha,
                    ArReduce reduce) {
  switch (method) {
    case Method::AR: return ar_calibrate(records, alpha, reduce);
    case Method::LWR: return lwr_calibrate(records, alpha);
    case Method::CQR: return cqr_calibrate(records, alpha);
  }
  throw std::invalid_argument("calibrate: unknown method");
}

Interval interval(const Predictor& pred, std::span<const double> task_samples,
                  ArReduce reduce) {
  switch (pred.method) {
    case Method::AR: return ar_interval(pred, ar_reduce(task_samples, reduce));
    case Method::LWR: return lwr_interval(pred, task_samples);
    case Method::CQR: return cqr_interval(pred, task_samples);
  }
  throw std::invalid_argument("interval: unknown method");
}

Interval clamp_interval(const Interval& iv, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp_interval: lo > hi");
  if (iv.is_empty()) return iv;
  return {std::max(iv.lower(), lo), std::min(iv.upper(), hi)};
}

}  // namespace taskuq
