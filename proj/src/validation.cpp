#include "taskuq/validation.hpp"

#include "taskuq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

namespace taskuq {

namespace {

double lchoose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double CoverageDistribution::mean_coverage() const {
  return static_cast<double>(a) / static_cast<double>(a + b);
}

double CoverageDistribution::variance_coverage() const {
  const double da = static_cast<double>(a);
  const double db = static_cast<double>(b);
  const double dn = static_cast<double>(n_test);
  const double s = da + db;
  const double var_count = dn * da * db * (s + dn) / (s * s * (s + 1.0));
  return var_count / (dn * dn);
}

double empirical_coverage(const std::vector<Interval>& intervals,
                          const std::vector<double>& zs) {
  if (intervals.size() != zs.size()) {
    throw std::invalid_argument("empirical_coverage: length mismatch");
  }
  if (intervals.empty()) throw std::invalid_argument("empirical_coverage: empty input");
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].contains(zs[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

double mean_interval_length(const std::vector<Interval>& intervals) {
  if (intervals.empty()) throw std::invalid_argument("mean_interval_length: empty input");
  double sum = 0.0;
  for (const auto& iv : intervals) {
    if (std::isinf(iv.length())) return kInf;
    sum += iv.length();
  }
  return sum / static_cast<double>(intervals.size());
}

CoverageDistribution coverage_distribution(std::int64_t n_test, std::int64_t n_cal,
                                           double alpha) {
  if (n_test < 1 || n_cal < 1) {
    throw std::invalid_argument("coverage_distribution: sizes must be positive");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("coverage_distribution: alpha must lie in (0, 1)");
  }
  const auto a = static_cast<std::int64_t>(
      conformal_rank(static_cast<std::size_t>(n_cal), alpha));
  const std::int64_t b = n_cal + 1 - a;
  if (a < 1 || b < 1) {
    throw std::invalid_argument("coverage_distribution: degenerate Beta parameters");
  }
  return {n_test, a, b};
}

double beta_binomial_pmf(const CoverageDistribution& dist, std::int64_t k) {
  if (k < 0 || k > dist.n_test) {
    throw std::out_of_range("beta_binomial_pmf: k out of range");
  }
  const double n = static_cast<double>(dist.n_test);
  const double dk = static_cast<double>(k);
  const double a = static_cast<double>(dist.a);
  const double b = static_cast<double>(dist.b);
  return std::exp(lchoose(n, dk) + lbeta(dk + a, n - dk + b) - lbeta(a, b));
}

double sample_coverage(const CoverageDistribution& dist, Rng& rng) {
  const double q = rng.beta(static_cast<double>(dist.a), static_cast<double>(dist.b));
  std::int64_t count = 0;
  for (std::int64_t i = 0; i < dist.n_test; ++i) {
    if (rng.uniform() < q) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(dist.n_test);
}

ClassCoverage class_conditional_coverage(const std::vector<Interval>& intervals,
                                         const std::vector<double>& zs,
                                         const std::vector<int>& labels) {
  if (intervals.size() != zs.size() || intervals.size() != labels.size()) {
    throw std::invalid_argument("class_conditional_coverage: length mismatch");
  }
  ClassCoverage cc;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const bool hit = intervals[i].contains(zs[i]);
    if (labels[i] == 0) {
      ++cc.count0;
      if (hit) ++cc.covered0;
    } else {
      ++cc.count1;
      if (hit) ++cc.covered1;
    }
  }
  return cc;
}

std::vector<StratumCoverage> size_stratified_coverage(
    const std::vector<Interval>& intervals, const std::vector<double>& zs,
    const std::vector<double>& bin_edges) {
  if (intervals.size() != zs.size()) {
    throw std::invalid_argument("size_stratified_coverage: length mismatch");
  }
  if (bin_edges.size() < 2 || !std::is_sorted(bin_edges.begin(), bin_edges.end()) ||
      std::adjacent_find(bin_edges.begin(), bin_edges.end()) != bin_edges.end()) {
    throw std::invalid_argument("size_stratified_coverage: edges must be strictly increasing");
  }
  std::vector<StratumCoverage> strata;
  for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b) {
    strata.push_back({bin_edges[b], bin_edges[b + 1], false, 0, 0});
  }
  strata.push_back({bin_edges.back(), kInf, true, 0, 0});

  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const double len = intervals[i].length();
    // right-closed bins: a boundary length belongs to the lower bin
    std::size_t idx = strata.size() - 1;
    if (len >= bin_edges.front()) {
      for (std::size_t b = 0; b + 1 < bin_edges.size(); ++b) {
        if (len <= bin_edges[b + 1]) {
          idx = b;
          break;
        }
      }
    } else {
      idx = 0;
    }
    ++strata[idx].count;
    if (intervals[i].contains(zs[i])) ++strata[idx].covered;
  }
  return strata;
}

namespace {

// Per-record state fixed across trials; only the partition is re-randomized,
// so scores and interval ingredients are computed once.
struct PreparedRecord {
  double score = 0.0;
  double z = 0.0;
  int label = 0;
  // AR: a = z_hat. LWR: a = mean, b = stddev. CQR: a = lo, b = hi.
  double a = 0.0;
  double b = 0.0;
};

Interval record_interval(Method method, const PreparedRecord& r, double qhat) {
  if (std::isinf(qhat)) return Interval::all_reals();
  switch (method) {
    case Method::AR:
      return {r.a - qhat, r.a + qhat, 2.0 * qhat};
    case Method::LWR: {
      const double half = r.b * qhat;
      return {r.a - half, r.a + half, 2.0 * half};
    }
    case Method::CQR:
      return {r.a - qhat, r.b + qhat};
  }
  throw std::invalid_argument("record_interval: unknown method");
}

std::vector<PreparedRecord> prepare_records(const RoundRecords& records,
                                            const MonteCarloOptions& opts) {
  std::vector<PreparedRecord> prepared;
  prepared.reserve(records.size());
  for (const auto& rec : records) {
    std::span<const double> samples(rec.task_samples);
    if (opts.truncate_p > 0) {
      if (static_cast<std::size_t>(opts.truncate_p) > samples.size()) {
        throw std::invalid_argument("monte_carlo: truncate_p exceeds available task samples");
      }
      samples = samples.first(static_cast<std::size_t>(opts.truncate_p));
    }
    PreparedRecord p;
    p.z = rec.true_output;
    p.label = rec.class_label;
    switch (opts.method) {
      case Method::AR:
        p.a = ar_reduce(samples, opts.reduce);
        p.score = ar_score(p.a, rec.true_output);
        break;
      case Method::LWR: {
        const LwrStats st = lwr_stats(samples);
        if (st.stddev == 0.0) {
          throw DegenerateSamplesError("monte_carlo: record with identical task samples");
        }
        p.a = st.mean;
        p.b = st.stddev;
        p.score = std::abs(rec.true_output - st.mean) / st.stddev;
        break;
      }
      case Method::CQR:
        p.a = sample_quantile(opts.alpha / 2.0, samples);
        p.b = sample_quantile(1.0 - opts.alpha / 2.0, samples);
        p.score = std::max(p.a - rec.true_output, rec.true_output - p.b);
        break;
    }
    prepared.push_back(p);
  }
  return prepared;
}

}  // namespace

MonteCarloResult monte_carlo(const RoundRecords& records, const MonteCarloOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("monte_carlo: trials must be positive");
  if (!(opts.cal_fraction > 0.0 && opts.cal_fraction < 1.0)) {
    throw std::invalid_argument("monte_carlo: cal_fraction must lie in (0, 1)");
  }
  const std::int64_t n = static_cast<std::int64_t>(records.size());
  const std::int64_t n_cal =
      static_cast<std::int64_t>(std::floor(opts.cal_fraction * static_cast<double>(n)));
  const std::int64_t n_test = n - n_cal;
  if (n_cal < 1 || n_test < 1) {
    throw std::invalid_argument("monte_carlo: dataset too small for the requested split");
  }

  const auto prepared = prepare_records(records, opts);

  std::vector<TrialMetrics> trials(static_cast<std::size_t>(opts.trials));
  parallel_for(opts.trials, opts.workers, [&](std::int64_t t) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::int64_t{0});
    shuffle(perm, rng);

    std::vector<double> cal_scores;
    cal_scores.reserve(static_cast<std::size_t>(n_cal));
    for (std::int64_t i = 0; i < n_cal; ++i) {
      cal_scores.push_back(prepared[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])].score);
    }
    const double qhat = conformal_quantile(cal_scores, opts.alpha);

    std::vector<Interval> intervals;
    std::vector<double> zs;
    std::vector<int> labels;
    intervals.reserve(static_cast<std::size_t>(n_test));
    zs.reserve(static_cast<std::size_t>(n_test));
    labels.reserve(static_cast<std::size_t>(n_test));
    for (std::int64_t i = n_cal; i < n; ++i) {
      const auto& r = prepared[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      intervals.push_back(record_interval(opts.method, r, qhat));
      zs.push_back(r.z);
      labels.push_back(r.label);
    }

    TrialMetrics& m = trials[static_cast<std::size_t>(t)];
    m.ec = empirical_coverage(intervals, zs);
    m.covered = static_cast<std::int64_t>(std::llround(m.ec * static_cast<double>(n_test)));
    m.mil = mean_interval_length(intervals);
    m.class_cov = class_conditional_coverage(intervals, zs, labels);
    m.strata = size_stratified_coverage(intervals, zs, opts.size_bins);
  });

  MonteCarloSummary s;
  s.method = opts.method;
  s.alpha = opts.alpha;
  s.trials = opts.trials;
  s.n_cal = n_cal;
  s.n_test = n_test;
  s.theory = coverage_distribution(n_test, n_cal, opts.alpha);
  s.ec_histogram.assign(static_cast<std::size_t>(n_test) + 1, 0);

  std::vector<double> ecs;
  std::vector<double> mils;
  ecs.reserve(trials.size());
  mils.reserve(trials.size());
  for (const auto& m : trials) {
    ecs.push_back(m.ec);
    mils.push_back(m.mil);
    ++s.ec_histogram[static_cast<std::size_t>(m.covered)];
    s.class_total.count0 += m.class_cov.count0;
    s.class_total.covered0 += m.class_cov.covered0;
    s.class_total.count1 += m.class_cov.count1;
    s.class_total.covered1 += m.class_cov.covered1;
    if (s.strata_total.empty()) {
      s.strata_total = m.strata;
    } else {
      for (std::size_t b = 0; b < m.strata.size(); ++b) {
        s.strata_total[b].count += m.strata[b].count;
        s.strata_total[b].covered += m.strata[b].covered;
      }
    }
  }
  s.mean_ec = mean_of(ecs);
  s.std_ec = sample_std(ecs, s.mean_ec);
  s.mean_mil = mean_of(mils);
  s.std_mil = std::isinf(s.mean_mil) ? kInf : sample_std(mils, s.mean_mil);
  return {std::move(trials), std::move(s)};
}

}  // namespace taskuq
