#include "taskuq/multiround.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace taskuq {

std::vector<double> RoundHistogram::fractions() const {
  std::int64_t total = exhausted;
  for (auto c : counts) total += c;
  std::vector<double> f;
  f.reserve(counts.size() + 1);
  for (auto c : counts) f.push_back(static_cast<double>(c) / static_cast<double>(total));
  f.push_back(static_cast<double>(exhausted) / static_cast<double>(total));
  return f;
}

MultiRoundOutcome run_sample(const MultiRoundPlan& plan,
                             const std::vector<std::vector<double>>& per_round_task_samples,
                             double true_output) {
  const std::size_t rounds = plan.predictors.size();
  if (rounds < 2 || plan.accelerations.size() != rounds) {
    throw std::invalid_argument("run_sample: plan needs >= 2 rounds with matching accelerations");
  }
  if (per_round_task_samples.size() != rounds) {
    throw std::invalid_argument("run_sample: wrong number of per-round sample lists");
  }
  if (!(plan.tau > 0.0)) throw std::invalid_argument("run_sample: tau must be positive");

  MultiRoundOutcome out;
  out.true_output = true_output;
  for (std::size_t k = 0; k < rounds; ++k) {
    const auto& pred = plan.predictors[k];
    const auto& samples = per_round_task_samples[k];
    Interval iv = Interval::empty_set();
    bool degenerate = false;
    try {
      iv = interval(pred, samples);
    } catch (const DegenerateSamplesError&) {
      if (pred.method != Method::LWR) throw;
      // identical samples mean zero predicted spread; accept as width 0
      const LwrStats st = lwr_stats(samples);
      iv = Interval(st.mean, st.mean, 0.0);
      degenerate = true;
    } catch (const std::exception& e) {
      throw std::runtime_error("run_sample: round " + std::to_string(k + 1) + ": " + e.what());
    }
    out.final_round = static_cast<int>(k + 1);
    out.final_interval = iv;
    out.degenerate = out.degenerate || degenerate;
    if (iv.length() < plan.tau) {
      out.exhausted = false;
      break;
    }
    out.exhausted = true;
  }
  out.covered = out.final_interval.contains(true_output);
  if (!out.final_interval.is_empty() && out.final_interval.bounded()) {
    out.center_err = center_error(out.final_interval, true_output);
  }
  return out;
}

double center_error(const Interval& iv, double z) {
  if (iv.is_empty() || !iv.bounded()) {
    throw UndefinedCenterError("center_error: interval has no finite midpoint");
  }
  return std::abs(z - 0.5 * (iv.lower() + iv.upper()));
}

double average_acceleration(const std::vector<MultiRoundOutcome>& outcomes,
                            const std::vector<double>& accelerations) {
  if (outcomes.empty()) throw std::invalid_argument("average_acceleration: no outcomes");
  double sum_inv = 0.0;
  for (const auto& o : outcomes) {
    const auto idx = static_cast<std::size_t>(o.final_round - 1);
    if (idx >= accelerations.size()) {
      throw std::invalid_argument("average_acceleration: final round beyond acceleration list");
    }
    sum_inv += 1.0 / accelerations[idx];
  }
  return static_cast<double>(outcomes.size()) / sum_inv;
}

std::vector<double> volume_max_center_error(const std::vector<MultiRoundOutcome>& outcomes,
                                            int group_size) {
  if (outcomes.empty()) throw std::invalid_argument("volume_max_center_error: no outcomes");
  if (group_size < 1) throw std::invalid_argument("volume_max_center_error: group_size must be positive");
  std::vector<double> maxima;
  for (std::size_t start = 0; start < outcomes.size();
       start += static_cast<std::size_t>(group_size)) {
    double group_max = 0.0;
    const std::size_t end =
        std::min(outcomes.size(), start + static_cast<std::size_t>(group_size));
    for (std::size_t i = start; i < end; ++i) {
      if (!outcomes[i].center_err) {
        throw UndefinedCenterError("volume_max_center_error: outcome without a finite midpoint");
      }
      group_max = std::max(group_max, *outcomes[i].center_err);
    }
    maxima.push_back(group_max);
  }
  return maxima;
}

RoundHistogram round_distribution(const std::vector<MultiRoundOutcome>& outcomes,
                                  int num_rounds) {
  if (outcomes.empty()) throw std::invalid_argument("round_distribution: no outcomes");
  RoundHistogram h;
  h.counts.assign(static_cast<std::size_t>(num_rounds), 0);
  for (const auto& o : outcomes) {
    if (o.exhausted) {
      ++h.exhausted;
    } else {
      ++h.counts.at(static_cast<std::size_t>(o.final_round - 1));
    }
  }
  return h;
}

}  // namespace taskuq
