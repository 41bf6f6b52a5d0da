#pragma once

#include "taskuq/conformal.hpp"
#include "taskuq/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace taskuq {

// One calibrated predictor per measurement round plus the stopping threshold.
struct MultiRoundPlan {
  std::vector<Predictor> predictors;
  double tau = 0.0;
  std::vector<double> accelerations;
};

struct MultiRoundOutcome {
  int final_round = 0;  // 1-based
  bool exhausted = false;
  bool degenerate = false;  // an LWR round hit stddev == 0, treated as width 0
  Interval final_interval = Interval::empty_set();
  double true_output = 0.0;
  bool covered = false;
  std::optional<double> center_err;  // absent for empty or unbounded intervals
};

struct RoundHistogram {
  std::vector<std::int64_t> counts;  // per round 1..C
  std::int64_t exhausted = 0;
  std::vector<double> fractions() const;  // per round then exhausted; sums to 1
};

// Evaluates rounds in order, stopping at the first interval width below tau.
// If no round qualifies the final round's interval is returned with the
// exhausted flag set.
MultiRoundOutcome run_sample(const MultiRoundPlan& plan,
                             const std::vector<std::vector<double>>& per_round_task_samples,
                             double true_output);

double center_error(const Interval& iv, double z);

// Harmonic-style mean of the accelerations at each outcome's final round.
double average_acceleration(const std::vector<MultiRoundOutcome>& outcomes,
                            const std::vector<double>& accelerations);

// Consecutive outcomes grouped in blocks of group_size; per-group max center
// error (the last group may be short).
std::vector<double> volume_max_center_error(const std::vector<MultiRoundOutcome>& outcomes,
                                            int group_size);

RoundHistogram round_distribution(const std::vector<MultiRoundOutcome>& outcomes,
                                  int num_rounds);

}  // namespace taskuq
