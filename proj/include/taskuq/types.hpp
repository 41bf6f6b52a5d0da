#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskuq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DegenerateSamplesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MethodMismatchError : std::logic_error {
  using std::logic_error::logic_error;
};

struct UndefinedCenterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Method { AR, LWR, CQR };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

// Closed interval on the extended reals. lower > upper encodes the empty set.
// The length is stored at construction: symmetric constructors (AR, LWR) pass
// the exact width so that it does not pick up round-off from the endpoints.
class Interval {
 public:
  Interval(double lower, double upper)
      : lower_(lower), upper_(upper), length_(std::max(0.0, upper - lower)) {}

  Interval(double lower, double upper, double length)
      : lower_(lower), upper_(upper), length_(length) {}

  static Interval all_reals() { return {-kInf, kInf, kInf}; }
  static Interval empty_set() { return {1.0, -1.0, 0.0}; }

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double length() const { return length_; }

  bool is_empty() const { return lower_ > upper_; }
  bool contains(double z) const {
    return lower_ <= z && z <= upper_;
  }
  bool bounded() const {
    return !is_empty() && std::isfinite(lower_) && std::isfinite(upper_);
  }

 private:
  double lower_;
  double upper_;
  double length_;
};

// One calibration example: task outputs of the p reconstructions, the task
// output of the true signal, and a binary class label.
struct CalibrationRecord {
  std::vector<double> task_samples;
  double true_output = 0.0;
  int class_label = 0;
};

struct LwrStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// A calibrated interval constructor. qhat == +inf marks the uncalibratable
// case where ceil((1-alpha)(n+1)) exceeds the calibration size.
struct Predictor {
  Method method = Method::AR;
  double alpha = 0.0;
  double qhat = 0.0;
  std::size_t calibration_size = 0;
};

using RoundRecords = std::vector<CalibrationRecord>;
using Dataset = std::vector<RoundRecords>;  // indexed [round][sample]

}  // namespace taskuq
