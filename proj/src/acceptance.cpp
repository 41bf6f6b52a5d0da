#include "taskuq/acceptance.hpp"

#include "taskuq/commands.hpp"
#include "taskuq/conformal.hpp"
#include "taskuq/io.hpp"
#include "taskuq/multiround.hpp"
#include "taskuq/oracles.hpp"
#include "taskuq/testbed.hpp"
#include "taskuq/validation.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

namespace taskuq {

namespace fs = std::filesystem;

namespace {

constexpr double kAlpha = 0.1;          // marginal-coverage settings
constexpr int kDatasetSize = 600;       // 420 cal / 180 test per trial
constexpr int kSamplesP = 32;
constexpr double kProtocolAlpha = 0.05;  // multi-round settings
constexpr int kProtocolTest = 500;
constexpr double kProtocolTau = 0.2;

std::string f3(double v) {
  std::ostringstream ss;
  ss.precision(5);
  ss << v;
  return ss.str();
}

struct Shared {
  Problem problem;
  Dataset dataset;                                  // n=600, p=32
  std::map<std::pair<Method, int>, MonteCarloResult> mc;  // per (method, round)
  int trials = 0;
};

MonteCarloResult run_mc(const Shared& shared, const AcceptanceOptions& opts, Method m,
                        int round, int truncate_p) {
  MonteCarloOptions mco;
  mco.method = m;
  mco.alpha = kAlpha;
  mco.trials = opts.trials;
  mco.cal_fraction = 0.7;
  mco.seed = derive_seed(opts.seed, 1000 + static_cast<std::uint64_t>(round) * 100 +
                                        static_cast<std::uint64_t>(m) * 10 +
                                        static_cast<std::uint64_t>(truncate_p));
  mco.workers = opts.workers;
  mco.truncate_p = truncate_p;
  return monte_carlo(shared.dataset[static_cast<std::size_t>(round - 1)], mco);
}

CriterionResult quantile_oracle_criterion(const AcceptanceOptions& opts) {
  Rng rng(derive_seed(opts.seed, 1));
  const auto start = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + rng.uniform_below(50);
    std::vector<double> scores(n);
    const bool ties = rng.uniform() < 0.5;
    for (auto& s : scores) {
      s = ties ? static_cast<double>(rng.uniform_below(8)) : rng.normal();
    }
    const double alpha = 0.001 + 0.998 * rng.uniform();
    const double got = conformal_quantile(scores, alpha);
    const double want = brute_force_conformal_quantile(scores, alpha);
    if (got != want) ++mismatches;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool passed = mismatches == 0 && elapsed < 1.0;
  return {1, "quantile-oracle-equivalence", passed,
          std::to_string(mismatches) + " mismatches of 1000, " + f3(elapsed) + " s"};
}

CriterionResult marginal_coverage_criterion(const Shared& shared) {
  bool passed = true;
  std::ostringstream detail;
  double worst_margin = kInf;
  for (const auto& [key, res] : shared.mc) {
    const auto& s = res.summary;
    const double se = s.std_ec / std::sqrt(static_cast<double>(s.trials));
    const double lo = (1.0 - kAlpha) - 4.0 * se;
    const double hi = (1.0 - kAlpha) + 1.0 / static_cast<double>(s.n_cal + 1) + 4.0 * se;
    const double margin = std::min(s.mean_ec - lo, hi - s.mean_ec);
    worst_margin = std::min(worst_margin, margin);
    if (!(s.mean_ec >= lo && s.mean_ec <= hi)) {
      passed = false;
      detail << to_string(key.first) << " r" << key.second << " mean EC " << f3(s.mean_ec)
             << " outside [" << f3(lo) << "," << f3(hi) << "]; ";
    }
  }
  if (passed) detail << "all 12 method/round means in band, worst margin " << f3(worst_margin);
  return {2, "marginal-coverage", passed, detail.str()};
}

CriterionResult beta_binomial_criterion(const Shared& shared) {
  bool passed = true;
  std::ostringstream detail;
  for (const auto& [key, res] : shared.mc) {
    const auto& s = res.summary;
    const double t = static_cast<double>(s.trials);
    const double se_mean = s.std_ec / std::sqrt(t);
    const double mean_err = std::abs(s.mean_ec - s.theory.mean_coverage());

    double m4 = 0.0;
    for (const auto& tm : res.trials) {
      const double d = tm.ec - s.mean_ec;
      m4 += d * d * d * d;
    }
    m4 /= t;
    const double var = s.std_ec * s.std_ec;
    const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / t);
    const double var_err = std::abs(var - s.theory.variance_coverage());
    if (mean_err > 4.0 * se_mean || var_err > 4.0 * se_var) {
      passed = false;
      detail << to_string(key.first) << " r" << key.second << " mean_err " << f3(mean_err)
             << " (4se " << f3(4 * se_mean) << ") var_err " << f3(var_err) << " (4se "
             << f3(4 * se_var) << "); ";
    }
  }
  double worst_norm = 0.0;
  for (std::int64_t n_test : {180, 1000, 10000}) {
    const auto dist = coverage_distribution(n_test, 420, kAlpha);
    double sum = 0.0;
    for (std::int64_t k = 0; k <= n_test; ++k) sum += beta_binomial_pmf(dist, k);
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
  }
  if (worst_norm > 1e-10) {
    passed = false;
    detail << "pmf normalization off by " << worst_norm << "; ";
  }
  if (passed) {
    detail << "moments within 4 MC SE for all 12 runs; worst pmf normalization error "
           << worst_norm;
  }
  return {3, "beta-binomial-law", passed, detail.str()};
}

CriterionResult mil_monotone_criterion(const Shared& shared) {
  bool passed = true;
  std::ostringstream detail;
  const int rounds = shared.problem.num_rounds();
  for (Method m : {Method::AR, Method::LWR, Method::CQR}) {
    detail << to_string(m) << " MIL:";
    for (int k = 1; k <= rounds; ++k) {
      detail << " " << f3(shared.mc.at({m, k}).summary.mean_mil);
    }
    detail << "; ";
    for (int k = 1; k < rounds; ++k) {
      const auto& a = shared.mc.at({m, k}).summary;
      const auto& b = shared.mc.at({m, k + 1}).summary;
      const double se = a.std_mil / std::sqrt(static_cast<double>(a.trials));
      if (b.mean_mil > a.mean_mil + se) {
        passed = false;
        detail << "increase at round " << k + 1 << "; ";
      }
    }
  }
  return {4, "mil-monotone-in-round", passed, detail.str()};
}

CriterionResult p_sensitivity_criterion(const Shared& shared, const AcceptanceOptions& opts) {
  bool passed = true;
  std::ostringstream detail;
  for (Method m : {Method::LWR, Method::CQR}) {
    double prev_mil = kInf;
    double prev_se = 0.0;
    detail << to_string(m) << " MIL(p):";
    for (int p : {2, 4, 8, 16, 32}) {
      const auto res = run_mc(shared, opts, m, 1, p);
      const auto& s = res.summary;
      detail << " " << f3(s.mean_mil);
      const double se = s.std_mil / std::sqrt(static_cast<double>(s.trials));
      if (s.mean_mil > prev_mil + prev_se) {
        passed = false;
        detail << "(increase)";
      }
      prev_mil = s.mean_mil;
      prev_se = se;
    }
    detail << "; ";
  }
  return {5, "mil-monotone-in-p", passed, detail.str()};
}

MultiRoundPlan make_plan(const Dataset& dataset, const Problem& problem, Method method,
                         double alpha, double tau, std::size_t n_cal) {
  MultiRoundPlan plan;
  plan.tau = tau;
  for (const auto& c : problem.configs) plan.accelerations.push_back(c.acceleration);
  for (const auto& round_records : dataset) {
    RoundRecords cal(round_records.begin(),
                     round_records.begin() + static_cast<std::ptrdiff_t>(n_cal));
    plan.predictors.push_back(calibrate(method, cal, alpha));
  }
  return plan;
}

std::vector<MultiRoundOutcome> run_protocol(const MultiRoundPlan& plan, const Dataset& dataset,
                                            std::size_t begin, std::size_t end) {
  std::vector<MultiRoundOutcome> outcomes;
  outcomes.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    std::vector<std::vector<double>> per_round;
    per_round.reserve(dataset.size());
    for (const auto& r : dataset) per_round.push_back(r[i].task_samples);
    outcomes.push_back(run_sample(plan, per_round, dataset.front()[i].true_output));
  }
  return outcomes;
}

CriterionResult ar_invariance_criterion(const Shared& shared) {
  bool passed = true;
  std::ostringstream detail;
  const auto& records = shared.dataset.front();
  const Predictor pred = ar_calibrate(records, kAlpha);
  const double want = 2.0 * pred.qhat;
  for (const auto& rec : records) {
    const Interval iv = ar_interval(pred, rec.task_samples.front());
    if (iv.length() != want) {
      passed = false;
      detail << "length " << iv.length() << " != 2*qhat " << want << "; ";
      break;
    }
  }

  const std::size_t n = records.size();
  const std::size_t n_cal = n * 2 / 3;
  const auto plan =
      make_plan(shared.dataset, shared.problem, Method::AR, kProtocolAlpha, kProtocolTau, n_cal);
  const auto outcomes = run_protocol(plan, shared.dataset, n_cal, n);
  const auto hist = round_distribution(outcomes, shared.problem.num_rounds());
  int nonzero = hist.exhausted > 0 ? 1 : 0;
  int atom_round = hist.exhausted > 0 ? -1 : 0;
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    if (hist.counts[k] > 0) {
      ++nonzero;
      atom_round = static_cast<int>(k + 1);
    }
  }
  if (nonzero != 1) {
    passed = false;
    detail << "AR round histogram has " << nonzero << " atoms; ";
  } else {
    detail << "all AR lengths == 2*qhat = " << f3(want) << "; protocol atom at "
           << (atom_round < 0 ? std::string("exhausted") : "round " + std::to_string(atom_round));
  }
  return {6, "ar-xhat-invariance", passed, detail.str()};
}

CriterionResult multiround_soundness_criterion(const Shared& shared,
                                               const AcceptanceOptions& opts) {
  const Dataset dataset =
      generate_dataset(shared.problem, 1000 + kProtocolTest, kSamplesP, derive_seed(opts.seed, 13));
  bool passed = true;
  std::ostringstream detail;
  const double bound =
      (1.0 - kProtocolAlpha) -
      2.0 * std::sqrt(kProtocolAlpha * (1.0 - kProtocolAlpha) / kProtocolTest);
  for (Method m : {Method::LWR, Method::CQR}) {
    const auto plan = make_plan(dataset, shared.problem, m, kProtocolAlpha, kProtocolTau, 1000);
    const auto outcomes = run_protocol(plan, dataset, 1000, dataset.front().size());
    std::int64_t hits = 0;
    bool widths_ok = true;
    for (const auto& o : outcomes) {
      if (o.covered) ++hits;
      if (!o.exhausted && !(o.final_interval.length() < kProtocolTau)) widths_ok = false;
    }
    const double coverage = static_cast<double>(hits) / static_cast<double>(outcomes.size());
    const double avg_accel = average_acceleration(outcomes, plan.accelerations);
    std::string avg_ce = "NA";
    try {
      const auto maxima = volume_max_center_error(outcomes, 8);
      avg_ce = f3(std::accumulate(maxima.begin(), maxima.end(), 0.0) /
                  static_cast<double>(maxima.size()));
    } catch (const UndefinedCenterError&) {
    }
    const auto hist = round_distribution(outcomes, shared.problem.num_rounds());
    detail << to_string(m) << ": coverage " << f3(coverage) << " (bound " << f3(bound)
           << "), avg accel " << f3(avg_accel) << ", avg max CE " << avg_ce << ", rounds [";
    for (std::size_t k = 0; k < hist.counts.size(); ++k) detail << hist.counts[k] << " ";
    detail << "| exhausted " << hist.exhausted << "]; ";
    if (!widths_ok) {
      passed = false;
      detail << "accepted width >= tau; ";
    }
    if (coverage < bound) passed = false;
  }
  return {7, "multiround-soundness", passed, detail.str()};
}

CriterionResult posterior_oracle_criterion(const Shared& shared, const AcceptanceOptions& opts) {
  Rng rng(derive_seed(opts.seed, 14));
  bool passed = true;
  std::ostringstream detail;
  double worst_mean = 0.0;
  double worst_cov = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const int d = 1 + static_cast<int>(rng.uniform_below(3));
    Problem problem;
    problem.dim = d;
    Mat b(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) b(i, j) = 0.7 * rng.normal();
    }
    problem.prior_cov = b * b.transpose() + 0.5 * Mat::Identity(d, d);
    problem.prior_mean = normal_vec(d, rng);
    problem.noise_std = 0.2 + 0.8 * rng.uniform();
    const int m2 = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(d) + 2));
    const int m1 = std::max(1, m2 / 2);
    Mat all_rows(std::max(m2, m1 + 1), d);
    for (Eigen::Index i = 0; i < all_rows.rows(); ++i) {
      for (int j = 0; j < d; ++j) all_rows(i, j) = rng.normal();
    }
    problem.configs.push_back({all_rows.topRows(m1), 2.0});
    problem.configs.push_back({all_rows.topRows(std::max(m2, m1 + 1)), 1.0});
    problem.task_weights = Vec::Ones(d);

    const Mat prior_l = chol_lower(problem.prior_cov);
    const Vec x = problem.prior_mean + prior_l * normal_vec(d, rng);
    const int k = 1 + static_cast<int>(rng.uniform_below(2));
    const auto& a = problem.configs[static_cast<std::size_t>(k - 1)].rows;
    const Vec y = a * x + problem.noise_std * normal_vec(a.rows(), rng);

    const PosteriorMoments exact = posterior_moments(problem, y, k);
    const PosteriorMoments grid = grid_posterior_moments(problem, y, k);
    worst_mean = std::max(worst_mean, (exact.mean - grid.mean).cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, (exact.cov - grid.cov).cwiseAbs().maxCoeff());
  }
  if (worst_mean > 1e-4 || worst_cov > 1e-3) {
    passed = false;
    detail << "grid mismatch: mean " << worst_mean << " cov " << worst_cov << "; ";
  } else {
    detail << "grid oracle agrees (mean err " << worst_mean << ", cov err " << worst_cov << "); ";
  }

  // covariance shrinks in the Loewner order as rows accumulate
  Rng sample_rng(derive_seed(opts.seed, 15));
  const Sample s = draw_sample(shared.problem, sample_rng);
  double min_eig = kInf;
  for (int k = 1; k < shared.problem.num_rounds(); ++k) {
    const auto cov_k =
        posterior_moments(shared.problem, measurements_at_round(s, shared.problem, k), k).cov;
    const auto cov_next = posterior_moments(
        shared.problem, measurements_at_round(s, shared.problem, k + 1), k + 1).cov;
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov_k - cov_next);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  if (min_eig < -1e-8) {
    passed = false;
    detail << "Loewner violation, min eigenvalue " << min_eig;
  } else {
    detail << "Loewner monotone (min eigenvalue " << min_eig << ")";
  }
  return {8, "posterior-oracle", passed, detail.str()};
}

CriterionResult conditional_coverage_criterion(const Shared& shared) {
  bool passed = true;
  std::ostringstream detail;
  for (const auto& [key, res] : shared.mc) {
    const auto& s = res.summary;
    const auto c0 = s.class_total.coverage0();
    const auto c1 = s.class_total.coverage1();
    if (!c0 || !c1 || s.strata_total.empty()) {
      passed = false;
      detail << to_string(key.first) << " r" << key.second << " missing diagnostics; ";
      continue;
    }
    if (std::abs(*c0 - (1.0 - kAlpha)) > 0.05 || std::abs(*c1 - (1.0 - kAlpha)) > 0.05) {
      passed = false;
      detail << to_string(key.first) << " r" << key.second << " class coverage (" << f3(*c0)
             << "," << f3(*c1) << ") off target; ";
    }
  }
  if (passed) {
    const auto& s = shared.mc.at({Method::LWR, 1}).summary;
    detail << "all per-class coverages within 5pp of " << f3(1.0 - kAlpha)
           << "; e.g. lwr r1: class0 " << f3(*s.class_total.coverage0()) << " class1 "
           << f3(*s.class_total.coverage1());
  }
  return {9, "conditional-coverage-diagnostics", passed, detail.str()};
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return read_text_file(a) == read_text_file(b);
}

CriterionResult determinism_criterion(const AcceptanceOptions& opts) {
  const fs::path base =
      fs::temp_directory_path() / ("taskuq_acceptance_" + std::to_string(opts.seed));
  std::error_code ec;
  fs::remove_all(base, ec);
  fs::create_directories(base);

  bool passed = true;
  std::ostringstream detail;
  try {
    GenerateConfig gen;
    gen.spec.dim = 8;
    gen.spec.round_rows = {2, 4, 8};
    gen.n = 60;
    gen.p = 8;
    gen.seed = derive_seed(opts.seed, 16);
    gen.out_dir = base / "gen1";
    cmd_generate(gen);
    gen.out_dir = base / "gen2";
    cmd_generate(gen);
    if (!same_bytes(base / "gen1" / "dataset.tsv", base / "gen2" / "dataset.tsv") ||
        !same_bytes(base / "gen1" / "problem.json", base / "gen2" / "problem.json")) {
      passed = false;
      detail << "generate rerun differs; ";
    }

    MonteCarloCommandConfig mc;
    mc.data_dir = base / "gen1";
    mc.trials = 50;
    mc.alpha = 0.1;
    mc.seed = derive_seed(opts.seed, 17);
    mc.workers = 1;
    mc.out_dir = base / "mc1";
    cmd_montecarlo(mc);
    mc.workers = 4;
    mc.out_dir = base / "mc2";
    cmd_montecarlo(mc);
    for (const auto& entry : fs::directory_iterator(base / "mc1")) {
      const fs::path other = base / "mc2" / entry.path().filename();
      if (!fs::exists(other) || !same_bytes(entry.path(), other)) {
        passed = false;
        detail << "montecarlo differs across worker counts: " << entry.path().filename().string()
               << "; ";
      }
    }

    MultiRoundCommandConfig mr;
    mr.data_dir = base / "gen1";
    mr.method = Method::LWR;
    mr.alpha = 0.1;
    mr.tau = 0.3;
    mr.seed = derive_seed(opts.seed, 18);
    mr.out_dir = base / "mr1";
    cmd_multiround(mr);
    mr.out_dir = base / "mr2";
    cmd_multiround(mr);
    if (!same_bytes(base / "mr1" / "outcomes.tsv", base / "mr2" / "outcomes.tsv") ||
        !same_bytes(base / "mr1" / "summary.tsv", base / "mr2" / "summary.tsv")) {
      passed = false;
      detail << "multiround rerun differs; ";
    }
  } catch (const std::exception& e) {
    passed = false;
    detail << "error: " << e.what();
  }
  fs::remove_all(base, ec);
  if (passed) detail << "generate/montecarlo/multiround byte-identical across reruns and workers";
  return {10, "determinism", passed, detail.str()};
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  std::vector<CriterionResult> results;
  results.push_back(quantile_oracle_criterion(opts));

  Shared shared;
  shared.problem = make_problem(ProblemSpec{}, derive_seed(opts.seed, 11));
  shared.dataset =
      generate_dataset(shared.problem, kDatasetSize, kSamplesP, derive_seed(opts.seed, 12));
  shared.trials = opts.trials;
  for (Method m : {Method::AR, Method::LWR, Method::CQR}) {
    for (int k = 1; k <= shared.problem.num_rounds(); ++k) {
      shared.mc.emplace(std::make_pair(m, k), run_mc(shared, opts, m, k, 0));
    }
  }

  results.push_back(marginal_coverage_criterion(shared));
  results.push_back(beta_binomial_criterion(shared));
  results.push_back(mil_monotone_criterion(shared));
  results.push_back(p_sensitivity_criterion(shared, opts));
  results.push_back(ar_invariance_criterion(shared));
  results.push_back(multiround_soundness_criterion(shared, opts));
  results.push_back(posterior_oracle_criterion(shared, opts));
  results.push_back(conditional_coverage_criterion(shared));
  results.push_back(determinism_criterion(opts));
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace taskuq
