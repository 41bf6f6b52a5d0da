#include "taskuq/commands.hpp"

#include "taskuq/conformal.hpp"
#include "taskuq/multiround.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace taskuq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "NA";
}

json opt_json(const std::optional<double>& v) {
  return v ? json_num(*v) : json(nullptr);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir.string());
}

// Tabular output: '#' header lines carry the resolved config; the first
// non-comment line names the columns. The JSON variant is one document with
// the same config object and a rows array.
void write_rows(const fs::path& path, const json& config,
                const std::vector<std::string>& columns,
                const std::vector<std::vector<std::string>>& table_rows,
                const std::vector<json>& json_rows, OutFormat format) {
  std::ostringstream out;
  if (format == OutFormat::Table) {
    out << "# config " << config.dump() << "\n";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << (c == 0 ? "" : "\t") << columns[c];
    }
    out << "\n";
    for (const auto& row : table_rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c == 0 ? "" : "\t") << row[c];
      out << "\n";
    }
  } else {
    out << json{{"config", config}, {"rows", json_rows}}.dump(2) << "\n";
  }
  try {
    write_text_file(path, out.str());
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

Dataset load_dataset(const fs::path& data_dir) {
  for (const char* name : {"dataset.tsv", "dataset.jsonl"}) {
    const fs::path p = data_dir / name;
    if (fs::exists(p)) {
      try {
        return read_dataset(p);
      } catch (const std::exception& e) {
        throw IoError(e.what());
      }
    }
  }
  throw IoError("no dataset.tsv or dataset.jsonl in " + data_dir.string());
}

}  // namespace

void cmd_generate(const GenerateConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("generate: n must be positive");
  if (cfg.p < 1) throw ConfigError("generate: samples-p must be positive");
  Problem problem;
  try {
    problem = make_problem(cfg.spec, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  ensure_dir(cfg.out_dir);
  const Dataset dataset = generate_dataset(problem, cfg.n, cfg.p, derive_seed(cfg.seed, 1));

  json config = problem_spec_to_json(cfg.spec, cfg.seed);
  config["n"] = cfg.n;
  config["p"] = cfg.p;
  try {
    write_problem_spec(cfg.out_dir / "problem.json", cfg.spec, cfg.seed);
    const char* name = cfg.format == OutFormat::Table ? "dataset.tsv" : "dataset.jsonl";
    write_dataset(cfg.out_dir / name, dataset, config, cfg.format);
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

void cmd_montecarlo(const MonteCarloCommandConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("montecarlo: trials must be positive");
  if (!(cfg.cal_fraction > 0.0 && cfg.cal_fraction < 1.0)) {
    throw ConfigError("montecarlo: cal-fraction must lie in (0, 1)");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("montecarlo: alpha must lie in (0, 1)");
  }
  const Dataset dataset = load_dataset(cfg.data_dir);

  std::vector<int> rounds = cfg.rounds;
  if (rounds.empty()) {
    rounds.resize(dataset.size());
    std::iota(rounds.begin(), rounds.end(), 1);
  }
  for (int k : rounds) {
    if (k < 1 || static_cast<std::size_t>(k) > dataset.size()) {
      throw ConfigError("montecarlo: round " + std::to_string(k) + " not in dataset");
    }
  }
  ensure_dir(cfg.out_dir);

  auto base_config = [&](Method m, int round, int p) {
    return json{{"command", "montecarlo"}, {"method", to_string(m)},
                {"round", round},          {"alpha", cfg.alpha},
                {"trials", cfg.trials},    {"cal_fraction", cfg.cal_fraction},
                {"seed", cfg.seed},        {"samples_p", p}};
  };

  auto run_one = [&](Method m, int round, int p) {
    MonteCarloOptions opts;
    opts.method = m;
    opts.alpha = cfg.alpha;
    opts.trials = cfg.trials;
    opts.cal_fraction = cfg.cal_fraction;
    opts.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(round) * 131 +
                                          static_cast<std::uint64_t>(m) * 7 +
                                          static_cast<std::uint64_t>(p) * 65537);
    opts.workers = cfg.workers;
    opts.truncate_p = p;
    return monte_carlo(dataset[static_cast<std::size_t>(round - 1)], opts);
  };

  for (Method m : cfg.methods) {
    for (int round : rounds) {
      const MonteCarloResult res = run_one(m, round, cfg.samples_p);
      const json config = base_config(m, round, cfg.samples_p);
      const std::string tag = std::string(to_string(m)) + "_r" + std::to_string(round);

      std::vector<std::vector<std::string>> rows;
      std::vector<json> jrows;
      for (std::size_t t = 0; t < res.trials.size(); ++t) {
        const auto& tm = res.trials[t];
        rows.push_back({std::to_string(t), fmt_double(tm.ec), fmt_double(tm.mil),
                        opt_str(tm.class_cov.coverage0()), opt_str(tm.class_cov.coverage1())});
        jrows.push_back(json{{"trial", t},
                             {"ec", json_num(tm.ec)},
                             {"mil", json_num(tm.mil)},
                             {"class0_coverage", opt_json(tm.class_cov.coverage0())},
                             {"class1_coverage", opt_json(tm.class_cov.coverage1())}});
      }
      const char* ext = cfg.format == OutFormat::Table ? ".tsv" : ".json";
      write_rows(cfg.out_dir / ("trials_" + tag + ext), config,
                 {"trial", "ec", "mil", "class0_coverage", "class1_coverage"}, rows, jrows,
                 cfg.format);

      const auto& s = res.summary;
      std::vector<std::vector<std::string>> srows = {
          {"target_coverage", fmt_double(1.0 - cfg.alpha)},
          {"n_cal", std::to_string(s.n_cal)},
          {"n_test", std::to_string(s.n_test)},
          {"mean_ec", fmt_double(s.mean_ec)},
          {"std_ec", fmt_double(s.std_ec)},
          {"mean_mil", fmt_double(s.mean_mil)},
          {"std_mil", fmt_double(s.std_mil)},
          {"theory_mean_ec", fmt_double(s.theory.mean_coverage())},
          {"theory_std_ec", fmt_double(std::sqrt(s.theory.variance_coverage()))},
          {"class0_coverage", opt_str(s.class_total.coverage0())},
          {"class1_coverage", opt_str(s.class_total.coverage1())},
      };
      json jsummary{{"target_coverage", 1.0 - cfg.alpha},
                    {"n_cal", s.n_cal},
                    {"n_test", s.n_test},
                    {"mean_ec", json_num(s.mean_ec)},
                    {"std_ec", json_num(s.std_ec)},
                    {"mean_mil", json_num(s.mean_mil)},
                    {"std_mil", json_num(s.std_mil)},
                    {"theory_mean_ec", json_num(s.theory.mean_coverage())},
                    {"theory_std_ec", json_num(std::sqrt(s.theory.variance_coverage()))},
                    {"class0_coverage", opt_json(s.class_total.coverage0())},
                    {"class1_coverage", opt_json(s.class_total.coverage1())}};
      json jstrata = json::array();
      for (const auto& st : s.strata_total) {
        const std::string bin = st.overflow
                                    ? "(" + fmt_double(st.lower) + ",inf)"
                                    : "[" + fmt_double(st.lower) + "," + fmt_double(st.upper) + "]";
        srows.push_back({"stratum_" + bin,
                         opt_str(st.coverage()) + " (count " + std::to_string(st.count) + ")"});
        jstrata.push_back(json{{"lower", st.lower},
                               {"upper", json_num(st.upper)},
                               {"count", st.count},
                               {"coverage", opt_json(st.coverage())}});
      }
      jsummary["size_stratified"] = jstrata;
      write_rows(cfg.out_dir / ("summary_" + tag + ext), config, {"key", "value"}, srows,
                 {jsummary}, cfg.format);

      std::vector<std::vector<std::string>> hrows;
      std::vector<json> jhrows;
      for (std::size_t k = 0; k < s.ec_histogram.size(); ++k) {
        const double coverage = static_cast<double>(k) / static_cast<double>(s.n_test);
        const double mass = beta_binomial_pmf(s.theory, static_cast<std::int64_t>(k));
        hrows.push_back({std::to_string(k), fmt_double(coverage),
                         std::to_string(s.ec_histogram[k]), fmt_double(mass)});
        jhrows.push_back(json{{"covered", k},
                              {"coverage", coverage},
                              {"empirical_count", s.ec_histogram[k]},
                              {"theoretical_mass", mass}});
      }
      write_rows(cfg.out_dir / ("histogram_" + tag + ext), config,
                 {"covered", "coverage", "empirical_count", "theoretical_mass"}, hrows, jhrows,
                 cfg.format);
    }
  }

  if (!cfg.p_sweep.empty()) {
    const int sweep_round = *std::min_element(rounds.begin(), rounds.end());
    for (Method m : cfg.methods) {
      if (m == Method::AR) continue;  // width does not depend on p
      std::vector<std::vector<std::string>> rows;
      std::vector<json> jrows;
      for (int p : cfg.p_sweep) {
        if (p < 1) throw ConfigError("montecarlo: p-sweep values must be positive");
        const MonteCarloResult res = run_one(m, sweep_round, p);
        const auto& s = res.summary;
        const double se_mil = s.std_mil / std::sqrt(static_cast<double>(s.trials));
        rows.push_back({std::to_string(p), fmt_double(s.mean_mil), fmt_double(s.std_mil),
                        fmt_double(se_mil), fmt_double(s.mean_ec)});
        jrows.push_back(json{{"p", p},
                             {"mean_mil", json_num(s.mean_mil)},
                             {"std_mil", json_num(s.std_mil)},
                             {"se_mil", json_num(se_mil)},
                             {"mean_ec", json_num(s.mean_ec)}});
      }
      const char* ext = cfg.format == OutFormat::Table ? ".tsv" : ".json";
      json config = base_config(m, sweep_round, 0);
      config["p_sweep"] = cfg.p_sweep;
      write_rows(cfg.out_dir / ("psweep_" + std::string(to_string(m)) + ext), config,
                 {"p", "mean_mil", "std_mil", "se_mil", "mean_ec"}, rows, jrows, cfg.format);
    }
  }
}

void cmd_multiround(const MultiRoundCommandConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("multiround: tau must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("multiround: alpha must lie in (0, 1)");
  }
  if (!(cfg.cal_fraction > 0.0 && cfg.cal_fraction < 1.0)) {
    throw ConfigError("multiround: cal-fraction must lie in (0, 1)");
  }
  if (cfg.group_size < 1) throw ConfigError("multiround: group-size must be positive");

  const Dataset dataset = load_dataset(cfg.data_dir);
  const std::size_t rounds = dataset.size();
  if (rounds < 2) throw ConfigError("multiround: dataset must have at least two rounds");
  const std::size_t n = dataset.front().size();
  for (const auto& r : dataset) {
    if (r.size() != n) throw ConfigError("multiround: rounds have mismatched sample counts");
  }

  auto [spec, spec_seed] = read_problem_spec(cfg.data_dir / "problem.json");
  const Problem problem = make_problem(spec, spec_seed);
  if (problem.configs.size() != rounds) {
    throw ConfigError("multiround: problem spec and dataset disagree on round count");
  }
  std::vector<double> accelerations;
  for (const auto& c : problem.configs) accelerations.push_back(c.acceleration);

  // fixed split: one calibration fold for all rounds, protocol on the rest
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 0));
  shuffle(perm, rng);
  const auto n_cal = static_cast<std::size_t>(
      std::floor(cfg.cal_fraction * static_cast<double>(n)));
  if (n_cal < 1 || n_cal >= n) throw ConfigError("multiround: dataset too small for the split");
  std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_cal), perm.end());
  std::sort(test_idx.begin(), test_idx.end());

  MultiRoundPlan plan;
  plan.tau = cfg.tau;
  plan.accelerations = accelerations;
  for (std::size_t k = 0; k < rounds; ++k) {
    RoundRecords cal;
    cal.reserve(n_cal);
    for (std::size_t i = 0; i < n_cal; ++i) cal.push_back(dataset[k][perm[i]]);
    plan.predictors.push_back(calibrate(cfg.method, cal, cfg.alpha));
  }

  std::vector<MultiRoundOutcome> outcomes;
  outcomes.reserve(test_idx.size());
  for (std::size_t i : test_idx) {
    std::vector<std::vector<double>> per_round;
    per_round.reserve(rounds);
    for (std::size_t k = 0; k < rounds; ++k) per_round.push_back(dataset[k][i].task_samples);
    outcomes.push_back(run_sample(plan, per_round, dataset.front()[i].true_output));
  }

  ensure_dir(cfg.out_dir);
  const json config{{"command", "multiround"},
                    {"method", to_string(cfg.method)},
                    {"alpha", cfg.alpha},
                    {"tau", cfg.tau},
                    {"cal_fraction", cfg.cal_fraction},
                    {"group_size", cfg.group_size},
                    {"seed", cfg.seed}};
  const char* ext = cfg.format == OutFormat::Table ? ".tsv" : ".json";

  std::vector<std::vector<std::string>> rows;
  std::vector<json> jrows;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const std::size_t group = i / static_cast<std::size_t>(cfg.group_size);
    const double accel = accelerations[static_cast<std::size_t>(o.final_round - 1)];
    rows.push_back({std::to_string(test_idx[i]), std::to_string(group),
                    std::to_string(o.final_round), fmt_double(accel),
                    fmt_double(o.final_interval.lower()), fmt_double(o.final_interval.upper()),
                    fmt_double(o.final_interval.length()), o.covered ? "1" : "0",
                    opt_str(o.center_err), o.degenerate ? "1" : "0", o.exhausted ? "1" : "0"});
    jrows.push_back(json{{"sample", test_idx[i]},
                         {"group", group},
                         {"final_round", o.final_round},
                         {"acceleration", accel},
                         {"lower", json_num(o.final_interval.lower())},
                         {"upper", json_num(o.final_interval.upper())},
                         {"length", json_num(o.final_interval.length())},
                         {"covered", o.covered},
                         {"center_error", opt_json(o.center_err)},
                         {"degenerate", o.degenerate},
                         {"exhausted", o.exhausted}});
  }
  write_rows(cfg.out_dir / (std::string("outcomes") + ext), config,
             {"sample", "group", "final_round", "acceleration", "lower", "upper", "length",
              "covered", "center_error", "degenerate", "exhausted"},
             rows, jrows, cfg.format);

  const double avg_accel = average_acceleration(outcomes, accelerations);
  std::int64_t hits = 0;
  for (const auto& o : outcomes) {
    if (o.covered) ++hits;
  }
  const double coverage = static_cast<double>(hits) / static_cast<double>(outcomes.size());
  // an empty or unbounded final interval has no midpoint; score its group +inf
  auto bounded_outcomes = outcomes;
  for (auto& o : bounded_outcomes) {
    if (!o.center_err.has_value()) o.center_err = kInf;
  }
  const auto maxima = volume_max_center_error(bounded_outcomes, cfg.group_size);
  const double avg_max_ce =
      std::accumulate(maxima.begin(), maxima.end(), 0.0) / static_cast<double>(maxima.size());
  const RoundHistogram hist = round_distribution(outcomes, static_cast<int>(rounds));
  const auto fractions = hist.fractions();

  std::vector<std::vector<std::string>> srows = {
      {"n_cal", std::to_string(n_cal)},
      {"n_test", std::to_string(test_idx.size())},
      {"average_acceleration", fmt_double(avg_accel)},
      {"empirical_coverage", fmt_double(coverage)},
      {"average_max_center_error", fmt_double(avg_max_ce)},
  };
  json jhist = json::array();
  for (std::size_t k = 0; k < rounds; ++k) {
    srows.push_back({"round_" + std::to_string(k + 1) + "_fraction", fmt_double(fractions[k])});
    jhist.push_back(json{{"round", k + 1}, {"count", hist.counts[k]}, {"fraction", fractions[k]}});
  }
  srows.push_back({"exhausted_fraction", fmt_double(fractions.back())});
  const json jsummary{{"n_cal", n_cal},
                      {"n_test", test_idx.size()},
                      {"average_acceleration", json_num(avg_accel)},
                      {"empirical_coverage", coverage},
                      {"average_max_center_error", json_num(avg_max_ce)},
                      {"round_histogram", jhist},
                      {"exhausted", hist.exhausted},
                      {"exhausted_fraction", fractions.back()}};
  write_rows(cfg.out_dir / (std::string("summary") + ext), config, {"key", "value"}, srows,
             {jsummary}, cfg.format);
}

}  // namespace taskuq
