#include "taskuq/acceptance.hpp"
#include "taskuq/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitIoError = 3;
constexpr int kExitAcceptanceFailure = 4;

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key=value pairs from a flat INI file; section headers and comments are
// ignored so a file written for one subcommand also parses for another.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw taskuq::ConfigError("cannot read config file: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw taskuq::ConfigError("config file line is not key=value: " + line);
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    pairs.emplace_back(trim(line.substr(0, eq)), value);
  }
  return pairs;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// CLI11 applies config-file values before environment variables, which would
// give the file precedence over the environment. To keep the documented
// file < env < flags order, env and file values are appended to argv here
// (env first, so a file value only lands when neither flag nor env set it).
std::vector<std::string> resolve_args(CLI::App& app, std::vector<std::string> args) {
  CLI::App* sub = nullptr;
  for (const auto& a : args) {
    if (!a.empty() && a[0] != '-') {
      sub = app.get_subcommand_no_throw(a);
      break;
    }
  }
  if (sub == nullptr) return args;

  for (const CLI::Option* opt : sub->get_options()) {
    const std::string env = opt->get_envname();
    if (env.empty() || opt->get_lnames().empty()) continue;
    const char* value = std::getenv(env.c_str());
    if (value == nullptr || *value == '\0') continue;
    const std::string flag = "--" + opt->get_lnames().front();
    if (!has_flag(args, flag)) args.push_back(flag + "=" + value);
  }

  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    }
  }
  if (config_path.empty()) return args;
  for (const auto& [key, value] : read_config_file(config_path)) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || opt->get_lnames().empty()) {
      throw taskuq::ConfigError("config file key not recognized by subcommand '" +
                                sub->get_name() + "': " + key);
    }
    const std::string flag = "--" + opt->get_lnames().front();
    if (!has_flag(args, flag)) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-output uncertainty quantification on a synthetic linear-Gaussian testbed"};
  app.require_subcommand(1);
  // precedence: config file < TASKUQ_* environment < command-line flags

  std::string method_name = "lwr";
  std::string format_name = "table";
  std::string rounds_spec;
  std::string p_sweep_spec;
  std::string data_dir;
  std::string out_dir;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  int trials = 1000;
  double cal_fraction = 0.7;
  double tau = 0.2;
  int workers = default_workers();

  std::string config_path;  // consumed in resolve_args; registered so parse accepts it
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Read options from a key=value file")
        ->envname("TASKUQ_CONFIG");
    cmd->add_option("--seed", seed, "Master random seed")->envname("TASKUQ_SEED");
    cmd->add_option("--out", out_dir, "Output directory")->required()->envname("TASKUQ_OUT");
    cmd->add_option("--format", format_name, "Output format: table or json")
        ->check(CLI::IsMember({"table", "json"}))
        ->envname("TASKUQ_FORMAT");
  };

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic per-round dataset");
  taskuq::GenerateConfig gen;
  add_common(gen_cmd);
  gen_cmd->add_option("--dim", gen.spec.dim, "Signal dimension")->envname("TASKUQ_DIM");
  gen_cmd->add_option("--rounds", rounds_spec, "Per-round row counts, e.g. 2,4,8,16")
      ->envname("TASKUQ_ROUNDS");
  gen_cmd->add_option("--noise-std", gen.spec.noise_std, "Measurement noise stddev")
      ->envname("TASKUQ_NOISE_STD");
  gen_cmd->add_option("--weight-scale", gen.spec.task_weight_scale, "Task weight norm");
  gen_cmd->add_option("--n", gen.n, "Number of samples")->envname("TASKUQ_N");
  gen_cmd->add_option("--samples-p", gen.p, "Posterior samples per measurement")
      ->envname("TASKUQ_SAMPLES_P");

  // montecarlo
  auto* mc_cmd = app.add_subcommand("montecarlo", "Monte-Carlo coverage validation");
  std::string mc_methods = "ar,lwr,cqr";
  std::string mc_rounds = "all";
  add_common(mc_cmd);
  mc_cmd->add_option("--data", data_dir, "Dataset directory from 'generate'")->required();
  mc_cmd->add_option("--method", mc_methods, "Comma-separated methods: ar,lwr,cqr")
      ->envname("TASKUQ_METHOD");
  mc_cmd->add_option("--rounds", mc_rounds, "Rounds to evaluate: 'all' or e.g. 1,3")
      ->envname("TASKUQ_ROUNDS");
  mc_cmd->add_option("--alpha", alpha, "Error rate")->envname("TASKUQ_ALPHA");
  mc_cmd->add_option("--trials", trials, "Monte-Carlo trials")->envname("TASKUQ_TRIALS");
  mc_cmd->add_option("--cal-fraction", cal_fraction, "Calibration fold fraction")
      ->envname("TASKUQ_CAL_FRACTION");
  int mc_samples_p = 0;
  mc_cmd->add_option("--samples-p", mc_samples_p, "Truncate task samples to first p (0 = all)")
      ->envname("TASKUQ_SAMPLES_P");
  mc_cmd->add_option("--p-sweep", p_sweep_spec, "MIL-vs-p sweep, e.g. 2,4,8,16,32");
  mc_cmd->add_option("--workers", workers, "Worker threads (results are worker-invariant)")
      ->envname("TASKUQ_WORKERS");

  // multiround
  auto* mr_cmd = app.add_subcommand("multiround", "Multi-round stopping protocol simulation");
  add_common(mr_cmd);
  mr_cmd->add_option("--data", data_dir, "Dataset directory from 'generate'")->required();
  mr_cmd->add_option("--method", method_name, "Conformal method: ar, lwr, or cqr")
      ->envname("TASKUQ_METHOD");
  double mr_alpha = 0.01;
  mr_cmd->add_option("--alpha", mr_alpha, "Error rate")->envname("TASKUQ_ALPHA");
  mr_cmd->add_option("--tau", tau, "Interval-width stopping threshold")->envname("TASKUQ_TAU");
  mr_cmd->add_option("--cal-fraction", cal_fraction, "Calibration fold fraction")
      ->envname("TASKUQ_CAL_FRACTION");
  int group_size = 8;
  mr_cmd->add_option("--group-size", group_size, "Samples per volume-like group");

  // validate
  auto* val_cmd = app.add_subcommand("validate", "Run the acceptance suite");
  val_cmd->add_option("--config", config_path, "Read options from a key=value file")
      ->envname("TASKUQ_CONFIG");
  taskuq::AcceptanceOptions acc;
  val_cmd->add_option("--seed", acc.seed, "Master random seed")->envname("TASKUQ_SEED");
  val_cmd->add_option("--trials", acc.trials,
                      "Monte-Carlo trials (tolerances scale with 1/sqrt(trials))")
      ->envname("TASKUQ_TRIALS");
  acc.workers = default_workers();
  val_cmd->add_option("--workers", acc.workers, "Worker threads")->envname("TASKUQ_WORKERS");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    // TASKUQ_CONFIG can supply the config path when --config is absent
    if (const char* env_cfg = std::getenv("TASKUQ_CONFIG");
        env_cfg != nullptr && *env_cfg != '\0' && !has_flag(args, "--config")) {
      args.push_back(std::string("--config=") + env_cfg);
    }
    args = resolve_args(app, std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11's vector parse consumes back-to-front
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  } catch (const taskuq::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  }

  auto parse_int_list = [](const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string token;
    while (std::getline(ss, token, ',')) out.push_back(std::stoi(token));
    return out;
  };

  try {
    if (gen_cmd->parsed()) {
      gen.seed = seed;
      gen.out_dir = out_dir;
      gen.format = taskuq::format_from_string(format_name);
      if (!rounds_spec.empty()) gen.spec.round_rows = parse_int_list(rounds_spec);
      taskuq::cmd_generate(gen);
    } else if (mc_cmd->parsed()) {
      taskuq::MonteCarloCommandConfig cfg;
      cfg.data_dir = data_dir;
      cfg.out_dir = out_dir;
      cfg.methods.clear();
      {
        std::stringstream ss(mc_methods);
        std::string token;
        while (std::getline(ss, token, ',')) {
          cfg.methods.push_back(taskuq::method_from_string(token));
        }
      }
      if (mc_rounds != "all") cfg.rounds = parse_int_list(mc_rounds);
      cfg.alpha = alpha;
      cfg.trials = trials;
      cfg.cal_fraction = cal_fraction;
      cfg.seed = seed;
      cfg.workers = workers;
      cfg.samples_p = mc_samples_p;
      if (!p_sweep_spec.empty()) cfg.p_sweep = parse_int_list(p_sweep_spec);
      cfg.format = taskuq::format_from_string(format_name);
      taskuq::cmd_montecarlo(cfg);
    } else if (mr_cmd->parsed()) {
      taskuq::MultiRoundCommandConfig cfg;
      cfg.data_dir = data_dir;
      cfg.out_dir = out_dir;
      cfg.method = taskuq::method_from_string(method_name);
      cfg.alpha = mr_alpha;
      cfg.tau = tau;
      cfg.cal_fraction = cal_fraction;
      cfg.group_size = group_size;
      cfg.seed = seed;
      cfg.format = taskuq::format_from_string(format_name);
      taskuq::cmd_multiround(cfg);
    } else if (val_cmd->parsed()) {
      const auto results = taskuq::run_acceptance(acc);
      for (const auto& r : results) {
        std::printf("[%2d] %s %s — %s\n", r.id, r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
      }
      if (!taskuq::all_passed(results)) return kExitAcceptanceFailure;
    }
  } catch (const taskuq::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const taskuq::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIoError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
