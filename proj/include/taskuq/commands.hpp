#pragma once

#include "taskuq/io.hpp"
#include "taskuq/testbed.hpp"
#include "taskuq/types.hpp"
#include "taskuq/validation.hpp"

#include <filesystem>
#include <vector>

namespace taskuq {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Command implementations behind the CLI. Outputs are pure functions of the
// configuration: every emitted file embeds the resolved statistical
// parameters and is byte-identical across reruns and worker counts.

struct GenerateConfig {
  ProblemSpec spec;
  int n = 600;
  int p = 32;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  OutFormat format = OutFormat::Table;
};

void cmd_generate(const GenerateConfig& cfg);

struct MonteCarloCommandConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::vector<Method> methods = {Method::AR, Method::LWR, Method::CQR};
  std::vector<int> rounds;  // 1-based; empty = all rounds in the dataset
  double alpha = 0.05;
  int trials = 1000;
  double cal_fraction = 0.7;
  std::uint64_t seed = 1;
  int workers = 1;
  int samples_p = 0;          // truncate task samples; 0 = all
  std::vector<int> p_sweep;   // MIL-vs-p sweep at the coarsest requested round
  OutFormat format = OutFormat::Table;
};

void cmd_montecarlo(const MonteCarloCommandConfig& cfg);

struct MultiRoundCommandConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  Method method = Method::LWR;
  double alpha = 0.01;
  double tau = 0.2;
  double cal_fraction = 0.7;
  int group_size = 8;
  std::uint64_t seed = 1;
  OutFormat format = OutFormat::Table;
};

void cmd_multiround(const MultiRoundCommandConfig& cfg);

}  // namespace taskuq
