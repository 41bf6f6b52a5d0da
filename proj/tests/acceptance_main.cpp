#include "taskuq/acceptance.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  taskuq::AcceptanceOptions opts;
  if (argc > 1) opts.trials = std::atoi(argv[1]);
  if (argc > 2) opts.seed = static_cast<std::uint64_t>(std::atoll(argv[2]));
  const auto results = taskuq::run_acceptance(opts);
  for (const auto& r : results) {
    std::printf("[%2d] %s %s — %s\n", r.id, r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
  }
  return taskuq::all_passed(results) ? 0 : 1;
}
