#include "taskuq/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace taskuq {

namespace fs = std::filesystem;
using nlohmann::json;

OutFormat format_from_string(const std::string& name) {
  if (name == "table" || name == "tsv") return OutFormat::Table;
  if (name == "json") return OutFormat::Json;
  throw std::invalid_argument("unknown output format: " + name);
}

const char* to_string(OutFormat f) {
  return f == OutFormat::Table ? "table" : "json";
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json json_num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json problem_spec_to_json(const ProblemSpec& spec, std::uint64_t seed) {
  return json{{"dim", spec.dim},
              {"round_rows", spec.round_rows},
              {"noise_std", spec.noise_std},
              {"task_weight_scale", spec.task_weight_scale},
              {"task_bias", spec.task_bias},
              {"seed", seed}};
}

std::pair<ProblemSpec, std::uint64_t> problem_spec_from_json(const json& j) {
  ProblemSpec spec;
  spec.dim = j.at("dim").get<int>();
  spec.round_rows = j.at("round_rows").get<std::vector<int>>();
  spec.noise_std = j.at("noise_std").get<double>();
  spec.task_weight_scale = j.at("task_weight_scale").get<double>();
  spec.task_bias = j.at("task_bias").get<double>();
  return {spec, j.at("seed").get<std::uint64_t>()};
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_problem_spec(const fs::path& path, const ProblemSpec& spec, std::uint64_t seed) {
  write_text_file(path, problem_spec_to_json(spec, seed).dump(2) + "\n");
}

std::pair<ProblemSpec, std::uint64_t> read_problem_spec(const fs::path& path) {
  return problem_spec_from_json(json::parse(read_text_file(path)));
}

namespace {

std::string join_samples(const std::vector<double>& samples) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) out += ',';
    out += fmt_double(samples[i]);
  }
  return out;
}

std::vector<double> split_samples(const std::string& field) {
  std::vector<double> out;
  std::istringstream ss(field);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(std::stod(token));
  return out;
}

}  // namespace

void write_dataset(const fs::path& path, const Dataset& dataset, const json& config,
                   OutFormat format) {
  std::ostringstream out;
  if (format == OutFormat::Table) {
    out << "# taskuq dataset\n";
    out << "# config " << config.dump() << "\n";
    out << "# columns: round\tsample\ttrue_output\tclass_label\ttask_samples\n";
    for (std::size_t k = 0; k < dataset.size(); ++k) {
      for (std::size_t i = 0; i < dataset[k].size(); ++i) {
        const auto& rec = dataset[k][i];
        out << (k + 1) << '\t' << i << '\t' << fmt_double(rec.true_output) << '\t'
            << rec.class_label << '\t' << join_samples(rec.task_samples) << '\n';
      }
    }
  } else {
    out << json{{"type", "taskuq-dataset"}, {"config", config}}.dump() << "\n";
    for (std::size_t k = 0; k < dataset.size(); ++k) {
      for (std::size_t i = 0; i < dataset[k].size(); ++i) {
        const auto& rec = dataset[k][i];
        out << json{{"round", k + 1},
                    {"sample", i},
                    {"true_output", rec.true_output},
                    {"class_label", rec.class_label},
                    {"task_samples", rec.task_samples}}
                   .dump()
            << "\n";
      }
    }
  }
  write_text_file(path, out.str());
}

Dataset read_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  Dataset dataset;
  auto record_at = [&dataset](std::size_t round) -> RoundRecords& {
    if (dataset.size() < round) dataset.resize(round);
    return dataset[round - 1];
  };
  std::string line;
  bool json_mode = false;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      json_mode = line.front() == '{';
      first = false;
      if (json_mode) continue;  // header object
    }
    if (!json_mode && line.front() == '#') continue;
    CalibrationRecord rec;
    std::size_t round = 0;
    if (json_mode) {
      const json j = json::parse(line);
      round = j.at("round").get<std::size_t>();
      rec.true_output = j.at("true_output").get<double>();
      rec.class_label = j.at("class_label").get<int>();
      rec.task_samples = j.at("task_samples").get<std::vector<double>>();
    } else {
      std::istringstream ss(line);
      std::string samples_field;
      std::size_t sample_idx = 0;
      if (!(ss >> round >> sample_idx >> rec.true_output >> rec.class_label >> samples_field)) {
        throw std::runtime_error("malformed dataset line: " + line);
      }
      rec.task_samples = split_samples(samples_field);
    }
    if (round == 0 || rec.task_samples.empty()) {
      throw std::runtime_error("invalid dataset record: " + line);
    }
    record_at(round).push_back(std::move(rec));
  }
  if (dataset.empty()) throw std::runtime_error("empty dataset: " + path.string());
  return dataset;
}

}  // namespace taskuq
