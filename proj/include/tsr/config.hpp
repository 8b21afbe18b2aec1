#ifndef TSR_CONFIG_HPP
#define TSR_CONFIG_HPP

#include <string>

#include "tsr/experiments.hpp"

namespace tsr {

struct GenerateConfig {
  TaskFamily family = TaskFamily::same_different;
  BallTaskConfig ball;
  int count = 1000;
  std::string split = "train";
  std::string out_file = "episodes.tsre";
};

struct CheckpointConfig {
  std::string save_path;
  std::string resume_from;
};

// Parsed and validated run configuration. JSON on disk; every key path is
// checked against the schema and all violations are reported together.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
  std::string log_level = "info";

  Manifest manifest;  // tasks, model, schedules, experiment knobs
  int train_epochs = 10;
  GenerateConfig generate;
  CheckpointConfig checkpoint;
  std::string report_results;  // results.json to regenerate reports from

  std::string canonical_json;  // the config as applied, canonical dump
  std::uint64_t digest = 0;    // FNV-1a of canonical_json
};

// Reads and validates a config file. Missing file, unknown keys, type
// mismatches and out-of-range values raise config_error listing every
// problem with its key path.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

}  // namespace tsr

#endif
