#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "perturbmc/timing_channel.hpp"

namespace perturbmc {

/// One run of the CLI: model/input selection plus the numeric knobs shared
/// by every subcommand.
struct RunConfig {
  std::string model = "queue";        // builtin name or JSON file path
  std::string input = "three-state";  // builtin name or JSON file path
  double gamma = 0.4;
  std::vector<double> epsilon_list;   // empty = figure-specific default
  int lag_min = -5;
  int lag_max = 5;
  int grid = 1024;
  uint64_t seed = 1;
  std::string out = "out";
  long mc_steps = 1000000;
  std::string pipeline = "approx";  // mi-bound series source: approx | exact
};

struct LoadedModel {
  ControlledFamily family;
  bool is_queue = false;
  double rho = 0.0;
  int q_bar = 0;
  std::string description;
};

LoadedModel load_model(const RunConfig& cfg);
InputSpec load_input(const RunConfig& cfg, double epsilon);

/// "lo:hi" or a single "N" meaning [-N, N].
void parse_lag_range(const std::string& text, int& lag_min, int& lag_max);
std::vector<double> parse_double_list(const std::string& text);

/// Echo of the configuration for CSV headers (no paths, no timestamps).
std::string config_stamp(const RunConfig& cfg, double epsilon);

}  // namespace perturbmc
