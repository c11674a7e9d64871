#pragma once

// Run configuration: every tunable default, loadable from an INI file.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "pmfsm/episode.hpp"
#include "pmfsm/optimizer.hpp"
#include "pmfsm/policy.hpp"

namespace pmfsm {

struct ExperimentConfig {
  int num_trials = 10;
  double expected_distance = 15.0;  // m, cap on travel distance
  int threads = 1;
};

struct RunConfig {
  EnvConfig env;
  DomainRandomization randomization;
  ActionRanges ranges;
  ArsConfig ars;
  ExperimentConfig experiments;
  /// "trot", "stand", "walk" or a path to a gait file.
  std::string gait = "trot";

  /// Also resolves `gait` into env.gait.
  void validate();
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Keys missing from the file keep their defaults; unknown sections or keys
/// are errors. Relative gait paths resolve against `base_dir`.
RunConfig parse_config(std::istream& in, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Writes every key. parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

/// FNV-1a over format_config.
std::uint64_t config_hash(const RunConfig& config);

GaitMatrix resolve_gait(const std::string& name, const std::string& base_dir = ".");

}  // namespace pmfsm
