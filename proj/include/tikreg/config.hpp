#pragma once

// INI-style sweep configuration.
//
//   [sweep]                      [model]
//   case = a|b|c                 prior = paper|laplacian
//   grid_sizes = 64, 256         kernel_c = 0.2
//   sample_sizes = 3000, 30000   laplacian_s = 2
//   reps = 30                    forward = identity|blur
//   seed = 0                     blur_width = 0.01
//   sigma = 0.05
//   threads = 0
//   preset = paper|quick         (applied before the other keys)

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikreg/experiment.hpp"

namespace tikreg {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unknown sections or keys raise ConfigError naming the offender.
SweepConfig parse_sweep_config(std::istream& is);
SweepConfig load_sweep_config(const std::string& path);

/// "64,256" → {64, 256}; whitespace tolerated.
std::vector<int> parse_int_list(const std::string& s);
std::vector<std::size_t> parse_size_list(const std::string& s);

/// Text listing of every accepted key, used by --help.
std::string config_keys_help();

}  // namespace tikreg
