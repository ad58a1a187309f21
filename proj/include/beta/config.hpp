#pragma once

#include <cstdint>
#include <istream>
#include <string>

#include "beta/perf.hpp"
#include "beta/pipeline.hpp"

namespace beta {

/// Everything a CLI run needs, validated as a whole before any simulation.
///
/// Text format: one `section.key = value` per line, `#` starts a comment.
/// Unknown keys, repeated keys and malformed values are ConfigErrors naming
/// the key.
struct RunConfig {
  PipelineConfig pipeline;
  LayerSpec spec;
  int blocks = 1;
  EnergyProxyModel energy;
  std::uint64_t seed = 1;
  // Directory of weight payload files `block<b>_<name>.mat`; empty means
  // seeded random weights.
  std::string weights_dir;
  // Loaded 1-bit payloads decode to +-weight_scale.
  double weight_scale = 0.05;
  std::string output;  // report path; empty writes to stdout

  void validate() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

// Weights per the config: files from weights_dir, else seeded random.
Model build_model(const RunConfig& config);
// Seeded block input.
RealTensor build_input(const RunConfig& config);

}  // namespace beta
