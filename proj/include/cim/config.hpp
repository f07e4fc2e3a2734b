#pragma once

// Run configuration: a flat `key = value` file with optional [section] headers,
// one RunConfig per section.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cim/crossbar.hpp"
#include "cim/mapping.hpp"

namespace cim {

enum class Fault { none, pairing };

struct RunConfig {
  std::string name = "default";
  std::vector<std::string> models = {"bert-large"};
  std::vector<mapping::Strategy> strategies = {mapping::Strategy::linear, mapping::Strategy::sparse,
                                               mapping::Strategy::dense};
  std::size_t m = 256;
  std::vector<std::size_t> adc_counts = {1, 4, 8, 16, 32};
  xbar::AdcMode adc_mode = xbar::AdcMode::ideal;
  int adc_bits = 8;  // quantized-mode resolution for the functional checks
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string calibration;  // empty: bundled data/calibration.txt
  std::vector<std::size_t> verify_n = {16, 64, 256};
  std::size_t verify_inputs = 20;
  Fault fault = Fault::none;
  bool reserve_half_slot = true;
  bool include_non_conversion_latency = false;
};

/// Throws ConfigError naming the offending key.
std::vector<RunConfig> parse_config(std::string_view text);
std::vector<RunConfig> load_config(const std::string& path);

/// Applies one key to `cfg`; shared by the file parser and CLI overrides.
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

std::vector<mapping::Strategy> parse_strategy_list(const std::string& value);
std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value);

/// Directory holding calibration.txt, reference_points.csv and reference_targets.csv.
std::string default_data_dir();

}  // namespace cim
