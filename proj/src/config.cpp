#include "cim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cim/errors.hpp"
#include "cim/workload.hpp"

#ifndef CIM_MONARCH_DATA_DIR
#define CIM_MONARCH_DATA_DIR "data"
#endif

namespace cim {

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::vector<std::string> split(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
  return std::stoull(value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

}  // namespace

std::vector<mapping::Strategy> parse_strategy_list(const std::string& value) {
  if (value == "all") return {mapping::Strategy::linear, mapping::Strategy::sparse, mapping::Strategy::dense};
  std::vector<mapping::Strategy> out;
  for (const auto& s : split(value)) out.push_back(mapping::parse_strategy(s));
  if (out.empty()) throw ConfigError("strategy", "empty list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& s : split(value)) {
    const auto v = parse_uint(key, s);
    if (v == 0) throw ConfigError(key, "values must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model") {
    const auto names = value == "all" ? workload::builtin_names() : split(value);
    for (const auto& n : names) workload::builtin_model(n);  // validates
    if (names.empty()) throw ConfigError(key, "empty list");
    cfg.models = names;
  } else if (key == "strategy") {
    cfg.strategies = parse_strategy_list(value);
  } else if (key == "m") {
    cfg.m = static_cast<std::size_t>(parse_uint(key, value));
    if (cfg.m == 0) throw ConfigError(key, "must be positive");
  } else if (key == "adcs") {
    cfg.adc_counts = parse_size_list(key, value);
  } else if (key == "adc_mode") {
    if (value == "ideal") cfg.adc_mode = xbar::AdcMode::ideal;
    else if (value == "quantized") cfg.adc_mode = xbar::AdcMode::quantized;
    else throw ConfigError(key, "expected ideal or quantized");
  } else if (key == "adc_bits") {
    const auto v = parse_uint(key, value);
    if (v < 1 || v > 8) throw ConfigError(key, "must be in [1, 8]");
    cfg.adc_bits = static_cast<int>(v);
  } else if (key == "seed") {
    cfg.seed = parse_uint(key, value);
  } else if (key == "out") {
    if (value.empty()) throw ConfigError(key, "empty path");
    cfg.output_dir = value;
  } else if (key == "calibration") {
    cfg.calibration = value;
  } else if (key == "verify_n") {
    cfg.verify_n = parse_size_list(key, value);
    for (auto n : cfg.verify_n) {
      if (n > 1024) throw ConfigError(key, "toy sizes are limited to n <= 1024");
    }
  } else if (key == "verify_inputs") {
    cfg.verify_inputs = static_cast<std::size_t>(parse_uint(key, value));
    if (cfg.verify_inputs == 0) throw ConfigError(key, "must be positive");
  } else if (key == "fault") {
    if (value == "none") cfg.fault = Fault::none;
    else if (value == "pairing") cfg.fault = Fault::pairing;
    else throw ConfigError(key, "expected none or pairing");
  } else if (key == "reserve_half_slot") {
    cfg.reserve_half_slot = parse_bool(key, value);
  } else if (key == "include_non_conversion_latency") {
    cfg.include_non_conversion_latency = parse_bool(key, value);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

std::vector<RunConfig> parse_config(std::string_view text) {
  std::vector<RunConfig> runs;
  RunConfig base;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("section", "line " + std::to_string(lineno) + ": malformed section header");
      }
      runs.push_back(base);  // sections inherit keys set before the first header
      runs.back().name = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(trim(line), "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("<empty>", "line " + std::to_string(lineno) + ": missing key");
    apply_key(runs.empty() ? base : runs.back(), key, value);
  }
  if (runs.empty()) runs.push_back(base);
  return runs;
}

std::vector<RunConfig> load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string default_data_dir() {
  if (const char* env = std::getenv("CIM_MONARCH_DATA")) return env;
  return CIM_MONARCH_DATA_DIR;
}

}  // namespace cim
