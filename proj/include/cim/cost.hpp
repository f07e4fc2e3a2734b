#pragma once

// Latency/energy estimates driven by ADC conversion time, with per-strategy
// constants fitted to reference measurements.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cim/mapping.hpp"
#include "cim/scheduler.hpp"

namespace cim::cost {

/// Device parameters for a 256x256 PCM array; ns and nJ.
struct CostParams {
  double t_mvm = 100.0;
  double e_mvm = 10.0;
  double t_adc_8b = 0.833;
  double e_adc_8b = 13.33e-3;
  double t_comm = 48.0;
  double e_comm = 51.7;
  double t_layernorm = 100.0;
  double e_layernorm = 42.0;
  double t_relu = 1.0;
  double e_relu = 0.06;
  double t_gelu = 70.0;
  double e_gelu = 38.5;
  double t_add = 36.0;
  double e_add = 37.7;
  // Put MVM, communication and digital latency on the critical path.
  bool include_non_conversion_latency = false;
};

struct CalibrationConstants {
  double critical_path_scale = 1.0;
  double e_fixed = 0.0;  // uJ
  double p_conv = 0.0;   // uJ per ns of workload conversion time
  double residual_latency = 0.0;  // max relative fit error
  double residual_energy = 0.0;
  std::size_t points = 0;
};

struct Calibration {
  int version = 1;
  std::map<mapping::Strategy, CalibrationConstants> by_strategy;
};

/// What the cost model needs from a mapped and scheduled workload.
struct WorkloadSummary {
  std::string model;
  mapping::Strategy strategy = mapping::Strategy::linear;
  std::size_t arrays = 0;
  int adc_bits = 8;
  std::size_t p_max = 1;
  std::uint64_t critical_conversions = 0;  // busiest array
  std::uint64_t total_conversions = 0;
  std::size_t depth = 1;   // matmuls executed back to back
  std::size_t layers = 0;  // transformer layers, for digital ops
};

WorkloadSummary summarize(const std::string& model, const mapping::MappingPlan& plan,
                          const sched::CommandStream& stream, std::size_t layers);

int adc_bits_required(std::size_t active_rows);
int adc_bits_required(const sched::StreamMetadata& meta);

/// n_conversions * t_adc_8b * bits/8 / min(n_adc, p_max), in ns.
double conversion_time(int bits, std::uint64_t n_conversions, std::size_t n_adc, std::size_t p_max,
                       const CostParams& params = {});

/// Conversion time of the whole workload: depth * conversion_time(critical array).
double workload_conversion_time(const WorkloadSummary& w, std::size_t n_adc, const CostParams& params = {});

struct Breakdown {
  double conversion_latency_us = 0.0;
  double mvm_latency_us = 0.0;
  double comm_latency_us = 0.0;
  double digital_latency_us = 0.0;
  double fixed_energy_uJ = 0.0;
  double conversion_energy_uJ = 0.0;
};

struct CostEstimate {
  double latency_us = 0.0;
  double energy_uJ = 0.0;
  Breakdown included;  // sums to the totals
  Breakdown excluded;  // reported, not on the critical path
  std::uint64_t conversions = 0;
  double t_conv_ns = 0.0;
};

/// Throws CalibrationError if no constants are given for the strategy.
CostEstimate estimate(const WorkloadSummary& w, const CostParams& params,
                      const std::optional<CalibrationConstants>& calib, std::size_t n_adc);

struct FitPoint {
  mapping::Strategy strategy = mapping::Strategy::linear;
  std::size_t n_adc = 1;
  double t_conv_ns = 0.0;  // workload_conversion_time at n_adc
  double latency_us = 0.0;
  double energy_uJ = 0.0;
};

/// Least squares per strategy: latency = scale * T / 1000, energy = e_fixed + p_conv * T.
Calibration dse_fit(std::span<const FitPoint> points);

std::string write_calibration(const Calibration& c);
Calibration parse_calibration(std::string_view text);

struct DseRow {
  std::string model;
  mapping::Strategy strategy = mapping::Strategy::linear;
  std::size_t n_adc = 1;
  int adc_bits = 8;
  double latency_us = 0.0;
  double energy_uJ = 0.0;
  std::uint64_t conversions = 0;
  std::size_t arrays = 0;
};

/// Cross product in the given order: workloads outer, ADC counts inner.
std::vector<DseRow> dse_sweep(std::span<const WorkloadSummary> workloads, std::span<const std::size_t> adc_counts,
                              const CostParams& params, const Calibration& calib);

inline constexpr std::string_view kDseHeader = "model,strategy,n_adc,adc_bits,latency_us,energy_uJ,conversions,arrays";
std::string dse_csv(std::span<const DseRow> rows);

}  // namespace cim::cost
