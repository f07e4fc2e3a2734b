#pragma once

// End-to-end driver: workload -> plans -> schedules -> cost tables, plus the
// functional-equivalence harness behind `verify`.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cim/config.hpp"
#include "cim/cost.hpp"
#include "cim/mapping.hpp"
#include "cim/workload.hpp"

namespace cim::pipeline {

struct ArrayRow {
  std::string model;
  mapping::Strategy strategy = mapping::Strategy::linear;
  std::size_t arrays = 0;
  double utilization = 0.0;
  std::size_t nnz_total = 0;
};

struct ModelResult {
  std::string model;
  std::vector<ArrayRow> arrays;
  std::vector<cost::WorkloadSummary> workloads;  // same order as arrays
  workload::CountReport counts;
};

/// Maps and schedules (metadata only) every requested strategy for one model.
ModelResult analyze_model(const std::string& model, const RunConfig& cfg);

std::string arrays_csv(const std::vector<ModelResult>& results);
std::string counts_csv(const std::vector<ModelResult>& results);
std::string schedule_csv(const std::vector<ModelResult>& results);
std::string cost_csv(const std::vector<ModelResult>& results, const cost::CostParams& params,
                     const cost::Calibration& calib);
std::vector<cost::DseRow> dse_rows(const std::vector<ModelResult>& results, const RunConfig& cfg,
                                   const cost::CostParams& params, const cost::Calibration& calib);

struct EquivalenceResult {
  double max_rel_error = 0.0;
  std::uint64_t conversions = 0;
  std::uint64_t predicted_conversions = 0;
  std::size_t inputs = 0;
};

/// One random weight matrix (dense for Linear, Monarch otherwise) of size n with
/// b = sqrt(n), mapped on m x m arrays and executed for `inputs` random vectors.
EquivalenceResult check_equivalence(mapping::Strategy strategy, std::size_t n, std::size_t m, std::size_t inputs,
                                    std::uint64_t seed, const xbar::ADCConfig& adc, Fault fault = Fault::none);

struct RotationResult {
  std::size_t pairings = 0;
  bool pairing_rule = true;  // (i_L + i_R) mod d_slots == 0 everywhere
  bool bitwise_equal = true;  // paired run == explicit-rotation run
  double max_diff = 0.0;
};
RotationResult check_rotation(std::size_t n, std::size_t m, std::size_t inputs, std::uint64_t seed,
                              Fault fault = Fault::none);

/// Breaks every compensated pairing of a DenseMap plan (negative control).
void inject_pairing_fault(mapping::MappingPlan& plan);

struct VerifyEntry {
  std::string property;
  bool pass = false;
  double max_error = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  bool all_pass() const;
  std::string text() const;
};

VerifyReport verify(const RunConfig& cfg);

/// Reads `model,strategy,n_adc,latency_us,energy_uJ` rows and attaches the
/// workload conversion time of the matching summary.
std::vector<cost::FitPoint> load_fit_points(const std::string& path, const std::vector<ModelResult>& results,
                                            const cost::CostParams& params);
cost::Calibration load_calibration(const std::string& path);
std::string calibration_path(const RunConfig& cfg);

struct DiffRow {
  std::string group, model, strategy, metric;
  std::size_t n_adc = 0;
  double reference = 0.0;
  double measured = 0.0;
  std::string tolerance;
  std::string status;  // PASS, FAIL or INFO
};

/// Compares measured values against data/reference_targets.csv.
std::vector<DiffRow> reference_diff(const std::string& path, const std::vector<ModelResult>& results,
                                    const cost::CostParams& params, const cost::Calibration& calib);
std::string diff_csv(const std::vector<DiffRow>& rows);

enum ExitCode { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3 };

struct Artifacts {
  bool arrays = false, cost = false, dse = false, counts = false, verify = false, schedule = false;
  bool reference_diff = false;
  static Artifacts all() { return {true, true, true, true, true, false, false}; }
};

/// Writes the selected artifacts into cfg.output_dir and returns an exit code.
int run_pipeline(const RunConfig& cfg, const Artifacts& what, std::string* message = nullptr);

}  // namespace cim::pipeline
