#pragma once

// Turns a MappingPlan into per-step activation commands and executes them on
// programmed crossbars.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cim/crossbar.hpp"
#include "cim/mapping.hpp"

namespace cim::sched {

using Vector = std::vector<double>;

enum class Stage { dense, R, L };
std::string_view to_string(Stage s);

/// One conversion step on one array.  mask.rows[i] reads stage input
/// row_inputs[i]; mask.cols[j] is converted by ADC adc_group[j] and added into
/// stage output col_outputs[j].  `rotation` is the diagonal slot (blocks).
struct StepCommand {
  std::size_t timestamp = 0;
  std::size_t array_id = 0;
  std::size_t matmul = 0;
  Stage stage = Stage::dense;
  xbar::ActivationMask mask;
  std::vector<std::size_t> row_inputs;
  std::vector<std::size_t> col_outputs;
  std::vector<std::size_t> adc_group;
  std::size_t rotation = 0;
};

/// Explicit left rotation by `blocks` of the stage-output segment
/// [offset, offset + length), block size b.
struct Correction {
  std::size_t matmul = 0;
  Stage stage = Stage::R;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t blocks = 0;
  std::size_t b = 1;
};

struct StreamMetadata {
  std::size_t total_steps = 0;    // conversion steps
  std::size_t logical_steps = 0;  // MVM activations before ADC serialization
  std::vector<std::uint64_t> conversions_per_array;
  std::vector<std::uint64_t> conversions_per_matmul;
  std::uint64_t critical_array_conversions = 0;
  std::size_t max_rows_per_conversion = 0;
  std::size_t p_max = 0;  // widest set of columns one array can convert at once
  std::size_t num_timestamps = 0;
};

struct CommandStream {
  mapping::Strategy strategy = mapping::Strategy::linear;
  std::size_t m = 0;
  xbar::ADCConfig adc;
  std::vector<mapping::MatrixEntry> matrices;
  std::vector<StepCommand> steps;  // ordered by stage, array_id, per-array order
  std::vector<Correction> corrections;
  StreamMetadata meta;
  bool metadata_only = false;
};

struct ScheduleOptions {
  // Skip materializing steps; only metadata (and corrections) are produced.
  bool metadata_only = false;
};

CommandStream build_schedule(const mapping::MappingPlan& plan, const xbar::ADCConfig& adc,
                             ScheduleOptions opts = {});

struct ExecResult {
  Vector y;
  std::uint64_t conversions = 0;
  std::uint64_t permutations = 0;
  std::uint64_t explicit_rotations = 0;
};

/// Runs matmul `matmul` of the stream on x.  Results do not depend on the
/// thread count (CIM_MONARCH_THREADS caps it).
ExecResult execute(const CommandStream& stream, std::span<const xbar::CrossbarArray> arrays, std::size_t matmul,
                   std::span<const double> x);

/// Left rotation by i blocks of size b: out block j = v block (j + i) mod d.
Vector rotate_blocks(std::span<const double> v, std::size_t i, std::size_t b);

/// One line per step: `t=.. array=.. stage=.. rows=.. cols=.. route=.. rot=..`.
std::string dump_trace(const CommandStream& stream);

std::size_t thread_limit();

}  // namespace cim::sched
