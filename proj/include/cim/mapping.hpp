#pragma once

// Placement of dense tiles (Linear) and Monarch factor blocks (SparseMap,
// DenseMap) onto m x m crossbars.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cim/crossbar.hpp"
#include "cim/monarch.hpp"
#include "cim/workload.hpp"

namespace cim::mapping {

enum class Strategy { linear, sparse, dense };
enum class Factor { L, R, dense };

std::string_view to_string(Strategy s);
std::string_view to_string(Factor f);
Strategy parse_strategy(std::string_view s);

struct Source {
  std::size_t matmul = 0;
  Factor factor = Factor::dense;
  std::size_t index = 0;  // block index (Monarch) or tile index (Linear)
};

struct Placement {
  std::size_t array_id = 0;
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Source source;
  std::optional<std::size_t> diagonal_index;  // DenseMap only
};

/// DenseMap rotation pair.  R is applied first in M x = P L P R P x, so the
/// slot i_R of R-partition `r_partition` rotates that partition's output by
/// i_R blocks.  After the inter-stage permutation the rotation shows up as a
/// cyclic shift of input group `r_partition` inside every L block; the L
/// cells are stored with the compensating index i_L = (d_slots - i_R) mod d_slots.
/// Self-inverse pairs (i_R == i_L) are resolved by an explicit rotation instead.
struct Pairing {
  std::size_t matmul = 0;
  std::size_t r_partition = 0;
  std::size_t i_R = 0;
  std::size_t i_L = 0;
  bool explicit_correction = false;
};

/// Shape of each mapped matrix, indexed by matmul id.
struct MatrixEntry {
  std::size_t rows = 0;  // dense shape (Linear) or n (Monarch)
  std::size_t cols = 0;
  std::size_t n = 0;  // Monarch dimension, 0 for Linear
  std::size_t b = 0;
};

struct MappingPlan {
  Strategy strategy = Strategy::linear;
  std::size_t m = 0;
  std::size_t num_arrays = 0;
  std::vector<Placement> placements;
  std::vector<Pairing> pairings;
  std::vector<MatrixEntry> matrices;
  // DenseMap: when false every R-stage rotation is undone explicitly and L
  // cells are stored unshifted (the naive reference execution).
  bool pairing_compensation = true;

  std::size_t d_slots(std::size_t matmul) const;
};

struct DenseShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

std::vector<DenseShape> dense_workload(std::span<const workload::MatmulLayer> matmuls);
std::vector<workload::MonarchShape> monarch_workload(std::span<const workload::MatmulLayer> matmuls);

MappingPlan map_linear(std::span<const DenseShape> matrices, std::size_t m);
MappingPlan map_sparse(std::span<const workload::MonarchShape> matrices, std::size_t m);

struct DenseMapOptions {
  // Keep the self-inverse half-rotation slot (d_slots/2) of every array free.
  bool reserve_half_slot = true;
};
MappingPlan map_dense(std::span<const workload::MonarchShape> matrices, std::size_t m,
                      DenseMapOptions opts = {});

struct UtilizationReport {
  std::vector<double> per_array;
  double mean = 0.0;
  std::size_t num_arrays = 0;
  std::size_t nnz_total = 0;
  bool empty = true;
};
UtilizationReport utilization(const MappingPlan& plan);

/// Per R-partition shift applied to the L-stage input groups of `matmul`
/// (0 when the pairing is explicitly corrected or compensation is off).
std::vector<std::size_t> input_group_shifts(const MappingPlan& plan, std::size_t matmul);

/// Checks the structural invariants (coverage, no overlap, pairing rule).
/// Returns an empty string when the plan is valid, otherwise a diagnostic.
std::string validate(const MappingPlan& plan);

std::vector<xbar::CrossbarArray> program_arrays(const MappingPlan& plan,
                                                std::span<const monarch::DenseMatrix> matrices);
std::vector<xbar::CrossbarArray> program_arrays(const MappingPlan& plan,
                                                std::span<const monarch::MonarchMatrix> matrices);

/// Line-oriented dump: a header line, one `place` line per placement and one
/// `pair` line per pairing.  parse_plan() reads the same format back.
std::string serialize(const MappingPlan& plan);
MappingPlan parse_plan(std::string_view text);

}  // namespace cim::mapping
