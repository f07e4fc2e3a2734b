#pragma once

// Functional model of an m x m analog crossbar.  Rows are driven by the input
// vector, each column accumulates sum_r x[r] * cell[r][c].

#include <cstddef>
#include <span>
#include <vector>

namespace cim::xbar {

using Vector = std::vector<double>;

struct CellWrite {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Rows and columns driven in one step.  Row order is the summation order of
/// the simulator; it does not change the ideal result beyond rounding.
struct ActivationMask {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
};

class CrossbarArray {
 public:
  CrossbarArray() = default;
  CrossbarArray(std::size_t m, std::size_t id);

  std::size_t m() const { return m_; }
  std::size_t id() const { return id_; }
  double cell(std::size_t r, std::size_t c) const { return cells_[r * m_ + c]; }
  bool programmed() const { return programmed_; }
  double max_abs_cell() const;
  std::size_t nonzero_cells() const;

  /// Writes the listed cells.  Throws DimensionError on out-of-range or
  /// duplicate coordinates; the array is left untouched in that case.
  void program(std::span<const CellWrite> writes);

 private:
  std::size_t m_ = 0;
  std::size_t id_ = 0;
  bool programmed_ = false;
  std::vector<double> cells_;
};

CrossbarArray program_array(CrossbarArray array, std::span<const CellWrite> writes);

/// Per-column sums for the masked columns; every other column reads 0.
Vector mvm_step(const CrossbarArray& array, std::span<const double> x, const ActivationMask& mask);

enum class AdcMode { ideal, quantized };

struct ADCConfig {
  std::size_t adcs_per_array = 1;
  int bits = 8;
  AdcMode mode = AdcMode::ideal;
  double full_scale = 0.0;  // <= 0: derived per schedule

  void validate(std::size_t m) const;
  double step() const;  // quantization step 2*full_scale / 2^bits
};

struct AdcResult {
  Vector values;  // one per converted column, in mask order
  std::size_t conversions = 0;
};

/// Converts `column_values[c]` for each c in `cols`.
AdcResult adc_convert(std::span<const double> column_values, std::span<const std::size_t> cols,
                      const ADCConfig& cfg);
/// Scalar quantizer used by adc_convert.
double quantize(double value, const ADCConfig& cfg);

}  // namespace cim::xbar
