#include "cim/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cim/errors.hpp"

namespace cim::xbar {

CrossbarArray::CrossbarArray(std::size_t m, std::size_t id) : m_(m), id_(id), cells_(m * m, 0.0) {
  if (m == 0) throw DimensionError("crossbar: m must be positive");
}

double CrossbarArray::max_abs_cell() const {
  double v = 0.0;
  for (double c : cells_) v = std::max(v, std::abs(c));
  return v;
}

std::size_t CrossbarArray::nonzero_cells() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](double c) { return c != 0.0; }));
}

void CrossbarArray::program(std::span<const CellWrite> writes) {
  std::vector<std::size_t> seen;
  seen.reserve(writes.size());
  for (const auto& w : writes) {
    if (w.row >= m_ || w.col >= m_) {
      throw DimensionError("program_array: cell (" + std::to_string(w.row) + "," + std::to_string(w.col) +
                           ") outside " + std::to_string(m_) + "x" + std::to_string(m_) + " array " +
                           std::to_string(id_));
    }
    if (!std::isfinite(w.value)) throw DimensionError("program_array: non-finite cell value");
    seen.push_back(w.row * m_ + w.col);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw DimensionError("program_array: coordinate written twice in one call");
  }
  for (const auto& w : writes) cells_[w.row * m_ + w.col] = w.value;
  programmed_ = true;
}

CrossbarArray program_array(CrossbarArray array, std::span<const CellWrite> writes) {
  array.program(writes);
  return array;
}

Vector mvm_step(const CrossbarArray& array, std::span<const double> x, const ActivationMask& mask) {
  const std::size_t m = array.m();
  if (x.size() != m) throw DimensionError("mvm_step: input length differs from array dimension");
  if (mask.rows.empty() || mask.cols.empty()) throw DimensionError("mvm_step: empty activation mask");
  Vector out(m, 0.0);
  for (std::size_t c : mask.cols) {
    if (c >= m) throw DimensionError("mvm_step: column index out of range");
    double acc = 0.0;
    for (std::size_t r : mask.rows) {
      if (r >= m) throw DimensionError("mvm_step: row index out of range");
      acc += x[r] * array.cell(r, c);
    }
    out[c] = acc;
  }
  return out;
}

void ADCConfig::validate(std::size_t m) const {
  if (adcs_per_array == 0) throw UnsupportedConfig("adc: adcs_per_array must be >= 1");
  if (adcs_per_array > m) throw UnsupportedConfig("adc: more ADCs than columns");
  if (bits < 1 || bits > 8) throw UnsupportedConfig("adc: bits must be in [1, 8]");
}

double ADCConfig::step() const { return 2.0 * full_scale / std::ldexp(1.0, bits); }

double quantize(double value, const ADCConfig& cfg) {
  if (!std::isfinite(value)) throw DimensionError("adc_convert: non-finite analog value");
  if (cfg.mode == AdcMode::ideal) return value;
  if (cfg.full_scale <= 0.0) throw UnsupportedConfig("adc_convert: quantized mode needs full_scale > 0");
  const double delta = cfg.step();
  const double q = std::round(value / delta) * delta;
  return std::clamp(q, -cfg.full_scale, cfg.full_scale);
}

AdcResult adc_convert(std::span<const double> column_values, std::span<const std::size_t> cols,
                      const ADCConfig& cfg) {
  AdcResult res;
  res.values.reserve(cols.size());
  for (std::size_t c : cols) {
    if (c >= column_values.size()) throw DimensionError("adc_convert: column out of range");
    res.values.push_back(quantize(column_values[c], cfg));
  }
  res.conversions = cols.size();
  return res;
}

}  // namespace cim::xbar
