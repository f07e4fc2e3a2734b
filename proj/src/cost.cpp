#include "cim/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cim/errors.hpp"

namespace cim::cost {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

WorkloadSummary summarize(const std::string& model, const mapping::MappingPlan& plan,
                          const sched::CommandStream& stream, std::size_t layers) {
  WorkloadSummary w;
  w.model = model;
  w.strategy = plan.strategy;
  w.arrays = plan.num_arrays;
  w.adc_bits = adc_bits_required(stream.meta);
  w.p_max = std::max<std::size_t>(1, stream.meta.p_max);
  w.critical_conversions = stream.meta.critical_array_conversions;
  for (auto c : stream.meta.conversions_per_matmul) w.total_conversions += c;
  w.depth = std::max<std::size_t>(1, plan.matrices.size());
  w.layers = layers;
  return w;
}

int adc_bits_required(std::size_t active_rows) {
  int bits = 0;
  while (bits < 8 && (std::size_t{1} << bits) < active_rows) ++bits;
  return std::max(1, bits);
}

int adc_bits_required(const sched::StreamMetadata& meta) { return adc_bits_required(meta.max_rows_per_conversion); }

double conversion_time(int bits, std::uint64_t n_conversions, std::size_t n_adc, std::size_t p_max,
                       const CostParams& params) {
  if (n_adc == 0) throw UnsupportedConfig("cost: n_adc must be >= 1");
  const double par = static_cast<double>(std::min(n_adc, std::max<std::size_t>(1, p_max)));
  return static_cast<double>(n_conversions) * params.t_adc_8b * (bits / 8.0) / par;
}

double workload_conversion_time(const WorkloadSummary& w, std::size_t n_adc, const CostParams& params) {
  return static_cast<double>(w.depth) * conversion_time(w.adc_bits, w.critical_conversions, n_adc, w.p_max, params);
}

CostEstimate estimate(const WorkloadSummary& w, const CostParams& params,
                      const std::optional<CalibrationConstants>& calib, std::size_t n_adc) {
  CostEstimate est;
  est.conversions = w.total_conversions;
  est.t_conv_ns = workload_conversion_time(w, n_adc, params);
  if (!calib) {
    throw CalibrationError("cost: no calibration for strategy " + std::string(mapping::to_string(w.strategy)) +
                           " (uncalibrated: " + std::to_string(w.total_conversions) + " conversions, " +
                           std::to_string(w.critical_conversions) + " on the busiest array, " +
                           fmt("%.3f", est.t_conv_ns) + " ns conversion time)");
  }
  const double stages = w.strategy == mapping::Strategy::linear ? 1.0 : 2.0;
  Breakdown side;
  side.mvm_latency_us = static_cast<double>(w.depth) * stages * params.t_mvm / 1000.0;
  side.comm_latency_us = static_cast<double>(w.depth) * params.t_comm / 1000.0;
  side.digital_latency_us =
      static_cast<double>(w.layers) * (2.0 * params.t_layernorm + params.t_gelu + 2.0 * params.t_add) / 1000.0;

  est.included.conversion_latency_us = calib->critical_path_scale * est.t_conv_ns / 1000.0;
  est.included.fixed_energy_uJ = calib->e_fixed;
  est.included.conversion_energy_uJ = calib->p_conv * est.t_conv_ns;
  if (params.include_non_conversion_latency) {
    est.included.mvm_latency_us = side.mvm_latency_us;
    est.included.comm_latency_us = side.comm_latency_us;
    est.included.digital_latency_us = side.digital_latency_us;
  } else {
    est.excluded = side;
  }
  const auto& in = est.included;
  est.latency_us = in.conversion_latency_us + in.mvm_latency_us + in.comm_latency_us + in.digital_latency_us;
  est.energy_uJ = in.fixed_energy_uJ + in.conversion_energy_uJ;
  return est;
}

Calibration dse_fit(std::span<const FitPoint> points) {
  Calibration cal;
  std::set<mapping::Strategy> strategies;
  for (const auto& p : points) strategies.insert(p.strategy);
  if (strategies.empty()) throw CalibrationError("dse_fit: no points");
  for (auto s : strategies) {
    std::vector<FitPoint> pts;
    for (const auto& p : points) {
      if (p.strategy == s) pts.push_back(p);
    }
    std::set<double> distinct;
    for (const auto& p : pts) distinct.insert(p.t_conv_ns);
    const std::string name(mapping::to_string(s));
    if (pts.size() < 3) throw CalibrationError("dse_fit: " + name + " needs at least 3 points");
    if (distinct.size() < 2) throw CalibrationError("dse_fit: " + name + " points share one conversion time");

    double stt = 0, stl = 0, st = 0, se = 0, ste = 0;
    for (const auto& p : pts) {
      stt += p.t_conv_ns * p.t_conv_ns;
      stl += p.t_conv_ns * p.latency_us;
      st += p.t_conv_ns;
      se += p.energy_uJ;
      ste += p.t_conv_ns * p.energy_uJ;
    }
    const double n = static_cast<double>(pts.size());
    CalibrationConstants c;
    c.critical_path_scale = 1000.0 * stl / stt;
    const double det = n * stt - st * st;
    c.p_conv = (n * ste - st * se) / det;
    c.e_fixed = (se - c.p_conv * st) / n;
    c.points = pts.size();
    for (const auto& p : pts) {
      const double lat = c.critical_path_scale * p.t_conv_ns / 1000.0;
      const double en = c.e_fixed + c.p_conv * p.t_conv_ns;
      c.residual_latency = std::max(c.residual_latency, std::abs(lat - p.latency_us) / std::abs(p.latency_us));
      c.residual_energy = std::max(c.residual_energy, std::abs(en - p.energy_uJ) / std::abs(p.energy_uJ));
    }
    cal.by_strategy[s] = c;
  }
  return cal;
}

std::string write_calibration(const Calibration& c) {
  std::ostringstream out;
  out << "# latency_us = critical_path_scale * T_ns / 1000; energy_uJ = e_fixed + p_conv * T_ns\n";
  out << "# T_ns: workload conversion time (depth * busiest-array conversion time)\n";
  out << "version = " << c.version << "\n";
  for (const auto& [s, k] : c.by_strategy) {
    const std::string p(mapping::to_string(s));
    out << p << ".critical_path_scale = " << fmt("%.17g", k.critical_path_scale) << "\n";
    out << p << ".e_fixed = " << fmt("%.17g", k.e_fixed) << "\n";
    out << p << ".p_conv = " << fmt("%.17g", k.p_conv) << "\n";
    out << p << ".residual_latency = " << fmt("%.3e", k.residual_latency) << "\n";
    out << p << ".residual_energy = " << fmt("%.3e", k.residual_energy) << "\n";
    out << p << ".points = " << k.points << "\n";
  }
  return out.str();
}

Calibration parse_calibration(std::string_view text) {
  Calibration cal;
  bool have_version = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw CalibrationError("calibration line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0') throw CalibrationError("calibration key " + key + ": not a number");
    if (key == "version") {
      cal.version = static_cast<int>(v);
      if (cal.version != 1) throw CalibrationError("calibration: unsupported version " + val);
      have_version = true;
      continue;
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw CalibrationError("calibration: unknown key " + key);
    mapping::Strategy s;
    try {
      s = mapping::parse_strategy(key.substr(0, dot));
    } catch (const ConfigError&) {
      throw CalibrationError("calibration: unknown strategy in key " + key);
    }
    auto& k = cal.by_strategy[s];
    const std::string field = key.substr(dot + 1);
    if (field == "critical_path_scale") k.critical_path_scale = v;
    else if (field == "e_fixed") k.e_fixed = v;
    else if (field == "p_conv") k.p_conv = v;
    else if (field == "residual_latency") k.residual_latency = v;
    else if (field == "residual_energy") k.residual_energy = v;
    else if (field == "points") k.points = static_cast<std::size_t>(v);
    else throw CalibrationError("calibration: unknown key " + key);
  }
  if (!have_version) throw CalibrationError("calibration: missing version");
  return cal;
}

std::vector<DseRow> dse_sweep(std::span<const WorkloadSummary> workloads, std::span<const std::size_t> adc_counts,
                              const CostParams& params, const Calibration& calib) {
  std::vector<DseRow> rows;
  for (const auto& w : workloads) {
    std::optional<CalibrationConstants> c;
    if (auto it = calib.by_strategy.find(w.strategy); it != calib.by_strategy.end()) c = it->second;
    for (std::size_t n : adc_counts) {
      const auto est = estimate(w, params, c, n);
      rows.push_back({w.model, w.strategy, n, w.adc_bits, est.latency_us, est.energy_uJ, est.conversions, w.arrays});
    }
  }
  return rows;
}

std::string dse_csv(std::span<const DseRow> rows) {
  std::ostringstream out;
  out << kDseHeader << "\n";
  for (const auto& r : rows) {
    out << r.model << ',' << mapping::to_string(r.strategy) << ',' << r.n_adc << ',' << r.adc_bits << ','
        << fmt("%.3f", r.latency_us) << ',' << fmt("%.3f", r.energy_uJ) << ',' << r.conversions << ',' << r.arrays
        << "\n";
  }
  return out.str();
}

}  // namespace cim::cost
