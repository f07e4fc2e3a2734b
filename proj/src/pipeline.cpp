#include "cim/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "cim/errors.hpp"
#include "cim/matrix_io.hpp"
#include "cim/monarch.hpp"
#include "cim/scheduler.hpp"

namespace cim::pipeline {

using mapping::Strategy;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::size_t isqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

mapping::MappingPlan make_plan(Strategy s, std::span<const workload::MatmulLayer> mm, std::size_t m,
                               bool reserve_half_slot) {
  switch (s) {
    case Strategy::linear: {
      const auto shapes = mapping::dense_workload(mm);
      return mapping::map_linear(shapes, m);
    }
    case Strategy::sparse: {
      const auto shapes = mapping::monarch_workload(mm);
      return mapping::map_sparse(shapes, m);
    }
    case Strategy::dense: break;
  }
  const auto shapes = mapping::monarch_workload(mm);
  return mapping::map_dense(shapes, m, {reserve_half_slot});
}

monarch::Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  monarch::Vector x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

ModelResult analyze_model(const std::string& model, const RunConfig& cfg) {
  const auto spec = workload::builtin_model(model);
  const auto mm = workload::enumerate_matmuls(spec);
  ModelResult res;
  res.model = model;
  res.counts = workload::count_params_flops(spec);
  for (Strategy s : cfg.strategies) {
    const auto plan = make_plan(s, mm, cfg.m, cfg.reserve_half_slot);
    const auto util = mapping::utilization(plan);
    const auto stream = sched::build_schedule(plan, xbar::ADCConfig{}, {.metadata_only = true});
    res.arrays.push_back({model, s, plan.num_arrays, util.mean, util.nnz_total});
    res.workloads.push_back(cost::summarize(model, plan, stream, spec.num_layers));
  }
  return res;
}

std::string arrays_csv(const std::vector<ModelResult>& results) {
  std::ostringstream out;
  out << "model,strategy,arrays,utilization\n";
  for (const auto& r : results) {
    for (const auto& a : r.arrays) {
      out << a.model << ',' << mapping::to_string(a.strategy) << ',' << a.arrays << ',' << fmt("%.3f", a.utilization)
          << "\n";
    }
  }
  return out.str();
}

std::string counts_csv(const std::vector<ModelResult>& results) {
  std::ostringstream out;
  out << "model,params_dense,params_monarch,param_ratio,flops_dense,flops_monarch,flop_ratio\n";
  for (const auto& r : results) {
    const auto& c = r.counts;
    out << r.model << ',' << c.params_dense << ',' << c.params_monarch << ',' << fmt("%.3f", c.param_ratio()) << ','
        << c.flops_dense << ',' << c.flops_monarch << ',' << fmt("%.3f", c.flop_ratio()) << "\n";
  }
  return out.str();
}

std::string schedule_csv(const std::vector<ModelResult>& results) {
  std::ostringstream out;
  out << "model,strategy,adc_bits,p_max,critical_conversions,total_conversions,depth\n";
  for (const auto& r : results) {
    for (const auto& w : r.workloads) {
      out << w.model << ',' << mapping::to_string(w.strategy) << ',' << w.adc_bits << ',' << w.p_max << ','
          << w.critical_conversions << ',' << w.total_conversions << ',' << w.depth << "\n";
    }
  }
  return out.str();
}

namespace {

std::optional<cost::CalibrationConstants> constants_for(const cost::Calibration& calib, Strategy s) {
  if (auto it = calib.by_strategy.find(s); it != calib.by_strategy.end()) return it->second;
  return std::nullopt;
}

}  // namespace

std::string cost_csv(const std::vector<ModelResult>& results, const cost::CostParams& params,
                     const cost::Calibration& calib) {
  std::ostringstream out;
  out << "model,strategy,n_adc,adc_bits,latency_us,energy_mJ,conversion_latency_us,excluded_mvm_latency_us,"
         "excluded_comm_latency_us,excluded_digital_latency_us\n";
  for (const auto& r : results) {
    for (const auto& w : r.workloads) {
      const auto est = cost::estimate(w, params, constants_for(calib, w.strategy), 1);
      out << w.model << ',' << mapping::to_string(w.strategy) << ",1," << w.adc_bits << ','
          << fmt("%.3f", est.latency_us) << ',' << fmt("%.4f", est.energy_uJ / 1000.0) << ','
          << fmt("%.3f", est.included.conversion_latency_us) << ',' << fmt("%.3f", est.excluded.mvm_latency_us) << ','
          << fmt("%.3f", est.excluded.comm_latency_us) << ',' << fmt("%.3f", est.excluded.digital_latency_us)
          << "\n";
    }
  }
  return out.str();
}

std::vector<cost::DseRow> dse_rows(const std::vector<ModelResult>& results, const RunConfig& cfg,
                                   const cost::CostParams& params, const cost::Calibration& calib) {
  std::vector<cost::DseRow> rows;
  for (const auto& r : results) {
    auto part = cost::dse_sweep(r.workloads, cfg.adc_counts, params, calib);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

void inject_pairing_fault(mapping::MappingPlan& plan) {
  for (auto& pr : plan.pairings) {
    const std::size_t ds = plan.d_slots(pr.matmul);
    if (ds > 1) pr.i_L = (pr.i_L + 1) % ds;
  }
}

EquivalenceResult check_equivalence(Strategy strategy, std::size_t n, std::size_t m, std::size_t inputs,
                                    std::uint64_t seed, const xbar::ADCConfig& adc, Fault fault) {
  const std::size_t b = isqrt(n);
  if (b * b != n) throw UnsupportedConfig("equivalence: n must be a perfect square");
  std::mt19937_64 rng(seed);
  xbar::ADCConfig cfg = adc;
  cfg.adcs_per_array = std::min(cfg.adcs_per_array, m);

  EquivalenceResult res;
  res.inputs = inputs;
  std::vector<xbar::CrossbarArray> arrays;
  sched::CommandStream stream;
  std::function<monarch::Vector(const monarch::Vector&)> reference;
  monarch::DenseMatrix W;
  monarch::MonarchMatrix M;

  if (strategy == Strategy::linear) {
    W = monarch::DenseMatrix::random(n, n, rng);
    const mapping::DenseShape shape{n, n};
    const auto plan = mapping::map_linear(std::span(&shape, 1), m);
    arrays = mapping::program_arrays(plan, std::span<const monarch::DenseMatrix>(&W, 1));
    stream = sched::build_schedule(plan, cfg);
    reference = [&](const monarch::Vector& x) { return W.matvec(x); };
  } else {
    M = monarch::MonarchMatrix::random(n, b, rng);
    const workload::MonarchShape shape{n, b};
    auto plan = strategy == Strategy::sparse ? mapping::map_sparse(std::span(&shape, 1), m)
                                             : mapping::map_dense(std::span(&shape, 1), m);
    if (fault == Fault::pairing) inject_pairing_fault(plan);
    arrays = mapping::program_arrays(plan, std::span<const monarch::MonarchMatrix>(&M, 1));
    stream = sched::build_schedule(plan, cfg);
    reference = [&](const monarch::Vector& x) { return monarch::monarch_mvm(M, x); };
  }
  res.predicted_conversions = stream.meta.conversions_per_matmul.at(0) * inputs;
  for (std::size_t k = 0; k < inputs; ++k) {
    const auto x = random_vector(n, rng);
    const auto out = sched::execute(stream, arrays, 0, x);
    const auto ref = reference(x);
    res.max_rel_error = std::max(res.max_rel_error, monarch::rel_error(out.y, ref));
    res.conversions += out.conversions;
  }
  return res;
}

RotationResult check_rotation(std::size_t n, std::size_t m, std::size_t inputs, std::uint64_t seed, Fault fault) {
  const std::size_t b = isqrt(n);
  if (b * b != n) throw UnsupportedConfig("rotation: n must be a perfect square");
  std::mt19937_64 rng(seed);
  const auto M = monarch::MonarchMatrix::random(n, b, rng);
  const workload::MonarchShape shape{n, b};
  auto paired = mapping::map_dense(std::span(&shape, 1), m);
  auto naive = paired;
  naive.pairing_compensation = false;
  if (fault == Fault::pairing) inject_pairing_fault(paired);

  RotationResult res;
  res.pairings = paired.pairings.size();
  for (const auto& pr : paired.pairings) {
    const std::size_t ds = paired.d_slots(pr.matmul);
    if ((pr.i_L + pr.i_R) % ds != 0) res.pairing_rule = false;
  }
  const xbar::ADCConfig adc{std::min<std::size_t>(8, m)};
  const auto arr_p = mapping::program_arrays(paired, std::span<const monarch::MonarchMatrix>(&M, 1));
  const auto arr_n = mapping::program_arrays(naive, std::span<const monarch::MonarchMatrix>(&M, 1));
  const auto s_p = sched::build_schedule(paired, adc);
  const auto s_n = sched::build_schedule(naive, adc);
  for (std::size_t k = 0; k < inputs; ++k) {
    const auto x = random_vector(n, rng);
    const auto yp = sched::execute(s_p, arr_p, 0, x).y;
    const auto yn = sched::execute(s_n, arr_n, 0, x).y;
    for (std::size_t i = 0; i < n; ++i) {
      if (yp[i] != yn[i]) res.bitwise_equal = false;
      res.max_diff = std::max(res.max_diff, std::abs(yp[i] - yn[i]));
    }
  }
  return res;
}

bool VerifyReport::all_pass() const {
  for (const auto& e : entries) {
    if (!e.pass) return false;
  }
  return !entries.empty();
}

std::string VerifyReport::text() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << (e.pass ? "PASS " : "FAIL ") << e.property << " max_err=" << fmt("%.3e", e.max_error);
    if (!e.detail.empty()) out << " (" << e.detail << ")";
    out << "\n";
  }
  out << "overall: " << (all_pass() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

VerifyReport verify(const RunConfig& cfg) {
  VerifyReport rep;
  constexpr double kTol = 1e-10;
  std::uint64_t seed = cfg.seed;
  auto next_seed = [&] { return seed = seed * 6364136223846793005ULL + 1442695040888963407ULL; };
  xbar::ADCConfig adc;
  adc.adcs_per_array = 8;

  for (std::size_t n : cfg.verify_n) {
    const std::size_t b = isqrt(n);
    if (b * b != n) throw ConfigError("verify_n", std::to_string(n) + " is not a perfect square");
    const std::string tag = " n=" + std::to_string(n);

    for (std::size_t m : {n / 4, n / 2, n}) {
      if (m == 0 || m % b != 0) continue;
      const std::string mt = tag + " m=" + std::to_string(m);
      for (Strategy s : cfg.strategies) {
        const auto r = check_equivalence(s, n, m, cfg.verify_inputs, next_seed(), adc, cfg.fault);
        const bool counted = r.conversions == r.predicted_conversions;
        rep.entries.push_back({"equivalence " + std::string(mapping::to_string(s)) + mt,
                               r.max_rel_error <= kTol && counted, r.max_rel_error,
                               std::to_string(r.conversions) + "/" + std::to_string(r.predicted_conversions) +
                                   " conversions"});
        if (cfg.adc_mode == xbar::AdcMode::quantized) {
          xbar::ADCConfig q = adc;
          q.mode = xbar::AdcMode::quantized;
          q.bits = cfg.adc_bits;
          const auto rq = check_equivalence(s, n, m, cfg.verify_inputs, next_seed(), q);
          rep.entries.push_back({"quantized " + std::string(mapping::to_string(s)) + mt + " bits=" +
                                     std::to_string(cfg.adc_bits),
                                 std::isfinite(rq.max_rel_error), rq.max_rel_error, "reported, not gated"});
        }
      }
      const auto rot = check_rotation(n, m, cfg.verify_inputs, next_seed(), cfg.fault);
      rep.entries.push_back({"rotation_cancellation" + mt, rot.pairing_rule && rot.bitwise_equal, rot.max_diff,
                             std::to_string(rot.pairings) + " pairings" +
                                 (rot.pairing_rule ? "" : ", pairing rule violated")});
    }

    std::mt19937_64 rng(next_seed());
    const auto M = monarch::MonarchMatrix::random(n, b, rng);
    const auto F = monarch::fold_permutations(M);
    double fold_err = 0.0;
    std::uint64_t p_unfolded = 0, p_folded = 0;
    for (std::size_t k = 0; k < cfg.verify_inputs; ++k) {
      const auto x = random_vector(n, rng);
      monarch::Vector y0, y1;
      {
        monarch::CountingScope sc;
        y0 = monarch::monarch_mvm(M, x);
        p_unfolded = sc.counts().permutations;
      }
      {
        monarch::CountingScope sc;
        y1 = monarch::monarch_mvm(F, x);
        p_folded = sc.counts().permutations;
      }
      fold_err = std::max(fold_err, monarch::rel_error(y1, y0));
    }
    rep.entries.push_back({"fold_identity" + tag, fold_err <= 1e-12 && p_folded == 1 && p_unfolded == 3, fold_err,
                           "permutations " + std::to_string(p_unfolded) + " -> " + std::to_string(p_folded)});

    const auto W = monarch::expand_to_dense(M);
    const auto proj = monarch::d2s_project(W, b);
    const auto back = monarch::expand_to_dense(proj.M);
    double proj_err = 0.0;
    {
      double diff = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < n * n; ++i) {
        diff += (back.data()[i] - W.data()[i]) * (back.data()[i] - W.data()[i]);
        ref += W.data()[i] * W.data()[i];
      }
      proj_err = std::sqrt(diff / ref);
    }
    rep.entries.push_back({"projection_lossless" + tag, proj_err <= 1e-8, proj_err, ""});
  }

  // Basis sweep: DenseMap execution of e_k reproduces the dense expansion.
  {
    constexpr std::size_t n = 16, b = 4, m = 8;
    std::mt19937_64 rng(next_seed());
    const auto M = monarch::MonarchMatrix::random(n, b, rng);
    const auto D = monarch::expand_to_dense(M);
    const workload::MonarchShape shape{n, b};
    auto plan = mapping::map_dense(std::span(&shape, 1), m);
    if (cfg.fault == Fault::pairing) inject_pairing_fault(plan);
    const auto arrays = mapping::program_arrays(plan, std::span<const monarch::MonarchMatrix>(&M, 1));
    const auto stream = sched::build_schedule(plan, xbar::ADCConfig{4});
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      monarch::Vector e(n, 0.0);
      e[k] = 1.0;
      const auto y = sched::execute(stream, arrays, 0, e).y;
      for (std::size_t i = 0; i < n; ++i) {
        err = std::max(err, std::abs(y[i] - D(i, k)));
        scale = std::max(scale, std::abs(D(i, k)));
      }
    }
    err /= scale;
    rep.entries.push_back({"basis_sweep dense n=16 m=8", err <= kTol, err, ""});
  }
  return rep;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw IoError(path + ": empty file");
  return rows;
}

const cost::WorkloadSummary* find_summary(const std::vector<ModelResult>& results, const std::string& model,
                                          Strategy s) {
  for (const auto& r : results) {
    if (r.model != model) continue;
    for (const auto& w : r.workloads) {
      if (w.strategy == s) return &w;
    }
  }
  return nullptr;
}

const ArrayRow* find_arrays(const std::vector<ModelResult>& results, const std::string& model, Strategy s) {
  for (const auto& r : results) {
    if (r.model != model) continue;
    for (const auto& a : r.arrays) {
      if (a.strategy == s) return &a;
    }
  }
  return nullptr;
}

double to_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw IoError("malformed number '" + s + "' in " + what);
  return v;
}

}  // namespace

std::vector<cost::FitPoint> load_fit_points(const std::string& path, const std::vector<ModelResult>& results,
                                            const cost::CostParams& params) {
  const auto rows = read_csv(path);
  std::vector<cost::FitPoint> pts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw IoError(path + ": expected 5 columns on data row " + std::to_string(i));
    const Strategy s = mapping::parse_strategy(r[1]);
    const auto* w = find_summary(results, r[0], s);
    if (!w) throw ConfigError("model", "fit point for " + r[0] + "/" + r[1] + " has no analyzed workload");
    cost::FitPoint p;
    p.strategy = s;
    p.n_adc = static_cast<std::size_t>(to_number(r[2], path));
    p.t_conv_ns = cost::workload_conversion_time(*w, p.n_adc, params);
    p.latency_us = to_number(r[3], path);
    p.energy_uJ = to_number(r[4], path);
    pts.push_back(p);
  }
  return pts;
}

cost::Calibration load_calibration(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read calibration " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return cost::parse_calibration(ss.str());
}

std::string calibration_path(const RunConfig& cfg) {
  return cfg.calibration.empty() ? default_data_dir() + "/calibration.txt" : cfg.calibration;
}

std::vector<DiffRow> reference_diff(const std::string& path, const std::vector<ModelResult>& results,
                                    const cost::CostParams& params, const cost::Calibration& calib) {
  const auto rows = read_csv(path);
  std::vector<DiffRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) throw IoError(path + ": expected 7 columns on data row " + std::to_string(i));
    DiffRow d{r[0], r[1], r[2], r[3], r[4].empty() ? 0 : static_cast<std::size_t>(to_number(r[4], path)),
              to_number(r[5], path), 0.0, r[6], ""};
    const ModelResult* mr = nullptr;
    for (const auto& x : results) {
      if (x.model == d.model) mr = &x;
    }
    if (!mr) continue;
    if (d.metric == "param_ratio" || d.metric == "flop_ratio") {
      d.measured = d.metric == "param_ratio" ? mr->counts.param_ratio() : mr->counts.flop_ratio();
    } else {
      const Strategy s = mapping::parse_strategy(d.strategy);
      if (d.metric == "arrays" || d.metric == "utilization") {
        const auto* a = find_arrays(results, d.model, s);
        if (!a) continue;
        d.measured = d.metric == "arrays" ? static_cast<double>(a->arrays) : a->utilization;
      } else {
        const auto* w = find_summary(results, d.model, s);
        if (!w) continue;
        const auto est = cost::estimate(*w, params, constants_for(calib, s), d.n_adc);
        if (d.metric == "latency_us") d.measured = est.latency_us;
        else if (d.metric == "energy_uJ") d.measured = est.energy_uJ;
        else throw IoError(path + ": unknown metric " + d.metric);
      }
    }
    const auto& t = d.tolerance;
    bool ok = true;
    if (t == "info") {
      d.status = "INFO";
    } else {
      if (t == "exact") {
        ok = d.measured == d.reference;
      } else if (t.rfind("rel:", 0) == 0) {
        ok = std::abs(d.measured - d.reference) <= to_number(t.substr(4), path) * std::abs(d.reference);
      } else if (t.rfind("abs:", 0) == 0) {
        ok = std::abs(d.measured - d.reference) <= to_number(t.substr(4), path) + 1e-12;
      } else if (t.rfind("range:", 0) == 0) {
        const auto colon = t.find(':', 6);
        if (colon == std::string::npos) throw IoError(path + ": malformed range " + t);
        ok = d.measured >= to_number(t.substr(6, colon - 6), path) && d.measured <= to_number(t.substr(colon + 1), path);
      } else {
        throw IoError(path + ": unknown tolerance " + t);
      }
      d.status = ok ? "PASS" : "FAIL";
    }
    out.push_back(d);
  }
  return out;
}

std::string diff_csv(const std::vector<DiffRow>& rows) {
  std::ostringstream out;
  out << "group,model,strategy,metric,n_adc,reference,measured,rel_diff,tolerance,status\n";
  for (const auto& d : rows) {
    const double rel = d.reference != 0.0 ? (d.measured - d.reference) / std::abs(d.reference) : 0.0;
    out << d.group << ',' << d.model << ',' << d.strategy << ',' << d.metric << ',';
    if (d.n_adc) out << d.n_adc;
    out << ',' << fmt("%.6g", d.reference) << ',' << fmt("%.6g", d.measured) << ',' << fmt("%+.4f", rel) << ','
        << d.tolerance << ',' << d.status << "\n";
  }
  return out.str();
}

int run_pipeline(const RunConfig& cfg, const Artifacts& what, std::string* message) {
  std::ostringstream msg;
  int code = kOk;
  try {
    std::vector<ModelResult> results;
    const bool need_models = what.arrays || what.cost || what.dse || what.counts || what.schedule || what.reference_diff;
    if (need_models) {
      for (const auto& model : cfg.models) results.push_back(analyze_model(model, cfg));
    }
    cost::CostParams params;
    params.include_non_conversion_latency = cfg.include_non_conversion_latency;
    cost::Calibration calib;
    if (what.cost || what.dse || what.reference_diff) calib = load_calibration(calibration_path(cfg));

    // Build every artifact in memory first so a failure leaves no partial output.
    std::vector<std::pair<std::string, std::string>> files;
    if (what.arrays) files.emplace_back("arrays.csv", arrays_csv(results));
    if (what.counts) files.emplace_back("counts.csv", counts_csv(results));
    if (what.schedule) files.emplace_back("schedule.csv", schedule_csv(results));
    if (what.cost) files.emplace_back("cost.csv", cost_csv(results, params, calib));
    if (what.dse) files.emplace_back("dse.csv", cost::dse_csv(dse_rows(results, cfg, params, calib)));
    if (what.reference_diff) {
      const auto diff = reference_diff(default_data_dir() + "/reference_targets.csv", results, params, calib);
      std::size_t fails = 0, gated = 0;
      for (const auto& d : diff) {
        if (d.status == "FAIL") ++fails;
        if (d.status != "INFO") ++gated;
      }
      files.emplace_back("reference_diff.csv", diff_csv(diff));
      msg << "reference diff: " << gated - fails << "/" << gated << " gated rows within tolerance\n";
      for (const auto& d : diff) {
        if (d.status == "FAIL") {
          msg << "  outside tolerance: " << d.model << " " << d.strategy << " " << d.metric << " reference "
              << fmt("%.6g", d.reference) << " measured " << fmt("%.6g", d.measured) << "\n";
        }
      }
    }
    if (what.verify) {
      const auto rep = verify(cfg);
      files.emplace_back("verify.txt", rep.text());
      if (!rep.all_pass()) {
        code = kVerifyFailed;
        msg << "verification failed; see verify.txt\n";
      }
    }

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.output_dir + ": " + ec.message());
    for (const auto& [name, content] : files) {
      io::write_atomic(std::filesystem::path(cfg.output_dir) / name, content);
      msg << "wrote " << (std::filesystem::path(cfg.output_dir) / name).string() << "\n";
    }
  } catch (const ConfigError& e) {
    msg << "config error: " << e.what() << "\n";
    code = kConfigError;
  } catch (const CalibrationError& e) {
    msg << "calibration error: " << e.what() << "\n";
    code = kConfigError;
  } catch (const UnsupportedConfig& e) {
    msg << "unsupported configuration: " << e.what() << "\n";
    code = kConfigError;
  } catch (const IoError& e) {
    msg << "I/O error: " << e.what() << "\n";
    code = kIoError;
  }
  if (message) *message = msg.str();
  return code;
}

}  // namespace cim::pipeline
