// cim-monarch: Monarch projection, crossbar mapping, scheduling and cost tables.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "cim/config.hpp"
#include "cim/errors.hpp"
#include "cim/matrix_io.hpp"
#include "cim/monarch.hpp"
#include "cim/pipeline.hpp"
#include "cim/scheduler.hpp"

namespace {

using namespace cim;

constexpr const char* kSchemas = R"(Output files (CSV, one header line):
  arrays.csv    model,strategy,arrays,utilization
  counts.csv    model,params_dense,params_monarch,param_ratio,flops_dense,flops_monarch,flop_ratio
  schedule.csv  model,strategy,adc_bits,p_max,critical_conversions,total_conversions,depth
  cost.csv      model,strategy,n_adc,adc_bits,latency_us,energy_mJ,conversion_latency_us,
                excluded_mvm_latency_us,excluded_comm_latency_us,excluded_digital_latency_us
  dse.csv       model,strategy,n_adc,adc_bits,latency_us,energy_uJ,conversions,arrays
  simulate.csv  strategy,n,m,inputs,max_rel_error,conversions,predicted_conversions
  reference_diff.csv group,model,strategy,metric,n_adc,reference,measured,rel_diff,tolerance,status
  verify.txt    one PASS/FAIL line per property
Exit status: 0 ok, 1 verification failure, 2 configuration error, 3 I/O error.
Environment: CIM_MONARCH_THREADS caps worker threads; CIM_MONARCH_DATA overrides the data directory.)";

struct Overrides {
  std::string config, model, strategy, adcs, out, calibration, fault, input;
  std::optional<std::string> m;
  std::optional<std::string> seed;
  bool paper_repro = false;
  bool fit = false;
  bool dump_plan = false;
  bool trace_toy = false;
  std::size_t n = 64;
};

std::vector<RunConfig> resolve(const Overrides& o) {
  std::vector<RunConfig> runs = o.config.empty() ? std::vector<RunConfig>{RunConfig{}} : load_config(o.config);
  for (auto& r : runs) {
    if (!o.model.empty()) apply_key(r, "model", o.model);
    if (!o.strategy.empty()) apply_key(r, "strategy", o.strategy);
    if (o.m) apply_key(r, "m", *o.m);
    if (!o.adcs.empty()) apply_key(r, "adcs", o.adcs);
    if (o.seed) apply_key(r, "seed", *o.seed);
    if (!o.calibration.empty()) apply_key(r, "calibration", o.calibration);
    if (!o.fault.empty()) apply_key(r, "fault", o.fault);
    if (o.paper_repro) {
      apply_key(r, "model", "all");
      apply_key(r, "strategy", "all");
      apply_key(r, "m", "256");
    }
    if (!o.out.empty()) r.output_dir = o.out;
    if (runs.size() > 1) r.output_dir = (std::filesystem::path(r.output_dir) / r.name).string();
  }
  return runs;
}

int write_file(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  io::write_atomic(dir / name, content);
  std::cout << "wrote " << (dir / name).string() << "\n";
  return pipeline::kOk;
}

int cmd_project(const RunConfig& cfg, const Overrides& o) {
  monarch::DenseMatrix W;
  if (!o.input.empty()) {
    W = io::read_matrix(o.input);
  } else {
    std::mt19937_64 rng(cfg.seed);
    W = monarch::DenseMatrix::random(o.n, o.n, rng);
  }
  const auto proj = monarch::d2s_project_rect(W);
  std::ostringstream out;
  out << "rows=" << W.rows() << " cols=" << W.cols() << " n=" << proj.M.n() << " b=" << proj.M.b()
      << " frobenius_error=" << proj.error
      << " rel_error=" << (W.frobenius() > 0.0 ? proj.error / W.frobenius() : 0.0) << "\n";
  std::cout << out.str();
  return write_file(cfg.output_dir, "projection.txt", out.str());
}

int cmd_simulate(const RunConfig& cfg) {
  std::ostringstream out;
  out << "strategy,n,m,inputs,max_rel_error,conversions,predicted_conversions\n";
  xbar::ADCConfig adc;
  adc.adcs_per_array = 8;
  bool ok = true;
  for (std::size_t n : cfg.verify_n) {
    const auto b = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    for (std::size_t m : {n / 4, n / 2, n}) {
      if (m == 0 || b == 0 || m % b != 0) continue;
      for (auto s : cfg.strategies) {
        const auto r = pipeline::check_equivalence(s, n, m, cfg.verify_inputs, cfg.seed + n + m, adc, cfg.fault);
        ok = ok && r.max_rel_error <= 1e-10 && r.conversions == r.predicted_conversions;
        char err[32];
        std::snprintf(err, sizeof err, "%.3e", r.max_rel_error);
        out << mapping::to_string(s) << ',' << n << ',' << m << ',' << r.inputs << ',' << err << ',' << r.conversions
            << ',' << r.predicted_conversions << "\n";
      }
    }
  }
  write_file(cfg.output_dir, "simulate.csv", out.str());
  return ok ? pipeline::kOk : pipeline::kVerifyFailed;
}

int cmd_schedule_extras(const RunConfig& cfg, const Overrides& o) {
  if (!o.trace_toy) return pipeline::kOk;
  // 8x8 arrays holding a Monarch matrix with 2x2 blocks (four diagonal slots).
  const workload::MonarchShape shape{8, 2};
  const auto plan = mapping::map_dense(std::span(&shape, 1), 8, {cfg.reserve_half_slot});
  const auto stream = sched::build_schedule(plan, xbar::ADCConfig{4});
  return write_file(cfg.output_dir, "trace.txt", sched::dump_trace(stream));
}

int cmd_map_extras(const RunConfig& cfg, const Overrides& o) {
  if (!o.dump_plan) return pipeline::kOk;
  for (const auto& model : cfg.models) {
    const auto mm = workload::enumerate_matmuls(workload::builtin_model(model));
    for (auto s : cfg.strategies) {
      mapping::MappingPlan plan;
      if (s == mapping::Strategy::linear) {
        plan = mapping::map_linear(mapping::dense_workload(mm), cfg.m);
      } else if (s == mapping::Strategy::sparse) {
        plan = mapping::map_sparse(mapping::monarch_workload(mm), cfg.m);
      } else {
        plan = mapping::map_dense(mapping::monarch_workload(mm), cfg.m, {cfg.reserve_half_slot});
      }
      write_file(cfg.output_dir, "plan_" + model + "_" + std::string(mapping::to_string(s)) + ".txt",
                 mapping::serialize(plan));
    }
  }
  return pipeline::kOk;
}

int cmd_fit(RunConfig cfg) {
  // Fit on the reference workload, then use the fresh constants for the sweep.
  RunConfig fit_cfg = cfg;
  fit_cfg.models = {"bert-large"};
  fit_cfg.strategies = {mapping::Strategy::linear, mapping::Strategy::sparse, mapping::Strategy::dense};
  std::vector<pipeline::ModelResult> results{pipeline::analyze_model("bert-large", fit_cfg)};
  const auto pts = pipeline::load_fit_points(default_data_dir() + "/reference_points.csv", results, cost::CostParams{});
  const auto calib = cost::dse_fit(pts);
  return write_file(cfg.output_dir, "calibration.txt", cost::write_calibration(calib));
}

int dispatch(const std::string& cmd, const Overrides& o) {
  int worst = pipeline::kOk;
  for (auto cfg : resolve(o)) {
    int code = pipeline::kOk;
    std::string msg;
    pipeline::Artifacts what;
    if (cmd == "project") {
      code = cmd_project(cfg, o);
    } else if (cmd == "simulate") {
      code = cmd_simulate(cfg);
    } else {
      if (cmd == "map") what.arrays = true;
      if (cmd == "schedule") what.schedule = true;
      if (cmd == "cost") what.cost = true;
      if (cmd == "dse") {
        what.dse = true;
        if (o.fit) {
          cmd_fit(cfg);
          cfg.calibration = (std::filesystem::path(cfg.output_dir) / "calibration.txt").string();
        }
      }
      if (cmd == "verify") what.verify = true;
      if (cmd == "repro") {
        what = pipeline::Artifacts::all();
        what.reference_diff = o.paper_repro;
      }
      code = pipeline::run_pipeline(cfg, what, &msg);
      std::cout << msg;
      if (code == pipeline::kOk && cmd == "map") code = cmd_map_extras(cfg, o);
      if (code == pipeline::kOk && cmd == "schedule") code = cmd_schedule_extras(cfg, o);
    }
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monarch-sparse transformer mapping onto compute-in-memory crossbars"};
  app.footer(kSchemas);
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "key = value run file, one run per [section]");
  app.add_option("--model", o.model, "bert-large, bart-large, gpt2-medium, a comma list or all");
  app.add_option("--strategy", o.strategy, "linear, sparse, dense or all");
  app.add_option("--m", o.m, "crossbar dimension (default 256)");
  app.add_option("--adcs", o.adcs, "comma list of ADCs per array (default 1,4,8,16,32)");
  app.add_option("--out", o.out, "output directory (default out)");
  app.add_option("--seed", o.seed, "seed for random test fixtures (default 1)");
  app.add_option("--calibration", o.calibration, "calibration file (default: bundled)");
  app.add_option("--fault", o.fault, "none or pairing (breaks DenseMap pairing; negative control)");
  app.add_flag("--paper-repro", o.paper_repro, "all models and strategies at m=256, diffed against reference data");

  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"project", "project a dense matrix onto the Monarch class"},
      {"map", "map workloads onto crossbars, write arrays.csv"},
      {"schedule", "build command streams, write schedule.csv"},
      {"simulate", "execute toy mappings against reference matvecs, write simulate.csv"},
      {"cost", "latency/energy at 1 ADC per array, write cost.csv"},
      {"dse", "ADC-count sweep, write dse.csv"},
      {"verify", "functional-equivalence suite, write verify.txt"},
      {"repro", "all tables plus verify.txt"},
  };
  for (const auto& [name, help] : cmds) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (name == "project") {
      sub->add_option("--in", o.input, "binary matrix file (u64 rows, u64 cols, f64 row-major)");
      sub->add_option("--n", o.n, "size of the random square matrix when --in is absent");
    }
    if (name == "dse") sub->add_flag("--fit", o.fit, "refit calibration from the reference points first");
    if (name == "map") sub->add_flag("--dump-plan", o.dump_plan, "also write plan_<model>_<strategy>.txt");
    if (name == "schedule") sub->add_flag("--trace-toy", o.trace_toy, "also write trace.txt for an 8x8 toy");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pipeline::kConfigError;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return dispatch(cmd, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pipeline::kConfigError;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return pipeline::kConfigError;
  } catch (const UnsupportedConfig& e) {
    std::cerr << "unsupported configuration: " << e.what() << "\n";
    return pipeline::kConfigError;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return pipeline::kIoError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pipeline::kVerifyFailed;
  }
}
