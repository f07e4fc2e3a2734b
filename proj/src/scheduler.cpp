#include "cim/scheduler.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "cim/errors.hpp"
#include "cim/monarch.hpp"

namespace cim::sched {

using mapping::Factor;
using mapping::MappingPlan;
using mapping::Placement;
using mapping::Strategy;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::dense: return "dense";
    case Stage::R: return "R";
    case Stage::L: return "L";
  }
  return "?";
}

namespace {

Stage stage_of(const Placement& p) {
  switch (p.source.factor) {
    case Factor::R: return Stage::R;
    case Factor::L: return Stage::L;
    case Factor::dense: break;
  }
  return Stage::dense;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// DenseMap L rows are stored with per-input-group shifts only when the
// permutation is an involution and the groups tile the block exactly.
bool shift_model_applies(const mapping::MatrixEntry& e, std::size_t m) {
  return e.b * e.b == e.n && e.n % m == 0;
}

class Builder {
 public:
  Builder(const xbar::ADCConfig& adc, bool metadata_only, CommandStream& out)
      : adc_(adc), metadata_only_(metadata_only), out_(out) {}

  // One logical activation; serialized into ceil(|cols| / n_adc) conversion steps.
  void logical_step(std::size_t array, std::size_t matmul, Stage stage, std::size_t rotation,
                    const std::vector<std::size_t>& rows, const std::vector<std::size_t>& inputs,
                    const std::vector<std::size_t>& cols, const std::vector<std::size_t>& outputs,
                    std::size_t contributing_rows, std::size_t& clock) {
    auto& meta = out_.meta;
    ++meta.logical_steps;
    meta.max_rows_per_conversion = std::max(meta.max_rows_per_conversion, contributing_rows);
    const std::size_t per = adc_.adcs_per_array;
    for (std::size_t c0 = 0; c0 < cols.size(); c0 += per) {
      const std::size_t c1 = std::min(cols.size(), c0 + per);
      const std::size_t conv = c1 - c0;
      ++meta.total_steps;
      meta.conversions_per_array[array] += conv;
      meta.conversions_per_matmul[matmul] += conv;
      const std::size_t ts = clock++;
      if (metadata_only_) continue;
      StepCommand s;
      s.timestamp = ts;
      s.array_id = array;
      s.matmul = matmul;
      s.stage = stage;
      s.rotation = rotation;
      s.mask.rows = rows;
      s.row_inputs = inputs;
      s.mask.cols.assign(cols.begin() + static_cast<std::ptrdiff_t>(c0), cols.begin() + static_cast<std::ptrdiff_t>(c1));
      s.col_outputs.assign(outputs.begin() + static_cast<std::ptrdiff_t>(c0),
                           outputs.begin() + static_cast<std::ptrdiff_t>(c1));
      for (std::size_t j = 0; j < conv; ++j) s.adc_group.push_back(j);
      out_.steps.push_back(std::move(s));
    }
  }

 private:
  const xbar::ADCConfig& adc_;
  bool metadata_only_;
  CommandStream& out_;
};

}  // namespace

CommandStream build_schedule(const MappingPlan& plan, const xbar::ADCConfig& adc, ScheduleOptions opts) {
  adc.validate(plan.m);
  const std::size_t m = plan.m;
  CommandStream out;
  out.strategy = plan.strategy;
  out.m = m;
  out.adc = adc;
  out.matrices = plan.matrices;
  out.metadata_only = opts.metadata_only;
  out.meta.conversions_per_array.assign(plan.num_arrays, 0);
  out.meta.conversions_per_matmul.assign(plan.matrices.size(), 0);

  std::vector<std::vector<const Placement*>> by_array(plan.num_arrays);
  for (const auto& p : plan.placements) {
    if (p.array_id >= plan.num_arrays) throw ExecutionError("schedule: placement references unknown array");
    by_array[p.array_id].push_back(&p);
  }
  std::vector<std::vector<std::size_t>> shifts(plan.matrices.size());
  if (plan.strategy == Strategy::dense) {
    for (std::size_t i = 0; i < plan.matrices.size(); ++i) {
      if (shift_model_applies(plan.matrices[i], m)) shifts[i] = mapping::input_group_shifts(plan, i);
    }
  }

  Builder builder(adc, opts.metadata_only, out);
  std::vector<std::size_t> rows, inputs, cols, outputs;
  std::size_t stage_offset = 0;
  std::size_t stage_span = 0;

  auto run_stage = [&](bool second) {
    for (std::size_t a = 0; a < plan.num_arrays; ++a) {
      std::size_t clock = stage_offset;
      const auto& ps = by_array[a];
      if (plan.strategy == Strategy::dense) {
        for (const Placement* p : ps) {
          const Stage st = stage_of(*p);
          if ((st == Stage::L) != second) continue;
          const auto& e = plan.matrices[p->source.matmul];
          const std::size_t b = e.b;
          const std::size_t ds = m / b;
          const std::size_t t = std::min(b, ds);
          const std::size_t base = (p->source.index / ds) * ds * b;
          const auto& sh = shifts[p->source.matmul];
          auto phys = [&](std::size_t o) {
            if (st != Stage::L || sh.empty()) return o;
            const std::size_t k = o / ds;
            return k * ds + (o % ds + sh[k]) % ds;
          };
          for (std::size_t tr = 0; tr < b / t; ++tr) {
            for (std::size_t tc = 0; tc < b / t; ++tc) {
              rows.clear();
              inputs.clear();
              cols.clear();
              outputs.clear();
              for (std::size_t o = tr * t; o < (tr + 1) * t; ++o) {
                const std::size_t r = p->row_offset + phys(o);
                rows.push_back(r);
                inputs.push_back(base + r);
              }
              for (std::size_t g = tc * t; g < (tc + 1) * t; ++g) {
                const std::size_t c = p->col_offset + g;
                cols.push_back(c);
                outputs.push_back(base + c);
              }
              builder.logical_step(a, p->source.matmul, st, p->diagonal_index.value_or(0), rows, inputs, cols,
                                   outputs, t, clock);
            }
          }
        }
      } else {
        if (ps.empty()) continue;
        const Stage st = stage_of(*ps.front());
        if ((st == Stage::L) != second) continue;
        const std::size_t matmul = ps.front()->source.matmul;
        const auto& e = plan.matrices[matmul];
        std::size_t in_base = 0, out_base = 0, contributing = 0;
        if (plan.strategy == Strategy::linear) {
          const std::size_t t_in = ceil_div(e.cols, m);
          in_base = (ps.front()->source.index % t_in) * m;
          out_base = (ps.front()->source.index / t_in) * m;
        } else {
          in_base = out_base = (ps.front()->source.index / (m / e.b)) * m;
        }
        std::set<std::size_t> rset, cset;
        for (const Placement* p : ps) {
          if (p->source.matmul != matmul || stage_of(*p) != st) {
            throw ExecutionError("schedule: array mixes matmuls or stages outside DenseMap");
          }
          for (std::size_t r = 0; r < p->height; ++r) rset.insert(p->row_offset + r);
          for (std::size_t c = 0; c < p->width; ++c) cset.insert(p->col_offset + c);
          contributing = std::max(contributing, p->height);
        }
        rows.assign(rset.begin(), rset.end());
        cols.assign(cset.begin(), cset.end());
        inputs.clear();
        outputs.clear();
        for (std::size_t r : rows) inputs.push_back(in_base + r);
        for (std::size_t c : cols) outputs.push_back(out_base + c);
        out.meta.p_max = std::max(out.meta.p_max, cols.size());
        builder.logical_step(a, matmul, st, 0, rows, inputs, cols, outputs, contributing, clock);
      }
      stage_span = std::max(stage_span, clock - stage_offset);
    }
  };

  run_stage(false);
  stage_offset = stage_span;
  stage_span = 0;
  run_stage(true);
  out.meta.num_timestamps = stage_offset + stage_span;

  if (plan.strategy == Strategy::dense) {
    std::size_t tmax = 0;
    for (const auto& e : plan.matrices) tmax = std::max(tmax, std::min(e.b, m / e.b));
    out.meta.p_max = tmax;
    // R-stage corrections: self-inverse pairs always, every pair without compensation.
    for (const auto& pr : plan.pairings) {
      const auto& e = plan.matrices.at(pr.matmul);
      const std::size_t ds = m / e.b;
      const bool explicit_fix = !plan.pairing_compensation || pr.explicit_correction || shifts[pr.matmul].empty();
      if (!explicit_fix || pr.i_R % ds == 0) continue;
      const std::size_t off = pr.r_partition * ds * e.b;
      out.corrections.push_back({pr.matmul, Stage::R, off, std::min(ds * e.b, e.n - off), pr.i_R, e.b});
    }
    // L-stage output rotations are always undone explicitly.
    std::set<std::tuple<std::size_t, std::size_t>> seen;
    for (const auto& p : plan.placements) {
      if (p.source.factor != Factor::L) continue;
      const auto& e = plan.matrices[p.source.matmul];
      const std::size_t ds = m / e.b;
      const std::size_t k = p.source.index / ds;
      if (!seen.insert({p.source.matmul, k}).second) continue;
      const std::size_t slot = p.diagonal_index.value_or(0) % ds;
      if (slot == 0) continue;
      const std::size_t off = k * ds * e.b;
      out.corrections.push_back({p.source.matmul, Stage::L, off, std::min(ds * e.b, e.n - off), slot, e.b});
    }
  }

  for (auto c : out.meta.conversions_per_array) {
    out.meta.critical_array_conversions = std::max(out.meta.critical_array_conversions, c);
  }
  return out;
}

Vector rotate_blocks(std::span<const double> v, std::size_t i, std::size_t b) {
  if (b == 0 || v.size() % b != 0) throw DimensionError("rotate_blocks: length not divisible by block size");
  const std::size_t d = v.size() / b;
  Vector out(v.size());
  if (d == 0) return out;
  i %= d;
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t src = (j + i) % d;
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(src * b), b, out.begin() + static_cast<std::ptrdiff_t>(j * b));
  }
  return out;
}

std::size_t thread_limit() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CIM_MONARCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) hw = std::min(hw, static_cast<std::size_t>(v));
  }
  return hw;
}

namespace {

template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t threads = std::min(thread_limit(), n / 16 + 1);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = ceil_div(n, threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Same index map as monarch::permute, without touching the op counter.
Vector relabel(std::span<const double> x, const monarch::PermutationSpec& spec) {
  Vector out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[spec.map(k)] = x[k];
  return out;
}

struct StageRun {
  Vector out;
  std::uint64_t conversions = 0;
};

StageRun run_stage(const CommandStream& stream, std::span<const xbar::CrossbarArray> arrays, std::size_t matmul,
                   Stage stage, std::span<const double> in, std::size_t out_size) {
  std::vector<const StepCommand*> steps;
  for (const auto& s : stream.steps) {
    if (s.matmul == matmul && s.stage == stage) steps.push_back(&s);
  }
  for (const StepCommand* s : steps) {
    if (s->array_id >= arrays.size() || !arrays[s->array_id].programmed() || arrays[s->array_id].id() != s->array_id) {
      throw ExecutionError("execute: step references unprogrammed array " + std::to_string(s->array_id));
    }
    if (s->row_inputs.size() != s->mask.rows.size() || s->col_outputs.size() != s->mask.cols.size()) {
      throw ExecutionError("execute: malformed step");
    }
    std::vector<std::size_t> dst = s->col_outputs;
    std::sort(dst.begin(), dst.end());
    if (std::adjacent_find(dst.begin(), dst.end()) != dst.end()) throw ExecutionError("execute: route collision");
    for (std::size_t o : dst) {
      if (o >= out_size) throw ExecutionError("execute: route outside stage output");
    }
    for (std::size_t i : s->row_inputs) {
      if (i >= in.size()) throw ExecutionError("execute: row reads outside stage input");
    }
  }

  std::vector<Vector> analog(steps.size());
  parallel_for(steps.size(), [&](std::size_t k) {
    const StepCommand& s = *steps[k];
    Vector xl(stream.m, 0.0);
    for (std::size_t i = 0; i < s.mask.rows.size(); ++i) xl[s.mask.rows[i]] = in[s.row_inputs[i]];
    analog[k] = xbar::mvm_step(arrays[s.array_id], xl, s.mask);
  });

  xbar::ADCConfig cfg = stream.adc;
  if (cfg.mode == xbar::AdcMode::quantized && cfg.full_scale <= 0.0) {
    double fs = 0.0;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      for (std::size_t c : steps[k]->mask.cols) fs = std::max(fs, std::abs(analog[k][c]));
    }
    cfg.full_scale = fs > 0.0 ? fs : 1.0;
  }

  StageRun run;
  run.out.assign(out_size, 0.0);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const StepCommand& s = *steps[k];
    const auto conv = xbar::adc_convert(analog[k], s.mask.cols, cfg);
    run.conversions += conv.conversions;
    for (std::size_t j = 0; j < conv.values.size(); ++j) run.out[s.col_outputs[j]] += conv.values[j];
  }
  return run;
}

std::uint64_t apply_corrections(const CommandStream& stream, std::size_t matmul, Stage stage, Vector& v) {
  std::uint64_t n = 0;
  for (const auto& c : stream.corrections) {
    if (c.matmul != matmul || c.stage != stage) continue;
    if (c.offset + c.length > v.size()) throw ExecutionError("execute: correction outside stage output");
    const auto seg = std::span<const double>(v).subspan(c.offset, c.length);
    const Vector rot = rotate_blocks(seg, c.blocks, c.b);
    std::copy(rot.begin(), rot.end(), v.begin() + static_cast<std::ptrdiff_t>(c.offset));
    ++n;
  }
  return n;
}

}  // namespace

ExecResult execute(const CommandStream& stream, std::span<const xbar::CrossbarArray> arrays, std::size_t matmul,
                   std::span<const double> x) {
  if (stream.metadata_only) throw ExecutionError("execute: stream was built metadata-only");
  if (matmul >= stream.matrices.size()) throw ExecutionError("execute: unknown matmul " + std::to_string(matmul));
  const auto& e = stream.matrices[matmul];
  ExecResult res;
  if (stream.strategy == Strategy::linear) {
    if (x.size() != e.cols) throw DimensionError("execute: input length differs from matrix columns");
    auto run = run_stage(stream, arrays, matmul, Stage::dense, x, e.rows);
    res.y = std::move(run.out);
    res.conversions = run.conversions;
    return res;
  }
  if (x.size() != e.n) throw DimensionError("execute: input length differs from Monarch dimension");
  const auto perm = monarch::PermutationSpec::make(e.n, e.b);
  const Vector u = relabel(x, perm);  // input addressing
  auto r_run = run_stage(stream, arrays, matmul, Stage::R, u, e.n);
  res.explicit_rotations += apply_corrections(stream, matmul, Stage::R, r_run.out);
  Vector v;
  {
    monarch::CountingScope scope;
    v = monarch::permute(r_run.out, perm);
    res.permutations = scope.counts().permutations;
  }
  auto l_run = run_stage(stream, arrays, matmul, Stage::L, v, e.n);
  res.explicit_rotations += apply_corrections(stream, matmul, Stage::L, l_run.out);
  res.y = relabel(l_run.out, perm);  // output addressing
  res.conversions = r_run.conversions + l_run.conversions;
  return res;
}

namespace {

void write_ranges(std::ostream& os, std::span<const std::size_t> v) {
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[j] + 1) ++j;
    if (i) os << ',';
    os << v[i];
    if (j > i) os << '-' << v[j];
    i = j + 1;
  }
}

}  // namespace

std::string dump_trace(const CommandStream& stream) {
  std::ostringstream os;
  for (const auto& s : stream.steps) {
    os << "t=" << s.timestamp << " array=" << s.array_id << " stage=" << to_string(s.stage) << " rows=";
    write_ranges(os, s.mask.rows);
    os << " cols=";
    write_ranges(os, s.mask.cols);
    os << " route=";
    for (std::size_t j = 0; j < s.mask.cols.size(); ++j) {
      if (j) os << ',';
      os << s.mask.cols[j] << ':' << s.col_outputs[j];
    }
    os << " rot=" << s.rotation << '\n';
  }
  return os.str();
}

}  // namespace cim::sched
