#include "cim/mapping.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "cim/errors.hpp"

namespace cim::mapping {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_block_fits(const workload::MonarchShape& s, std::size_t m) {
  if (s.b == 0 || s.n == 0 || s.n % s.b != 0) throw DimensionError("mapping: malformed Monarch shape");
  if (s.b > m) {
    throw UnsupportedConfig("mapping: block size " + std::to_string(s.b) + " exceeds array dimension " +
                            std::to_string(m));
  }
  if (m % s.b != 0) {
    throw UnsupportedConfig("mapping: block size " + std::to_string(s.b) + " does not divide m = " +
                            std::to_string(m));
  }
}

std::vector<std::size_t> usable_slots(std::size_t ds, bool reserve_half) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < ds; ++i) {
    if (reserve_half && ds % 2 == 0 && i == ds / 2) continue;
    slots.push_back(i);
  }
  return slots;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::linear: return "linear";
    case Strategy::sparse: return "sparse";
    case Strategy::dense: return "dense";
  }
  return "?";
}

std::string_view to_string(Factor f) {
  switch (f) {
    case Factor::L: return "L";
    case Factor::R: return "R";
    case Factor::dense: return "dense";
  }
  return "?";
}

Strategy parse_strategy(std::string_view s) {
  if (s == "linear") return Strategy::linear;
  if (s == "sparse") return Strategy::sparse;
  if (s == "dense") return Strategy::dense;
  throw ConfigError("strategy", "unknown strategy '" + std::string(s) + "'");
}

std::size_t MappingPlan::d_slots(std::size_t matmul) const {
  const auto& e = matrices.at(matmul);
  return e.b == 0 ? 1 : m / e.b;
}

std::vector<DenseShape> dense_workload(std::span<const workload::MatmulLayer> matmuls) {
  std::vector<DenseShape> out;
  out.reserve(matmuls.size());
  for (const auto& mm : matmuls) out.push_back({mm.rows, mm.cols});
  return out;
}

std::vector<workload::MonarchShape> monarch_workload(std::span<const workload::MatmulLayer> matmuls) {
  std::vector<workload::MonarchShape> out;
  out.reserve(matmuls.size());
  for (const auto& mm : matmuls) out.push_back(workload::monarch_shape(mm.rows, mm.cols));
  return out;
}

MappingPlan map_linear(std::span<const DenseShape> matrices, std::size_t m) {
  if (m == 0) throw UnsupportedConfig("mapping: m must be positive");
  MappingPlan plan;
  plan.strategy = Strategy::linear;
  plan.m = m;
  std::size_t next = 0;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& s = matrices[i];
    plan.matrices.push_back({s.rows, s.cols, 0, 0});
    const std::size_t t_in = ceil_div(s.cols, m);
    const std::size_t t_out = ceil_div(s.rows, m);
    for (std::size_t to = 0; to < t_out; ++to) {
      for (std::size_t ti = 0; ti < t_in; ++ti) {
        Placement p;
        p.array_id = next++;
        p.height = std::min(m, s.cols - ti * m);
        p.width = std::min(m, s.rows - to * m);
        p.source = {i, Factor::dense, to * t_in + ti};
        plan.placements.push_back(p);
      }
    }
  }
  plan.num_arrays = next;
  return plan;
}

MappingPlan map_sparse(std::span<const workload::MonarchShape> matrices, std::size_t m) {
  MappingPlan plan;
  plan.strategy = Strategy::sparse;
  plan.m = m;
  std::size_t next = 0;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& s = matrices[i];
    check_block_fits(s, m);
    plan.matrices.push_back({s.n, s.n, s.n, s.b});
    const std::size_t ds = m / s.b;
    const std::size_t d = s.n / s.b;
    for (Factor f : {Factor::R, Factor::L}) {
      for (std::size_t k = 0; k < ceil_div(d, ds); ++k) {
        const std::size_t array = next++;
        for (std::size_t j = k * ds; j < std::min(d, (k + 1) * ds); ++j) {
          Placement p;
          p.array_id = array;
          p.row_offset = p.col_offset = (j - k * ds) * s.b;
          p.height = p.width = s.b;
          p.source = {i, f, j};
          plan.placements.push_back(p);
        }
      }
    }
  }
  plan.num_arrays = next;
  return plan;
}

MappingPlan map_dense(std::span<const workload::MonarchShape> matrices, std::size_t m, DenseMapOptions opts) {
  MappingPlan plan;
  plan.strategy = Strategy::dense;
  plan.m = m;

  // One open array per block size; partition-diagonals fill slots in order.
  struct Pool {
    std::size_t array = 0;
    std::size_t next_slot = 0;
    bool open = false;
  };
  std::map<std::size_t, Pool> pools;
  std::size_t next_array = 0;

  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& s = matrices[i];
    check_block_fits(s, m);
    plan.matrices.push_back({s.n, s.n, s.n, s.b});
    const std::size_t ds = m / s.b;
    const std::size_t d = s.n / s.b;
    const std::size_t q = ceil_div(d, ds);
    const auto slots = usable_slots(ds, opts.reserve_half_slot);
    auto& pool = pools[s.b];

    for (Factor f : {Factor::R, Factor::L}) {
      for (std::size_t k = 0; k < q; ++k) {
        if (!pool.open || pool.next_slot == slots.size()) {
          pool.array = next_array++;
          pool.next_slot = 0;
          pool.open = true;
        }
        const std::size_t slot = slots[pool.next_slot++];
        for (std::size_t j = k * ds; j < std::min(d, (k + 1) * ds); ++j) {
          const std::size_t local = j - k * ds;
          Placement p;
          p.array_id = pool.array;
          p.row_offset = local * s.b;
          p.col_offset = ((local + slot) % ds) * s.b;
          p.height = p.width = s.b;
          p.source = {i, f, j};
          p.diagonal_index = slot;
          plan.placements.push_back(p);
        }
        if (f == Factor::R) {
          Pairing pr;
          pr.matmul = i;
          pr.r_partition = k;
          pr.i_R = slot;
          pr.i_L = (ds - slot) % ds;
          pr.explicit_correction = (pr.i_L == pr.i_R);
          plan.pairings.push_back(pr);
        }
      }
    }
  }
  plan.num_arrays = next_array;
  return plan;
}

UtilizationReport utilization(const MappingPlan& plan) {
  UtilizationReport rep;
  rep.num_arrays = plan.num_arrays;
  rep.empty = plan.num_arrays == 0;
  if (rep.empty) return rep;
  std::vector<std::size_t> cells(plan.num_arrays, 0);
  for (const auto& p : plan.placements) cells.at(p.array_id) += p.height * p.width;
  const double cap = static_cast<double>(plan.m) * static_cast<double>(plan.m);
  rep.per_array.reserve(cells.size());
  double sum = 0.0;
  for (std::size_t c : cells) {
    rep.nnz_total += c;
    rep.per_array.push_back(static_cast<double>(c) / cap);
    sum += rep.per_array.back();
  }
  rep.mean = sum / static_cast<double>(plan.num_arrays);
  return rep;
}

std::vector<std::size_t> input_group_shifts(const MappingPlan& plan, std::size_t matmul) {
  const auto& e = plan.matrices.at(matmul);
  const std::size_t ds = plan.d_slots(matmul);
  std::vector<std::size_t> shifts(ceil_div(e.n / e.b, ds), 0);
  if (plan.strategy != Strategy::dense || !plan.pairing_compensation) return shifts;
  for (const auto& pr : plan.pairings) {
    if (pr.matmul != matmul || pr.explicit_correction) continue;
    shifts.at(pr.r_partition) = (ds - pr.i_L % ds) % ds;
  }
  return shifts;
}

std::string validate(const MappingPlan& plan) {
  std::ostringstream err;
  const std::size_t m = plan.m;
  std::map<std::size_t, std::vector<const Placement*>> by_array;
  for (const auto& p : plan.placements) {
    if (p.array_id >= plan.num_arrays) {
      err << "placement references array " << p.array_id << " >= num_arrays\n";
      continue;
    }
    if (p.row_offset + p.height > m || p.col_offset + p.width > m) {
      err << "placement exceeds array " << p.array_id << "\n";
    }
    by_array[p.array_id].push_back(&p);
  }
  std::vector<char> used;
  for (const auto& [id, ps] : by_array) {
    used.assign(m * m, 0);
    for (const auto* p : ps) {
      for (std::size_t r = p->row_offset; r < std::min(m, p->row_offset + p->height); ++r) {
        for (std::size_t c = p->col_offset; c < std::min(m, p->col_offset + p->width); ++c) {
          if (used[r * m + c]++) {
            err << "overlapping cells in array " << id << "\n";
            r = m;
            break;
          }
        }
      }
    }
  }
  // Coverage: each block / tile exactly once.
  std::map<std::tuple<std::size_t, int, std::size_t>, int> seen;
  for (const auto& p : plan.placements) {
    ++seen[{p.source.matmul, static_cast<int>(p.source.factor), p.source.index}];
  }
  for (std::size_t i = 0; i < plan.matrices.size(); ++i) {
    const auto& e = plan.matrices[i];
    auto expect = [&](Factor f, std::size_t count) {
      for (std::size_t j = 0; j < count; ++j) {
        const int c = seen[{i, static_cast<int>(f), j}];
        if (c != 1) err << "matmul " << i << " " << to_string(f) << " piece " << j << " placed " << c << " times\n";
      }
    };
    if (plan.strategy == Strategy::linear) {
      expect(Factor::dense, ceil_div(e.rows, m) * ceil_div(e.cols, m));
    } else {
      expect(Factor::R, e.n / e.b);
      expect(Factor::L, e.n / e.b);
    }
  }
  if (plan.strategy == Strategy::dense) {
    for (const auto& p : plan.placements) {
      if (!p.diagonal_index) err << "dense placement without diagonal index\n";
    }
    for (const auto& pr : plan.pairings) {
      const std::size_t ds = plan.d_slots(pr.matmul);
      if ((pr.i_L + pr.i_R) % ds != 0) {
        err << "pairing matmul " << pr.matmul << " partition " << pr.r_partition << " violates i_L + i_R = 0 mod "
            << ds << "\n";
      }
      if (pr.i_L == pr.i_R && !pr.explicit_correction) {
        err << "self-inverse pairing without explicit correction (matmul " << pr.matmul << ")\n";
      }
    }
  }
  return err.str();
}

std::vector<xbar::CrossbarArray> program_arrays(const MappingPlan& plan,
                                                std::span<const monarch::DenseMatrix> matrices) {
  if (plan.strategy != Strategy::linear) throw UnsupportedConfig("program_arrays: dense weights need a Linear plan");
  if (matrices.size() != plan.matrices.size()) throw DimensionError("program_arrays: matrix count differs from plan");
  std::vector<std::vector<xbar::CellWrite>> writes(plan.num_arrays);
  for (const auto& p : plan.placements) {
    const auto& W = matrices[p.source.matmul];
    const auto& e = plan.matrices[p.source.matmul];
    if (W.rows() != e.rows || W.cols() != e.cols) throw DimensionError("program_arrays: weight shape differs from plan");
    const std::size_t t_in = ceil_div(e.cols, plan.m);
    const std::size_t to = p.source.index / t_in;
    const std::size_t ti = p.source.index % t_in;
    for (std::size_t r = 0; r < p.height; ++r) {
      for (std::size_t c = 0; c < p.width; ++c) {
        writes[p.array_id].push_back({p.row_offset + r, p.col_offset + c, W(to * plan.m + c, ti * plan.m + r)});
      }
    }
  }
  std::vector<xbar::CrossbarArray> arrays;
  arrays.reserve(plan.num_arrays);
  for (std::size_t a = 0; a < plan.num_arrays; ++a) {
    arrays.emplace_back(plan.m, a);
    arrays.back().program(writes[a]);
  }
  return arrays;
}

std::vector<xbar::CrossbarArray> program_arrays(const MappingPlan& plan,
                                                std::span<const monarch::MonarchMatrix> matrices) {
  if (plan.strategy == Strategy::linear) throw UnsupportedConfig("program_arrays: Monarch weights need a sparse/dense plan");
  if (matrices.size() != plan.matrices.size()) throw DimensionError("program_arrays: matrix count differs from plan");
  std::vector<std::vector<std::size_t>> shifts(matrices.size());
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& e = plan.matrices[i];
    if (matrices[i].n() != e.n || matrices[i].b() != e.b) throw DimensionError("program_arrays: Monarch shape differs from plan");
    if (plan.strategy == Strategy::dense) {
      if (e.b * e.b != e.n || e.n % plan.m != 0) {
        throw UnsupportedConfig("program_arrays: DenseMap execution needs b = sqrt(n) and m | n");
      }
      shifts[i] = input_group_shifts(plan, i);
    }
  }
  std::vector<std::vector<xbar::CellWrite>> writes(plan.num_arrays);
  for (const auto& p : plan.placements) {
    const auto& M = matrices[p.source.matmul];
    const auto& F = p.source.factor == Factor::L ? M.L : M.R;
    const auto& B = F.blocks.at(p.source.index);
    const std::size_t b = F.b;
    const bool shifted = plan.strategy == Strategy::dense && p.source.factor == Factor::L;
    const std::size_t ds = plan.d_slots(p.source.matmul);
    for (std::size_t o = 0; o < b; ++o) {  // logical input offset
      std::size_t phys = o;
      if (shifted) {
        const std::size_t k = o / ds;
        phys = k * ds + (o % ds + shifts[p.source.matmul][k]) % ds;
      }
      for (std::size_t g = 0; g < b; ++g) {
        writes[p.array_id].push_back({p.row_offset + phys, p.col_offset + g, B(g, o)});
      }
    }
  }
  std::vector<xbar::CrossbarArray> arrays;
  arrays.reserve(plan.num_arrays);
  for (std::size_t a = 0; a < plan.num_arrays; ++a) {
    arrays.emplace_back(plan.m, a);
    arrays.back().program(writes[a]);
  }
  return arrays;
}

std::string serialize(const MappingPlan& plan) {
  std::ostringstream out;
  out << "plan " << to_string(plan.strategy) << " m=" << plan.m << " arrays=" << plan.num_arrays
      << " compensation=" << (plan.pairing_compensation ? 1 : 0) << "\n";
  for (std::size_t i = 0; i < plan.matrices.size(); ++i) {
    const auto& e = plan.matrices[i];
    out << "matrix " << i << ' ' << e.rows << ' ' << e.cols << ' ' << e.n << ' ' << e.b << "\n";
  }
  for (const auto& p : plan.placements) {
    out << "place " << p.array_id << ' ' << p.row_offset << ' ' << p.col_offset << ' ' << p.height << ' ' << p.width
        << ' ' << p.source.matmul << ' ' << to_string(p.source.factor) << ' ' << p.source.index << ' ';
    if (p.diagonal_index) {
      out << *p.diagonal_index;
    } else {
      out << '-';
    }
    out << "\n";
  }
  for (const auto& pr : plan.pairings) {
    out << "pair " << pr.matmul << ' ' << pr.r_partition << ' ' << pr.i_R << ' ' << pr.i_L << ' '
        << (pr.explicit_correction ? 1 : 0) << "\n";
  }
  return out.str();
}

namespace {

std::size_t parse_size(std::string_view tok, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ConfigError(std::string(what), "expected an unsigned integer, got '" + std::string(tok) + "'");
  }
  return v;
}

std::size_t parse_kv(const std::string& tok, std::string_view key) {
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0) throw ConfigError(std::string(key), "missing in plan header");
  return parse_size(std::string_view(tok).substr(prefix.size()), key);
}

Factor parse_factor(const std::string& s) {
  if (s == "L") return Factor::L;
  if (s == "R") return Factor::R;
  if (s == "dense") return Factor::dense;
  throw ConfigError("factor", "unknown factor '" + s + "'");
}

}  // namespace

MappingPlan parse_plan(std::string_view text) {
  MappingPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (kind == "plan") {
      if (tok.size() != 4) throw ConfigError("plan", "malformed header");
      plan.strategy = parse_strategy(tok[0]);
      plan.m = parse_kv(tok[1], "m");
      plan.num_arrays = parse_kv(tok[2], "arrays");
      plan.pairing_compensation = parse_kv(tok[3], "compensation") != 0;
      header = true;
    } else if (kind == "matrix") {
      if (tok.size() != 5) throw ConfigError("matrix", "malformed line");
      plan.matrices.push_back({parse_size(tok[1], "rows"), parse_size(tok[2], "cols"), parse_size(tok[3], "n"),
                               parse_size(tok[4], "b")});
    } else if (kind == "place") {
      if (tok.size() != 9) throw ConfigError("place", "malformed line");
      Placement p;
      p.array_id = parse_size(tok[0], "array_id");
      p.row_offset = parse_size(tok[1], "row_offset");
      p.col_offset = parse_size(tok[2], "col_offset");
      p.height = parse_size(tok[3], "height");
      p.width = parse_size(tok[4], "width");
      p.source = {parse_size(tok[5], "matmul"), parse_factor(tok[6]), parse_size(tok[7], "index")};
      if (tok[8] != "-") p.diagonal_index = parse_size(tok[8], "diagonal_index");
      plan.placements.push_back(p);
    } else if (kind == "pair") {
      if (tok.size() != 5) throw ConfigError("pair", "malformed line");
      plan.pairings.push_back({parse_size(tok[0], "matmul"), parse_size(tok[1], "r_partition"),
                               parse_size(tok[2], "i_R"), parse_size(tok[3], "i_L"),
                               parse_size(tok[4], "explicit_correction") != 0});
    } else {
      throw ConfigError(kind, "unknown plan record");
    }
  }
  if (!header) throw ConfigError("plan", "missing header line");
  return plan;
}

}  // namespace cim::mapping
