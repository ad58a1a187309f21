#include "beta/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "beta/errors.hpp"

namespace beta {

void EngineConfig::validate() const {
  if (n_dpu < 1) throw ConfigError("engine.n_dpu", "must be >= 1");
  if (j_unfold < 1) throw ConfigError("engine.j_unfold", "must be >= 1");
  if (pe_width < 8 || pe_width > 32 || pe_width % 8 != 0) {
    throw ConfigError("engine.pe_width", "must be 8, 16, 24 or 32 (a multiple of every activation width)");
  }
  if (acc_width < 8 || acc_width > 62) throw ConfigError("engine.acc_width", "must lie in [8, 62]");
  if (!(freq_hz > 0.0)) throw ConfigError("engine.freq_hz", "must be positive");
  if (load_bandwidth < 0) throw ConfigError("engine.load_bandwidth", "must be >= 1 (or 0 for j_unfold)");
  if (buffer_capacity < 1) throw ConfigError("engine.buffer_capacity", "must be >= 1");
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::uint64_t width_mask(int bits) { return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1; }

std::int64_t sign_extend(std::uint64_t word, int bits) {
  const std::uint64_t masked = word & width_mask(bits);
  const std::uint64_t sign = std::uint64_t{1} << (bits - 1);
  return static_cast<std::int64_t>((masked ^ sign) - sign);
}

void check_mode(const PEMode& mode, int pe_width) {
  if (!is_supported_bit_width(mode.act_bits)) {
    throw EncodingError("unsupported activation width " + std::to_string(mode.act_bits));
  }
  if (pe_width % mode.act_bits != 0) throw EncodingError("PE width is not a multiple of the activation width");
}

// Reduces `words` (acc_width-bit, modular) in place to at most two entries.
int reduce_words(std::vector<std::uint64_t>& words, int acc_width) {
  const std::uint64_t mask = width_mask(acc_width);
  int depth = 0;
  while (words.size() > 2) {
    std::size_t out = 0;
    std::size_t i = 0;
    for (; i + 3 <= words.size(); i += 3) {
      const std::uint64_t a = words[i];
      const std::uint64_t b = words[i + 1];
      const std::uint64_t c = words[i + 2];
      words[out++] = (a ^ b ^ c) & mask;
      words[out++] = (((a & b) | (a & c) | (b & c)) << 1) & mask;
    }
    for (; i < words.size(); ++i) words[out++] = words[i];
    words.resize(out);
    ++depth;
  }
  return depth;
}

void check_accumulator(std::int64_t exact, int acc_width) {
  const std::int64_t max = (std::int64_t{1} << (acc_width - 1)) - 1;
  const std::int64_t min = -(std::int64_t{1} << (acc_width - 1));
  if (exact > max || exact < min) {
    throw OverflowError("dot-product partial sum " + std::to_string(exact) + " exceeds the " +
                        std::to_string(acc_width) + "-bit accumulator");
  }
}

}  // namespace

std::uint32_t pack_lanes(std::span<const std::uint32_t> lanes, int act_bits, int pe_width) {
  check_mode({QmmKind::activation_weight, act_bits}, pe_width);
  if (static_cast<int>(lanes.size()) > pe_width / act_bits) {
    throw EncodingError(std::to_string(lanes.size()) + " lanes do not fit a " + std::to_string(pe_width) +
                        "-bit PE at " + std::to_string(act_bits) + " bits");
  }
  std::uint32_t word = 0;
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    if (lanes[l] >= (1U << act_bits)) {
      throw EncodingError("lane value " + std::to_string(lanes[l]) + " does not fit " + std::to_string(act_bits) +
                          " bits");
    }
    word |= lanes[l] << (l * static_cast<std::size_t>(act_bits));
  }
  return word;
}

LaneProducts pe_cycle(const PEMode& mode, int pe_width, std::uint32_t packed_acts, bool select_bit, int bit_index) {
  check_mode(mode, pe_width);
  if (pe_width < 32 && (packed_acts >> pe_width) != 0) {
    throw EncodingError("packed activations exceed the " + std::to_string(pe_width) + "-bit PE");
  }
  if (bit_index < 0 || bit_index >= mode.serial_cycles()) {
    throw EncodingError("bit index " + std::to_string(bit_index) + " outside the serial traversal");
  }
  LaneProducts out;
  out.count = mode.lanes(pe_width);
  const std::uint32_t lane_mask = (1U << mode.act_bits) - 1;
  for (int l = 0; l < out.count; ++l) {
    const std::int64_t lane = (packed_acts >> (l * mode.act_bits)) & lane_mask;
    out.value[static_cast<std::size_t>(l)] = select_bit ? (lane << bit_index) : 0;
  }
  return out;
}

int compressor_depth(int addends) {
  int depth = 0;
  while (addends > 2) {
    addends = 2 * (addends / 3) + addends % 3;
    ++depth;
  }
  return depth;
}

CompressorTreeState compressor_reduce(std::span<const std::int64_t> products, const CompressorTreeState& state,
                                      int acc_width) {
  const std::uint64_t mask = width_mask(acc_width);
  std::vector<std::uint64_t> words;
  words.reserve(products.size() + 2);
  std::int64_t exact = state.exact;
  for (const std::int64_t p : products) {
    words.push_back(static_cast<std::uint64_t>(p) & mask);
    exact += p;
  }
  check_accumulator(exact, acc_width);
  words.push_back(static_cast<std::uint64_t>(state.sum_word) & mask);
  words.push_back(static_cast<std::uint64_t>(state.carry_word) & mask);
  CompressorTreeState next;
  next.stage_count = reduce_words(words, acc_width);
  next.sum_word = sign_extend(words[0], acc_width);
  next.carry_word = words.size() > 1 ? sign_extend(words[1], acc_width) : 0;
  next.exact = exact;
  return next;
}

std::int64_t final_add(const CompressorTreeState& state, int acc_width) {
  const std::int64_t result =
      sign_extend(static_cast<std::uint64_t>(state.sum_word) + static_cast<std::uint64_t>(state.carry_word), acc_width);
  if (result != state.exact) {
    check_accumulator(state.exact, acc_width);
    throw std::logic_error("carry-save pair disagrees with the exact partial sum");
  }
  return result;
}

bool carry_save_consistent(const CompressorTreeState& state, int acc_width) {
  const std::uint64_t mask = width_mask(acc_width);
  return ((static_cast<std::uint64_t>(state.sum_word) + static_cast<std::uint64_t>(state.carry_word)) & mask) ==
         (static_cast<std::uint64_t>(state.exact) & mask);
}

namespace {

// Runs one DPU pass against the caller's accumulator slice and drains it.
DotProductResult run_pass(const PEMode& mode, const EngineConfig& config,
                          std::span<const std::span<const std::uint8_t>> rows, std::span<const std::uint8_t> column,
                          std::span<CompressorTreeState> lane_state) {
  check_mode(mode, config.pe_width);
  const int lanes = mode.lanes(config.pe_width);
  const int serial = mode.serial_cycles();
  const std::size_t k = column.size();
  if (rows.empty() || static_cast<int>(rows.size()) > lanes) {
    throw DimensionError("a DPU pass takes 1.." + std::to_string(lanes) + " rows, got " + std::to_string(rows.size()));
  }
  if (k == 0) throw DimensionError("dot product length must be >= 1");
  for (const auto& r : rows) {
    if (r.size() != k) throw DimensionError("row and column lengths differ");
  }
  const unsigned act_limit = 1U << mode.act_bits;
  const unsigned col_limit = mode.kind == QmmKind::activation_weight ? 2U : act_limit;
  for (const auto c : column) {
    if (c >= col_limit) {
      throw EncodingError(mode.kind == QmmKind::activation_weight
                              ? "activation x weight needs a binary weight column"
                              : "serial operand element does not fit the activation width");
    }
  }

  const std::size_t j = static_cast<std::size_t>(config.j_unfold);
  const std::size_t active = rows.size();
  std::vector<std::uint32_t> packed(std::min(j, k));
  std::vector<std::uint32_t> lane_values(active);
  std::vector<std::vector<std::int64_t>> products(active, std::vector<std::int64_t>(std::min(j, k)));

  DotProductResult result;
  result.stage_count = compressor_depth(static_cast<int>(std::min(j, k)) + 2);
  for (std::size_t base = 0; base < k; base += j) {
    const std::size_t n = std::min(j, k - base);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t l = 0; l < active; ++l) {
        const unsigned v = rows[l][base + p];
        if (v >= act_limit) throw EncodingError("activation element does not fit the activation width");
        lane_values[l] = v;
      }
      packed[p] = pack_lanes(lane_values, mode.act_bits, config.pe_width);
    }
    for (int s = 0; s < serial; ++s) {
      for (std::size_t p = 0; p < n; ++p) {
        const unsigned operand = column[base + p];
        const bool select = mode.kind == QmmKind::activation_weight ? operand != 0 : ((operand >> s) & 1U) != 0;
        const LaneProducts lp = pe_cycle(mode, config.pe_width, packed[p], select, s);
        for (std::size_t l = 0; l < active; ++l) products[l][p] = lp.value[l];
        if (config.fault == Fault::drop_last_lane && lanes > 1 && active == static_cast<std::size_t>(lanes)) {
          products[active - 1][p] = 0;
        }
      }
      for (std::size_t l = 0; l < active; ++l) {
        lane_state[l] = compressor_reduce(std::span(products[l].data(), n), lane_state[l], config.acc_width);
        if (config.check_invariants && !carry_save_consistent(lane_state[l], config.acc_width)) {
          throw std::logic_error("carry-save invariant violated");
        }
      }
      ++result.compute_cycles;
    }
  }
  result.values.resize(active);
  for (std::size_t l = 0; l < active; ++l) {
    result.values[l] = final_add(lane_state[l], config.acc_width);
    lane_state[l] = {};
  }
  result.drain_cycles = 1;
  return result;
}

}  // namespace

DotProductResult dpu_dot_product(const PEMode& mode, const EngineConfig& config,
                                 std::span<const std::span<const std::uint8_t>> rows,
                                 std::span<const std::uint8_t> column) {
  std::vector<CompressorTreeState> lanes(rows.size());
  return run_pass(mode, config, rows, column, lanes);
}

DotProductResult dpu_dot_product(const PEMode& mode, const EngineConfig& config, std::span<const std::uint8_t> row,
                                 std::span<const std::uint8_t> column) {
  const std::span<const std::uint8_t> rows[] = {row};
  return dpu_dot_product(mode, config, rows, column);
}

double peak_ops_per_cycle(const PEMode& mode, const EngineConfig& config) {
  return 2.0 * config.n_dpu * config.j_unfold * mode.lanes(config.pe_width) / mode.serial_cycles();
}

std::int64_t preload_elements(Index m, Index k, Index n) { return m * k + k * n; }

CycleReport estimate_cycles(const PEMode& mode, Index m, Index k, Index n, const EngineConfig& config) {
  check_mode(mode, config.pe_width);
  CycleReport r;
  const std::int64_t rows_per_pass = static_cast<std::int64_t>(config.n_dpu) * mode.lanes(config.pe_width);
  const std::int64_t passes = ceil_div(m, rows_per_pass) * n;
  r.compute_cycles = passes * ceil_div(k, config.j_unfold) * mode.serial_cycles();
  r.drain_cycles = passes;
  const std::int64_t load = ceil_div(preload_elements(m, k, n), config.effective_load_bandwidth());
  if (config.overlap_load) {
    r.load_cycles = std::max<std::int64_t>(0, load - r.compute_cycles);
    r.hidden_load_cycles = load - r.load_cycles;
  } else {
    r.load_cycles = load;
  }
  r.total_cycles = r.load_cycles + r.compute_cycles + r.drain_cycles;
  r.effective_ops = 2 * static_cast<std::uint64_t>(m * k * n);
  r.peak_ops_per_cycle = peak_ops_per_cycle(mode, config);
  r.utilization = r.total_cycles > 0
                      ? static_cast<double>(r.effective_ops) / (r.peak_ops_per_cycle * static_cast<double>(r.total_cycles))
                      : 0.0;
  return r;
}

PEMode mode_for(const QmmPlan& plan) {
  if (plan.kind == QmmKind::activation_weight && plan.rhs_bits != 1) {
    throw DimensionError("activation x weight mode needs binary weights, got " + std::to_string(plan.rhs_bits) +
                         "-bit");
  }
  if (plan.kind == QmmKind::activation_activation && plan.rhs_bits != plan.lhs_bits) {
    throw DimensionError("activation x activation operands must share a width (" + std::to_string(plan.lhs_bits) +
                         " vs " + std::to_string(plan.rhs_bits) + ")");
  }
  return {plan.kind, plan.lhs_bits};
}

QmmEngine::QmmEngine(EngineConfig config) : config_(config) {
  config_.validate();
  state_.resize(static_cast<std::size_t>(config_.n_dpu * config_.pe_width));
}

Matrix<std::int32_t> QmmEngine::simulate(const PEMode& mode, const IntMatrix& lhs, const IntMatrix& rhs_rows,
                                         CycleReport& counted) {
  const Index lanes = mode.lanes(config_.pe_width);
  const Index group = lanes * config_.n_dpu;
  Matrix<std::int32_t> out(lhs.rows(), rhs_rows.rows());
  std::vector<std::span<const std::uint8_t>> rows;
  for (Index col = 0; col < rhs_rows.rows(); ++col) {
    const auto column = rhs_rows.row(col);
    for (Index g = 0; g < lhs.rows(); g += group) {
      // DPUs run the pass side by side; the pass costs the longest of them.
      std::int64_t pass_compute = 0;
      std::int64_t pass_drain = 0;
      for (int d = 0; d < config_.n_dpu; ++d) {
        const Index first = g + d * lanes;
        if (first >= lhs.rows()) break;
        const Index last = std::min(lhs.rows(), first + lanes);
        rows.clear();
        for (Index r = first; r < last; ++r) rows.push_back(lhs.row(r));
        auto slice = std::span(state_).subspan(static_cast<std::size_t>(d * config_.pe_width),
                                               static_cast<std::size_t>(lanes));
        const DotProductResult pass = run_pass(mode, config_, rows, column, slice);
        for (Index r = first; r < last; ++r) out(r, col) = static_cast<std::int32_t>(pass.values[r - first]);
        pass_compute = std::max(pass_compute, pass.compute_cycles);
        pass_drain = std::max(pass_drain, pass.drain_cycles);
      }
      counted.compute_cycles += pass_compute;
      counted.drain_cycles += pass_drain;
    }
  }
  return out;
}

EngineResult QmmEngine::run(const QmmPlan& plan, const AffineOperand& lhs, const AffineOperand& rhs,
                            Fidelity fidelity) {
  const PEMode mode = mode_for(plan);
  const std::int64_t preload = preload_elements(plan.m, plan.k, plan.n);
  if (preload > config_.buffer_capacity) {
    throw CapacityError("QMM " + std::to_string(plan.m) + "x" + std::to_string(plan.k) + "x" +
                        std::to_string(plan.n) + " preloads " + std::to_string(preload) +
                        " elements; compute buffer holds " + std::to_string(config_.buffer_capacity));
  }
  EngineResult result;
  result.mode = mode;
  result.report = estimate_cycles(mode, plan.m, plan.k, plan.n, config_);

  const IntMatrix rhs_rows = plan.kind == QmmKind::activation_weight ? rhs.payload.transposed() : rhs.payload;
  if (fidelity == Fidelity::bit_accurate) {
    CycleReport counted;
    result.product = simulate(mode, lhs.payload, rhs_rows, counted);
    if (counted.compute_cycles != result.report.compute_cycles ||
        counted.drain_cycles != result.report.drain_cycles) {
      throw std::logic_error("simulated cycles disagree with the closed-form cycle model");
    }
  } else {
    result.product = integer_gram(lhs.payload, rhs_rows);
    const std::int64_t limit = (std::int64_t{1} << (config_.acc_width - 1)) - 1;
    if (result.product.size() > 0 && result.product.maxCoeff() > limit) {
      throw OverflowError("integer MM result exceeds the " + std::to_string(config_.acc_width) +
                          "-bit accumulator");
    }
  }
  // Row/column sums come from adders on the streamed operands; no modeled cycles.
  if (plan.needs_row_sums_lhs) result.lhs_row_sums = row_sums(lhs.payload);
  if (plan.needs_col_sums_rhs || plan.needs_row_sums_rhs) result.rhs_sums = row_sums(rhs_rows);
  ++runs_;
  return result;
}

EngineResult schedule_qmm(const QmmPlan& plan, const EngineConfig& config, const AffineOperand& lhs,
                          const AffineOperand& rhs, Fidelity fidelity) {
  QmmEngine engine(config);
  return engine.run(plan, lhs, rhs, fidelity);
}

}  // namespace beta
