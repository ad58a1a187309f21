#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "beta/abstraction.hpp"
#include "beta/matrix.hpp"

namespace beta {

// Test hook for the verification suite's fault-injection path.
enum class Fault { none, drop_last_lane };

/// QMM engine parameters. Defaults are the evaluated configuration:
/// N = 2 DPUs, J = 256 unfolded elements, 8-bit PEs, 190 MHz.
struct EngineConfig {
  int n_dpu = 2;
  int j_unfold = 256;
  int pe_width = 8;
  int acc_width = 32;
  double freq_hz = 190e6;
  // Elements per cycle into the compute buffer; 0 means "same as j_unfold".
  int load_bandwidth = 0;
  bool overlap_load = false;
  // Compute-buffer capacity in elements; a QMM that does not fit is an error.
  std::int64_t buffer_capacity = std::int64_t{1} << 22;
  // Shadow the exact partial sum and check the carry-save pair every cycle.
  bool check_invariants = false;
  Fault fault = Fault::none;

  int effective_load_bandwidth() const { return load_bandwidth > 0 ? load_bandwidth : j_unfold; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

/// PE operating mode: QMM kind and activation precision b_a.
///
/// Both kinds pack pe_width / b_a lanes into a PE, one lane per output row.
/// Activation x weight selects each lane with the shared weight bit in one
/// cycle; activation x activation walks the second operand bit-serially over
/// b_a cycles, broadcasting each bit to all lanes.
struct PEMode {
  QmmKind kind = QmmKind::activation_weight;
  int act_bits = 1;

  int lanes(int pe_width) const { return pe_width / act_bits; }
  int serial_cycles() const { return kind == QmmKind::activation_activation ? act_bits : 1; }
  friend bool operator==(const PEMode&, const PEMode&) = default;
};

struct LaneProducts {
  std::array<std::int64_t, 32> value{};
  int count = 0;
};

// Packs b_a-bit lane values into a pe_width-bit word, lane 0 in the low bits.
std::uint32_t pack_lanes(std::span<const std::uint32_t> lanes, int act_bits, int pe_width);

// One PE cycle. Activation x weight: lane * select_bit. Activation x
// activation: lane * select_bit * 2^bit_index, select_bit being bit
// `bit_index` of the serially traversed operand.
LaneProducts pe_cycle(const PEMode& mode, int pe_width, std::uint32_t packed_acts, bool select_bit,
                      int bit_index = 0);

/// Carry-save accumulator pair of one lane's compressor tree loop.
///
/// sum_word and carry_word are acc_width-bit two's-complement values held
/// sign-extended; their sum modulo 2^acc_width is the running partial sum.
/// `exact` shadows that sum for overflow detection.
struct CompressorTreeState {
  std::int64_t sum_word = 0;
  std::int64_t carry_word = 0;
  int stage_count = 0;
  std::int64_t exact = 0;

  friend bool operator==(const CompressorTreeState&, const CompressorTreeState&) = default;
};

// 3:2 reduction depth taking `addends` inputs down to two.
int compressor_depth(int addends);

// Folds the products and the (sum, carry) pair through 3:2 compressor stages.
// Throws OverflowError when the exact running sum leaves the acc_width range.
CompressorTreeState compressor_reduce(std::span<const std::int64_t> products, const CompressorTreeState& state,
                                      int acc_width);

// Carry-select stage: sum_word + carry_word at acc_width.
std::int64_t final_add(const CompressorTreeState& state, int acc_width);

// True when the carry-save pair represents the shadowed exact sum.
bool carry_save_consistent(const CompressorTreeState& state, int acc_width);

struct DotProductResult {
  std::vector<std::int64_t> values;  // one per row
  std::int64_t compute_cycles = 0;
  std::int64_t drain_cycles = 0;
  int stage_count = 0;  // compressor depth of a full J-element cycle

  std::int64_t cycles() const { return compute_cycles + drain_cycles; }
};

/// One DPU pass: up to `lanes` rows share the column operand.
///
/// Every row and the column hold K elements. For activation x weight the
/// column is a binary weight vector; for activation x activation it is the
/// bit-serial operand. Cycles = ceil(K / J) * serial_cycles + 1 drain.
DotProductResult dpu_dot_product(const PEMode& mode, const EngineConfig& config,
                                 std::span<const std::span<const std::uint8_t>> rows,
                                 std::span<const std::uint8_t> column);
DotProductResult dpu_dot_product(const PEMode& mode, const EngineConfig& config, std::span<const std::uint8_t> row,
                                 std::span<const std::uint8_t> column);

struct CycleReport {
  std::int64_t load_cycles = 0;         // exposed preload cycles
  std::int64_t hidden_load_cycles = 0;  // preload overlapped with compute
  std::int64_t compute_cycles = 0;
  std::int64_t drain_cycles = 0;
  std::int64_t total_cycles = 0;
  std::uint64_t effective_ops = 0;  // 2 * M * K * N
  double peak_ops_per_cycle = 0.0;  // in this mode
  double utilization = 0.0;

  friend bool operator==(const CycleReport&, const CycleReport&) = default;
};

double peak_ops_per_cycle(const PEMode& mode, const EngineConfig& config);
std::int64_t preload_elements(Index m, Index k, Index n);

// Closed-form cycle model of one QMM of shape (M x K) * (K x N).
CycleReport estimate_cycles(const PEMode& mode, Index m, Index k, Index n, const EngineConfig& config);

// The PE mode a plan runs in; throws DimensionError on mode/operand mismatch.
PEMode mode_for(const QmmPlan& plan);

enum class Fidelity {
  functional,    // bit-plane integer MM, closed-form cycles
  bit_accurate,  // every dot product through PE -> compressor tree -> final add
};

struct EngineResult {
  Matrix<std::int32_t> product;
  Vector<std::int32_t> lhs_row_sums;
  Vector<std::int32_t> rhs_sums;
  CycleReport report;
  PEMode mode;
};

/// Sequential model of the QMM engine. Each run drains every accumulator, so
/// the mode can change between runs with no residual state.
class QmmEngine {
 public:
  explicit QmmEngine(EngineConfig config);

  EngineResult run(const QmmPlan& plan, const AffineOperand& lhs, const AffineOperand& rhs,
                   Fidelity fidelity = Fidelity::functional);

  const EngineConfig& config() const { return config_; }
  // Accumulator pairs, n_dpu x max lanes.
  const std::vector<CompressorTreeState>& state() const { return state_; }
  std::uint64_t runs() const { return runs_; }

 private:
  Matrix<std::int32_t> simulate(const PEMode& mode, const IntMatrix& lhs, const IntMatrix& rhs_rows,
                                CycleReport& counted);

  EngineConfig config_;
  std::vector<CompressorTreeState> state_;
  std::uint64_t runs_ = 0;
};

EngineResult schedule_qmm(const QmmPlan& plan, const EngineConfig& config, const AffineOperand& lhs,
                          const AffineOperand& rhs, Fidelity fidelity = Fidelity::functional);

}  // namespace beta
