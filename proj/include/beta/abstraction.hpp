#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "beta/fixed16.hpp"
#include "beta/matrix.hpp"

namespace beta {

enum class QmmKind { activation_weight, activation_activation };

const char* to_string(QmmKind kind);

/// Integer (Iop) and full-precision (Op) operation counts.
///
/// Op is split by stage so a mismatch against the closed-form count can be
/// localized: offline fusion products, coefficient multiplies and combining adds.
struct OpCounter {
  std::uint64_t iop = 0;
  std::uint64_t op = 0;
  // Iop split by operand width; index 0..3 covers widths 1, 2, 4, 8.
  std::array<std::uint64_t, 4> iop_by_width{};
  std::uint64_t op_fuse = 0;
  std::uint64_t op_scale = 0;
  std::uint64_t op_combine = 0;
  std::uint64_t nonlinear = 0;

  void add_iop(std::uint64_t n, int width);
  void add_fuse(std::uint64_t n) { op_fuse += n; op += n; }
  void add_scale(std::uint64_t n) { op_scale += n; op += n; }
  void add_combine(std::uint64_t n) { op_combine += n; op += n; }
  void add_nonlinear(std::uint64_t n) { nonlinear += n; }
  OpCounter& operator+=(const OpCounter& other);
};

int width_index(int bits);

/// Offline-fused coefficients of (s_l x + o_l)(s_r y + o_r):
/// cc = s_l s_r, co = s_l o_r, oc = o_l s_r, oo = o_l o_r.
///
/// Each field is the exact product of its FIX-16 factors (see FixedProduct);
/// rounding to FIX-16 happens once, after the terms are combined.
struct FusedCoeffs {
  FixedProduct cc;
  FixedProduct co;
  FixedProduct oc;
  FixedProduct oo;
};

// `extra` is an optional common factor folded into every coefficient
// (attention's 1/sqrt(d_head)). Counts one Op per product computed.
FusedCoeffs fuse(const AffineOperand& lhs, const AffineOperand& rhs, OpCounter* counter = nullptr,
                 std::optional<Fixed16> extra = std::nullopt);

/// Decomposed term structure of one QMM.
///
/// For activation x weight the rhs is K x N; for activation x activation the rhs
/// is supplied transposed (N x K, one row per key), as in Q K^T.
struct QmmPlan {
  QmmKind kind = QmmKind::activation_weight;
  FusedCoeffs fused;
  bool needs_row_sums_lhs = false;  // co term
  bool needs_col_sums_rhs = false;  // oc term, activation x weight
  bool needs_row_sums_rhs = false;  // oc term, activation x activation
  bool needs_constant = false;      // oo term
  Index m = 0;
  Index k = 0;
  Index n = 0;
  int lhs_bits = 1;
  int rhs_bits = 1;
  int frac_bits = kDefaultFracBits;

  // Nonzero fused terms, cc included when nonzero.
  int term_count() const;
};

// Validates roles and shapes, fuses coefficients (counted) and flags terms.
QmmPlan make_plan(QmmKind kind, const AffineOperand& lhs, const AffineOperand& rhs, OpCounter* counter = nullptr,
                  std::optional<Fixed16> extra = std::nullopt);

// Exact integer products on bit-planes (AND + popcount). Throws OverflowError
// past the 32-bit accumulator.
Matrix<std::int32_t> integer_matmul(const IntMatrix& lhs, const IntMatrix& rhs);
Matrix<std::int32_t> integer_gram(const IntMatrix& lhs, const IntMatrix& rhs_t);

// Sums of the rhs payload along K: column sums for activation x weight,
// row sums of the transposed operand for activation x activation.
Vector<std::int32_t> rhs_sums(QmmKind kind, const IntMatrix& rhs);

/// Combines the integer MM with the fused terms and rounds each element once.
///
/// result(i,j) = fx(cc * intmm(i,j) + co * lhs_row_sums(i) + oc * rhs_sums(j) + oo * K).
/// Zero terms are skipped and not counted.
FixedMatrix apply_fused(const QmmPlan& plan, const Matrix<std::int32_t>& intmm,
                        const Vector<std::int32_t>& lhs_row_sums, const Vector<std::int32_t>& rhs_sum,
                        OpCounter* counter = nullptr, SaturationCounter* sat = nullptr);

FixedMatrix qmm_activation_weight(const AffineOperand& act, const AffineOperand& wt, OpCounter& counter,
                                  SaturationCounter* sat = nullptr);
FixedMatrix qmm_activation_activation(const AffineOperand& lhs, const AffineOperand& rhs_t, OpCounter& counter,
                                      SaturationCounter* sat = nullptr, std::optional<Fixed16> extra = std::nullopt);

struct CountReport {
  bool iop_formula_match = false;
  std::uint64_t iop = 0;
  std::uint64_t op = 0;
  std::uint64_t expected_iop = 0;
  std::uint64_t expected_op = 0;
  std::string diagnostic;
};

// Checks a completed square N x N activation x weight run in the reference
// configuration (activation offset present, weight offset absent) against
// 2N^3 Iop and 3N^2 + 2 Op.
CountReport count_report(const OpCounter& counter, Index n);

// Runs an N x N x N activation x weight QMM in that configuration with
// seeded random payloads and returns its counter.
OpCounter count_reference_configuration(Index n, std::uint64_t seed = 1);

}  // namespace beta
