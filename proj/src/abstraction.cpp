#include "beta/abstraction.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>
#include <sstream>

#include "beta/errors.hpp"
#include "beta/random.hpp"

namespace beta {

const char* to_string(QmmKind kind) {
  return kind == QmmKind::activation_weight ? "activation_x_weight" : "activation_x_activation";
}

int width_index(int bits) {
  switch (bits) {
    case 1: return 0;
    case 2: return 1;
    case 4: return 2;
    case 8: return 3;
    default: throw EncodingError("unsupported bit width " + std::to_string(bits));
  }
}

void OpCounter::add_iop(std::uint64_t n, int width) {
  iop += n;
  iop_by_width[static_cast<std::size_t>(width_index(width))] += n;
}

OpCounter& OpCounter::operator+=(const OpCounter& other) {
  iop += other.iop;
  op += other.op;
  for (std::size_t w = 0; w < iop_by_width.size(); ++w) iop_by_width[w] += other.iop_by_width[w];
  op_fuse += other.op_fuse;
  op_scale += other.op_scale;
  op_combine += other.op_combine;
  nonlinear += other.nonlinear;
  return *this;
}

FusedCoeffs fuse(const AffineOperand& lhs, const AffineOperand& rhs, OpCounter* counter,
                 std::optional<Fixed16> extra) {
  if (lhs.frac_bits() != rhs.frac_bits()) {
    throw EncodingError("operands disagree on FIX-16 fraction bits");
  }
  std::uint64_t products = 0;
  // An absent factor contributes exact zero and costs nothing.
  auto product = [&](Fixed16 a, std::optional<Fixed16> b) -> FixedProduct {
    if (!b) return {};
    ++products;
    FixedProduct p = fx_product(a, *b);
    if (extra) {
      ++products;
      p = fx_product(p, *extra);
    }
    return p;
  };
  FusedCoeffs fused;
  fused.cc = product(lhs.scale, rhs.scale);
  fused.co = product(lhs.scale, rhs.offset);
  fused.oc = lhs.offset ? product(*lhs.offset, rhs.scale) : FixedProduct{};
  fused.oo = lhs.offset ? product(*lhs.offset, rhs.offset) : FixedProduct{};
  // Absent products must share the frac_bits of the present ones.
  const int frac = fused.cc.frac_bits;
  for (FixedProduct* p : {&fused.co, &fused.oc, &fused.oo}) {
    if (p->is_zero()) p->frac_bits = frac;
  }
  if (counter) counter->add_fuse(products);
  return fused;
}

int QmmPlan::term_count() const {
  return static_cast<int>(!fused.cc.is_zero()) + static_cast<int>(!fused.co.is_zero()) +
         static_cast<int>(!fused.oc.is_zero()) + static_cast<int>(!fused.oo.is_zero());
}

QmmPlan make_plan(QmmKind kind, const AffineOperand& lhs, const AffineOperand& rhs, OpCounter* counter,
                  std::optional<Fixed16> extra) {
  if (lhs.role != Role::activation) throw DimensionError("lhs of a QMM must be an activation");
  QmmPlan plan;
  plan.kind = kind;
  plan.m = lhs.rows();
  plan.k = lhs.cols();
  if (kind == QmmKind::activation_weight) {
    if (rhs.role != Role::weight) throw DimensionError("activation x weight requires a weight rhs");
    if (rhs.rows() != lhs.cols()) {
      throw DimensionError("inner dimensions differ: " + std::to_string(lhs.cols()) + " vs " +
                           std::to_string(rhs.rows()));
    }
    plan.n = rhs.cols();
  } else {
    if (rhs.role != Role::activation) throw DimensionError("activation x activation requires an activation rhs");
    if (rhs.cols() != lhs.cols()) {
      throw DimensionError("inner dimensions differ: " + std::to_string(lhs.cols()) + " vs " +
                           std::to_string(rhs.cols()));
    }
    plan.n = rhs.rows();
  }
  plan.lhs_bits = lhs.bits();
  plan.rhs_bits = rhs.bits();
  plan.frac_bits = lhs.frac_bits();
  plan.fused = fuse(lhs, rhs, counter, extra);
  plan.needs_row_sums_lhs = !plan.fused.co.is_zero();
  plan.needs_col_sums_rhs = kind == QmmKind::activation_weight && !plan.fused.oc.is_zero();
  plan.needs_row_sums_rhs = kind == QmmKind::activation_activation && !plan.fused.oc.is_zero();
  plan.needs_constant = !plan.fused.oo.is_zero();
  return plan;
}

namespace {

// One BinaryMatrix per bit of the payload, each laid out like the payload rows.
std::vector<BinaryMatrix> bit_planes(const IntMatrix& m) {
  std::vector<BinaryMatrix> planes;
  planes.reserve(static_cast<std::size_t>(m.bit_width()));
  for (int p = 0; p < m.bit_width(); ++p) planes.emplace_back(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const unsigned v = m(i, j);
      for (int p = 0; p < m.bit_width(); ++p) {
        if ((v >> p) & 1U) planes[static_cast<std::size_t>(p)].set(i, j, true);
      }
    }
  }
  return planes;
}

// lhs: M x K rows, rhs: N x K rows; result(i, j) = <lhs row i, rhs row j>.
Matrix<std::int32_t> rowwise_products(const IntMatrix& lhs, const IntMatrix& rhs_rows) {
  const auto lp = bit_planes(lhs);
  const auto rp = bit_planes(rhs_rows);
  const Index words = lhs.cols() == 0 ? 0 : lp.front().words_per_row();
  Matrix<std::int32_t> out(lhs.rows(), rhs_rows.rows());
  for (Index i = 0; i < lhs.rows(); ++i) {
    for (Index j = 0; j < rhs_rows.rows(); ++j) {
      std::int64_t acc = 0;
      for (std::size_t a = 0; a < lp.size(); ++a) {
        const auto lw = lp[a].row_words(i);
        for (std::size_t b = 0; b < rp.size(); ++b) {
          const auto rw = rp[b].row_words(j);
          std::int64_t count = 0;
          for (Index w = 0; w < words; ++w) count += std::popcount(lw[w] & rw[w]);
          acc += count << (a + b);
        }
      }
      if (acc > std::numeric_limits<std::int32_t>::max()) {
        throw OverflowError("integer MM element (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") = " + std::to_string(acc) + " exceeds the 32-bit accumulator");
      }
      out(i, j) = static_cast<std::int32_t>(acc);
    }
  }
  return out;
}

}  // namespace

Matrix<std::int32_t> integer_matmul(const IntMatrix& lhs, const IntMatrix& rhs) {
  if (lhs.cols() != rhs.rows()) throw DimensionError("integer_matmul: inner dimensions differ");
  return rowwise_products(lhs, rhs.transposed());
}

Matrix<std::int32_t> integer_gram(const IntMatrix& lhs, const IntMatrix& rhs_t) {
  if (lhs.cols() != rhs_t.cols()) throw DimensionError("integer_gram: inner dimensions differ");
  return rowwise_products(lhs, rhs_t);
}

Vector<std::int32_t> rhs_sums(QmmKind kind, const IntMatrix& rhs) {
  return kind == QmmKind::activation_weight ? col_sums(rhs) : row_sums(rhs);
}

FixedMatrix apply_fused(const QmmPlan& plan, const Matrix<std::int32_t>& intmm,
                        const Vector<std::int32_t>& lhs_row_sums, const Vector<std::int32_t>& rhs_sum,
                        OpCounter* counter, SaturationCounter* sat) {
  if (intmm.rows() != plan.m || intmm.cols() != plan.n) throw DimensionError("apply_fused: intmm shape mismatch");
  const bool needs_rhs = plan.needs_col_sums_rhs || plan.needs_row_sums_rhs;
  if (plan.needs_row_sums_lhs && lhs_row_sums.size() != plan.m) {
    throw DimensionError("apply_fused: lhs row sums missing");
  }
  if (needs_rhs && rhs_sum.size() != plan.n) throw DimensionError("apply_fused: rhs sums missing");

  const auto& f = plan.fused;
  const int shift = f.cc.frac_bits - plan.frac_bits;
  const __int128 constant = static_cast<__int128>(f.oo.raw) * plan.k;
  FixedMatrix out{Matrix<std::int16_t>(plan.m, plan.n), plan.frac_bits};
  for (Index i = 0; i < plan.m; ++i) {
    const __int128 row_term = plan.needs_row_sums_lhs ? static_cast<__int128>(f.co.raw) * lhs_row_sums(i) : 0;
    for (Index j = 0; j < plan.n; ++j) {
      __int128 acc = static_cast<__int128>(f.cc.raw) * intmm(i, j) + row_term + constant;
      if (needs_rhs) acc += static_cast<__int128>(f.oc.raw) * rhs_sum(j);
      out.raw(i, j) = saturate16(round_shift_even(acc, shift), sat);
    }
  }
  if (counter) {
    const int terms = plan.term_count();
    const auto elements = static_cast<std::uint64_t>(plan.m * plan.n);
    counter->add_scale(static_cast<std::uint64_t>(terms) * elements);
    if (terms > 1) counter->add_combine(static_cast<std::uint64_t>(terms - 1) * elements);
  }
  return out;
}

namespace {

void count_integer_mm(const QmmPlan& plan, OpCounter& counter) {
  counter.add_iop(2 * static_cast<std::uint64_t>(plan.m * plan.k * plan.n), std::max(plan.lhs_bits, plan.rhs_bits));
}

}  // namespace

FixedMatrix qmm_activation_weight(const AffineOperand& act, const AffineOperand& wt, OpCounter& counter,
                                  SaturationCounter* sat) {
  const QmmPlan plan = make_plan(QmmKind::activation_weight, act, wt, &counter);
  const Matrix<std::int32_t> intmm = integer_matmul(act.payload, wt.payload);
  count_integer_mm(plan, counter);
  const Vector<std::int32_t> lhs = plan.needs_row_sums_lhs ? row_sums(act.payload) : Vector<std::int32_t>();
  const Vector<std::int32_t> rhs = plan.needs_col_sums_rhs ? col_sums(wt.payload) : Vector<std::int32_t>();
  return apply_fused(plan, intmm, lhs, rhs, &counter, sat);
}

FixedMatrix qmm_activation_activation(const AffineOperand& lhs, const AffineOperand& rhs_t, OpCounter& counter,
                                      SaturationCounter* sat, std::optional<Fixed16> extra) {
  const QmmPlan plan = make_plan(QmmKind::activation_activation, lhs, rhs_t, &counter, extra);
  const Matrix<std::int32_t> intmm = integer_gram(lhs.payload, rhs_t.payload);
  count_integer_mm(plan, counter);
  const Vector<std::int32_t> ls = plan.needs_row_sums_lhs ? row_sums(lhs.payload) : Vector<std::int32_t>();
  const Vector<std::int32_t> rs = plan.needs_row_sums_rhs ? row_sums(rhs_t.payload) : Vector<std::int32_t>();
  return apply_fused(plan, intmm, ls, rs, &counter, sat);
}

CountReport count_report(const OpCounter& counter, Index n) {
  const auto un = static_cast<std::uint64_t>(n);
  CountReport report;
  report.iop = counter.iop;
  report.op = counter.op;
  report.expected_iop = 2 * un * un * un;
  report.expected_op = 3 * un * un + 2;
  report.iop_formula_match = report.iop == report.expected_iop && report.op == report.expected_op;
  if (!report.iop_formula_match) {
    std::ostringstream os;
    os << "N=" << n << ": iop " << report.iop << " (expected " << report.expected_iop << "), op " << report.op
       << " (expected " << report.expected_op << "); stages: fuse=" << counter.op_fuse
       << " scale=" << counter.op_scale << " combine=" << counter.op_combine;
    report.diagnostic = os.str();
  }
  return report;
}

OpCounter count_reference_configuration(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int frac = kDefaultFracBits;
  AffineOperand act{random_payload(n, n, 1, rng), random_nonzero_fixed(rng, 1, 256, frac),
                    random_nonzero_fixed(rng, 1, 256, frac), Role::activation};
  AffineOperand wt{random_payload(n, n, 1, rng), random_nonzero_fixed(rng, 1, 256, frac), std::nullopt,
                   Role::weight};
  OpCounter counter;
  qmm_activation_weight(act, wt, counter);
  return counter;
}

}  // namespace beta
