#include "beta/oracle.hpp"

#include <cmath>
#include <string>

#include "beta/errors.hpp"

namespace beta::oracle {

Matrix<ExactScalar> exact_affine_mm(const AffineOperand& lhs, const AffineOperand& rhs) {
  if (lhs.cols() != rhs.rows()) throw DimensionError("exact_affine_mm: inner dimensions differ");
  // Decoded values are dyadic: numerator / 2^F with an integer numerator.
  auto numerators = [](const AffineOperand& op) {
    Matrix<BigInt> out(op.rows(), op.cols());
    const BigInt s = op.scale.raw();
    const BigInt o = op.offset_or_zero().raw();
    for (Index i = 0; i < op.rows(); ++i) {
      for (Index j = 0; j < op.cols(); ++j) out(i, j) = s * BigInt(op.payload(i, j)) + o;
    }
    return out;
  };
  const Matrix<BigInt> a = numerators(lhs);
  const Matrix<BigInt> b = numerators(rhs);
  const BigInt denominator = BigInt(1) << (lhs.frac_bits() + rhs.frac_bits());
  Matrix<ExactScalar> out(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      BigInt acc = 0;
      for (Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = ExactScalar(acc, denominator);
    }
  }
  return out;
}

Matrix<ExactScalar> exact_affine_gram(const AffineOperand& lhs, const AffineOperand& rhs_t) {
  if (lhs.cols() != rhs_t.cols()) throw DimensionError("exact_affine_gram: inner dimensions differ");
  return exact_affine_mm(lhs, rhs_t.transposed());
}

Fixed16 to_fixed16(const ExactScalar& value, int frac_bits, SaturationCounter* sat) {
  check_frac_bits(frac_bits);
  const ExactScalar scaled = value * ExactScalar(BigInt(1) << frac_bits);
  const BigInt num = boost::multiprecision::numerator(scaled);
  const BigInt den = boost::multiprecision::denominator(scaled);  // positive
  BigInt floor = num / den;
  BigInt rem = num - floor * den;
  if (rem < 0) {
    floor -= 1;
    rem += den;
  }
  const BigInt twice = 2 * rem;
  if (twice > den || (twice == den && (floor & 1) != 0)) floor += 1;
  if (floor > kFixed16Max) return {saturate16(kFixed16Max + 1, sat), frac_bits};
  if (floor < kFixed16Min) return {saturate16(kFixed16Min - 1, sat), frac_bits};
  return {static_cast<std::int16_t>(floor.convert_to<long>()), frac_bits};
}

FixedMatrix to_fixed16(const Matrix<ExactScalar>& values, int frac_bits, SaturationCounter* sat) {
  FixedMatrix out{Matrix<std::int16_t>(values.rows(), values.cols()), frac_bits};
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out.raw(i, j) = to_fixed16(values(i, j), frac_bits, sat).raw();
  }
  return out;
}

std::int64_t plain_dot(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw DimensionError("plain_dot: lengths differ");
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<std::int64_t>(a[i]) * b[i];
  return sum;
}

Matrix<std::int64_t> plain_integer_mm(const IntMatrix& lhs, const IntMatrix& rhs) {
  if (lhs.cols() != rhs.rows()) throw DimensionError("plain_integer_mm: inner dimensions differ");
  Matrix<std::int64_t> out = Matrix<std::int64_t>::Zero(lhs.rows(), rhs.cols());
  for (Index i = 0; i < lhs.rows(); ++i) {
    for (Index j = 0; j < rhs.cols(); ++j) {
      for (Index k = 0; k < lhs.cols(); ++k) out(i, j) += static_cast<std::int64_t>(lhs(i, k)) * rhs(k, j);
    }
  }
  return out;
}

namespace {

struct Reference {
  QuantScheme scheme;
  int frac_bits;
  const QmmTap& tap;

  AffineOperand quantize_site(const RealTensor& x, int bits, bool force_minmax = false) const {
    return quantize(x, bits, force_minmax ? QuantScheme::minmax_affine : site_scheme(scheme, bits), Role::activation,
                    frac_bits);
  }

  RealTensor emit(const std::string& site, const Matrix<ExactScalar>& exact) const {
    const FixedMatrix fx = to_fixed16(exact, frac_bits);
    if (tap) tap(site, fx);
    return fx.to_real();
  }
};

}  // namespace

RealTensor reference_block(const RealTensor& x, const BlockWeights& weights, const LayerSpec& spec,
                           QuantScheme scheme, int frac_bits, const QmmTap& tap) {
  spec.validate();
  const Reference ref{scheme, frac_bits, tap};
  const auto& bits = spec.bits;
  const Index dh = spec.head_dim();

  // Attention.
  const AffineOperand xq = ref.quantize_site(x, bits.proj_in);
  const RealTensor q = ref.emit("q_proj", exact_affine_mm(xq, weights.wq));
  const RealTensor k = ref.emit("k_proj", exact_affine_mm(xq, weights.wk));
  const RealTensor v = ref.emit("v_proj", exact_affine_mm(xq, weights.wv));
  const ExactScalar scale = ExactScalar(attention_scale(dh, frac_bits).raw()) / ExactScalar(BigInt(1) << frac_bits);
  RealTensor context(spec.seq_len, spec.hidden);
  for (Index h = 0; h < spec.heads; ++h) {
    const std::string head = std::to_string(h);
    const AffineOperand qh = ref.quantize_site(q.middleCols(h * dh, dh), bits.qk);
    const AffineOperand kh = ref.quantize_site(k.middleCols(h * dh, dh), bits.qk);
    const Matrix<ExactScalar> raw_scores = exact_affine_gram(qh, kh);
    const Matrix<ExactScalar> scaled = raw_scores.unaryExpr([&](const ExactScalar& s) { return ExactScalar(s * scale); });
    const RealTensor scores = ref.emit("qk." + head, scaled);
    const AffineOperand probs = ref.quantize_site(softmax(scores), bits.sv, true);
    const AffineOperand vh = ref.quantize_site(v.middleCols(h * dh, dh).transpose(), bits.sv);
    context.middleCols(h * dh, dh) = ref.emit("sv." + head, exact_affine_gram(probs, vh));
  }
  const AffineOperand cq = ref.quantize_site(context, bits.proj_out);
  const RealTensor attn_out = ref.emit("out_proj", exact_affine_mm(cq, weights.wo));
  const RealTensor attended = layernorm(attn_out + x, weights.ln1_gain, weights.ln1_bias);

  // Feed-forward.
  const AffineOperand fq = ref.quantize_site(attended, bits.ffn1);
  const RealTensor hidden = ref.emit("ffn1", exact_affine_mm(fq, weights.w1));
  const AffineOperand gq = ref.quantize_site(gelu(hidden), bits.ffn2);
  const RealTensor ffn_out = ref.emit("ffn2", exact_affine_mm(gq, weights.w2));
  return layernorm(ffn_out + attended, weights.ln2_gain, weights.ln2_bias);
}

RealTensor reference_model(const Model& model, const RealTensor& x, QuantScheme scheme, int frac_bits,
                           const QmmTap& tap) {
  RealTensor out = x;
  for (std::size_t b = 0; b < model.specs.size(); ++b) {
    out = reference_block(out, model.weights[b], model.specs[b], scheme, frac_bits, tap);
  }
  return out;
}

}  // namespace beta::oracle
