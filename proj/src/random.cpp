#include "beta/random.hpp"

#include <algorithm>
#include <cmath>

namespace beta {

IntMatrix random_payload(Index rows, Index cols, int bits, Rng& rng) {
  std::uniform_int_distribution<int> dist(0, (1 << bits) - 1);
  Matrix<std::uint8_t> data(rows, cols);
  for (Index i = 0; i < data.size(); ++i) data.data()[i] = static_cast<std::uint8_t>(dist(rng));
  return IntMatrix(std::move(data), bits);
}

Fixed16 random_fixed(Rng& rng, int lo, int hi, int frac_bits) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return {static_cast<std::int16_t>(dist(rng)), frac_bits};
}

Fixed16 random_nonzero_fixed(Rng& rng, int lo, int hi, int frac_bits) {
  const Fixed16 magnitude = random_fixed(rng, lo, hi, frac_bits);
  const bool negative = std::bernoulli_distribution(0.5)(rng);
  return {static_cast<std::int16_t>(negative ? -magnitude.raw() : magnitude.raw()), frac_bits};
}

RealTensor random_normal(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  RealTensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

AffineOperand random_operand(Index rows, Index cols, int bits, Role role, Rng& rng, int frac_bits) {
  // |scale * payload| stays below about 2 and |offset| below 1.
  const int one = 1 << frac_bits;
  const int scale_max = std::max(1, 2 * one / ((1 << bits) - 1));
  AffineOperand op{random_payload(rows, cols, bits, rng), random_nonzero_fixed(rng, 1, scale_max, frac_bits),
                   std::nullopt, role};
  if (std::bernoulli_distribution(0.5)(rng)) op.offset = random_fixed(rng, -one, one, frac_bits);
  return op;
}

}  // namespace beta
