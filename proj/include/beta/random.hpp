#pragma once

#include <random>

#include "beta/fixed16.hpp"
#include "beta/matrix.hpp"

namespace beta {

using Rng = std::mt19937_64;

IntMatrix random_payload(Index rows, Index cols, int bits, Rng& rng);
// Uniform raw value in [lo, hi].
Fixed16 random_fixed(Rng& rng, int lo, int hi, int frac_bits);
// Uniform raw magnitude in [lo, hi] with a random sign; never zero when lo >= 1.
Fixed16 random_nonzero_fixed(Rng& rng, int lo, int hi, int frac_bits);
RealTensor random_normal(Index rows, Index cols, double stddev, Rng& rng);

// Operand with scale/offset sized so products of K such elements stay mostly
// inside the FIX-16 range. Offset is present with probability 1/2.
AffineOperand random_operand(Index rows, Index cols, int bits, Role role, Rng& rng, int frac_bits = kDefaultFracBits);

}  // namespace beta
