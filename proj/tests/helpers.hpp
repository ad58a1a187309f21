#pragma once

#include <initializer_list>

#include "beta/matrix.hpp"

namespace beta::test {

inline IntMatrix ints(std::initializer_list<std::initializer_list<int>> rows, int bits) {
  Matrix<std::int64_t> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (int v : r) m(i, j++) = v;
    ++i;
  }
  return IntMatrix::from(m, bits);
}

inline Fixed16 fx(double v, int frac_bits = kDefaultFracBits) { return Fixed16::from_double(v, frac_bits); }

inline RealTensor real(std::initializer_list<std::initializer_list<double>> rows) {
  RealTensor m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace beta::test
