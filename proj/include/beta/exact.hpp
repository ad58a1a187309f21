#pragma once

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

// Boost 1.74 probes Matrix::const_iterator (void in Eigen 3.4) when checking
// whether a matrix converts to a multiprecision number.
namespace boost::multiprecision::detail {
template <class S, int R, int C, int O, int MR, int MC>
struct is_byte_container<Eigen::Matrix<S, R, C, O, MR, MC>> : boost::false_type {};
}  // namespace boost::multiprecision::detail

namespace beta {

// Arbitrary-precision rational; no rounding until an explicit to_fixed16.
using ExactScalar = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

}  // namespace beta
