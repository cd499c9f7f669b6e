/*
 Copyright 2026 The safepdp authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef SAFEPDP_HYPERDUAL_HPP
#define SAFEPDP_HYPERDUAL_HPP

#include <Eigen/Core>
#include <cmath>
#include <ostream>

#include "safepdp/common.hpp"

namespace safepdp {

// Truncated second-order forward-mode number over the algebra
// eps1^2 = eps2^2 = 0. Seeding d1/d2 with unit directions and reading d12
// yields exact mixed second derivatives; d1 alone yields first derivatives.
struct HyperDual {
  double v{0.0};    // real part
  double d1{0.0};   // eps1 coefficient
  double d2{0.0};   // eps2 coefficient
  double d12{0.0};  // eps1*eps2 coefficient

  HyperDual() = default;
  HyperDual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  HyperDual(double value, double e1, double e2, double e12)
      : v(value), d1(e1), d2(e2), d12(e12) {}

  HyperDual& operator+=(const HyperDual& o) {
    v += o.v;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }
  HyperDual& operator-=(const HyperDual& o) {
    v -= o.v;
    d1 -= o.d1;
    d2 -= o.d2;
    d12 -= o.d12;
    return *this;
  }
  HyperDual& operator*=(const HyperDual& o) {
    const double nv = v * o.v;
    const double n1 = d1 * o.v + v * o.d1;
    const double n2 = d2 * o.v + v * o.d2;
    const double n12 = d12 * o.v + d1 * o.d2 + d2 * o.d1 + v * o.d12;
    v = nv;
    d1 = n1;
    d2 = n2;
    d12 = n12;
    return *this;
  }
  HyperDual& operator/=(const HyperDual& o);
};

inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator-(const HyperDual& a) {
  return {-a.v, -a.d1, -a.d2, -a.d12};
}
inline HyperDual operator+(const HyperDual& a) { return a; }

// Chain rule for a univariate C^2 map applied to a hyper-dual argument.
inline HyperDual chain(const HyperDual& a, double f, double df, double ddf) {
  return {f, df * a.d1, df * a.d2, df * a.d12 + ddf * a.d1 * a.d2};
}

// Quotient rule with the value part computed as an exact double division.
inline HyperDual& HyperDual::operator/=(const HyperDual& o) {
  const double q = v / o.v;
  const double q1 = (d1 - q * o.d1) / o.v;
  const double q2 = (d2 - q * o.d2) / o.v;
  const double q12 = (d12 - q2 * o.d1 - q * o.d12 - q1 * o.d2) / o.v;
  v = q;
  d1 = q1;
  d2 = q2;
  d12 = q12;
  return *this;
}
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }

inline bool operator<(const HyperDual& a, const HyperDual& b) { return a.v < b.v; }
inline bool operator>(const HyperDual& a, const HyperDual& b) { return a.v > b.v; }
inline bool operator<=(const HyperDual& a, const HyperDual& b) { return a.v <= b.v; }
inline bool operator>=(const HyperDual& a, const HyperDual& b) { return a.v >= b.v; }
inline bool operator==(const HyperDual& a, const HyperDual& b) { return a.v == b.v; }
inline bool operator!=(const HyperDual& a, const HyperDual& b) { return a.v != b.v; }

inline HyperDual exp(const HyperDual& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline HyperDual log(const HyperDual& a) {
  const double iv = 1.0 / a.v;
  return chain(a, std::log(a.v), iv, -iv * iv);
}
inline HyperDual sin(const HyperDual& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, s, c, -s);
}
inline HyperDual cos(const HyperDual& a) {
  const double s = std::sin(a.v), c = std::cos(a.v);
  return chain(a, c, -s, -c);
}
inline HyperDual tanh(const HyperDual& a) {
  const double t = std::tanh(a.v);
  const double sech2 = 1.0 - t * t;
  return chain(a, t, sech2, -2.0 * t * sech2);
}
inline HyperDual sqrt(const HyperDual& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline HyperDual pow(const HyperDual& a, double p) {
  const double f = std::pow(a.v, p);
  const double df = p * std::pow(a.v, p - 1.0);
  const double ddf = p * (p - 1.0) * std::pow(a.v, p - 2.0);
  return chain(a, f, df, ddf);
}
inline HyperDual pow(const HyperDual& a, int p) {
  return pow(a, static_cast<double>(p));
}
inline HyperDual sq(const HyperDual& a) { return a * a; }

inline bool isfinite(const HyperDual& a) {
  return std::isfinite(a.v) && std::isfinite(a.d1) && std::isfinite(a.d2) &&
         std::isfinite(a.d12);
}

inline std::ostream& operator<<(std::ostream& os, const HyperDual& a) {
  return os << a.v << "+" << a.d1 << "e1+" << a.d2 << "e2+" << a.d12 << "e12";
}

}  // namespace safepdp

namespace Eigen {

template <>
struct NumTraits<safepdp::HyperDual> : NumTraits<double> {
  using Real = safepdp::HyperDual;
  using NonInteger = safepdp::HyperDual;
  using Nested = safepdp::HyperDual;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 4,
    AddCost = 4,
    MulCost = 8,
  };
};

}  // namespace Eigen

namespace safepdp {

using HdVector = Eigen::Matrix<HyperDual, Eigen::Dynamic, 1>;
using HdMatrix = Eigen::Matrix<HyperDual, Eigen::Dynamic, Eigen::Dynamic>;

// Lift a real vector or matrix into hyper-dual space with zero derivative
// parts.
template <typename Derived>
inline Eigen::Matrix<HyperDual, Derived::RowsAtCompileTime,
                     Derived::ColsAtCompileTime>
lift(const Eigen::MatrixBase<Derived>& x) {
  Eigen::Matrix<HyperDual, Derived::RowsAtCompileTime,
                Derived::ColsAtCompileTime>
      out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i, j) = HyperDual(x(i, j));
  return out;
}

inline Vector value_of(const HdVector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = x[i].v;
  return out;
}

inline bool all_finite(const HdVector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!isfinite(x[i])) return false;
  return true;
}

}  // namespace safepdp

#endif  // SAFEPDP_HYPERDUAL_HPP
