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

#ifndef SAFEPDP_DERIV_HPP
#define SAFEPDP_DERIV_HPP

#include <functional>
#include <string>

#include "safepdp/common.hpp"
#include "safepdp/hyperdual.hpp"

namespace safepdp {

// Evaluation point (x, u, theta) of a stage function.
struct Point {
  Vector x;
  Vector u;
  Vector theta;
};

enum class Wrt { kX, kU, kTheta };

using VecFn =
    std::function<HdVector(const HdVector&, const HdVector&, const HdVector&)>;
using ScalarFn =
    std::function<HyperDual(const HdVector&, const HdVector&, const HdVector&)>;

namespace detail {

inline HdVector* select(HdVector& x, HdVector& u, HdVector& th, Wrt block) {
  switch (block) {
    case Wrt::kX:
      return &x;
    case Wrt::kU:
      return &u;
    default:
      return &th;
  }
}

inline void check_finite(const HdVector& y, const std::string& where) {
  if (!all_finite(y))
    throw NonFiniteError("non-finite value while differentiating " + where);
}

}  // namespace detail

// Exact Jacobian of fn with respect to the selected block, one forward pass
// per input direction. Rows are fn outputs, columns the block components.
inline Matrix jacobian(const VecFn& fn, const Point& at, Wrt block,
                       const std::string& where = "function") {
  HdVector x = lift(at.x), u = lift(at.u), th = lift(at.theta);
  HdVector* seed = detail::select(x, u, th, block);
  const Eigen::Index cols = seed->size();

  Matrix out;
  for (Eigen::Index j = 0; j < cols; ++j) {
    (*seed)[j].d1 = 1.0;
    HdVector y = fn(x, u, th);
    detail::check_finite(y, where);
    if (j == 0) out.resize(y.size(), cols);
    for (Eigen::Index i = 0; i < y.size(); ++i) out(i, j) = y[i].d1;
    (*seed)[j].d1 = 0.0;
  }
  if (cols == 0) {
    HdVector y = fn(x, u, th);
    detail::check_finite(y, where);
    out.resize(y.size(), 0);
  }
  return out;
}

inline Vector gradient(const ScalarFn& fn, const Point& at, Wrt block,
                       const std::string& where = "function") {
  HdVector x = lift(at.x), u = lift(at.u), th = lift(at.theta);
  HdVector* seed = detail::select(x, u, th, block);
  Vector out(seed->size());
  for (Eigen::Index j = 0; j < seed->size(); ++j) {
    (*seed)[j].d1 = 1.0;
    HyperDual y = fn(x, u, th);
    if (!isfinite(y))
      throw NonFiniteError("non-finite value while differentiating " + where);
    out[j] = y.d1;
    (*seed)[j].d1 = 0.0;
  }
  return out;
}

// Mixed second derivative d^2 fn / (d block_a d block_b); exact through the
// eps1*eps2 channel, one pass per direction pair. Equal blocks use the
// symmetric half and mirror, so the result is symmetric by construction.
inline Matrix hessian_block(const ScalarFn& fn, const Point& at, Wrt block_a,
                            Wrt block_b, const std::string& where = "function") {
  HdVector x = lift(at.x), u = lift(at.u), th = lift(at.theta);
  HdVector* sa = detail::select(x, u, th, block_a);
  HdVector* sb = detail::select(x, u, th, block_b);
  const Eigen::Index ra = sa->size(), cb = sb->size();
  Matrix out(ra, cb);

  auto probe = [&](Eigen::Index i, Eigen::Index j) {
    (*sa)[i].d1 = 1.0;
    (*sb)[j].d2 = 1.0;
    HyperDual y = fn(x, u, th);
    (*sa)[i].d1 = 0.0;
    (*sb)[j].d2 = 0.0;
    if (!isfinite(y))
      throw NonFiniteError("non-finite value while differentiating " + where);
    return y.d12;
  };

  if (block_a == block_b) {
    for (Eigen::Index i = 0; i < ra; ++i)
      for (Eigen::Index j = i; j < cb; ++j) {
        const double v = probe(i, j);
        out(i, j) = v;
        out(j, i) = v;
      }
  } else {
    for (Eigen::Index i = 0; i < ra; ++i)
      for (Eigen::Index j = 0; j < cb; ++j) out(i, j) = probe(i, j);
  }
  return out;
}

// Plain (derivative-free) evaluation helpers.
inline Vector eval(const VecFn& fn, const Point& at,
                   const std::string& where = "function") {
  HdVector y = fn(lift(at.x), lift(at.u), lift(at.theta));
  if (!all_finite(y)) throw NonFiniteError("non-finite value in " + where);
  return value_of(y);
}

inline double eval(const ScalarFn& fn, const Point& at,
                   const std::string& where = "function") {
  HyperDual y = fn(lift(at.x), lift(at.u), lift(at.theta));
  if (!isfinite(y)) throw NonFiniteError("non-finite value in " + where);
  return y.v;
}

}  // namespace safepdp

#endif  // SAFEPDP_DERIV_HPP
