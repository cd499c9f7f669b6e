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

#include <catch2/catch_amalgamated.hpp>

#include "safepdp/hyperdual.hpp"

using safepdp::HyperDual;

namespace {

// Seeded scalar: value v with d1 = d2 = 1 so d12 carries f''.
HyperDual seeded(double v) { return HyperDual(v, 1.0, 1.0, 0.0); }

}  // namespace

TEST_CASE("constant lift has zero derivative parts") {
  const HyperDual c(3.5);
  CHECK(c.v == 3.5);
  CHECK(c.d1 == 0.0);
  CHECK(c.d2 == 0.0);
  CHECK(c.d12 == 0.0);
}

TEST_CASE("product rule through the truncated algebra") {
  const HyperDual x = seeded(2.0);
  const HyperDual y = x * x * x;  // x^3: f' = 3x^2, f'' = 6x
  CHECK_THAT(y.v, Catch::Matchers::WithinRel(8.0, 1e-14));
  CHECK_THAT(y.d1, Catch::Matchers::WithinRel(12.0, 1e-14));
  CHECK_THAT(y.d2, Catch::Matchers::WithinRel(12.0, 1e-14));
  CHECK_THAT(y.d12, Catch::Matchers::WithinRel(12.0, 1e-14));
}

TEST_CASE("division matches the quotient rule") {
  const HyperDual x = seeded(1.7);
  const HyperDual y = HyperDual(1.0) / x;  // f' = -1/x^2, f'' = 2/x^3
  CHECK_THAT(y.d1, Catch::Matchers::WithinRel(-1.0 / (1.7 * 1.7), 1e-13));
  CHECK_THAT(y.d12, Catch::Matchers::WithinRel(2.0 / std::pow(1.7, 3), 1e-13));
}

TEST_CASE("elementary function derivatives", "[hyperdual]") {
  const double v = 0.8;
  struct Case {
    HyperDual out;
    double d1, d12;
  };
  const HyperDual x = seeded(v);
  const std::vector<Case> cases = {
      {exp(x), std::exp(v), std::exp(v)},
      {log(x), 1.0 / v, -1.0 / (v * v)},
      {sin(x), std::cos(v), -std::sin(v)},
      {cos(x), -std::sin(v), -std::cos(v)},
      {tanh(x), 1.0 - std::tanh(v) * std::tanh(v),
       -2.0 * std::tanh(v) * (1.0 - std::tanh(v) * std::tanh(v))},
      {sqrt(x), 0.5 / std::sqrt(v), -0.25 / (v * std::sqrt(v))},
      {pow(x, 2.5), 2.5 * std::pow(v, 1.5), 2.5 * 1.5 * std::pow(v, 0.5)},
  };
  for (const Case& c : cases) {
    CHECK_THAT(c.out.d1, Catch::Matchers::WithinRel(c.d1, 1e-12));
    CHECK_THAT(c.out.d2, Catch::Matchers::WithinRel(c.d1, 1e-12));
    CHECK_THAT(c.out.d12, Catch::Matchers::WithinRel(c.d12, 1e-12));
  }
}

TEST_CASE("composition is exact to second order") {
  // f(x) = sin(exp(x)) at x = 0.3.
  const double v = 0.3;
  const HyperDual y = sin(exp(seeded(v)));
  const double e = std::exp(v);
  CHECK_THAT(y.d1, Catch::Matchers::WithinRel(std::cos(e) * e, 1e-12));
  // f'' = cos(e^x) e^x - sin(e^x) e^{2x}
  CHECK_THAT(y.d12, Catch::Matchers::WithinRel(
                        std::cos(e) * e - std::sin(e) * e * e, 1e-12));
}

TEST_CASE("independent seed channels give mixed partials") {
  // f(x, y) = x^2 * y at (2, 3): d2f/dxdy = 2x = 4.
  const HyperDual x(2.0, 1.0, 0.0, 0.0);
  const HyperDual y(3.0, 0.0, 1.0, 0.0);
  const HyperDual f = x * x * y;
  CHECK_THAT(f.d1, Catch::Matchers::WithinRel(12.0, 1e-14));  // df/dx = 2xy
  CHECK_THAT(f.d2, Catch::Matchers::WithinRel(4.0, 1e-14));   // df/dy = x^2
  CHECK_THAT(f.d12, Catch::Matchers::WithinRel(4.0, 1e-14));
}

TEST_CASE("eigen vector operations over hyper-duals") {
  safepdp::HdVector v(2);
  v[0] = HyperDual(1.0, 1.0, 0.0, 0.0);
  v[1] = HyperDual(2.0);
  const HyperDual dot = v.dot(v);
  CHECK(dot.v == 5.0);
  CHECK(dot.d1 == 2.0);  // d(x^2+4)/dx at x=1
}

TEST_CASE("non-finite detection") {
  const HyperDual bad = log(HyperDual(-1.0, 1.0, 0.0, 0.0));
  CHECK_FALSE(safepdp::isfinite(bad));
}
