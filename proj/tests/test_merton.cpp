// Copyright 2026 The smallcost Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "smallcost/merton.hpp"

#include <cmath>
#include <stdexcept>

#include "smallcost/numerics.hpp"
#include "doctest.h"

using namespace smallcost;

namespace {
MertonSolution make(int kappa, PayoffSpec payoff = PayoffSpec::zero(),
                    double r = 0.02) {
  return MertonSolution(MarketParams(0.1, 0.2, r, 1.0), Preferences{1.0, kappa},
                        std::move(payoff));
}
}  // namespace

TEST_CASE("time factors hit their terminal anchors") {
  for (int kappa : {0, 1}) {
    auto sol = make(kappa);
    auto df = sol.discount_factors(1.0);
    CHECK(df.v1 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(df.v2 == doctest::Approx(0.0).epsilon(1e-14));
  }
  auto grow = make(0, PayoffSpec::zero(), 0.05);
  CHECK(grow.discount_factors(0.0).v1 ==
        doctest::Approx(1.0512710963760241).epsilon(1e-14));
}

TEST_CASE("consumption with zero rate is rejected") {
  CHECK_THROWS_AS(MertonSolution(MarketParams(0.1, 0.2, 0.0, 1.0),
                                 Preferences{1.0, 1}, PayoffSpec::zero()),
                  std::invalid_argument);
}

TEST_CASE("v1 satisfies its Riccati reduction") {
  // v1' = v1 (kappa v1 - r), v1(T) = 1 — checked by central differences on
  // the closed form.
  for (int kappa : {0, 1}) {
    auto sol = make(kappa, PayoffSpec::zero(), 0.07);
    const double h = 1e-6;
    for (double t : {0.0, 0.3, 0.6, 0.9}) {
      const double up = sol.discount_factors(t + h).v1;
      const double dn = sol.discount_factors(t - h).v1;
      const double v1 = sol.discount_factors(t).v1;
      const double lhs = (up - dn) / (2 * h);
      const double rhs = v1 * (kappa * v1 - 0.07);
      CHECK(std::abs(lhs - rhs) < 1e-8);
    }
  }
}

TEST_CASE("terminal utility and wealth derivatives") {
  auto sol = make(0, PayoffSpec::call(100.0));
  for (double s : {80.0, 120.0}) {
    for (double z : {-1.0, 0.0, 2.0}) {
      const double g = std::max(s - 100.0, 0.0);
      auto val = sol.value(1.0, s, z);
      CHECK(val.v == doctest::Approx(-std::exp(-(z - g))).epsilon(1e-13));
      CHECK(val.v_z > 0.0);
      CHECK(val.v_zz < 0.0);
      // Wealth derivatives against finite differences of v itself.
      const double h = 1e-6;
      const double num_z =
          (sol.value(0.5, s, z + h).v - sol.value(0.5, s, z - h).v) / (2 * h);
      CHECK(sol.value(0.5, s, z).v_z == doctest::Approx(num_z).epsilon(1e-8));
    }
  }
}

TEST_CASE("holding the claim shifts wealth by exactly its price") {
  auto with_claim = make(1, PayoffSpec::call(100.0), 0.05);
  auto without = make(1, PayoffSpec::zero(), 0.05);
  for (double t : {0.0, 0.5}) {
    for (double s : {85.0, 105.0}) {
      const double V = with_claim.field().value(t, s);
      for (double z : {-0.5, 1.0, 3.0}) {
        CHECK(with_claim.value(t, s, z + V).v ==
              doctest::Approx(without.value(t, s, z).v).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("optimal position formulas for flat and linear claims") {
  auto flat = make(0);
  const double v1 = flat.discount_factors(0.3).v1;
  auto ctrl = flat.optimal_controls(0.3, 77.0, 5.0);
  CHECK(ctrl.y[0] == doctest::Approx((0.1 - 0.02) / (0.04 * v1)).epsilon(1e-13));
  CHECK(ctrl.c == 0.0);
  CHECK_FALSE(ctrl.consumption_clamped);
  // Independent of state.
  CHECK(flat.optimal_controls(0.3, 150.0, -2.0).y[0] == doctest::Approx(ctrl.y[0]));

  auto fwd = make(0, PayoffSpec::forward());
  auto cf = fwd.optimal_controls(0.3, 77.0, 5.0);
  CHECK(cf.y[0] == doctest::Approx(77.0 + (0.1 - 0.02) / (0.04 * v1)).epsilon(1e-12));
}

TEST_CASE("the analytic position maximizes the trading Hamiltonian") {
  auto sol = make(0, PayoffSpec::call(100.0));
  const double t = 0.4, s = 95.0, z = 1.5;
  const double sig = 0.2, mu = 0.1, r = 0.02;
  auto val = sol.value(t, s, z);
  // v_sz from the closed form: d/ds of v_z = gamma v1 (-v).
  const double h = 1e-4 * s;
  const double v_sz =
      (sol.value(t, s + h, z).v_z - sol.value(t, s - h, z).v_z) / (2 * h);
  const auto ham = [&](double y) {
    return y * ((mu - r) * val.v_z + sig * sig * s * v_sz) +
           0.5 * sig * sig * y * y * val.v_zz;
  };
  const double ystar = sol.optimal_controls(t, s, z).y[0];
  const double at = ham(ystar);
  for (double d : {-0.5, -0.01, 0.01, 0.5}) {
    CHECK(ham(ystar + d) < at + 1e-12);
  }
}

TEST_CASE("dynamic-programming residual vanishes on the closed form") {
  SUBCASE("flat claim, no consumption") {
    auto sol = make(0);
    for (double t : {0.0, 0.45, 0.9}) {
      for (double z : {-4.0, 0.0, 4.0}) {
        auto val = sol.value(t, 100.0, z);
        CHECK(std::abs(sol.hjb_residual(t, 100.0, z)) < 1e-8 * std::abs(val.v));
      }
    }
  }
  SUBCASE("call claim, no consumption") {
    auto sol = make(0, PayoffSpec::call(100.0));
    for (double t : {0.0, 0.5, 0.95}) {
      for (double s : {60.0, 100.0, 140.0}) {
        const double V = sol.field().value(t, s);
        for (double z : {V - 2.0, V + 1.0}) {
          auto val = sol.value(t, s, z);
          CHECK(std::abs(sol.hjb_residual(t, s, z)) < 1e-6 * std::abs(val.v));
        }
      }
    }
  }
  SUBCASE("call claim with consumption, unclamped region") {
    auto sol = make(1, PayoffSpec::call(100.0), 0.05);
    for (double t : {0.0, 0.5, 0.95}) {
      for (double s : {70.0, 100.0, 130.0}) {
        const double V = sol.field().value(t, s);
        for (double z : {V + 0.2, V + 2.0}) {
          REQUIRE(sol.consumption_admissible(t, s, z));
          REQUIRE_FALSE(sol.optimal_controls(t, s, z).consumption_clamped);
          auto val = sol.value(t, s, z);
          CHECK(std::abs(sol.hjb_residual(t, s, z)) < 1e-6 * std::abs(val.v));
        }
      }
    }
  }
}

TEST_CASE("admissibility threshold matches the closed-form root") {
  auto sol = make(1, PayoffSpec::zero(), 0.05);
  const double t = 0.2, s = 100.0;
  auto df = sol.discount_factors(t);
  // kappa v_z = gamma exactly at z* = V + (log v1 + v2)/(gamma v1).
  const double zstar = (std::log(df.v1) + df.v2) / df.v1;
  CHECK(sol.consumption_admissible(t, s, zstar + 1e-6));
  CHECK_FALSE(sol.consumption_admissible(t, s, zstar - 1e-6));
  CHECK(sol.consumption_admissible(t, s, 1e9));
  CHECK_FALSE(sol.consumption_admissible(t, s, -1e9));
  // kappa=0 never restricts.
  CHECK(make(0).consumption_admissible(t, s, -1e9));

  // Deep in the inadmissible region the control clamps.
  auto ctrl = sol.optimal_controls(t, s, -50.0);
  CHECK(ctrl.consumption_clamped);
  CHECK(ctrl.c == 0.0);
}

TEST_CASE("consumption clock discounts match quadrature") {
  auto sol = make(1, PayoffSpec::zero(), 0.07);
  const auto v1_at = [&](double u) { return sol.discount_factors(u).v1; };
  for (double t : {0.0, 0.4}) {
    for (double u : {0.5, 0.8, 1.0}) {
      if (u < t) continue;
      const double integral = gauss_integrate(v1_at, t, u, 64);
      CHECK(sol.consumption_discount(t, u) ==
            doctest::Approx(std::exp(-integral)).epsilon(1e-12));
    }
    const auto disc = [&](double u) { return sol.consumption_discount(t, u); };
    CHECK(sol.discount_time_integral(t) ==
          doctest::Approx(gauss_integrate(disc, t, 1.0, 64)).epsilon(1e-12));
  }
  // Without consumption the clock is flat and the integral is the horizon.
  auto flat = make(0);
  CHECK(flat.consumption_discount(0.2, 0.9) == 1.0);
  CHECK(flat.discount_time_integral(0.25) == doctest::Approx(0.75));
}
