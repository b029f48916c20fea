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

#include "smallcost/frictions.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"

using namespace smallcost;

namespace {
CostStructure sym_costs(double lam, double eps) {
  return CostStructure::one_asset(lam, lam, eps);
}
}  // namespace

TEST_CASE("single-asset liquidation uses the closed form") {
  auto costs = sym_costs(1.0, 0.1);  // e3 = 1e-3
  Portfolio p(10.0, 5.0);
  auto res = liquidation_value(p, costs);
  CHECK(res.method == LiquidationMethod::kClosedForm);
  CHECK(res.value == doctest::Approx(10.0 + 5.0 / 1.001).epsilon(1e-15));

  Portfolio q(10.0, -5.0);
  auto res2 = liquidation_value(q, costs);
  CHECK(res2.value == doctest::Approx(10.0 - 5.0 * 1.001).epsilon(1e-15));
}

TEST_CASE("zero cost scale collapses liquidation to gross wealth") {
  auto costs = sym_costs(1.0, 0.0);
  for (double y : {-3.0, 0.0, 4.5}) {
    Portfolio p(2.0, y);
    CHECK(liquidation_value(p, costs).value == doctest::Approx(2.0 + y));
  }
}

TEST_CASE("liquidation never exceeds gross wealth") {
  auto costs = CostStructure::one_asset(0.7, 1.3, 0.2);
  for (double x : {-5.0, 0.0, 8.0}) {
    for (double y : {-10.0, -0.1, 0.0, 0.1, 10.0}) {
      Portfolio p(x, y);
      CHECK(liquidation_value(p, costs).value <= p.gross_wealth() + 1e-14);
    }
  }
}

TEST_CASE("liquidation limit matches the small-cost gap") {
  // l(x, y) = x + y - eps^3 * limit + O(eps^6): the limit is the leading
  // wealth lost to costs per unit eps^3.
  auto base = CostStructure::one_asset(1.0, 0.5, 1.0);
  Portfolio long_pos(0.0, 1.0);
  CHECK(liquidation_limit(long_pos, base) == doctest::Approx(1.0));
  Portfolio short_pos(0.0, -2.0);
  CHECK(liquidation_limit(short_pos, base) == doctest::Approx(1.0));

  const double lam_bar = 1.0;  // max lambda entry
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    auto costs = base.with_epsilon(eps);
    for (double y : {3.0, -3.0}) {
      Portfolio p(1.0, y);
      const double e3 = eps * eps * eps;
      CHECK(std::abs(liquidation_gap(p, costs) - liquidation_limit(p, base)) <=
            std::abs(y) * lam_bar * lam_bar * e3 + 1e-12);
    }
  }
}

TEST_CASE("liquidation is monotone and concave in the position") {
  auto costs = sym_costs(2.0, 0.3);
  auto lv = [&](double x, double y) { return liquidation_value(Portfolio(x, y), costs).value; };
  // Monotone in each argument.
  CHECK(lv(1.0, 2.0) < lv(1.5, 2.0));
  CHECK(lv(1.0, 2.0) < lv(1.0, 2.5));
  CHECK(lv(1.0, -2.0) < lv(1.0, -1.5));
  // Concave along a segment crossing y = 0.
  const double mid = lv(0.0, 0.0);
  CHECK(mid >= 0.5 * (lv(0.0, -1.0) + lv(0.0, 1.0)) - 1e-14);
}

TEST_CASE("the linear program reproduces the separable closed form") {
  // A finite but useless inter-asset route forces the LP path; its optimum
  // must coincide with the per-asset box formula.
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lam(3, 3);
  lam << 0.0, 0.9, 1.1,
         0.7, 0.0, 500.0,
         1.3, 500.0, 0.0;
  auto costs = CostStructure::from_matrix(lam, 0.4);
  const double e3 = 0.4 * 0.4 * 0.4;
  (void)inf;

  for (double y0 : {-7.0, -0.5, 0.0, 0.5, 7.0}) {
    for (double y1 : {-2.0, 0.0, 3.0}) {
      Eigen::VectorXd y(2);
      y << y0, y1;
      Portfolio p(3.0, y);
      auto res = liquidation_value(p, costs);
      REQUIRE(res.method == LiquidationMethod::kLinearProgram);
      auto leg = [&](double yi, double lam_sell, double lam_buy) {
        return yi >= 0.0 ? yi / (1.0 + e3 * lam_sell) : yi * (1.0 + e3 * lam_buy);
      };
      const double expected = 3.0 + leg(y0, lam(1, 0), lam(0, 1)) + leg(y1, lam(2, 0), lam(0, 2));
      CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("independent assets liquidate separably") {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lam(3, 3);
  lam << 0.0, 0.5, 0.25,
         1.0, 0.0, inf,
         2.0, inf, 0.0;
  auto costs = CostStructure::from_matrix(lam, 0.5);
  const double e3 = 0.125;

  Eigen::VectorXd y(2);
  y << 4.0, -6.0;
  Portfolio p(1.0, y);
  auto res = liquidation_value(p, costs);
  CHECK(res.method == LiquidationMethod::kClosedForm);
  const double expected = 1.0 + 4.0 / (1.0 + e3 * 1.0) - 6.0 * (1.0 + e3 * 0.25);
  CHECK(res.value == doctest::Approx(expected).epsilon(1e-14));

  // Vertex enumeration agrees: min over box vertices of (x, y) . r.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : dual_cone_box_vertices(costs)) {
    REQUIRE(r.size() == 3);
    REQUIRE(r[0] == 1.0);
    best = std::min(best, 1.0 * r[0] + y.dot(r.tail(2)));
  }
  CHECK(best == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("a cheap cross-asset route beats leg-by-leg cash conversion") {
  // Selling asset 1 straight to cash is punitive; rerouting through asset 2
  // is nearly free, so the optimizer should take the detour.
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lam(3, 3);
  lam << 0.0, 0.5, 0.5,
         500.0, 0.0, 0.001,
         0.001, inf, 0.0;
  auto costs = CostStructure::from_matrix(lam, 1.0);

  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  Portfolio p(0.0, y);
  auto res = liquidation_value(p, costs);
  CHECK(res.method == LiquidationMethod::kLinearProgram);
  const double direct = 1.0 / 501.0;
  const double detour = 1.0 / (1.001 * 1.001);
  CHECK(res.value > direct);
  CHECK(res.value == doctest::Approx(detour).epsilon(1e-9));
}

TEST_CASE("solvency holds exactly down to the liquidation boundary") {
  auto costs = sym_costs(1.0, 0.1);
  Portfolio p(-5.0 / 1.001 + 1e-9, 5.0);
  CHECK(solvency_check(p, costs));
  Portfolio q(-5.0 / 1.001 - 1e-9, 5.0);
  CHECK_FALSE(solvency_check(q, costs));
}

TEST_CASE("transfers move wealth net of costs") {
  auto costs = sym_costs(1.0, 0.1);  // e3 lambda = 1e-3 both ways
  Portfolio p(10.0, 2.0);

  // Buy one unit of the asset with cash.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(2, 2);
  l(0, 1) = 1.0;
  auto bought = apply_transfer(p, l, costs);
  CHECK(bought.y[0] == doctest::Approx(3.0));
  CHECK(bought.x == doctest::Approx(10.0 - 1.001));

  // A round trip strictly destroys wealth. Transfers are measured at the
  // destination: sending 1.0 back to cash debits the asset 1.001.
  Eigen::MatrixXd back = Eigen::MatrixXd::Zero(2, 2);
  back(1, 0) = 1.0;
  auto returned = apply_transfer(bought, back, costs);
  CHECK(returned.y[0] == doctest::Approx(3.0 - 1.001));
  CHECK(returned.x == doctest::Approx(10.0 - 1.001 + 1.0));
  CHECK(p.gross_wealth() - returned.gross_wealth() == doctest::Approx(2e-3).epsilon(1e-9));

  Eigen::MatrixXd neg = Eigen::MatrixXd::Zero(2, 2);
  neg(0, 1) = -1.0;
  CHECK_THROWS_AS(apply_transfer(p, neg, costs), std::invalid_argument);
}

TEST_CASE("forbidden transfers are rejected") {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd lam(3, 3);
  lam << 0.0, 0.5, 0.5,
         1.0, 0.0, inf,
         1.0, 2.0, 0.0;
  auto costs = CostStructure::from_matrix(lam, 0.1);
  Eigen::VectorXd y(2);
  y << 1.0, 1.0;
  Portfolio p(10.0, y);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 3);
  l(1, 2) = 0.5;  // asset 1 -> asset 2 is the forbidden leg here
  CHECK_THROWS_AS(apply_transfer(p, l, costs), std::invalid_argument);
  l(1, 2) = 0.0;
  l(2, 1) = 0.5;  // the reverse leg is allowed
  CHECK_NOTHROW(apply_transfer(p, l, costs));
}

TEST_CASE("dual cone box vertices enumerate sign patterns") {
  auto verts = dual_cone_box_vertices(CostStructure::one_asset(1.0, 0.5, 1.0));
  REQUIRE(verts.size() == 2);
  // One-asset box [1/(1+lambda_sell), 1+lambda_buy], cash coordinate pinned
  // to one.
  const double lo = 1.0 / (1.0 + 1.0);
  const double hi = 1.0 + 0.5;
  CHECK(verts[0][0] == 1.0);
  CHECK(verts[1][0] == 1.0);
  const double a = verts[0][1], b = verts[1][1];
  CHECK(std::min(a, b) == doctest::Approx(lo));
  CHECK(std::max(a, b) == doctest::Approx(hi));
}
