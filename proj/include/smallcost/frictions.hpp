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
//
// Solvency cone, dual cone, liquidation value, and transfer accounting for a
// market with proportional transaction costs.

#ifndef SMALLCOST_FRICTIONS_HPP_
#define SMALLCOST_FRICTIONS_HPP_

#include <Eigen/Dense>
#include <vector>

#include "smallcost/market.hpp"

namespace smallcost {

/// Static snapshot of a position: cash x plus the dollar value held in each
/// risky asset. Solvency is a predicate on portfolios, not a constructor
/// constraint.
struct Portfolio {
  double x = 0.0;
  Eigen::VectorXd y;

  Portfolio() = default;
  Portfolio(double x_in, Eigen::VectorXd y_in) : x(x_in), y(std::move(y_in)) {}
  /// One-asset convenience.
  Portfolio(double x_in, double y_in)
      : x(x_in), y(Eigen::VectorXd::Constant(1, y_in)) {}

  double gross_wealth() const { return x + y.sum(); }
};

/// How a liquidation value was obtained. The closed-form path is
/// bit-reproducible; the linear-program path is exact up to simplex pivots.
enum class LiquidationMethod { kClosedForm, kLinearProgram };

struct LiquidationResult {
  double value = 0.0;
  LiquidationMethod method = LiquidationMethod::kClosedForm;
};

/// Maximum cash obtainable by unwinding every risky leg net of costs: the
/// support-function infimum of (x, y) over the dual of the solvency cone.
///
/// When every inter-asset transfer is forbidden (including all one-asset
/// markets) the dual cone is a box and the infimum separates per asset:
///   long legs collect  y_i / (1 + eps^3 lambda(i,0)),
///   short legs cost    y_i * (1 + eps^3 lambda(0,i)).
/// With finite inter-asset costs the infimum is found by a small dense
/// simplex over the dual constraints.
LiquidationResult liquidation_value(const Portfolio& p, const CostStructure& costs);

/// The eps -> 0 limit of (x + sum(y) - liquidation_value) / eps^3:
/// sum_i [ y_i^+ lambda(i,0) + y_i^- lambda(0,i) ].
double liquidation_limit(const Portfolio& p, const CostStructure& costs);

/// (x + sum(y) - liquidation_value) / eps^3 at the structure's own eps.
/// Evaluated in closed form when costs are separable, so the result stays
/// accurate even when eps^3 is far below the subtraction noise floor of
/// gross wealth; converges to liquidation_limit as eps -> 0.
double liquidation_gap(const Portfolio& p, const CostStructure& costs);

/// True iff the position can be transferred into the nonnegative orthant,
/// i.e. its liquidation value is nonnegative.
bool solvency_check(const Portfolio& p, const CostStructure& costs);

/// Applies a nonnegative transfer matrix l (amount l(i,j) moved from account
/// i to account j, measured at the destination) and returns the new
/// portfolio: account i changes by
///   sum_j [ l(j,i) - (1 + eps^3 lambda(i,j)) l(i,j) ].
/// Throws on a negative entry or a nonzero transfer over a forbidden pair.
Portfolio apply_transfer(const Portfolio& p, const Eigen::MatrixXd& transfers,
                         const CostStructure& costs);

/// Vertices of the box relaxation of the dual cone, with the cash coordinate
/// normalized to 1: every combination of per-asset lower bounds
/// 1/(1 + eps^3 lambda(i,0)) and upper bounds 1 + eps^3 lambda(0,i).
/// Intended for small d (2^d vertices).
std::vector<Eigen::VectorXd> dual_cone_box_vertices(const CostStructure& costs);

namespace detail {

/// Minimizes c.z subject to A z <= b, z >= 0 by a dense two-phase simplex
/// with Bland's rule. Returns false when infeasible (unboundedness cannot
/// occur for the compact dual-cone sections this is used on, but is also
/// reported as false). Exposed for tests.
bool simplex_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& c, Eigen::VectorXd* z_out,
                   double* objective_out);

}  // namespace detail

}  // namespace smallcost

#endif  // SMALLCOST_FRICTIONS_HPP_
