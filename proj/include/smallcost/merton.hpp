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

#ifndef SMALLCOST_MERTON_HPP_
#define SMALLCOST_MERTON_HPP_

#include <Eigen/Dense>

#include "smallcost/blackscholes.hpp"
#include "smallcost/market.hpp"

namespace smallcost {

/// The two scalar time factors of the frictionless value function.
struct DiscountFactors {
  double v1 = 1.0;  ///< wealth-curvature factor, v1(T) = 1, v1 > 0
  double v2 = 0.0;  ///< consumption/excess-return drag, v2(T) = 0
};

/// Closed-form frictionless investment(-consumption) solution with
/// exponential utility in a constant-coefficient log-normal market:
///
///   v(t,s,z) = -exp(-gamma v1(t) (z - V(t,s)) + v2(t)),
///
/// where V is the claim's pricing field (BSField), z total wealth, and
/// v1, v2 depend only on time. Holding the claim shifts wealth by exactly
/// V(t,s): the certainty-equivalent price of the claim is V itself.
///
/// With consumption switched on (kappa = 1) the r = 0 case is rejected:
/// the v2 factor contains log r and the r -> 0 limit is out of scope.
class MertonSolution {
 public:
  MertonSolution(MarketParams market, Preferences prefs, PayoffSpec payoff);

  const MarketParams& market() const { return market_; }
  const Preferences& prefs() const { return prefs_; }
  const BSField& field() const { return bs_; }

  /// Time factors (v1, v2) at t in [0, T].
  DiscountFactors discount_factors(double t) const;

  struct Value {
    double v = 0.0;     ///< utility value
    double v_z = 0.0;   ///< wealth derivative, always positive
    double v_zz = 0.0;  ///< wealth curvature, always negative
  };
  /// Value function and its exact wealth derivatives.
  Value value(double t, double s, double z) const;

  struct Controls {
    Eigen::VectorXd y;                  ///< risky position, currency units
    double c = 0.0;                     ///< consumption rate, >= 0
    bool consumption_clamped = false;   ///< formula went negative, held at 0
  };
  /// Optimal position and consumption. The position combines the claim's
  /// weighted delta with the classical excess-return term
  /// (sigma sigma^T)^{-1} (mu - r 1) / (gamma v1).
  Controls optimal_controls(double t, double s, double z) const;

  /// Dynamic-programming defect of the closed form at one point, all
  /// derivatives by fourth-order central differences on value() itself.
  /// Zero up to FD truncation; the independent check that v1, v2, V and the
  /// controls are mutually consistent.
  double hjb_residual(double t, double s, double z) const;

  /// True iff kappa * v_z <= gamma, i.e. the consumption formula is
  /// nonnegative at this state.
  bool consumption_admissible(double t, double s, double z) const;

  /// exp(-kappa int_t^u v1): the consumption-clock discount between two
  /// times, in closed form.
  double consumption_discount(double t, double u) const;

  /// int_t^T consumption_discount(t, u) du in closed form: the running-cost
  /// time weight of the second-order expansion.
  double discount_time_integral(double t) const;

 private:
  double payoff_value(double t, double s) const;
  void check_time(double t) const;

  MarketParams market_;
  Preferences prefs_;
  BSField bs_;
  double q_ = 0.0;  // (mu - r 1)^T (sigma sigma^T)^{-1} (mu - r 1)
  Eigen::VectorXd excess_dir_;  // (sigma sigma^T)^{-1} (mu - r 1)
};

}  // namespace smallcost

#endif  // SMALLCOST_MERTON_HPP_
