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

#ifndef SMALLCOST_BLACKSCHOLES_HPP_
#define SMALLCOST_BLACKSCHOLES_HPP_

#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smallcost/market.hpp"

namespace smallcost {

/// Value and spot derivatives of the pricing field at one point.
struct Greeks {
  double value = 0.0;
  double delta = 0.0;     ///< dV/ds
  double gamma = 0.0;     ///< d2V/ds2
  double s2_gamma = 0.0;  ///< s^2 d2V/ds2, the weighted curvature
  /// Set when a kinked payoff is differentiated within 1e-4 years of
  /// expiry: the values are honest but blow up like (T-t)^{-1/2} at the
  /// strike, so treat them as diagnostics rather than inputs.
  bool singularity_warning = false;
};

/// Discounted risk-neutral expectation V(t,s) = E[e^{-r(T-t)} g(S_T) | S_t=s]
/// under the measure in which every asset drifts at r.
///
/// zero/forward/call/put/digital payoffs evaluate through normal-cdf closed
/// forms; power_call and custom payoffs through adaptive Gauss-Legendre
/// quadrature of the log-normal integral (relative tolerance 1e-10), with a
/// (t,s)-keyed cache because finite-difference sweeps revisit nodes.
///
/// Closed forms and quadrature are one-asset; construct with d > 1 only to
/// carry the parameters for path sampling (value() then throws).
class BSField {
 public:
  BSField(MarketParams market, PayoffSpec payoff);

  const MarketParams& market() const { return market_; }
  const PayoffSpec& payoff() const { return payoff_; }

  /// Price at time t and spot s. Errors: t > T, s <= 0, d > 1. Negative t is
  /// allowed (the field extends smoothly to longer horizons); t = T returns
  /// the payoff exactly.
  double value(double t, double s) const;

  /// Price plus first and second spot derivatives. Same domain as value().
  Greeks greeks(double t, double s) const;

 private:
  Greeks compute(double t, double s) const;
  Greeks closed_form(double tau, double s) const;
  Greeks quadrature(double tau, double s) const;

  MarketParams market_;
  PayoffSpec payoff_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<double, double>, Greeks> cache_;
};

/// Convenience wrapper returning the full Greeks bundle.
Greeks bs_price_and_greeks(const BSField& field, double t, double s);

/// Heat-operator defect -V_t - r s V_s - (1/2) sigma^2 s^2 V_ss + r V with
/// all derivatives by central finite differences, step max(1e-5, 1e-4 s) in
/// spot and 1e-5 in time (one-sided second-order in time within a step of
/// expiry). Zero up to FD truncation when the field is exact.
double bs_pde_residual(const BSField& field, double t, double s);

/// A bundle of exactly sampled risk-neutral paths on a fixed time grid.
struct QPathBatch {
  Eigen::VectorXd times;                ///< strictly increasing, ends at T
  std::vector<Eigen::MatrixXd> spots;   ///< per asset: n_paths x n_times
  std::uint64_t seed = 0;
  bool antithetic = false;

  int n_paths() const { return spots.empty() ? 0 : static_cast<int>(spots[0].rows()); }
  int n_times() const { return static_cast<int>(times.size()); }

  /// Writes `time,path_id,spot` rows (one spot column per asset for d > 1).
  void write_csv(std::ostream& out) const;
};

/// Samples n_paths exact log-normal paths under the pricing measure on the
/// given grid. Path p is a pure function of (seed, p, step index), so the
/// batch is bit-identical however the work is scheduled. With antithetic
/// set, odd paths mirror the Gaussian draws of their even partner.
QPathBatch sample_q_paths(const MarketParams& market, double t0,
                          const Eigen::VectorXd& s0, const Eigen::VectorXd& grid,
                          int n_paths, std::uint64_t seed, bool antithetic = false);

/// One-asset overload.
QPathBatch sample_q_paths(const MarketParams& market, double t0, double s0,
                          const Eigen::VectorXd& grid, int n_paths,
                          std::uint64_t seed, bool antithetic = false);

/// A Monte-Carlo estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Discounted-payoff Monte Carlo in any dimension (terminal spot drawn in a
/// single exact step, antithetic pairs). The estimator for d > 1 markets and
/// an independent cross-check of the closed forms for d = 1.
McEstimate mc_price(const MarketParams& market, const PayoffSpec& payoff,
                    double t0, const Eigen::VectorXd& s0, int n_paths,
                    std::uint64_t seed);

}  // namespace smallcost

#endif  // SMALLCOST_BLACKSCHOLES_HPP_
