// Copyright 2026 The smallcost Authors
//
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

/// \file
/// One-dimensional corrector layer of the small-cost expansion: the scale
/// factors (eta, alpha, alpha_bar) of the deviation process, the no-trade
/// half-width xi0, the explicit piecewise corrector w (quartic inside the
/// band, affine outside), the ergodic constant a_bar, a complementarity
/// residual check of the corrector equation, an independent policy-iteration
/// solver for the normalized cell problem, and regularity audits of the
/// claim's hedge derivatives near expiry.

#ifndef SMALLCOST_CORRECTOR_HPP_
#define SMALLCOST_CORRECTOR_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smallcost/market.hpp"
#include "smallcost/merton.hpp"

namespace smallcost {

/// Scale factors of the corrector problem at a point (t, s).
struct Normalizers {
  double eta = 0.0;        ///< wealth normalizer 1 / (gamma v1(t)), > 0
  double alpha = 0.0;      ///< diffusion coefficient of the deviation process
  double alpha_bar = 0.0;  ///< normalized diffusion, alpha / eta
};

/// Branch of the piecewise corrector at a query deviation.
enum class WBranch {
  kInterior,  ///< |xi| <= xi0: quartic branch
  kSellSide,  ///< xi > xi0: affine branch with slope lambda(1,0) v_z
  kBuySide,   ///< xi < -xi0: affine branch with slope -lambda(0,1) v_z
};

/// Corrector value and first derivative at a deviation xi.
struct WValue {
  double value = 0.0;
  double dw = 0.0;  ///< partial derivative in xi
  WBranch branch = WBranch::kInterior;
};

/// Complementarity residual of the first corrector equation. Up to
/// tolerance, all three entries are <= 0 everywhere and at least one
/// vanishes: pde_part inside the band, slack_sell at and above the upper
/// edge, slack_buy at and below the lower edge.
struct CorrectorResidual {
  double pde_part = 0.0;    ///< sigma^2 xi^2 v_zz / 2 - alpha^2 w_xixi / 2 + a
  double slack_sell = 0.0;  ///< w_xi - lambda(1,0) v_z, zero for xi >= xi0
  double slack_buy = 0.0;   ///< -w_xi - lambda(0,1) v_z, zero for xi <= -xi0
};

/// Result of the policy-iteration solve of the normalized cell problem.
struct CellSolution {
  double a_bar = 0.0;   ///< ergodic constant
  double rho_hi = 0.0;  ///< detected upper band edge
  double rho_lo = 0.0;  ///< detected lower band edge (negative)
  Eigen::VectorXd rho;  ///< uniform grid on [-R, R]
  Eigen::VectorXd w;    ///< normalized corrector on the grid, w(middle) = 0
  int iterations = 0;   ///< policy-iteration sweeps used
};

/// Sign change of the audit drift (mu - r)/(gamma sigma^2 v1) - s^2 V_ss
/// along a spot sweep at fixed time-to-expiry tau.
struct ZeroCrossing {
  double tau = 0.0;
  double spot = 0.0;
};

/// Regularity audit: non-degeneracy constant, fitted singularity exponents
/// of the hedge derivatives as (T - t) -> 0, and window verdicts for the
/// validity of the small-cost expansion.
struct AuditReport {
  double c0 = 0.0;  ///< min over the grid of |audit drift|
  bool has_zero_crossing = false;
  std::vector<ZeroCrossing> zero_crossings;
  double gamma_exponent = 0.0;   ///< max_s |V_ss| ~ tau^(-gamma_exponent)
  double delta_exponent = 0.0;   ///< max_s |V_s| ~ tau^(-delta_exponent)
  double third_exponent = 0.0;   ///< max_s |V_sss| ~ tau^(-third_exponent)
  double source_exponent = 0.0;  ///< 4/3 gamma_exponent: growth of the source
  bool gamma_window_ok = false;  ///< gamma_exponent <= 1 (fit slack 0.05)
  bool delta_window_ok = false;  ///< delta_exponent < 1/2 (fit slack 0.05)
  bool source_integrable = false;  ///< source_exponent < 3/4
  bool expansion_valid = false;    ///< all three windows pass
  std::string w_form;       ///< normalization of w selected by the cell solver
  std::string a_bar_form;   ///< form of a_bar selected by the cell solver
};

/// Spot/time grid over which audit_assumptions sweeps.
struct AuditGrid {
  double spot_center = 100.0;
  double log_half_width = 0.5;  ///< spot sweep is spot_center * e^[-w, w]
  int n_spot = 2001;
  double tau_min = 1e-3;  ///< smallest time-to-expiry in the fit window
  double tau_max = 1e-1;  ///< largest time-to-expiry in the fit window
  int n_tau = 15;         ///< log-spaced fit points
};

/// Closed-form corrector solution for a one-asset market.
///
/// Bundles a Merton solution with the proportional cost structure and
/// evaluates every corrector-layer object: scale factors, band half-width,
/// the explicit piecewise corrector, and the ergodic constant. All methods
/// are const and thread-safe.
class CorrectorSolution {
 public:
  /// Builds the frictionless solution internally. Throws
  /// std::invalid_argument unless both the market and the cost structure
  /// have exactly one asset.
  CorrectorSolution(const MarketParams& market, const Preferences& prefs,
                    const PayoffSpec& payoff, const CostStructure& costs);

  const MertonSolution& merton() const { return merton_; }
  const CostStructure& costs() const { return costs_; }
  /// Proportional cost of the asset -> cash leg, lambda(1, 0).
  double lambda_sell() const { return lambda_sell_; }
  /// Proportional cost of the cash -> asset leg, lambda(0, 1).
  double lambda_buy() const { return lambda_buy_; }

  /// Wealth normalizer 1 / (gamma v1(t)).
  double eta(double t) const;

  /// Scale factors at (t, s):
  ///   alpha     = sigma ((mu - r)/(gamma sigma^2 v1) - s^2 V_ss),
  ///   alpha_bar = alpha / eta.
  Normalizers normalizers(double t, double s) const;

  /// Normalized band half-width
  ///   rho0 = ((3/4) (lambda(1,0) + lambda(0,1)) alpha_bar^2 / sigma^2)^(1/3).
  double rho0(double t, double s) const;

  /// Half-width of the no-trade band in deviation units, xi0 = eta rho0.
  /// Zero when costs vanish or the deviation diffusion degenerates.
  double xi0(double t, double s) const;

  /// Ergodic constant a_bar = sigma^2 rho0^2 / 2, the form selected by the
  /// policy-iteration cell solver.
  double a_bar(double t, double s) const;

  /// Diagnostic alternate carrying a gamma^2 v1(t)^2 prefactor. Rejected by
  /// the cell solver; reported for comparison only, never used in prices.
  double a_bar_alternate(double t, double s) const;

  /// Unnormalized ergodic term a = -v a_bar (positive, v < 0).
  double a(double t, double s, double z) const;

  /// Explicit corrector w(t,s,z,xi) = eta v_z wbar(xi / eta) with its
  /// derivative in xi and the branch tag. wbar is the quartic
  /// A4 rho^4 + B2 rho^2 + C1 rho inside [-rho0, rho0] and affine with
  /// slopes lambda(1,0) / -lambda(0,1) outside, pasted C^1.
  WValue w_explicit(double t, double s, double z, double xi) const;

  /// Complementarity residual of the first corrector equation at a point.
  /// w_xixi is a five-node finite difference with step xi0 / 200; the node
  /// window is kept on the branch of xi so the formula stays fourth-order
  /// up to the pasting points instead of degrading to O(step) across them.
  CorrectorResidual corrector_residual(double t, double s, double z,
                                       double xi) const;

  /// Support function of the trading cone:
  ///   lambda(1,0) xi^+ + lambda(0,1) xi^-.
  /// w(xi) approaches v_z times this as |xi| grows.
  double cone_support(double xi) const;

 private:
  MertonSolution merton_;
  CostStructure costs_;
  double lambda_sell_ = 0.0;
  double lambda_buy_ = 0.0;
  double lambda_sum_ = 0.0;
  double sigma_ = 0.0;
  double excess_over_var_ = 0.0;  // (mu - r) / sigma^2
};

/// Independent numerical solve of the normalized cell problem
///
///   max( -sigma^2 rho^2 / 2 - alpha_bar^2 wbar'' / 2 + a_bar,
///        wbar' - lambda_sell,  -wbar' - lambda_buy ) = 0,
///
/// for (wbar, a_bar) with wbar pinned to zero at the middle node. Policy
/// iteration over {diffuse, sell, buy} rows on a uniform grid of n_grid
/// points spanning three candidate half-widths, sparse-LU solves per sweep.
/// Used as the arbiter for the closed forms above. Throws
/// std::invalid_argument on non-positive sigma, a vanishing alpha_bar,
/// negative costs, a zero cost sum, or n_grid < 201; throws
/// std::runtime_error if policy iteration fails to settle.
CellSolution solve_cell_bruteforce(double sigma, double alpha_bar,
                                   double lambda_sell, double lambda_buy,
                                   int n_grid = 2001);

/// Sweeps the audit drift and the hedge derivatives of the claim over the
/// grid and fits their near-expiry singularity exponents by log-log
/// regression. Requires a one-asset market and grid.tau_max < market.T.
AuditReport audit_assumptions(const MarketParams& market,
                              const Preferences& prefs,
                              const PayoffSpec& payoff,
                              const AuditGrid& grid = AuditGrid{});

}  // namespace smallcost

#endif  // SMALLCOST_CORRECTOR_HPP_
