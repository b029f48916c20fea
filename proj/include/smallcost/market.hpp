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
// Market, preference, cost, and payoff data model shared by every other
// module. All types are immutable after construction and all operations are
// pure, so they may be used freely from concurrent workers.

#ifndef SMALLCOST_MARKET_HPP_
#define SMALLCOST_MARKET_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace smallcost {

/// Frictionless market description: drift vector mu (1/year), d x d
/// volatility matrix sigma (1/sqrt(year)), short rate r (1/year), horizon T
/// (years).
struct MarketParams {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double r = 0.0;
  double T = 0.0;

  MarketParams() = default;
  MarketParams(Eigen::VectorXd mu_in, Eigen::MatrixXd sigma_in, double r_in,
               double T_in);
  /// One-asset convenience constructor.
  MarketParams(double mu_in, double sigma_in, double r_in, double T_in);

  int d() const { return static_cast<int>(mu.size()); }
  Eigen::MatrixXd sigma_sigma_t() const { return sigma * sigma.transpose(); }

  /// Scalar volatility accessor; throws unless d == 1.
  double sigma1() const;

  /// Throws std::invalid_argument when T <= 0, d < 1, dimensions mismatch,
  /// entries are non-finite, or sigma*sigma^T is not positive definite.
  void validate() const;
};

/// Exponential-utility preferences: risk aversion gamma (1/currency) and the
/// consumption switch kappa in {0, 1}. Both period utilities are
/// U(x) = -exp(-gamma x); the consumption conjugate is available in closed
/// form.
struct Preferences {
  double gamma = 1.0;
  int kappa = 0;

  Preferences() = default;
  Preferences(double gamma_in, int kappa_in);

  double u1(double x) const { return -std::exp(-gamma * x); }
  double u2(double x) const { return -std::exp(-gamma * x); }

  /// Legendre conjugate of u1: sup_c { u1(c) - c * c_tilde } =
  /// (c_tilde/gamma) * (ln(c_tilde/gamma) - 1), for c_tilde > 0.
  double u1_conjugate(double c_tilde) const;

  /// The maximizer c*(c_tilde) = -ln(c_tilde/gamma)/gamma attaining the
  /// conjugate value.
  double u1_conjugate_argmax(double c_tilde) const;

  void validate() const;
};

/// Proportional transaction-cost structure on d assets plus cash (index 0).
/// The effective cost of transferring amount l from account i to account j is
/// epsilon^3 * lambda(i, j) * l. Forbidden transfers are an explicit marker,
/// never a large float, so cone computations can skip them exactly.
struct CostStructure {
  Eigen::MatrixXd lambda;  ///< (d+1) x (d+1), nonnegative, zero diagonal.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> forbidden;
  double epsilon = 0.0;

  CostStructure() = default;

  /// Builds from a matrix that may contain +infinity entries; those become
  /// forbidden markers. Cash legs (row/column 0) must be finite.
  static CostStructure from_matrix(const Eigen::MatrixXd& lambda_in, double eps);

  /// One-asset convenience: lambda(1,0) = sell cost, lambda(0,1) = buy cost.
  static CostStructure one_asset(double lambda10, double lambda01, double eps);

  int d() const { return static_cast<int>(lambda.rows()) - 1; }

  /// Effective proportional cost epsilon^3 * lambda(i, j); throws on a
  /// forbidden pair.
  double effective_cost(int i, int j) const;

  bool is_forbidden(int i, int j) const { return forbidden(i, j); }

  /// lambda(1,0) + lambda(0,1); requires d == 1.
  double lambda_sum() const;

  /// Returns a copy with a different cost scale epsilon.
  CostStructure with_epsilon(double eps) const;

  void validate() const;
};

/// Payoff families supported by the engine.
enum class PayoffKind { kZero, kCall, kPut, kPowerCall, kDigital, kForward, kCustom };

/// Smoothness classification used to pre-warn about expansion divergence.
enum class RegularityClass { kSmooth, kC1, kC0, kDiscontinuous };

/// European payoff description. Custom payoffs are monotone-cubic
/// interpolated tables; querying outside the table is an error, never an
/// extrapolated guess.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::kZero;
  double strike = 0.0;
  double exponent = 1.0;
  std::vector<double> table_s;  ///< strictly increasing abscissae (custom only)
  std::vector<double> table_g;  ///< payoff values at table_s

  static PayoffSpec zero();
  static PayoffSpec call(double strike);
  static PayoffSpec put(double strike);
  static PayoffSpec power_call(double strike, double exponent);
  static PayoffSpec digital(double strike);
  static PayoffSpec forward();
  static PayoffSpec custom(std::vector<double> s, std::vector<double> g);

  std::string name() const;
  void validate() const;
};

/// Evaluates g(s) for a scalar spot. Pure and deterministic. Throws
/// std::domain_error when a custom table is queried outside its abscissae and
/// std::invalid_argument when s <= 0.
double evaluate_payoff(const PayoffSpec& payoff, double s);

/// Vector-spot overload. The scalar payoff families read the first component
/// (the explicit pricing pipeline is one-dimensional; multi-asset payoffs on
/// baskets are out of scope).
double evaluate_payoff(const PayoffSpec& payoff, const Eigen::VectorXd& s);

/// Classifies the payoff's global smoothness in s.
RegularityClass regularity_class(const PayoffSpec& payoff);

const char* to_string(RegularityClass c);

}  // namespace smallcost

#endif  // SMALLCOST_MARKET_HPP_
