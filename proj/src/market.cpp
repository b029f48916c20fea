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

#include "smallcost/market.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smallcost {

MarketParams::MarketParams(Eigen::VectorXd mu_in, Eigen::MatrixXd sigma_in, double r_in,
                           double T_in)
    : mu(std::move(mu_in)), sigma(std::move(sigma_in)), r(r_in), T(T_in) {
  validate();
}

MarketParams::MarketParams(double mu_in, double sigma_in, double r_in, double T_in)
    : mu(Eigen::VectorXd::Constant(1, mu_in)),
      sigma(Eigen::MatrixXd::Constant(1, 1, sigma_in)),
      r(r_in),
      T(T_in) {
  validate();
}

double MarketParams::sigma1() const {
  if (d() != 1) throw std::invalid_argument("sigma1: market is not one-dimensional");
  return sigma(0, 0);
}

void MarketParams::validate() const {
  if (mu.size() < 1) throw std::invalid_argument("MarketParams: need at least one asset");
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) {
    throw std::invalid_argument("MarketParams: sigma must be d x d");
  }
  if (!(T > 0.0)) throw std::invalid_argument("MarketParams: T must be positive");
  if (!mu.allFinite() || !sigma.allFinite() || !std::isfinite(r)) {
    throw std::invalid_argument("MarketParams: non-finite coefficient");
  }
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    if (!(sigma(i, i) > 0.0)) {
      throw std::invalid_argument("MarketParams: sigma diagonal must be positive");
    }
  }
  // sigma*sigma^T must be symmetric positive definite (its inverse appears in
  // the optimal position).
  const Eigen::MatrixXd cov = sigma_sigma_t();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("MarketParams: sigma*sigma^T is not positive definite");
  }
}

Preferences::Preferences(double gamma_in, int kappa_in)
    : gamma(gamma_in), kappa(kappa_in) {
  validate();
}

double Preferences::u1_conjugate(double c_tilde) const {
  if (!(c_tilde > 0.0)) {
    throw std::domain_error("u1_conjugate: argument must be positive");
  }
  const double ratio = c_tilde / gamma;
  return ratio * (std::log(ratio) - 1.0);
}

double Preferences::u1_conjugate_argmax(double c_tilde) const {
  if (!(c_tilde > 0.0)) {
    throw std::domain_error("u1_conjugate_argmax: argument must be positive");
  }
  return -std::log(c_tilde / gamma) / gamma;
}

void Preferences::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("Preferences: gamma must be positive");
  if (kappa != 0 && kappa != 1) {
    throw std::invalid_argument("Preferences: kappa must be 0 or 1");
  }
}

CostStructure CostStructure::from_matrix(const Eigen::MatrixXd& lambda_in, double eps) {
  CostStructure costs;
  const Eigen::Index n = lambda_in.rows();
  costs.lambda = Eigen::MatrixXd::Zero(n, n);
  costs.forbidden = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
      n, n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = lambda_in(i, j);
      if (std::isinf(v)) {
        costs.forbidden(i, j) = true;
      } else {
        costs.lambda(i, j) = v;
      }
    }
  }
  costs.epsilon = eps;
  costs.validate();
  return costs;
}

CostStructure CostStructure::one_asset(double lambda10, double lambda01, double eps) {
  Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(2, 2);
  lam(1, 0) = lambda10;
  lam(0, 1) = lambda01;
  return from_matrix(lam, eps);
}

double CostStructure::effective_cost(int i, int j) const {
  if (forbidden(i, j)) {
    throw std::invalid_argument("effective_cost: transfer direction is forbidden");
  }
  return epsilon * epsilon * epsilon * lambda(i, j);
}

double CostStructure::lambda_sum() const {
  if (d() != 1) throw std::invalid_argument("lambda_sum: defined for one asset only");
  return lambda(1, 0) + lambda(0, 1);
}

CostStructure CostStructure::with_epsilon(double eps) const {
  CostStructure out = *this;
  out.epsilon = eps;
  out.validate();
  return out;
}

void CostStructure::validate() const {
  const Eigen::Index n = lambda.rows();
  if (n < 2 || lambda.cols() != n || forbidden.rows() != n || forbidden.cols() != n) {
    throw std::invalid_argument("CostStructure: lambda must be (d+1) x (d+1), d >= 1");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("CostStructure: epsilon must be nonnegative");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (forbidden(i, i) || lambda(i, i) != 0.0) {
      throw std::invalid_argument("CostStructure: diagonal must be zero and allowed");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!forbidden(i, j) && (!(lambda(i, j) >= 0.0) || !std::isfinite(lambda(i, j)))) {
        throw std::invalid_argument("CostStructure: costs must be finite and nonnegative");
      }
    }
  }
  // Standing requirement: both cash legs of every asset stay finite.
  for (Eigen::Index i = 1; i < n; ++i) {
    if (forbidden(i, 0) || forbidden(0, i)) {
      throw std::invalid_argument(
          "CostStructure: transfers between cash and each asset must be allowed");
    }
  }
}

PayoffSpec PayoffSpec::zero() { return PayoffSpec{}; }

PayoffSpec PayoffSpec::call(double strike) {
  PayoffSpec p;
  p.kind = PayoffKind::kCall;
  p.strike = strike;
  p.validate();
  return p;
}

PayoffSpec PayoffSpec::put(double strike) {
  PayoffSpec p;
  p.kind = PayoffKind::kPut;
  p.strike = strike;
  p.validate();
  return p;
}

PayoffSpec PayoffSpec::power_call(double strike, double exponent) {
  PayoffSpec p;
  p.kind = PayoffKind::kPowerCall;
  p.strike = strike;
  p.exponent = exponent;
  p.validate();
  return p;
}

PayoffSpec PayoffSpec::digital(double strike) {
  PayoffSpec p;
  p.kind = PayoffKind::kDigital;
  p.strike = strike;
  p.validate();
  return p;
}

PayoffSpec PayoffSpec::forward() {
  PayoffSpec p;
  p.kind = PayoffKind::kForward;
  return p;
}

PayoffSpec PayoffSpec::custom(std::vector<double> s, std::vector<double> g) {
  PayoffSpec p;
  p.kind = PayoffKind::kCustom;
  p.table_s = std::move(s);
  p.table_g = std::move(g);
  p.validate();
  return p;
}

std::string PayoffSpec::name() const {
  switch (kind) {
    case PayoffKind::kZero: return "zero";
    case PayoffKind::kCall: return "call";
    case PayoffKind::kPut: return "put";
    case PayoffKind::kPowerCall: return "power_call";
    case PayoffKind::kDigital: return "digital";
    case PayoffKind::kForward: return "forward";
    case PayoffKind::kCustom: return "custom";
  }
  return "unknown";
}

void PayoffSpec::validate() const {
  switch (kind) {
    case PayoffKind::kZero:
    case PayoffKind::kForward:
      return;
    case PayoffKind::kCall:
    case PayoffKind::kPut:
    case PayoffKind::kDigital:
      if (!(strike > 0.0)) throw std::invalid_argument("PayoffSpec: strike must be positive");
      return;
    case PayoffKind::kPowerCall:
      if (!(strike > 0.0)) throw std::invalid_argument("PayoffSpec: strike must be positive");
      if (!(exponent >= 1.0)) {
        throw std::invalid_argument("PayoffSpec: power-call exponent must be >= 1");
      }
      return;
    case PayoffKind::kCustom: {
      if (table_s.size() != table_g.size() || table_s.size() < 4) {
        throw std::invalid_argument("PayoffSpec: custom table needs >= 4 matched points");
      }
      for (std::size_t i = 0; i < table_s.size(); ++i) {
        if (!(table_s[i] > 0.0) || !std::isfinite(table_s[i]) ||
            !(table_g[i] >= 0.0) || !std::isfinite(table_g[i])) {
          throw std::invalid_argument("PayoffSpec: custom table values out of range");
        }
        if (i > 0 && !(table_s[i] > table_s[i - 1])) {
          throw std::invalid_argument("PayoffSpec: custom abscissae must increase");
        }
      }
      return;
    }
  }
}

namespace {

// Monotone cubic Hermite (Fritsch-Carlson) evaluation of a custom table.
// Slopes are limited so the interpolant preserves the table's monotonicity
// between nodes; the result is C^1.
double eval_custom(const PayoffSpec& payoff, double s) {
  const auto& xs = payoff.table_s;
  const auto& ys = payoff.table_g;
  if (s < xs.front() || s > xs.back()) {
    throw std::domain_error("evaluate_payoff: custom table queried outside its range");
  }
  const std::size_t n = xs.size();
  // Interval index.
  const auto it = std::upper_bound(xs.begin(), xs.end(), s);
  std::size_t k = static_cast<std::size_t>(std::distance(xs.begin(), it));
  if (k == 0) k = 1;
  if (k >= n) k = n - 1;
  const std::size_t i = k - 1;

  auto secant = [&](std::size_t j) { return (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]); };
  auto node_slope = [&](std::size_t j) -> double {
    if (j == 0) return secant(0);
    if (j == n - 1) return secant(n - 2);
    const double d0 = secant(j - 1), d1 = secant(j);
    if (d0 * d1 <= 0.0) return 0.0;
    const double h0 = xs[j] - xs[j - 1], h1 = xs[j + 1] - xs[j];
    // Weighted harmonic mean keeps the interpolant monotone.
    const double w0 = 2.0 * h1 + h0, w1 = h1 + 2.0 * h0;
    return (w0 + w1) / (w0 / d0 + w1 / d1);
  };

  const double h = xs[i + 1] - xs[i];
  const double t = (s - xs[i]) / h;
  const double m0 = node_slope(i) * h, m1 = node_slope(i + 1) * h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * ys[i] + (t3 - 2 * t2 + t) * m0 +
         (-2 * t3 + 3 * t2) * ys[i + 1] + (t3 - t2) * m1;
}

}  // namespace

double evaluate_payoff(const PayoffSpec& payoff, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("evaluate_payoff: spot must be positive");
  switch (payoff.kind) {
    case PayoffKind::kZero: return 0.0;
    case PayoffKind::kCall: return std::max(s - payoff.strike, 0.0);
    case PayoffKind::kPut: return std::max(payoff.strike - s, 0.0);
    case PayoffKind::kPowerCall:
      return std::pow(std::max(s - payoff.strike, 0.0), payoff.exponent);
    case PayoffKind::kDigital: return s >= payoff.strike ? 1.0 : 0.0;
    case PayoffKind::kForward: return s;
    case PayoffKind::kCustom: return eval_custom(payoff, s);
  }
  throw std::logic_error("evaluate_payoff: unhandled payoff kind");
}

double evaluate_payoff(const PayoffSpec& payoff, const Eigen::VectorXd& s) {
  if (s.size() < 1) throw std::invalid_argument("evaluate_payoff: empty spot vector");
  return evaluate_payoff(payoff, s[0]);
}

RegularityClass regularity_class(const PayoffSpec& payoff) {
  switch (payoff.kind) {
    case PayoffKind::kZero:
    case PayoffKind::kForward:
      return RegularityClass::kSmooth;
    case PayoffKind::kPowerCall:
      // Exponent 1 is an ordinary call kink; above 1 the payoff is C^1 with a
      // curvature break at the strike.
      return payoff.exponent > 1.0 ? RegularityClass::kC1 : RegularityClass::kC0;
    case PayoffKind::kCall:
    case PayoffKind::kPut:
      return RegularityClass::kC0;
    case PayoffKind::kDigital:
      return RegularityClass::kDiscontinuous;
    case PayoffKind::kCustom:
      return RegularityClass::kC1;  // monotone cubic interpolants are C^1
  }
  return RegularityClass::kC0;
}

const char* to_string(RegularityClass c) {
  switch (c) {
    case RegularityClass::kSmooth: return "smooth";
    case RegularityClass::kC1: return "C1";
    case RegularityClass::kC0: return "C0";
    case RegularityClass::kDiscontinuous: return "discontinuous";
  }
  return "unknown";
}

}  // namespace smallcost
