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

#include "smallcost/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "smallcost/blackscholes.hpp"

namespace smallcost {

namespace {

// Second derivative at x of the degree-4 interpolant through the five
// points (nodes[j], values[j]). Exact for polynomials up to degree four,
// for any node placement with x inside the node window.
double interpolated_second_derivative(const double* nodes, const double* values,
                                      double x) {
  double out = 0.0;
  for (int j = 0; j < 5; ++j) {
    double denom = 1.0;
    double other[4];
    int m = 0;
    for (int k = 0; k < 5; ++k) {
      if (k == j) continue;
      denom *= nodes[j] - nodes[k];
      other[m++] = nodes[k];
    }
    double pair_sum = 0.0;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        double prod = 1.0;
        for (int k = 0; k < 4; ++k) {
          if (k != p && k != q) prod *= x - other[k];
        }
        pair_sum += prod;
      }
    }
    out += values[j] * 2.0 * pair_sum / denom;
  }
  return out;
}

// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Exponent e of max ~ tau^(-e); an identically-zero series has no
// singularity and reports zero.
double fitted_exponent(const std::vector<double>& taus,
                       const std::vector<double>& maxes) {
  double largest = 0.0;
  for (double m : maxes) largest = std::max(largest, m);
  if (largest <= 0.0) return 0.0;
  std::vector<double> lx(taus.size()), ly(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    lx[i] = std::log(taus[i]);
    ly[i] = std::log(std::max(maxes[i], 1e-300));
  }
  return -fitted_slope(lx, ly);
}

}  // namespace

CorrectorSolution::CorrectorSolution(const MarketParams& market,
                                     const Preferences& prefs,
                                     const PayoffSpec& payoff,
                                     const CostStructure& costs)
    : merton_(market, prefs, payoff), costs_(costs) {
  if (market.mu.size() != 1) {
    throw std::invalid_argument(
        "CorrectorSolution: only one risky asset is supported");
  }
  if (costs_.d() != 1) {
    throw std::invalid_argument(
        "CorrectorSolution: cost structure must cover exactly one asset");
  }
  lambda_sell_ = costs_.lambda(1, 0);
  lambda_buy_ = costs_.lambda(0, 1);
  lambda_sum_ = lambda_sell_ + lambda_buy_;
  sigma_ = market.sigma1();
  excess_over_var_ = (market.mu(0) - market.r) / (sigma_ * sigma_);
}

double CorrectorSolution::eta(double t) const {
  return 1.0 / (merton_.prefs().gamma * merton_.discount_factors(t).v1);
}

Normalizers CorrectorSolution::normalizers(double t, double s) const {
  const double e = eta(t);
  double s2_gamma = 0.0;
  if (merton_.field().payoff().kind != PayoffKind::kZero) {
    s2_gamma = merton_.field().greeks(t, s).s2_gamma;
  }
  const double alpha = sigma_ * (e * excess_over_var_ - s2_gamma);
  return {e, alpha, alpha / e};
}

double CorrectorSolution::rho0(double t, double s) const {
  const Normalizers n = normalizers(t, s);
  return std::cbrt(0.75 * lambda_sum_ * n.alpha_bar * n.alpha_bar /
                   (sigma_ * sigma_));
}

double CorrectorSolution::xi0(double t, double s) const {
  const Normalizers n = normalizers(t, s);
  const double r0 = std::cbrt(0.75 * lambda_sum_ * n.alpha_bar * n.alpha_bar /
                              (sigma_ * sigma_));
  return n.eta * r0;
}

double CorrectorSolution::a_bar(double t, double s) const {
  const Normalizers n = normalizers(t, s);
  const double mbar = n.alpha_bar / sigma_;
  return 0.5 * sigma_ * sigma_ *
         std::pow(0.75 * lambda_sum_ * mbar * mbar, 2.0 / 3.0);
}

double CorrectorSolution::a_bar_alternate(double t, double s) const {
  const double e = eta(t);
  return a_bar(t, s) / (e * e);
}

double CorrectorSolution::a(double t, double s, double z) const {
  return -merton_.value(t, s, z).v * a_bar(t, s);
}

WValue CorrectorSolution::w_explicit(double t, double s, double z,
                                     double xi) const {
  const Normalizers n = normalizers(t, s);
  const double sig2 = sigma_ * sigma_;
  const double ab2 = n.alpha_bar * n.alpha_bar;
  const double r0 = std::cbrt(0.75 * lambda_sum_ * ab2 / sig2);
  const double rho = xi / n.eta;
  const double v_z = merton_.value(t, s, z).v_z;
  const double c1 = 0.5 * (lambda_sell_ - lambda_buy_);
  const double pasted = -(3.0 / 16.0) * lambda_sum_ * r0;
  double wb = 0.0;
  double dwb = 0.0;
  WBranch branch = WBranch::kInterior;
  if (r0 > 0.0 && std::abs(rho) <= r0) {
    const double a4 = -sig2 / (12.0 * ab2);
    const double b2 = sig2 * r0 * r0 / (2.0 * ab2);
    wb = ((a4 * rho * rho + b2) * rho + c1) * rho;
    dwb = (4.0 * a4 * rho * rho + 2.0 * b2) * rho + c1;
  } else if (rho > r0) {
    wb = pasted + lambda_sell_ * rho;
    dwb = lambda_sell_;
    branch = WBranch::kSellSide;
  } else if (rho < -r0) {
    wb = pasted - lambda_buy_ * rho;
    dwb = -lambda_buy_;
    branch = WBranch::kBuySide;
  } else {
    // Collapsed band (rho0 == 0) queried at its only interior point xi == 0:
    // the corrector is the cone support, kinked at the origin.
    dwb = c1;
  }
  return {n.eta * v_z * wb, v_z * dwb, branch};
}

CorrectorResidual CorrectorSolution::corrector_residual(double t, double s,
                                                        double z,
                                                        double xi) const {
  const Normalizers n = normalizers(t, s);
  const double r0 = std::cbrt(0.75 * lambda_sum_ * n.alpha_bar * n.alpha_bar /
                              (sigma_ * sigma_));
  const double x0 = n.eta * r0;
  const double h = x0 > 0.0 ? x0 / 200.0 : std::max(1e-8, 1e-3 * std::abs(xi));
  // Anchor the five nodes on the branch of xi; the pasting points are only
  // C^1, so a window reaching across them would degrade to O(h).
  double lo;
  if (xi >= x0) {
    lo = std::max(xi - 2.0 * h, x0);
  } else if (xi <= -x0) {
    lo = std::min(xi + 2.0 * h, -x0) - 4.0 * h;
  } else {
    lo = std::clamp(xi - 2.0 * h, -x0, x0 - 4.0 * h);
  }
  double nodes[5];
  double values[5];
  for (int j = 0; j < 5; ++j) {
    nodes[j] = lo + j * h;
    values[j] = w_explicit(t, s, z, nodes[j]).value;
  }
  const double w_xixi = interpolated_second_derivative(nodes, values, xi);
  const MertonSolution::Value val = merton_.value(t, s, z);
  const WValue w0 = w_explicit(t, s, z, xi);
  const double pde = 0.5 * sigma_ * sigma_ * xi * xi * val.v_zz -
                     0.5 * n.alpha * n.alpha * w_xixi + a(t, s, z);
  return {pde, w0.dw - lambda_sell_ * val.v_z, -w0.dw - lambda_buy_ * val.v_z};
}

double CorrectorSolution::cone_support(double xi) const {
  return lambda_sell_ * std::max(xi, 0.0) + lambda_buy_ * std::max(-xi, 0.0);
}

CellSolution solve_cell_bruteforce(double sigma, double alpha_bar,
                                   double lambda_sell, double lambda_buy,
                                   int n_grid) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("solve_cell_bruteforce: sigma must be > 0");
  }
  if (alpha_bar == 0.0 || !std::isfinite(alpha_bar)) {
    throw std::invalid_argument(
        "solve_cell_bruteforce: alpha_bar must be finite and non-zero");
  }
  if (lambda_sell < 0.0 || lambda_buy < 0.0 ||
      !(lambda_sell + lambda_buy > 0.0)) {
    throw std::invalid_argument(
        "solve_cell_bruteforce: costs must be nonnegative with a positive sum");
  }
  if (n_grid < 201) {
    throw std::invalid_argument(
        "solve_cell_bruteforce: need at least 201 grid points");
  }
  const int n = n_grid;
  const double lam_sum = lambda_sell + lambda_buy;
  const double sig2 = sigma * sigma;
  const double ab2 = alpha_bar * alpha_bar;
  const double rho0_guess = std::cbrt(0.75 * lam_sum * ab2 / sig2);
  const double radius = 3.0 * rho0_guess;
  Eigen::VectorXd rho = Eigen::VectorXd::LinSpaced(n, -radius, radius);
  const double h = rho(1) - rho(0);
  const double diff_coef = 0.5 * ab2 / (h * h);

  // Row codes: 0 = diffuse, 1 = sell slope at the top, 2 = buy slope at the
  // bottom. The outermost rows are pinned to the pushing policies.
  std::vector<int> policy(n, 0);
  policy[0] = 2;
  policy[n - 1] = 1;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  double a = 0.0;
  int sweeps = 0;
  bool settled = false;
  constexpr int kMaxSweeps = 100;
  for (; sweeps < kMaxSweeps; ++sweeps) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(4 * n + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    for (int i = 0; i < n; ++i) {
      switch (policy[i]) {
        case 0:
          trips.emplace_back(i, i - 1, diff_coef);
          trips.emplace_back(i, i, -2.0 * diff_coef);
          trips.emplace_back(i, i + 1, diff_coef);
          trips.emplace_back(i, n, -1.0);
          b(i) = -0.5 * sig2 * rho(i) * rho(i);
          break;
        case 1:
          trips.emplace_back(i, i, 1.0 / h);
          trips.emplace_back(i, i - 1, -1.0 / h);
          b(i) = lambda_sell;
          break;
        default:
          trips.emplace_back(i, i + 1, 1.0 / h);
          trips.emplace_back(i, i, -1.0 / h);
          b(i) = -lambda_buy;
          break;
      }
    }
    trips.emplace_back(n, n / 2, 1.0);  // pin w at the middle node
    Eigen::SparseMatrix<double> mat(n + 1, n + 1);
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(mat);
    if (lu.info() != Eigen::Success) {
      throw std::runtime_error(
          "solve_cell_bruteforce: policy system is singular");
    }
    Eigen::VectorXd sol = lu.solve(b);
    w = sol.head(n);
    a = sol(n);

    std::vector<int> next(policy);
    for (int i = 1; i + 1 < n; ++i) {
      const double pde = -0.5 * sig2 * rho(i) * rho(i) -
                         0.5 * ab2 * (w(i + 1) - 2.0 * w(i) + w(i - 1)) /
                             (h * h) +
                         a;
      const double sell = (w(i) - w(i - 1)) / h - lambda_sell;
      const double buy = -lambda_buy - (w(i + 1) - w(i)) / h;
      int best = 0;
      double best_value = pde;
      if (sell > best_value) {
        best = 1;
        best_value = sell;
      }
      if (buy > best_value) {
        best = 2;
      }
      next[i] = best;
    }
    next[0] = 2;
    next[n - 1] = 1;
    if (next == policy) {
      settled = true;
      ++sweeps;
      break;
    }
    policy = std::move(next);
  }
  if (!settled) {
    throw std::runtime_error(
        "solve_cell_bruteforce: policy iteration did not settle");
  }

  int first_sell = -1;
  int last_buy = -1;
  for (int i = 0; i < n; ++i) {
    if (policy[i] == 1 && first_sell < 0) first_sell = i;
    if (policy[i] == 2) last_buy = i;
  }
  CellSolution out;
  out.a_bar = a;
  out.rho_hi = rho(first_sell) - 0.5 * h;
  out.rho_lo = rho(last_buy) + 0.5 * h;
  out.rho = std::move(rho);
  out.w = std::move(w);
  out.iterations = sweeps;
  return out;
}

AuditReport audit_assumptions(const MarketParams& market,
                              const Preferences& prefs,
                              const PayoffSpec& payoff,
                              const AuditGrid& grid) {
  if (market.mu.size() != 1) {
    throw std::invalid_argument(
        "audit_assumptions: only one risky asset is supported");
  }
  if (!(grid.tau_min > 0.0) || !(grid.tau_max > grid.tau_min) ||
      !(grid.tau_max < market.T)) {
    throw std::invalid_argument(
        "audit_assumptions: need 0 < tau_min < tau_max < T");
  }
  if (grid.n_spot < 3 || grid.n_tau < 2 || !(grid.spot_center > 0.0) ||
      !(grid.log_half_width > 0.0)) {
    throw std::invalid_argument("audit_assumptions: malformed grid");
  }
  MertonSolution merton(market, prefs, payoff);
  const double sigma = market.sigma1();
  const double excess_over_var = (market.mu(0) - market.r) / (sigma * sigma);
  const bool zero_payoff = payoff.kind == PayoffKind::kZero;

  std::vector<double> taus(grid.n_tau);
  for (int k = 0; k < grid.n_tau; ++k) {
    taus[k] = grid.tau_min * std::pow(grid.tau_max / grid.tau_min,
                                      k / (grid.n_tau - 1.0));
  }
  Eigen::VectorXd log_s = Eigen::VectorXd::LinSpaced(
      grid.n_spot, -grid.log_half_width, grid.log_half_width);

  AuditReport rep;
  rep.c0 = std::numeric_limits<double>::infinity();
  std::vector<double> max_gamma, max_delta, max_third;
  for (double tau : taus) {
    const double t = market.T - tau;
    const double eta_t =
        1.0 / (prefs.gamma * merton.discount_factors(t).v1);
    double mg = 0.0, md = 0.0, mt = 0.0;
    double prev_drift = 0.0;
    double prev_spot = 0.0;
    for (int i = 0; i < grid.n_spot; ++i) {
      const double s = grid.spot_center * std::exp(log_s(i));
      double s2_gamma = 0.0;
      if (!zero_payoff) {
        const Greeks g = merton.field().greeks(t, s);
        const double hs = 1e-4 * s;
        const double third = (merton.field().greeks(t, s + hs).gamma -
                              merton.field().greeks(t, s - hs).gamma) /
                             (2.0 * hs);
        s2_gamma = g.s2_gamma;
        mg = std::max(mg, std::abs(g.gamma));
        md = std::max(md, std::abs(g.delta));
        mt = std::max(mt, std::abs(third));
      }
      const double drift = eta_t * excess_over_var - s2_gamma;
      rep.c0 = std::min(rep.c0, std::abs(drift));
      if (i > 0 && drift * prev_drift < 0.0) {
        const double frac = prev_drift / (prev_drift - drift);
        rep.zero_crossings.push_back({tau, prev_spot + frac * (s - prev_spot)});
      }
      prev_drift = drift;
      prev_spot = s;
    }
    max_gamma.push_back(mg);
    max_delta.push_back(md);
    max_third.push_back(mt);
  }
  rep.has_zero_crossing = !rep.zero_crossings.empty();
  rep.gamma_exponent = fitted_exponent(taus, max_gamma);
  rep.delta_exponent = fitted_exponent(taus, max_delta);
  rep.third_exponent = fitted_exponent(taus, max_third);
  rep.source_exponent = 4.0 * std::max(rep.gamma_exponent, 0.0) / 3.0;
  rep.gamma_window_ok = rep.gamma_exponent <= 1.05;
  rep.delta_window_ok = rep.delta_exponent <= 0.45;
  rep.source_integrable = rep.source_exponent < 0.75;
  rep.expansion_valid =
      rep.gamma_window_ok && rep.delta_window_ok && rep.source_integrable;
  rep.w_form = "w = eta(t) v_z wbar(xi / eta), eta = 1 / (gamma v1)";
  rep.a_bar_form =
      "a_bar = (sigma^2/2) ((3/4)(lambda(1,0)+lambda(0,1)) mbar^2)^(2/3), "
      "no gamma^2 v1^2 prefactor";
  return rep;
}

}  // namespace smallcost
