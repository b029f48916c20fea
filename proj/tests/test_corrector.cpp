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

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "doctest.h"
#include "smallcost/blackscholes.hpp"
#include "smallcost/market.hpp"
#include "smallcost/merton.hpp"

namespace smallcost {
namespace {

MarketParams canonical_market() { return MarketParams(0.10, 0.2, 0.02, 1.0); }

CorrectorSolution make_corrector(const PayoffSpec& payoff, double lambda_sell,
                                 double lambda_buy, int kappa = 0) {
  return CorrectorSolution(canonical_market(), Preferences(1.0, kappa), payoff,
                           CostStructure::one_asset(lambda_sell, lambda_buy,
                                                    0.1));
}

// Normalized corrector evaluated directly from the closed coefficients, used
// to cross-check the scaling chain and the brute-force table.
double wbar_reference(double rho, double sigma, double alpha_bar,
                      double lambda_sell, double lambda_buy) {
  const double lam_sum = lambda_sell + lambda_buy;
  const double sig2 = sigma * sigma;
  const double ab2 = alpha_bar * alpha_bar;
  const double rho0 = std::cbrt(0.75 * lam_sum * ab2 / sig2);
  if (std::abs(rho) <= rho0) {
    const double a4 = -sig2 / (12.0 * ab2);
    const double b2 = sig2 * rho0 * rho0 / (2.0 * ab2);
    const double c1 = 0.5 * (lambda_sell - lambda_buy);
    return ((a4 * rho * rho + b2) * rho + c1) * rho;
  }
  const double pasted = -(3.0 / 16.0) * lam_sum * rho0;
  return rho > 0.0 ? pasted + lambda_sell * rho : pasted - lambda_buy * rho;
}

TEST_CASE("construction requires a one-asset market and cost structure") {
  Eigen::VectorXd mu(2);
  mu << 0.1, 0.08;
  Eigen::MatrixXd sigma = 0.2 * Eigen::MatrixXd::Identity(2, 2);
  MarketParams wide(mu, sigma, 0.02, 1.0);
  Eigen::MatrixXd lam = Eigen::MatrixXd::Ones(3, 3);
  lam.diagonal().setZero();
  CHECK_THROWS_AS(CorrectorSolution(wide, Preferences(1.0, 0),
                                    PayoffSpec::zero(),
                                    CostStructure::from_matrix(lam, 0.1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CorrectorSolution(canonical_market(), Preferences(1.0, 0),
                                    PayoffSpec::zero(),
                                    CostStructure::from_matrix(lam, 0.1)),
                  std::invalid_argument);
}

TEST_CASE("normalizers at expiry match the costless benchmark") {
  const auto corr = make_corrector(PayoffSpec::zero(), 1.0, 1.0);
  const Normalizers n = corr.normalizers(1.0, 100.0);
  CHECK(n.eta == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(n.alpha == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(n.alpha_bar == doctest::Approx(0.4).epsilon(1e-14));
  // Away from expiry the wealth normalizer discounts by v1.
  const double v1 = std::exp(0.02);
  const Normalizers n0 = corr.normalizers(0.0, 100.0);
  CHECK(n0.eta == doctest::Approx(1.0 / v1).epsilon(1e-14));
  CHECK(n0.alpha == doctest::Approx(0.4 / v1).epsilon(1e-14));
  CHECK(n0.alpha_bar == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("a linear claim leaves the normalizers unchanged") {
  const auto zero = make_corrector(PayoffSpec::zero(), 1.0, 1.0);
  const auto fwd = make_corrector(PayoffSpec::forward(), 1.0, 1.0);
  for (double t : {0.0, 0.5, 0.9}) {
    for (double s : {80.0, 100.0, 125.0}) {
      CHECK(fwd.normalizers(t, s).alpha ==
            doctest::Approx(zero.normalizers(t, s).alpha).epsilon(1e-12));
      CHECK(fwd.xi0(t, s) == doctest::Approx(zero.xi0(t, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("near expiry the call diffusion is dominated by the claim gamma") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0);
  const double t = 1.0 - 1e-4;
  const Greeks g = corr.merton().field().greeks(t, 100.0);
  const Normalizers n = corr.normalizers(t, 100.0);
  CHECK(n.alpha == doctest::Approx(-0.2 * g.s2_gamma).epsilon(1e-2));
  CHECK(std::abs(n.alpha) > 10.0);
}

TEST_CASE("the band half-width scales as the cube root of total costs") {
  const auto one = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0);
  const auto two = make_corrector(PayoffSpec::call(100.0), 2.0, 2.0);
  for (double t : {0.0, 0.7}) {
    for (double s : {90.0, 100.0, 115.0}) {
      CHECK(two.xi0(t, s) ==
            doctest::Approx(std::cbrt(2.0) * one.xi0(t, s)).epsilon(1e-12));
    }
  }
  const auto free_trade = make_corrector(PayoffSpec::call(100.0), 0.0, 0.0);
  CHECK(free_trade.xi0(0.5, 100.0) == 0.0);
  CHECK(free_trade.a_bar(0.5, 100.0) == 0.0);
  CHECK(free_trade.w_explicit(0.5, 100.0, 0.3, 0.2).value == 0.0);
}

TEST_CASE("the explicit corrector vanishes at zero deviation and pastes C1") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0, 1);
  const double t = 0.5, s = 100.0, z = 0.3;
  const double x0 = corr.xi0(t, s);
  REQUIRE(x0 > 0.0);
  const double v_z = corr.merton().value(t, s, z).v_z;

  CHECK(corr.w_explicit(t, s, z, 0.0).value == 0.0);
  CHECK(corr.w_explicit(t, s, z, 0.0).branch == WBranch::kInterior);

  const WValue in_hi = corr.w_explicit(t, s, z, x0 * (1.0 - 1e-9));
  const WValue out_hi = corr.w_explicit(t, s, z, x0 * (1.0 + 1e-9));
  CHECK(in_hi.branch == WBranch::kInterior);
  CHECK(out_hi.branch == WBranch::kSellSide);
  CHECK(std::abs(in_hi.dw - out_hi.dw) < 1e-9 * v_z);
  // Value continuity, net of the slope over the 2e-9 xi0 separation.
  CHECK(std::abs(in_hi.value - out_hi.value) <
        1e-9 * v_z * x0 + 2.1e-9 * x0 * std::abs(out_hi.dw));

  const WValue in_lo = corr.w_explicit(t, s, z, -x0 * (1.0 - 1e-9));
  const WValue out_lo = corr.w_explicit(t, s, z, -x0 * (1.0 + 1e-9));
  CHECK(out_lo.branch == WBranch::kBuySide);
  CHECK(std::abs(in_lo.dw - out_lo.dw) < 1e-9 * v_z);

  // Affine slopes are exact multiples of v_z.
  CHECK(corr.w_explicit(t, s, z, 2.0 * x0).dw == 1.0 * v_z);
  CHECK(corr.w_explicit(t, s, z, -2.0 * x0).dw == -1.0 * v_z);
}

TEST_CASE("complementarity of the first corrector equation on a band sweep") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0);
  const struct {
    double t, s, dz;
  } points[] = {{0.3, 100.0, 0.5}, {0.8, 90.0, 0.0}, {0.1, 120.0, -0.4}};
  for (const auto& p : points) {
    const double z = corr.merton().field().value(p.t, p.s) + p.dz;
    const double x0 = corr.xi0(p.t, p.s);
    const double a_val = corr.a(p.t, p.s, z);
    const double v_z = corr.merton().value(p.t, p.s, z).v_z;
    REQUIRE(a_val > 0.0);
    for (int i = 0; i <= 400; ++i) {
      const double xi = -3.0 * x0 + 6.0 * x0 * i / 400.0;
      const CorrectorResidual res = corr.corrector_residual(p.t, p.s, z, xi);
      const double slack_scale = 1e-10 * v_z * (1.0 + std::abs(xi));
      // All three components are nonpositive up to tolerance...
      CHECK(res.pde_part <= 1e-6 * a_val);
      CHECK(res.slack_sell <= slack_scale);
      CHECK(res.slack_buy <= slack_scale);
      // ...and at least one is active.
      const double top =
          std::max(res.pde_part / a_val,
                   std::max(res.slack_sell, res.slack_buy) / (v_z * x0));
      CHECK(top > -1e-6);
      if (std::abs(xi) < x0 * (1.0 - 1e-12)) {
        CHECK(std::abs(res.pde_part) <= 1e-6 * a_val);
      } else if (xi >= x0) {
        CHECK(std::abs(res.slack_sell) <= slack_scale);
      } else {
        CHECK(std::abs(res.slack_buy) <= slack_scale);
      }
    }
    // At the pasting points both the PDE part and the adjacent slack vanish.
    for (double sign : {1.0, -1.0}) {
      const CorrectorResidual res =
          corr.corrector_residual(p.t, p.s, z, sign * x0);
      CHECK(std::abs(res.pde_part) <= 1e-6 * a_val);
      const double active = sign > 0 ? res.slack_sell : res.slack_buy;
      CHECK(std::abs(active) <= 1e-10 * v_z);
    }
  }
}

TEST_CASE("the corrector approaches the cone support at large deviations") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.3, 0.7);
  const double t = 0.4, s = 105.0, z = 0.1;
  const double x0 = corr.xi0(t, s);
  const double v_z = corr.merton().value(t, s, z).v_z;
  for (double sign : {1.0, -1.0}) {
    const double xi = sign * 100.0 * x0;
    const double ratio =
        corr.w_explicit(t, s, z, xi).value / (v_z * corr.cone_support(xi));
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-2));
  }
}

TEST_CASE("the corrector is convex with an interior minimum") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.4, 0.6);
  const double t = 0.6, s = 95.0, z = -0.2;
  const double x0 = corr.xi0(t, s);
  const double scale = corr.merton().value(t, s, z).v_z * x0;
  const double h = x0 / 50.0;
  for (int i = -160; i <= 160; ++i) {
    const double xi = i * 3.0 * x0 / 160.0;
    const double wm = corr.w_explicit(t, s, z, xi - h).value;
    const double w0 = corr.w_explicit(t, s, z, xi).value;
    const double wp = corr.w_explicit(t, s, z, xi + h).value;
    CHECK((wp - 2.0 * w0 + wm) / (h * h) >= -1e-9 * scale / x0);
  }
  // Golden-section search for the minimizer; it must be strictly interior.
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -x0, hi = x0;
  double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
  double f1 = corr.w_explicit(t, s, z, m1).value;
  double f2 = corr.w_explicit(t, s, z, m2).value;
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - gr * (hi - lo);
      f1 = corr.w_explicit(t, s, z, m1).value;
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + gr * (hi - lo);
      f2 = corr.w_explicit(t, s, z, m2).value;
    }
  }
  const double xi_star = 0.5 * (lo + hi);
  CHECK(std::abs(xi_star) < x0 * (1.0 - 1e-6));
  CHECK(corr.w_explicit(t, s, z, xi_star).value <
        corr.w_explicit(t, s, z, x0).value);
  CHECK(corr.w_explicit(t, s, z, xi_star).value <
        corr.w_explicit(t, s, z, -x0).value);
  CHECK(std::abs(corr.w_explicit(t, s, z, xi_star).dw) < 1e-6 * scale / x0);
}

TEST_CASE("normalization round trip preserves the corrector objects") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.1, 0.9, 1);
  const double t = 0.35, s = 102.0, z = 0.6;
  const Normalizers n = corr.normalizers(t, s);
  const double r0 = corr.rho0(t, s);
  const double v_z = corr.merton().value(t, s, z).v_z;

  CHECK(corr.xi0(t, s) == doctest::Approx(n.eta * r0).epsilon(1e-12));
  CHECK(n.alpha == doctest::Approx(n.eta * n.alpha_bar).epsilon(1e-12));

  // a_bar recovered from the unnormalized a through a = eta v_z a_bar.
  CHECK(corr.a(t, s, z) / (n.eta * v_z) ==
        doctest::Approx(corr.a_bar(t, s)).epsilon(1e-10));

  // wbar recovered from w through w = eta v_z wbar(xi / eta).
  for (double rho_frac : {-2.3, -0.8, -0.2, 0.0, 0.4, 0.97, 1.6}) {
    const double rho = rho_frac * r0;
    const double direct =
        wbar_reference(rho, 0.2, n.alpha_bar, 1.1, 0.9);
    const double extracted =
        corr.w_explicit(t, s, z, n.eta * rho).value / (n.eta * v_z);
    CHECK(extracted == doctest::Approx(direct).epsilon(1e-10));
  }
  CHECK(corr.w_explicit(t, s, z, 2.0 * n.eta * r0).dw / v_z ==
        doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("policy iteration reproduces the closed-form cell solution") {
  const struct {
    double sigma, alpha_bar, lambda_sell, lambda_buy;
  } draws[] = {{0.25, 12.0, 1.4, 0.6}, {0.2, 0.4, 1.0, 1.0}};
  for (const auto& d : draws) {
    const CellSolution cell = solve_cell_bruteforce(
        d.sigma, d.alpha_bar, d.lambda_sell, d.lambda_buy);
    const double lam_sum = d.lambda_sell + d.lambda_buy;
    const double rho0 = std::cbrt(0.75 * lam_sum * d.alpha_bar * d.alpha_bar /
                                  (d.sigma * d.sigma));
    const double a_ref = 0.5 * d.sigma * d.sigma * rho0 * rho0;
    CHECK(cell.a_bar == doctest::Approx(a_ref).epsilon(1e-4));
    CHECK(cell.rho_hi == doctest::Approx(rho0).epsilon(5e-3));
    CHECK(-cell.rho_lo == doctest::Approx(rho0).epsilon(5e-3));
    CHECK(cell.iterations < 100);
    double werr = 0.0, wscale = 0.0;
    for (int i = 0; i < cell.rho.size(); ++i) {
      const double ref = wbar_reference(cell.rho(i), d.sigma, d.alpha_bar,
                                        d.lambda_sell, d.lambda_buy);
      werr = std::max(werr, std::abs(cell.w(i) - ref));
      wscale = std::max(wscale, std::abs(ref));
    }
    CHECK(werr <= 1e-4 * wscale);
    // The alternate ergodic constant with a gamma^2 v1^2 prefactor (factor
    // 1.69 at a representative gamma v1 = 1.3) is rejected by the solver.
    CHECK(std::abs(cell.a_bar - 1.69 * a_ref) > 0.5 * a_ref);
  }
}

TEST_CASE("cell solver input validation") {
  CHECK_THROWS_AS(solve_cell_bruteforce(0.0, 1.0, 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_cell_bruteforce(0.2, 0.0, 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_cell_bruteforce(0.2, 1.0, -0.5, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_cell_bruteforce(0.2, 1.0, 0.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_cell_bruteforce(0.2, 1.0, 1.0, 1.0, 100),
                  std::invalid_argument);
}

TEST_CASE("audit of the costless benchmark is flat and non-degenerate") {
  const AuditReport rep = audit_assumptions(
      canonical_market(), Preferences(1.0, 0), PayoffSpec::zero());
  CHECK(rep.gamma_exponent == 0.0);
  CHECK(rep.delta_exponent == 0.0);
  CHECK(rep.third_exponent == 0.0);
  CHECK(rep.c0 == doctest::Approx(2.0 * std::exp(-0.002)).epsilon(1e-9));
  CHECK_FALSE(rep.has_zero_crossing);
  CHECK(rep.expansion_valid);
  CHECK(rep.gamma_window_ok);
  CHECK(rep.delta_window_ok);
  CHECK(rep.source_integrable);
  CHECK_FALSE(rep.w_form.empty());
  CHECK_FALSE(rep.a_bar_form.empty());
}

TEST_CASE("audit of the call finds the square-root gamma singularity") {
  const AuditReport rep = audit_assumptions(
      canonical_market(), Preferences(1.0, 0), PayoffSpec::call(100.0));
  CHECK(rep.gamma_exponent == doctest::Approx(0.5).epsilon(0.1));
  CHECK(rep.delta_exponent < 0.1);
  CHECK(rep.third_exponent > 0.8);
  CHECK(rep.has_zero_crossing);
  CHECK(rep.c0 < 0.05);
  CHECK(rep.source_integrable);
  CHECK(rep.expansion_valid);
}

TEST_CASE("audit of the digital fails the integrability window") {
  const AuditReport rep = audit_assumptions(
      canonical_market(), Preferences(1.0, 0), PayoffSpec::digital(100.0));
  CHECK(rep.gamma_exponent > 0.9);
  CHECK(rep.delta_exponent == doctest::Approx(0.5).epsilon(0.1));
  CHECK_FALSE(rep.source_integrable);
  CHECK_FALSE(rep.delta_window_ok);
  CHECK_FALSE(rep.expansion_valid);
}

TEST_CASE("audit grid validation") {
  const AuditGrid bad_tau{100.0, 0.5, 2001, 1e-3, 2.0, 15};
  CHECK_THROWS_AS(audit_assumptions(canonical_market(), Preferences(1.0, 0),
                                    PayoffSpec::call(100.0), bad_tau),
                  std::invalid_argument);
  const AuditGrid coarse{100.0, 0.5, 2, 1e-3, 1e-1, 15};
  CHECK_THROWS_AS(audit_assumptions(canonical_market(), Preferences(1.0, 0),
                                    PayoffSpec::call(100.0), coarse),
                  std::invalid_argument);
}

TEST_CASE("the ergodic constant concentrates at the money near expiry") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0);
  // Growth exponent -2/3 in time-to-expiry at the money forward.
  std::vector<double> lt, la;
  for (int k = 0; k < 9; ++k) {
    const double tau = 1e-4 * std::pow(100.0, k / 8.0);
    const double s = 100.0 * std::exp(-0.02 * tau);
    lt.push_back(std::log(tau));
    la.push_back(std::log(corr.a_bar(1.0 - tau, s)));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    mx += lt[i];
    my += la[i];
  }
  mx /= lt.size();
  my /= la.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    sxy += (lt[i] - mx) * (la[i] - my);
    sxx += (lt[i] - mx) * (lt[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(-2.0 / 3.0).epsilon(0.05));
  // The spatial maximum sits near the strike.
  double best_s = 0.0, best_a = -1.0;
  for (int i = 0; i <= 400; ++i) {
    const double s = 70.0 * std::exp(i * std::log(140.0 / 70.0) / 400.0);
    const double av = corr.a_bar(0.9, s);
    if (av > best_a) {
      best_a = av;
      best_s = s;
    }
  }
  CHECK(best_s > 95.0);
  CHECK(best_s < 105.0);
}

TEST_CASE("the alternate ergodic form is reported as a diagnostic") {
  const auto corr = make_corrector(PayoffSpec::call(100.0), 1.0, 1.0);
  const double t = 0.3;
  const double e = corr.eta(t);
  CHECK(corr.a_bar_alternate(t, 100.0) ==
        doctest::Approx(corr.a_bar(t, 100.0) / (e * e)).epsilon(1e-13));
  CHECK(corr.a_bar_alternate(1.0, 100.0) ==
        doctest::Approx(corr.a_bar(1.0, 100.0)).epsilon(1e-13));
}

}  // namespace
}  // namespace smallcost
