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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace smallcost {

namespace {

// Fourth-order central first derivative from four flank samples
// (f(x+2h), f(x+h), f(x-h), f(x-2h)).
double d1_5pt(double fp2, double fp1, double fm1, double fm2, double h) {
  return (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
}

// Fourth-order central second derivative.
double d2_5pt(double fp2, double fp1, double f0, double fm1, double fm2, double h) {
  return (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
}

}  // namespace

MertonSolution::MertonSolution(MarketParams market, Preferences prefs,
                               PayoffSpec payoff)
    : market_(std::move(market)),
      prefs_(std::move(prefs)),
      bs_(market_, std::move(payoff)) {
  prefs_.validate();
  if (prefs_.kappa == 1 && !(market_.r > 0.0)) {
    throw std::invalid_argument(
        "MertonSolution: consumption requires r > 0 (the v2 factor contains "
        "log r; the r -> 0 limit is unsupported)");
  }
  const Eigen::VectorXd excess =
      market_.mu - market_.r * Eigen::VectorXd::Ones(market_.d());
  excess_dir_ = market_.sigma_sigma_t().llt().solve(excess);
  q_ = excess.dot(excess_dir_);
}

DiscountFactors MertonSolution::discount_factors(double t) const {
  check_time(t);
  const double tau = std::max(market_.T - t, 0.0);
  const double r = market_.r;
  const double kappa = static_cast<double>(prefs_.kappa);

  DiscountFactors df;
  if (r == 0.0) {
    df.v1 = 1.0;  // kappa = 0 here (the constructor rejects kappa=1, r=0)
    df.v2 = -0.5 * q_ * tau;
    return df;
  }
  df.v1 = r / (kappa + std::exp(-r * tau) * (r - kappa));

  if (prefs_.kappa == 0) {
    df.v2 = -0.5 * q_ * tau;
    return df;
  }
  // kappa = 1, r > 0.
  const double E = std::exp(r * tau);
  const double D = E + r - 1.0;
  const double lr = std::log(r);
  const double bracket = (lr - 1.0) * (E - 1.0) + (r * tau * E - E + 1.0) -
                         (D * std::log(D) - D - r * lr + r) +
                         0.5 * q_ * ((E - 1.0) / r + (r - 1.0) * tau);
  df.v2 = -bracket / D;
  return df;
}

MertonSolution::Value MertonSolution::value(double t, double s, double z) const {
  const DiscountFactors df = discount_factors(t);
  const double V = payoff_value(t, s);
  Value out;
  out.v = -std::exp(-prefs_.gamma * df.v1 * (z - V) + df.v2);
  out.v_z = -prefs_.gamma * df.v1 * out.v;
  out.v_zz = -prefs_.gamma * df.v1 * out.v_z;
  return out;
}

MertonSolution::Controls MertonSolution::optimal_controls(double t, double s,
                                                          double z) const {
  const DiscountFactors df = discount_factors(t);
  const int d = market_.d();
  Controls out;
  out.y = excess_dir_ / (prefs_.gamma * df.v1);
  if (bs_.payoff().kind != PayoffKind::kZero) {
    // One-asset claims: the hedge-adjustment is the weighted delta s V_s.
    const Greeks g = bs_.greeks(t, s);
    out.y[0] += s * g.delta;
  }
  (void)d;

  if (prefs_.kappa == 1) {
    const double V = payoff_value(t, s);
    const double raw =
        df.v1 * (z - V) - (std::log(df.v1) + df.v2) / prefs_.gamma;
    out.consumption_clamped = raw < 0.0;
    out.c = std::max(raw, 0.0);
  }
  return out;
}

double MertonSolution::hjb_residual(double t, double s, double z) const {
  if (market_.d() != 1) {
    throw std::invalid_argument("hjb_residual: verification sweep is one-asset");
  }
  if (!(t < market_.T)) throw std::invalid_argument("hjb_residual: need t < T");
  const double mu = market_.mu[0];
  const double r = market_.r;
  const double sig = market_.sigma1();

  // The value function is an exponential in z with rate gamma*v1 and in s
  // with rate gamma*v1*V_s; steps are sized against those rates so that the
  // fourth-order truncation and the rounding floor stay balanced even where
  // the deep-in-the-money position y ~ s amplifies the cross terms.
  const DiscountFactors df = discount_factors(t);
  const double rate_z = prefs_.gamma * df.v1;
  double delta_mag = 0.0;
  if (bs_.payoff().kind != PayoffKind::kZero) {
    delta_mag = std::abs(bs_.greeks(t, s).delta);
  }
  const double rate_s = rate_z * std::max(1.0, delta_mag);
  const auto clamp_step = [](double h) { return std::clamp(h, 1e-5, 2e-2); };
  const double ht = std::min(1e-5, (market_.T - t) / 8.0);
  const double hs = clamp_step(7e-3 / rate_s);
  const double hz = clamp_step(4e-3 / rate_z);

  const auto W = [&](double tt, double ss, double zz) {
    return value(tt, ss, zz).v;
  };
  const double v0 = W(t, s, z);

  const double v_t = d1_5pt(W(t + 2 * ht, s, z), W(t + ht, s, z),
                            W(t - ht, s, z), W(t - 2 * ht, s, z), ht);
  const double sp2 = W(t, s + 2 * hs, z), sp1 = W(t, s + hs, z);
  const double sm1 = W(t, s - hs, z), sm2 = W(t, s - 2 * hs, z);
  const double v_s = d1_5pt(sp2, sp1, sm1, sm2, hs);
  const double v_ss = d2_5pt(sp2, sp1, v0, sm1, sm2, hs);
  const double zp2 = W(t, s, z + 2 * hz), zp1 = W(t, s, z + hz);
  const double zm1 = W(t, s, z - hz), zm2 = W(t, s, z - 2 * hz);
  const double v_z = d1_5pt(zp2, zp1, zm1, zm2, hz);
  const double v_zz = d2_5pt(zp2, zp1, v0, zm1, zm2, hz);

  // Mixed derivative: the z-direction 5-point rule applied at each of the
  // four s flanks.
  const auto dz = [&](double ss) {
    return d1_5pt(W(t, ss, z + 2 * hz), W(t, ss, z + hz), W(t, ss, z - hz),
                  W(t, ss, z - 2 * hz), hz);
  };
  const double v_sz = d1_5pt(dz(s + 2 * hs), dz(s + hs), dz(s - hs), dz(s - 2 * hs), hs);

  const Controls ctrl = optimal_controls(t, s, z);
  const double y = ctrl.y[0];

  double residual = -v_t - mu * s * v_s - 0.5 * sig * sig * s * s * v_ss -
                    r * z * v_z -
                    (y * ((mu - r) * v_z + sig * sig * s * v_sz) +
                     0.5 * sig * sig * y * y * v_zz);
  if (prefs_.kappa == 1) residual -= prefs_.u1_conjugate(v_z);
  return residual;
}

bool MertonSolution::consumption_admissible(double t, double s, double z) const {
  if (prefs_.kappa == 0) return true;
  return value(t, s, z).v_z <= prefs_.gamma;
}

double MertonSolution::consumption_discount(double t, double u) const {
  check_time(t);
  check_time(u);
  if (u < t) throw std::invalid_argument("consumption_discount: u < t");
  if (prefs_.kappa == 0) return 1.0;
  const double r = market_.r;
  const double num = std::exp(r * (market_.T - u)) + r - 1.0;
  const double den = std::exp(r * (market_.T - t)) + r - 1.0;
  return num / den;
}

double MertonSolution::discount_time_integral(double t) const {
  check_time(t);
  const double tau = std::max(market_.T - t, 0.0);
  if (prefs_.kappa == 0) return tau;
  const double r = market_.r;
  const double E = std::exp(r * tau);
  return ((E - 1.0) / r + (r - 1.0) * tau) / (E + r - 1.0);
}

double MertonSolution::payoff_value(double t, double s) const {
  if (bs_.payoff().kind == PayoffKind::kZero) return 0.0;
  return bs_.value(t, s);
}

void MertonSolution::check_time(double t) const {
  // The closed forms extend smoothly to t < 0 (longer horizons), which the
  // finite-difference residual relies on near t = 0; only t past T is
  // rejected.
  if (t > market_.T + 1e-9) {
    throw std::invalid_argument("MertonSolution: t > T");
  }
}

}  // namespace smallcost
