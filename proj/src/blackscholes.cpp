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

#include "smallcost/blackscholes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "smallcost/numerics.hpp"
#include "smallcost/rng.hpp"

namespace smallcost {

namespace {

constexpr double kMaxPanelWidth = 1.5;   // quadrature panel cap, in kernel sd
constexpr double kExpiryWarn = 1e-4;     // flag kinked greeks inside this
constexpr double kExpiryLocal = 1e-12;   // below this, differentiate the payoff
constexpr std::size_t kCacheCap = 1 << 18;

double csv_num(char* buf, std::size_t n, double x) {
  std::snprintf(buf, n, "%.17g", x);
  return x;
}

}  // namespace

BSField::BSField(MarketParams market, PayoffSpec payoff)
    : market_(std::move(market)), payoff_(std::move(payoff)) {
  market_.validate();
  payoff_.validate();
}

Greeks BSField::closed_form(double tau, double s) const {
  const double r = market_.r;
  const double sig = market_.sigma1();
  Greeks out;
  switch (payoff_.kind) {
    case PayoffKind::kZero:
      return out;
    case PayoffKind::kForward:
      // e^{-r tau} E[S_T] = s for every horizon.
      out.value = s;
      out.delta = 1.0;
      return out;
    default:
      break;
  }

  // Kinked payoffs: exact payoff value at expiry, greeks from a vanishing
  // effective horizon (finite, honest, flagged).
  const bool at_expiry = tau <= 0.0;
  const double tau_eff = std::max(tau, 1e-16);
  const double v = sig * std::sqrt(tau_eff);
  const double disc = std::exp(-r * tau_eff);
  const double K = payoff_.strike;
  const double d1 = (std::log(s / K) + (r + 0.5 * sig * sig) * tau_eff) / v;
  const double d2 = d1 - v;
  out.singularity_warning = tau < kExpiryWarn;

  switch (payoff_.kind) {
    case PayoffKind::kCall:
      out.value = s * normal_cdf(d1) - K * disc * normal_cdf(d2);
      out.delta = normal_cdf(d1);
      out.gamma = normal_pdf(d1) / (s * v);
      break;
    case PayoffKind::kPut:
      out.value = K * disc * normal_cdf(-d2) - s * normal_cdf(-d1);
      out.delta = normal_cdf(d1) - 1.0;
      out.gamma = normal_pdf(d1) / (s * v);
      break;
    case PayoffKind::kDigital:
      out.value = disc * normal_cdf(d2);
      out.delta = disc * normal_pdf(d2) / (s * v);
      out.gamma = -disc * normal_pdf(d2) / (s * s * v) * (d2 / v + 1.0);
      break;
    default:
      throw std::logic_error("closed_form: unexpected payoff kind");
  }
  if (at_expiry) out.value = evaluate_payoff(payoff_, s);
  out.s2_gamma = s * s * out.gamma;
  return out;
}

Greeks BSField::quadrature(double tau, double s) const {
  Greeks out;
  out.singularity_warning =
      tau < kExpiryWarn && regularity_class(payoff_) != RegularityClass::kSmooth;

  if (tau < kExpiryLocal) {
    // The log-normal kernel has collapsed to a point mass; report the
    // payoff's own local shape.
    out.value = evaluate_payoff(payoff_, s);
    const double h = 1e-6 * s;
    const double up = evaluate_payoff(payoff_, s + h);
    const double dn = evaluate_payoff(payoff_, s - h);
    out.delta = (up - dn) / (2.0 * h);
    out.gamma = (up - 2.0 * out.value + dn) / (h * h);
    out.s2_gamma = s * s * out.gamma;
    return out;
  }

  const double r = market_.r;
  const double sig = market_.sigma1();
  const double m = (r - 0.5 * sig * sig) * tau;
  const double v = sig * std::sqrt(tau);
  const double disc = std::exp(-r * tau);
  const double ls = std::log(s);

  // Map a spot level to its standardized log-return coordinate.
  const auto to_x = [&](double level) { return (std::log(level) - ls - m) / v; };

  // Integration window and interior kink breakpoints.
  double x_lo = -13.5;
  double x_hi = 13.5;
  bool graded_kink = false;
  std::vector<double> breaks;
  if (payoff_.kind == PayoffKind::kPowerCall) {
    const double xk = to_x(payoff_.strike);
    // A fractional power leaves the integrand non-smooth at the kink; mark
    // it so the panel builder grades into that endpoint.
    graded_kink =
        xk > x_lo && payoff_.exponent != std::floor(payoff_.exponent);
    x_lo = std::max(x_lo, xk);
    // The kernel g * phi decays once x outruns p*v; keep a wide margin.
    x_hi = std::max(x_hi, payoff_.exponent * v + 13.5);
  } else {  // custom table
    const double xt_lo = to_x(payoff_.table_s.front());
    const double xt_hi = to_x(payoff_.table_s.back());
    const double outside = normal_cdf(xt_lo) + normal_cdf(-xt_hi);
    if (outside > 1e-8) {
      throw std::domain_error(
          "BSField: custom payoff table covers too little of the terminal "
          "distribution (extrapolation is not defined)");
    }
    x_lo = std::max(x_lo, xt_lo);
    x_hi = std::min(x_hi, xt_hi);
    for (std::size_t i = 1; i + 1 < payoff_.table_s.size(); ++i) {
      const double xb = to_x(payoff_.table_s[i]);
      if (xb > x_lo && xb < x_hi) breaks.push_back(xb);
    }
  }
  if (!(x_lo < x_hi)) return out;  // payoff region carries no mass

  // Panel edges: window ends, table knots, and -- for fractional powers -- a
  // geometric ladder out of the kink.  On each ladder panel the rescaled
  // integrand is smooth, so fixed-order Gauss rules resolve the endpoint
  // singularity to machine precision at a bounded, tau-independent cost.
  std::vector<double> cuts = {x_lo, x_hi};
  cuts.insert(cuts.end(), breaks.begin(), breaks.end());
  if (graded_kink) {
    for (int k = -24; k <= 3; ++k) {
      const double xb = x_lo + std::ldexp(1.0, k);
      if (xb < x_hi) cuts.push_back(xb);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const auto g_of = [&](double x) {
    return evaluate_payoff(payoff_, std::exp(ls + m + v * x));
  };

  // One sweep feeds all three moments; no panel exceeds kMaxPanelWidth
  // kernel standard deviations, which keeps 16-point Gauss at full accuracy.
  const auto& [nodes, weights] = gauss_legendre(16);
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double gap = cuts[c + 1] - cuts[c];
    const int nseg = std::max(1, static_cast<int>(std::ceil(gap / kMaxPanelWidth)));
    for (int seg = 0; seg < nseg; ++seg) {
      const double a = cuts[c] + gap * seg / nseg;
      const double b = cuts[c] + gap * (seg + 1) / nseg;
      const double half = 0.5 * (b - a);
      const double mid = 0.5 * (a + b);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = mid + half * nodes[i];
        const double gp = half * weights[i] * g_of(x) * normal_pdf(x);
        m0 += gp;
        m1 += gp * x;
        m2 += gp * (x * x - 1.0);
      }
    }
  }

  out.value = disc * m0;
  out.delta = disc * m1 / (v * s);                    // d/dln(s) over s
  out.s2_gamma = disc * (m2 / (v * v) - m1 / v);      // d2/dlns2 - d/dlns
  out.gamma = out.s2_gamma / (s * s);
  return out;
}

Greeks BSField::compute(double t, double s) const {
  const double tau = std::max(market_.T - t, 0.0);
  switch (payoff_.kind) {
    case PayoffKind::kZero:
    case PayoffKind::kForward:
    case PayoffKind::kCall:
    case PayoffKind::kPut:
    case PayoffKind::kDigital:
      return closed_form(tau, s);
    default:
      break;
  }
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const auto it = cache_.find({t, s});
    if (it != cache_.end()) return it->second;
  }
  const Greeks g = quadrature(tau, s);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_.size() < kCacheCap) cache_.emplace(std::make_pair(t, s), g);
  }
  return g;
}

double BSField::value(double t, double s) const { return greeks(t, s).value; }

Greeks BSField::greeks(double t, double s) const {
  if (market_.d() != 1) {
    throw std::invalid_argument(
        "BSField: closed-form and quadrature pricing are one-asset; use "
        "mc_price for d > 1");
  }
  if (t > market_.T + 1e-12) throw std::invalid_argument("BSField: t > T");
  if (!(s > 0.0)) throw std::invalid_argument("BSField: spot must be positive");
  return compute(std::min(t, market_.T), s);
}

Greeks bs_price_and_greeks(const BSField& field, double t, double s) {
  return field.greeks(t, s);
}

double bs_pde_residual(const BSField& field, double t, double s) {
  const double T = field.market().T;
  if (!(t < T)) throw std::invalid_argument("bs_pde_residual: need t < T");
  const double r = field.market().r;
  const double sig = field.market().sigma1();
  const double hs = std::max(1e-5, 1e-4 * s);
  const double ht = 1e-5;

  const double V = field.value(t, s);
  const double Vp = field.value(t, s + hs);
  const double Vm = field.value(t, s - hs);
  const double V_s = (Vp - Vm) / (2.0 * hs);
  const double V_ss = (Vp - 2.0 * V + Vm) / (hs * hs);

  double V_t;
  if (t + ht < T) {
    V_t = (field.value(t + ht, s) - field.value(t - ht, s)) / (2.0 * ht);
  } else {
    // Expiry is inside the forward step; fall back to a one-sided
    // second-order difference.
    V_t = (3.0 * V - 4.0 * field.value(t - ht, s) + field.value(t - 2.0 * ht, s)) /
          (2.0 * ht);
  }
  return -V_t - r * s * V_s - 0.5 * sig * sig * s * s * V_ss + r * V;
}

void QPathBatch::write_csv(std::ostream& out) const {
  const int d = static_cast<int>(spots.size());
  out << "time,path_id";
  if (d == 1) {
    out << ",spot";
  } else {
    for (int j = 0; j < d; ++j) out << ",spot" << j;
  }
  out << "\n";
  char buf[40];
  for (int k = 0; k < n_times(); ++k) {
    for (int p = 0; p < n_paths(); ++p) {
      csv_num(buf, sizeof(buf), times[k]);
      out << buf << "," << p;
      for (int j = 0; j < d; ++j) {
        csv_num(buf, sizeof(buf), spots[static_cast<std::size_t>(j)](p, k));
        out << "," << buf;
      }
      out << "\n";
    }
  }
}

QPathBatch sample_q_paths(const MarketParams& market, double t0,
                          const Eigen::VectorXd& s0, const Eigen::VectorXd& grid,
                          int n_paths, std::uint64_t seed, bool antithetic) {
  market.validate();
  const int d = market.d();
  if (s0.size() != d) throw std::invalid_argument("sample_q_paths: s0 has wrong dimension");
  if ((s0.array() <= 0.0).any()) {
    throw std::invalid_argument("sample_q_paths: spots must be positive");
  }
  if (n_paths < 1) throw std::invalid_argument("sample_q_paths: need at least one path");
  const int n = static_cast<int>(grid.size());
  if (n < 2) throw std::invalid_argument("sample_q_paths: grid needs at least two points");
  if (std::abs(grid[0] - t0) > 1e-12 || std::abs(grid[n - 1] - market.T) > 1e-12) {
    throw std::invalid_argument("sample_q_paths: grid must start at t0 and end at T");
  }
  for (int k = 1; k < n; ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw std::invalid_argument("sample_q_paths: grid must be strictly increasing");
    }
  }
  if (antithetic && n_paths % 2 != 0) {
    throw std::invalid_argument("sample_q_paths: antithetic needs an even path count");
  }

  QPathBatch batch;
  batch.times = grid;
  batch.seed = seed;
  batch.antithetic = antithetic;
  batch.spots.assign(static_cast<std::size_t>(d),
                     Eigen::MatrixXd(n_paths, n));

  const Eigen::MatrixXd cov = market.sigma_sigma_t();
  Eigen::VectorXd drift(d);
  for (int j = 0; j < d; ++j) drift[j] = market.r - 0.5 * cov(j, j);

  Eigen::VectorXd ls(d), z(d), dls(d);
  for (int p = 0; p < n_paths; ++p) {
    const std::uint64_t stream = antithetic ? static_cast<std::uint64_t>(p / 2)
                                            : static_cast<std::uint64_t>(p);
    const double sign = (antithetic && (p % 2 == 1)) ? -1.0 : 1.0;
    CounterRng rng(seed, stream);
    ls = s0.array().log();
    for (int j = 0; j < d; ++j) batch.spots[static_cast<std::size_t>(j)](p, 0) = s0[j];
    for (int k = 1; k < n; ++k) {
      const double dt = grid[k] - grid[k - 1];
      const double sq = std::sqrt(dt);
      for (int j = 0; j < d; ++j) {
        z[j] = sign * rng.normal(static_cast<std::uint64_t>(k - 1) *
                                     static_cast<std::uint64_t>(d) +
                                 static_cast<std::uint64_t>(j));
      }
      dls.noalias() = market.sigma * z;
      for (int j = 0; j < d; ++j) {
        ls[j] += drift[j] * dt + sq * dls[j];
        batch.spots[static_cast<std::size_t>(j)](p, k) = std::exp(ls[j]);
      }
    }
  }
  return batch;
}

QPathBatch sample_q_paths(const MarketParams& market, double t0, double s0,
                          const Eigen::VectorXd& grid, int n_paths,
                          std::uint64_t seed, bool antithetic) {
  Eigen::VectorXd v(1);
  v << s0;
  return sample_q_paths(market, t0, v, grid, n_paths, seed, antithetic);
}

McEstimate mc_price(const MarketParams& market, const PayoffSpec& payoff,
                    double t0, const Eigen::VectorXd& s0, int n_paths,
                    std::uint64_t seed) {
  market.validate();
  payoff.validate();
  const int d = market.d();
  if (s0.size() != d) throw std::invalid_argument("mc_price: s0 has wrong dimension");
  if (n_paths < 2) throw std::invalid_argument("mc_price: need at least two paths");
  const double tau = market.T - t0;
  if (tau < 0.0) throw std::invalid_argument("mc_price: t0 > T");
  if (tau == 0.0) return {evaluate_payoff(payoff, s0), 0.0};

  const Eigen::MatrixXd cov = market.sigma_sigma_t();
  Eigen::VectorXd drift(d);
  for (int j = 0; j < d; ++j) drift[j] = (market.r - 0.5 * cov(j, j)) * tau;
  const double sq = std::sqrt(tau);
  const double disc = std::exp(-market.r * tau);

  const int n_pairs = n_paths / 2;
  double sum = 0.0, sumsq = 0.0;
  Eigen::VectorXd z(d), st(d);
  for (int p = 0; p < n_pairs; ++p) {
    CounterRng rng(seed, static_cast<std::uint64_t>(p));
    double pair = 0.0;
    for (int half = 0; half < 2; ++half) {
      const double sign = half == 0 ? 1.0 : -1.0;
      for (int j = 0; j < d; ++j) {
        z[j] = sign * rng.normal(static_cast<std::uint64_t>(j));
      }
      const Eigen::VectorXd shock = market.sigma * z;
      for (int j = 0; j < d; ++j) {
        st[j] = s0[j] * std::exp(drift[j] + sq * shock[j]);
      }
      pair += disc * evaluate_payoff(payoff, st);
    }
    pair *= 0.5;
    sum += pair;
    sumsq += pair * pair;
  }
  const double mean = sum / n_pairs;
  const double var = std::max(0.0, sumsq / n_pairs - mean * mean);
  return {mean, std::sqrt(var / n_pairs)};
}

}  // namespace smallcost
