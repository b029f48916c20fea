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

#include "smallcost/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "smallcost/numerics.hpp"
#include "smallcost/rng.hpp"

namespace smallcost {

namespace {

// Offsets (in standard deviations) whose union around the kernel mean and the
// payoff kinks partitions the convolution axis into panels a fixed-order
// Gauss rule resolves.
constexpr double kPanelScales[] = {0.0, 0.5, 1.0, 1.5, 2.0,
                                   3.0, 4.0, 6.0, 8.0, 10.0};
constexpr int kRannacherSteps = 5;  // fully implicit steps nearest expiry

// Graded backward mesh t_k = T - (T - t0) (k/n)^3, k = 0..n: t[0] = T,
// t[n] = t0, step sizes shrinking cubically toward expiry.
Eigen::VectorXd graded_times(double T, double t0, int n) {
  Eigen::VectorXd t(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(n);
    t[k] = T - (T - t0) * f * f * f;
  }
  return t;
}

// Log-spot locations of the payoff's kinks, where the source concentrates in
// a ridge of width sigma sqrt(T - t) near expiry. Empty for globally smooth
// payoffs, whose source is constant in spot.
std::vector<double> ridge_centers(const PayoffSpec& payoff) {
  switch (payoff.kind) {
    case PayoffKind::kZero:
    case PayoffKind::kForward:
      return {};
    case PayoffKind::kCall:
    case PayoffKind::kPut:
    case PayoffKind::kPowerCall:
    case PayoffKind::kDigital:
      return {std::log(payoff.strike)};
    case PayoffKind::kCustom: {
      std::vector<double> centers;
      centers.reserve(payoff.table_s.size());
      for (double s : payoff.table_s) centers.push_back(std::log(s));
      return centers;
    }
  }
  throw std::invalid_argument("ridge_centers: unknown payoff kind");
}

// int a_bar(tslice, e^y) N(y; c, kap_sd^2) dy by Gauss panels whose
// breakpoints track both the kernel (center c, width kap_sd) and the source
// ridges (width ridge_sd around each kink).
double conv_slice(const CorrectorSolution& corrector, double tslice, double c,
                  double kap_sd, double ridge_sd,
                  const std::vector<double>& centers) {
  std::vector<double> pts;
  pts.reserve((centers.size() + 1) * 19 + 2);
  double lo = c - 10.0 * kap_sd;
  double hi = c + 10.0 * kap_sd;
  for (double center : centers) {
    lo = std::min(lo, center - 10.0 * ridge_sd);
    hi = std::max(hi, center + 10.0 * ridge_sd);
  }
  auto add_around = [&pts](double center, double sd) {
    for (double scale : kPanelScales) {
      pts.push_back(center - scale * sd);
      if (scale > 0.0) pts.push_back(center + scale * sd);
    }
  };
  add_around(c, kap_sd);
  for (double center : centers) add_around(center, ridge_sd);
  for (double& p : pts) p = std::min(std::max(p, lo), hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const auto& [glx, glw] = gauss_legendre(8);
  double out = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double mid = 0.5 * (pts[i] + pts[i + 1]);
    const double hl = 0.5 * (pts[i + 1] - pts[i]);
    for (std::size_t q = 0; q < glx.size(); ++q) {
      const double y = mid + hl * glx[q];
      const double z = (y - c) / kap_sd;
      out += hl * glw[q] * corrector.a_bar(tslice, std::exp(y)) *
             normal_pdf(z) / kap_sd;
    }
  }
  return out;
}

// u_tilde(T - tau_star, x) for every grid node by the exact probabilistic
// representation over [T - tau_star, T]: outer Gauss rule in w with
// time-to-expiry u = w^3 (which flattens the (T - t)^(-2/3) growth of the
// source), inner Gaussian-kernel convolution per slice.
Eigen::VectorXd layer_values(const CorrectorSolution& corrector,
                             const Eigen::VectorXd& x_nodes, double tau_star,
                             bool smooth_source,
                             const std::vector<double>& centers, int n_outer) {
  const MarketParams& market = corrector.merton().market();
  const double T = market.T;
  const double sigma = market.sigma1();
  const double t_star = T - tau_star;
  const double wmax = std::cbrt(tau_star);
  const auto& [glx, glw] = gauss_legendre(n_outer);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(x_nodes.size());
  Eigen::VectorXd vals(x_nodes.size());
  for (std::size_t q = 0; q < glx.size(); ++q) {
    const double wv = 0.5 * wmax * (glx[q] + 1.0);
    const double wt = 0.5 * wmax * glw[q];
    const double u = wv * wv * wv;
    const double tslice = T - u;
    const double kap_sd = sigma * std::sqrt(std::max(tau_star - u, 1e-300));
    const double mshift = (market.r - 0.5 * sigma * sigma) * (tau_star - u);
    const double disc = corrector.merton().consumption_discount(t_star, tslice);
    for (Eigen::Index i = 0; i < x_nodes.size(); ++i) {
      if (smooth_source || kap_sd < 1e-12) {
        vals[i] = corrector.a_bar(tslice, std::exp(x_nodes[i] + mshift));
      } else {
        vals[i] = conv_slice(corrector, tslice, x_nodes[i] + mshift, kap_sd,
                             sigma * std::sqrt(u), centers);
      }
    }
    out += (wt * 3.0 * wv * wv * disc) * vals;
  }
  return out;
}

// Integral of the source over one backward interval [tb, ta] (tb < ta <= T)
// from its endpoint values. On singular meshes the source is modeled as
// A (T-u)^(-2/3) + B through the endpoints, which integrates the near-expiry
// growth of kinked payoffs exactly in the power-law limit; the last interval
// (ta = T, where the source is not evaluable) uses the one-sided power law
// through fb alone.
double source_integral(double T, double ta, double tb, double fa, double fb,
                       bool singular) {
  const double dt = ta - tb;
  if (!singular) return 0.5 * (fa + fb) * dt;
  const double tau_a = T - ta;
  const double tau_b = T - tb;
  if (tau_a < 1e-14) return 3.0 * fb * tau_b;
  const double ga = std::pow(tau_a, -2.0 / 3.0);
  const double gb = std::pow(tau_b, -2.0 / 3.0);
  const double A = (fa - fb) / (ga - gb);
  const double B = fa - A * ga;
  return 3.0 * A * (std::cbrt(tau_b) - std::cbrt(tau_a)) + B * dt;
}

// Supremum over spot of the source at time t: global grid around the probe
// spot plus a window per payoff kink whose width tracks the shrinking ridge.
double sup_source(const CorrectorSolution& corrector, double t_node,
                  double t_probe, double s_probe,
                  const std::vector<double>& centers) {
  const MarketParams& market = corrector.merton().market();
  const double sigma = market.sigma1();
  const double hw = 6.0 * sigma * std::sqrt(market.T - t_probe);
  const double tau = market.T - t_node;
  double sup = 0.0;
  constexpr int kGlobal = 241;
  for (int i = 0; i < kGlobal; ++i) {
    const double x = -hw + 2.0 * hw * i / (kGlobal - 1);
    sup = std::max(sup, corrector.a_bar(t_node, s_probe * std::exp(x)));
  }
  if (tau > 0.0) {
    constexpr int kWindow = 161;
    const double ridge_hw = 8.0 * sigma * std::sqrt(tau);
    for (double center : centers) {
      for (int i = 0; i < kWindow; ++i) {
        const double x = -ridge_hw + 2.0 * ridge_hw * i / (kWindow - 1);
        sup = std::max(sup, corrector.a_bar(t_node, std::exp(center + x)));
      }
    }
  }
  return sup;
}

}  // namespace

UTildeField::UTildeField(Eigen::VectorXd times, Eigen::VectorXd log_spots,
                         Eigen::MatrixXd values, Eigen::MatrixXd std_errors,
                         UTildeSolver solver)
    : times_(std::move(times)),
      log_spots_(std::move(log_spots)),
      values_(std::move(values)),
      std_errors_(std::move(std_errors)),
      solver_(solver) {
  if (times_.size() < 1 || log_spots_.size() < 1) {
    throw std::invalid_argument("UTildeField: empty grid");
  }
  for (Eigen::Index i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("UTildeField: times must strictly increase");
    }
  }
  for (Eigen::Index i = 1; i < log_spots_.size(); ++i) {
    if (!(log_spots_[i] > log_spots_[i - 1])) {
      throw std::invalid_argument(
          "UTildeField: log spots must strictly increase");
    }
  }
  if (values_.rows() != times_.size() || values_.cols() != log_spots_.size()) {
    throw std::invalid_argument("UTildeField: values shape mismatch");
  }
  if (std_errors_.size() != 0 && (std_errors_.rows() != values_.rows() ||
                                  std_errors_.cols() != values_.cols())) {
    throw std::invalid_argument("UTildeField: std_errors shape mismatch");
  }
  if (!values_.allFinite() || !std_errors_.allFinite()) {
    throw std::invalid_argument("UTildeField: entries must be finite");
  }
}

double UTildeField::value_at(double t, double s) const {
  if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(t)) {
    throw std::invalid_argument("UTildeField::value_at: bad query point");
  }
  const double x = std::log(s);
  const double t_lo = times_[0];
  const double t_hi = times_[times_.size() - 1];
  const double x_lo = log_spots_[0];
  const double x_hi = log_spots_[log_spots_.size() - 1];
  const double t_tol = 1e-9 * std::max(1.0, t_hi - t_lo);
  const double x_tol = 1e-9 * std::max(1.0, x_hi - x_lo);
  if (t < t_lo - t_tol || t > t_hi + t_tol) {
    throw std::domain_error(
        "UTildeField::value_at: time outside the resolved range");
  }
  if (x < x_lo - x_tol || x > x_hi + x_tol) {
    throw std::domain_error(
        "UTildeField::value_at: spot outside the log-spot grid");
  }

  auto bracket = [](const Eigen::VectorXd& axis, double q, Eigen::Index* idx,
                    double* weight) {
    if (axis.size() == 1) {
      *idx = 0;
      *weight = 0.0;
      return;
    }
    Eigen::Index i =
        std::upper_bound(axis.data(), axis.data() + axis.size(), q) -
        axis.data();
    i = std::min(std::max(i, Eigen::Index{1}), axis.size() - 1) - 1;
    *idx = i;
    const double w = (q - axis[i]) / (axis[i + 1] - axis[i]);
    *weight = std::min(std::max(w, 0.0), 1.0);
  };
  Eigen::Index it = 0, ix = 0;
  double wt = 0.0, wx = 0.0;
  bracket(times_, t, &it, &wt);
  bracket(log_spots_, x, &ix, &wx);
  const Eigen::Index it1 = std::min(it + 1, times_.size() - 1);
  const Eigen::Index ix1 = std::min(ix + 1, log_spots_.size() - 1);
  const double lo = (1.0 - wx) * values_(it, ix) + wx * values_(it, ix1);
  const double hi = (1.0 - wx) * values_(it1, ix) + wx * values_(it1, ix1);
  return (1.0 - wt) * lo + wt * hi;
}

UTildeField solve_u_tilde_fd(const CorrectorSolution& corrector,
                             const GridSpec& grid) {
  const MarketParams& market = corrector.merton().market();
  const Preferences& prefs = corrector.merton().prefs();
  const PayoffSpec& payoff = corrector.merton().field().payoff();
  if (grid.n_space < 50 || grid.n_time < 50) {
    throw std::invalid_argument(
        "solve_u_tilde_fd: need at least 50 points per dimension");
  }
  if (grid.n_space % 2 != 0) {
    throw std::invalid_argument(
        "solve_u_tilde_fd: n_space must be even so the center spot is a node");
  }
  if (!(grid.s_center > 0.0) || !std::isfinite(grid.s_center)) {
    throw std::invalid_argument("solve_u_tilde_fd: s_center must be positive");
  }
  if (!(grid.width > 0.0) || !std::isfinite(grid.width)) {
    throw std::invalid_argument("solve_u_tilde_fd: width must be positive");
  }
  if (grid.n_outer < 4) {
    throw std::invalid_argument("solve_u_tilde_fd: n_outer must be >= 4");
  }
  if (!std::isfinite(grid.t0) || !(grid.t0 < market.T)) {
    throw std::invalid_argument("solve_u_tilde_fd: t0 must be before expiry");
  }
  if (regularity_class(payoff) == RegularityClass::kDiscontinuous) {
    throw std::invalid_argument(
        "solve_u_tilde_fd: the second-order term diverges for discontinuous "
        "payoffs; run divergence_probe for the refinement-ladder evidence");
  }

  const double T = market.T;
  const double sigma = market.sigma1();
  const double kappa = static_cast<double>(prefs.kappa);
  const double drift = market.r - 0.5 * sigma * sigma;
  const int M = grid.n_space;
  const int N = grid.n_time;

  const double xc = std::log(grid.s_center);
  const double hw = grid.width * sigma * std::sqrt(T - grid.t0);
  const double h = 2.0 * hw / M;
  Eigen::VectorXd x(M + 1);
  for (int i = 0; i <= M; ++i) x[i] = xc - hw + h * i;
  const Eigen::VectorXd times = graded_times(T, grid.t0, N);

  const bool smooth = regularity_class(payoff) == RegularityClass::kSmooth;
  const std::vector<double> centers = ridge_centers(payoff);
  int k_star = 1;
  if (!smooth) {
    for (int k = 1; k < N; ++k) {
      if (sigma * std::sqrt(T - times[k]) >= 3.0 * h) {
        k_star = k;
        break;
      }
    }
  }
  const double tau_star = T - times[k_star];

  const int n_levels = N - k_star + 1;
  Eigen::MatrixXd values(n_levels, M + 1);
  Eigen::VectorXd u =
      layer_values(corrector, x, tau_star, smooth, centers, grid.n_outer);
  values.row(n_levels - 1) = u.transpose();

  auto source_row = [&](double t) {
    Eigen::VectorXd f(M + 1);
    for (int i = 0; i <= M; ++i) f[i] = corrector.a_bar(t, std::exp(x[i]));
    return f;
  };
  auto apply_operator = [&](double t, const Eigen::VectorXd& v) {
    const double kill = kappa * corrector.merton().discount_factors(t).v1;
    Eigen::VectorXd out(M + 1);
    for (int i = 1; i < M; ++i) {
      out[i] = drift * (v[i + 1] - v[i - 1]) / (2.0 * h) +
               0.5 * sigma * sigma * (v[i + 1] - 2.0 * v[i] + v[i - 1]) /
                   (h * h) -
               kill * v[i];
    }
    out[0] = drift * (v[1] - v[0]) / h - kill * v[0];
    out[M] = drift * (v[M] - v[M - 1]) / h - kill * v[M];
    return out;
  };

  Eigen::VectorXd f_a = source_row(times[k_star]);
  for (int j = k_star; j < N; ++j) {
    const double ta = times[j];
    const double tb = times[j + 1];
    const double dt = ta - tb;
    const double theta = (j - k_star) < kRannacherSteps ? 1.0 : 0.5;
    const Eigen::VectorXd f_b = source_row(tb);
    const Eigen::VectorXd rhs = u + (1.0 - theta) * dt * apply_operator(ta, u) +
                                0.5 * dt * (f_a + f_b);

    const double kill_b =
        kappa * corrector.merton().discount_factors(tb).v1;
    Eigen::VectorXd lower(M + 1), diag(M + 1), upper(M + 1);
    diag.setConstant(1.0 + theta * dt * (sigma * sigma / (h * h) + kill_b));
    upper.setConstant(theta * dt *
                      (-drift / (2.0 * h) - 0.5 * sigma * sigma / (h * h)));
    lower.setConstant(theta * dt *
                      (drift / (2.0 * h) - 0.5 * sigma * sigma / (h * h)));
    diag[0] = 1.0 + theta * dt * (drift / h + kill_b);
    upper[0] = -theta * dt * drift / h;
    diag[M] = 1.0 + theta * dt * (-drift / h + kill_b);
    lower[M] = theta * dt * drift / h;

    u = thomas_solve(lower, diag, upper, rhs);
    values.row(N - (j + 1)) = u.transpose();
    f_a = f_b;
  }

  Eigen::VectorXd times_ascending(n_levels);
  for (int i = 0; i < n_levels; ++i) times_ascending[i] = times[N - i];
  return UTildeField(std::move(times_ascending), x, std::move(values),
                     Eigen::MatrixXd(), UTildeSolver::kFiniteDifference);
}

McEstimate u_tilde_mc(const CorrectorSolution& corrector, double t, double s,
                      int n_paths, std::uint64_t seed, int n_time) {
  const MarketParams& market = corrector.merton().market();
  if (n_paths < 100) {
    throw std::invalid_argument("u_tilde_mc: need at least 100 paths");
  }
  if (n_paths % 2 != 0) {
    throw std::invalid_argument(
        "u_tilde_mc: antithetic pairs need an even path count");
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::invalid_argument("u_tilde_mc: spot must be positive");
  }
  if (!std::isfinite(t) || !(t < market.T)) {
    throw std::invalid_argument("u_tilde_mc: t must be before expiry");
  }
  if (n_time < 2) {
    throw std::invalid_argument("u_tilde_mc: need at least two time steps");
  }

  const double T = market.T;
  const double sigma = market.sigma1();
  const double drift = market.r - 0.5 * sigma * sigma;
  const int N = n_time;
  const Eigen::VectorXd graded = graded_times(T, t, N);
  Eigen::VectorXd ts(N + 1);
  for (int i = 0; i <= N; ++i) ts[i] = graded[N - i];  // ascending t .. T
  Eigen::VectorXd disc(N + 1);
  for (int i = 0; i <= N; ++i) {
    disc[i] = corrector.merton().consumption_discount(t, ts[i]);
  }
  const bool singular =
      regularity_class(corrector.merton().field().payoff()) !=
      RegularityClass::kSmooth;
  const double x0 = std::log(s);
  const double f0 = corrector.a_bar(t, s);

  const int n_pairs = n_paths / 2;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int m = 0; m < n_pairs; ++m) {
    const CounterRng rng(seed, static_cast<std::uint64_t>(m));
    double pair_total = 0.0;
    for (int half = 0; half < 2; ++half) {
      const double sign = half == 0 ? 1.0 : -1.0;
      double log_s = x0;
      double f_prev = f0;  // disc[0] = 1
      double total = 0.0;
      for (int j = 0; j < N; ++j) {
        const double dt = ts[j + 1] - ts[j];
        const double z = sign * rng.normal(static_cast<std::uint64_t>(j));
        log_s += drift * dt + sigma * std::sqrt(dt) * z;
        if (j < N - 1) {
          const double f_new =
              corrector.a_bar(ts[j + 1], std::exp(log_s)) * disc[j + 1];
          total += 0.5 * (f_prev + f_new) * dt;
          f_prev = f_new;
        } else if (singular) {
          total += 3.0 * f_prev * (T - ts[N - 1]);
        } else {
          const double f_new =
              corrector.a_bar(T, std::exp(log_s)) * disc[N];
          total += 0.5 * (f_prev + f_new) * dt;
        }
      }
      pair_total += 0.5 * total;
    }
    sum += pair_total;
    sum_sq += pair_total * pair_total;
  }
  McEstimate est;
  est.value = sum / n_pairs;
  const double var =
      std::max(0.0, (sum_sq - sum * sum / n_pairs) / (n_pairs - 1));
  est.std_error = std::sqrt(var / n_pairs);
  return est;
}

double u_tilde_zero(const CorrectorSolution& corrector, double t) {
  const MarketParams& market = corrector.merton().market();
  const double sigma = market.sigma1();
  const double mbar = (market.mu[0] - market.r) / (sigma * sigma);
  const double lambda_sum = corrector.lambda_sell() + corrector.lambda_buy();
  const double a0 = 0.5 * sigma * sigma *
                    std::pow(0.75 * lambda_sum * mbar * mbar, 2.0 / 3.0);
  return a0 * corrector.merton().discount_time_integral(t);
}

const char* to_string(DivergenceVerdict v) {
  switch (v) {
    case DivergenceVerdict::kConverged:
      return "converged";
    case DivergenceVerdict::kDiverged:
      return "diverged";
    case DivergenceVerdict::kInconclusive:
      return "inconclusive";
  }
  return "unknown";
}

DivergenceReport divergence_probe(const CorrectorSolution& corrector, double t,
                                  double s) {
  const MarketParams& market = corrector.merton().market();
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::invalid_argument("divergence_probe: spot must be positive");
  }
  if (!std::isfinite(t) || !(t < market.T)) {
    throw std::invalid_argument("divergence_probe: t must be before expiry");
  }
  const PayoffSpec& payoff = corrector.merton().field().payoff();
  const std::vector<double> centers = ridge_centers(payoff);
  const bool singular =
      regularity_class(payoff) != RegularityClass::kSmooth;
  const double T = market.T;

  DivergenceReport report;
  const int ladder[4] = {50, 100, 200, 400};
  for (int level = 0; level < 4; ++level) {
    const int n = ladder[level];
    const Eigen::VectorXd ts = graded_times(T, t, n);
    Eigen::VectorXd f(n + 1);
    for (int k = 0; k <= n; ++k) {
      if (T - ts[k] > 1e-14) {
        f[k] = corrector.merton().consumption_discount(t, ts[k]) *
               sup_source(corrector, ts[k], t, s, centers);
      } else {
        f[k] = 0.0;
      }
    }
    double est = 0.0;
    for (int j = 0; j < n; ++j) {
      est += source_integral(T, ts[j], ts[j + 1], f[j], f[j + 1], singular);
    }
    report.estimates[level] = est;
  }
  for (int i = 0; i < 3; ++i) {
    report.growth[i] = report.estimates[i] != 0.0
                           ? report.estimates[i + 1] / report.estimates[i]
                           : 1.0;
  }
  const bool diverged = report.growth[1] > 1.5 && report.growth[2] > 1.5;
  const bool agree = std::abs(report.estimates[3] - report.estimates[2]) <=
                     0.01 * std::abs(report.estimates[3]);
  report.verdict = diverged ? DivergenceVerdict::kDiverged
                            : (agree ? DivergenceVerdict::kConverged
                                     : DivergenceVerdict::kInconclusive);
  report.value = report.estimates[3];
  report.growth_factor = report.growth[2];
  return report;
}

PriceReport price_expansion(const CorrectorSolution& corrector, double t,
                            double s, const Eigen::VectorXd& eps_list,
                            const GridSpec& grid, int mc_paths,
                            std::uint64_t seed) {
  const MarketParams& market = corrector.merton().market();
  const Preferences& prefs = corrector.merton().prefs();
  const PayoffSpec& payoff = corrector.merton().field().payoff();
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::invalid_argument("price_expansion: spot must be positive");
  }
  if (!std::isfinite(t) || !(t < market.T)) {
    throw std::invalid_argument("price_expansion: t must be before expiry");
  }
  for (Eigen::Index i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 0.0) || !std::isfinite(eps_list[i])) {
      throw std::invalid_argument(
          "price_expansion: eps entries must be finite and nonnegative");
    }
  }
  if (mc_paths < 0) {
    throw std::invalid_argument("price_expansion: mc_paths must be >= 0");
  }

  PriceReport report;
  report.t = t;
  report.s = s;
  report.eps = eps_list;

  AuditGrid audit_grid;
  audit_grid.spot_center = s;
  audit_grid.tau_max = std::min(0.1, 0.5 * market.T);
  audit_grid.tau_min = std::min(1e-3, 0.01 * audit_grid.tau_max);
  report.audit = audit_assumptions(market, prefs, payoff, audit_grid);

  const DivergenceReport probe = divergence_probe(corrector, t, s);
  report.divergence = probe.verdict;
  if (probe.verdict == DivergenceVerdict::kDiverged) {
    throw std::invalid_argument(
        "price_expansion: the second-order term grows without bound under "
        "mesh refinement for this payoff (divergence_probe verdict: "
        "diverged); the price expansion does not apply");
  }

  report.u_tilde_0 = u_tilde_zero(corrector, t);
  if (regularity_class(payoff) == RegularityClass::kSmooth) {
    // No payoff curvature: the source equals the claim-free constant, so the
    // second-order terms cancel exactly.
    report.u_tilde_g = report.u_tilde_0;
    report.mc_check = {report.u_tilde_g, 0.0};
  } else {
    const UTildeField field = solve_u_tilde_fd(corrector, grid);
    report.u_tilde_g = field.value_at(t, s);
    if (mc_paths > 0) {
      report.mc_check =
          u_tilde_mc(corrector, t, s, mc_paths, seed, grid.n_time);
    }
  }

  report.value = corrector.merton().field().value(t, s);
  report.h = (report.u_tilde_g - report.u_tilde_0) * corrector.eta(t);
  report.p_eps.resize(eps_list.size());
  for (Eigen::Index i = 0; i < eps_list.size(); ++i) {
    report.p_eps[i] =
        report.value + eps_list[i] * eps_list[i] * report.h;
  }
  return report;
}

PriceReport price_expansion(const CorrectorSolution& corrector, double t,
                            double s, const Eigen::VectorXd& eps_list) {
  GridSpec grid;
  grid.t0 = t;
  grid.s_center = s;
  return price_expansion(corrector, t, s, eps_list, grid);
}

double h_general(const WealthField& u_g, const WealthField& u_0,
                 const WealthField& v_g_z, const WealthField& p_g, double t,
                 double s, double x) {
  if (!u_g || !u_0 || !v_g_z || !p_g) {
    throw std::invalid_argument("h_general: all four fields must be callable");
  }
  const double shift = p_g(t, s, x);
  const double denom = v_g_z(t, s, x + shift);
  if (!std::isfinite(denom) || !(std::abs(denom) > 0.0)) {
    throw std::domain_error(
        "h_general: the marginal value in wealth vanishes at the shifted "
        "point");
  }
  return (u_g(t, s, x + shift) - u_0(t, s, x)) / denom;
}

}  // namespace smallcost
