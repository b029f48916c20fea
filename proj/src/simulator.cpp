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

#include "smallcost/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "smallcost/blackscholes.hpp"
#include "smallcost/merton.hpp"
#include "smallcost/numerics.hpp"
#include "smallcost/rng.hpp"

namespace smallcost {

namespace {

/// Deterministic pairwise reduction: the summation tree depends only on n,
/// never on scheduling, so repeated runs reproduce sums bit for bit.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

/// Continuity correction for a discretely monitored reflecting barrier,
/// -zeta(1/2) / sqrt(2 pi). Checking the band only every dt lets the
/// deviation drift past a continuously monitored edge by this multiple of
/// |alpha| sqrt(dt) on average before the projection fires, so pulling the
/// barrier in by that amount recovers the continuous-reflection cost to
/// leading order in dt.
constexpr double kBarrierShrink = 0.5826;

/// Per-run constants shared by every path of one simulation.
struct RunContext {
  const MertonSolution* merton = nullptr;
  const BSField* field = nullptr;
  bool zero_claim = false;
  double gamma = 0.0;
  int kappa = 0;
  double mu_minus_half = 0.0;  // mu - sigma^2 / 2
  double sigma = 0.0;
  double r = 0.0;
  double T = 0.0;
  double excess_over_var = 0.0;  // (mu - r) / sigma^2
  double lambda_sum = 0.0;
  double t0 = 0.0;
  double s0 = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
};

/// Closed-form one-asset liquidation value; mirrors the box dual cone of
/// liquidation_value without the Portfolio allocation.
double liquidation_one(const CostStructure& costs, double x, double y) {
  const double e3 = costs.epsilon * costs.epsilon * costs.epsilon;
  return x + (y >= 0.0 ? y / (1.0 + e3 * costs.lambda(1, 0))
                       : y * (1.0 + e3 * costs.lambda(0, 1)));
}

/// Band plus the deviation diffusion coefficient alpha (currency units)
/// needed for the discrete-monitoring barrier correction.
struct BandEval {
  BandSpec band;
  double alpha = 0.0;
};

/// Band center, half-width, and alpha in one evaluation. Mirrors the
/// arithmetic of optimal_controls and xi0 so that nt_band agrees with the
/// module-level accessors to rounding error; the fused form exists because
/// this sits in the per-step hot loop.
BandEval band_eval(const RunContext& c, double eps, double t, double s) {
  const double v1 = c.merton->discount_factors(t).v1;
  const double e = 1.0 / (c.gamma * v1);
  double delta = 0.0;
  double s2_gamma = 0.0;
  if (!c.zero_claim) {
    const Greeks g = c.field->greeks(t, s);
    delta = g.delta;
    s2_gamma = g.s2_gamma;
  }
  const double alpha_bar = c.sigma * (e * c.excess_over_var - s2_gamma) / e;
  const double rho0 = std::cbrt(0.75 * c.lambda_sum * alpha_bar * alpha_bar /
                                (c.sigma * c.sigma));
  BandEval out;
  out.band.center = c.excess_over_var / (c.gamma * v1);
  if (!c.zero_claim) out.band.center += s * delta;
  out.band.half_width = eps * (e * rho0);
  out.alpha = e * alpha_bar;
  return out;
}

/// One Brownian step handed to run_path: elapsed time, Brownian increment,
/// and the absolute time reached (pinned to T on the final step).
struct Step {
  double dt = 0.0;
  double dw = 0.0;
  double t_next = 0.0;
};

/// Walks one path through n_steps increments produced by `next` and returns
/// its final state; writes the realized utility and the largest band
/// overshoot observed after the projections. In-loop projections use the
/// barrier pulled in by kBarrierShrink |alpha| sqrt(dt); the initial
/// projection corrects the starting book, not a Brownian overshoot, and uses
/// the plain band.
template <class StepFn>
SimState run_path(const RunContext& c, double eps, const CostStructure& costs,
                  int n_steps, StepFn&& next, double* utility,
                  double* max_overshoot) {
  SimState st;
  st.t = c.t0;
  st.s = c.s0;
  st.x = c.x0;
  st.y = c.y0;
  double over = 0.0;

  // Immediate transfer into the band at t0.
  BandSpec band = band_eval(c, eps, st.t, st.s).band;
  project_to_band(costs, band, &st);
  over = std::max(over, std::abs(st.y - band.center) - band.half_width);
  if (liquidation_one(costs, st.x, st.y) < 0.0) st.insolvent = true;

  for (int k = 0; k < n_steps; ++k) {
    const Step stp = next(k);
    double c_rate = 0.0;
    if (c.kappa == 1) {
      const MertonSolution::Controls ctrl =
          c.merton->optimal_controls(st.t, st.s, st.x + st.y);
      c_rate = ctrl.c;
      if (ctrl.consumption_clamped) ++st.consumption_clamps;
      st.consumption_utility += c.merton->prefs().u1(c_rate) * stp.dt;
    }
    const double s_next =
        st.s * std::exp(c.mu_minus_half * stp.dt + c.sigma * stp.dw);
    st.y *= s_next / st.s;
    st.x += (c.r * st.x - c.kappa * c_rate) * stp.dt;
    st.t = stp.t_next;
    st.s = s_next;
    if (k + 1 < n_steps) {
      // The final step carries the book into expiry: a trade at T cannot
      // raise the liquidation value, it only pays costs.
      const BandEval be = band_eval(c, eps, st.t, st.s);
      band = be.band;
      band.half_width = std::max(
          0.0, band.half_width -
                   kBarrierShrink * std::sqrt(stp.dt) * std::abs(be.alpha));
      project_to_band(costs, band, &st);
      over = std::max(over, std::abs(st.y - band.center) - band.half_width);
      if (liquidation_one(costs, st.x, st.y) < 0.0) st.insolvent = true;
    }
  }

  const double wealth = liquidation_one(costs, st.x, st.y) -
                        evaluate_payoff(c.field->payoff(), st.s);
  *utility = (c.kappa == 1 ? st.consumption_utility : 0.0) +
             c.merton->prefs().u2(wealth);
  *max_overshoot = over;
  return st;
}

RunContext make_context(const CorrectorSolution& corrector,
                        const SimSetup& setup) {
  const MertonSolution& merton = corrector.merton();
  const MarketParams& market = merton.market();
  RunContext c;
  c.merton = &merton;
  c.field = &merton.field();
  c.zero_claim = merton.field().payoff().kind == PayoffKind::kZero;
  c.gamma = merton.prefs().gamma;
  c.kappa = merton.prefs().kappa;
  c.sigma = market.sigma1();
  c.mu_minus_half = market.mu(0) - 0.5 * c.sigma * c.sigma;
  c.r = market.r;
  c.T = market.T;
  c.excess_over_var = (market.mu(0) - market.r) / (c.sigma * c.sigma);
  c.lambda_sum = corrector.lambda_sell() + corrector.lambda_buy();
  c.t0 = setup.t0;
  c.s0 = setup.s0;
  c.y0 = setup.y0;
  c.x0 = setup.x0;
  if (std::isnan(c.y0)) c.y0 = band_eval(c, 0.0, c.t0, c.s0).band.center;
  if (std::isnan(c.x0)) c.x0 = merton.field().value(c.t0, c.s0) - c.y0;
  return c;
}

void validate_setup(const MarketParams& market, const SimSetup& setup,
                    int n_paths, const char* who) {
  if (!(setup.t0 >= 0.0 && setup.t0 < market.T)) {
    throw std::invalid_argument(std::string(who) + ": t0 must lie in [0, T)");
  }
  if (!(setup.s0 > 0.0) || !std::isfinite(setup.s0)) {
    throw std::invalid_argument(std::string(who) +
                                ": s0 must be positive and finite");
  }
  if (!std::isnan(setup.x0) && !std::isfinite(setup.x0)) {
    throw std::invalid_argument(std::string(who) + ": x0 must be finite");
  }
  if (!std::isnan(setup.y0) && !std::isfinite(setup.y0)) {
    throw std::invalid_argument(std::string(who) + ": y0 must be finite");
  }
  if (n_paths < 2) {
    throw std::invalid_argument(std::string(who) +
                                ": need at least two paths for a standard error");
  }
}

/// Shared tail of both entry points: moments of the per-path utilities and
/// the normalized gap below the frictionless value.
void finalize_result(const RunContext& c, SimResult* out) {
  const Eigen::VectorXd& u = out->path_utility;
  const std::size_t n = static_cast<std::size_t>(u.size());
  out->mean_utility = pairwise_sum(u.data(), n) / static_cast<double>(n);
  Eigen::VectorXd sq(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double d = u[i] - out->mean_utility;
    sq[i] = d * d;
  }
  const double var =
      pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
  out->std_error = std::sqrt(var / static_cast<double>(n));
  const double v =
      c.merton->value(c.t0, c.s0, c.x0 + c.y0).v;
  out->frictionless_value = v;
  out->delta = (v - out->mean_utility) / (-v);
  out->delta_std_error = out->std_error / (-v);
}

// ---------------------------------------------------------------------------
// Fused convergence-study path. A study visits every master step 10^10 times
// at production sizes, so the per-step band evaluation is restructured
// around precomputed per-level coefficients and a Hermite lookup of the
// normal cdf/pdf pair. Closed-claim algebra only; anything else falls back
// to the reference run_path.
// ---------------------------------------------------------------------------

/// Dense tables of the standard normal cdf and pdf on [-8.5, 8.5] with
/// cubic-Hermite evaluation (both derivatives are known analytically). Grid
/// step 0.002 keeps the interpolation error near 1e-13; outside the range
/// both tails are flat to below double precision.
struct NormTables {
  static constexpr double kLo = -8.5;
  static constexpr double kHi = 8.5;
  static constexpr int kCells = 8500;
  static constexpr double kStep = (kHi - kLo) / kCells;
  static constexpr double kInvStep = kCells / (kHi - kLo);

  std::vector<double> cdf;
  std::vector<double> pdf;

  NormTables() : cdf(kCells + 1), pdf(kCells + 1) {
    for (int i = 0; i <= kCells; ++i) {
      const double x = kLo + kStep * i;
      cdf[i] = normal_cdf(x);
      pdf[i] = normal_pdf(x);
    }
  }
};

const NormTables& norm_tables() {
  static const NormTables tables;
  return tables;
}

/// cdf and pdf of the standard normal at x, via the tables.
inline void cdf_pdf(const NormTables& nt, double x, double* cdf, double* pdf) {
  if (x <= NormTables::kLo) {
    *cdf = 0.0;
    *pdf = 0.0;
    return;
  }
  if (x >= NormTables::kHi) {
    *cdf = 1.0;
    *pdf = 0.0;
    return;
  }
  const double u = (x - NormTables::kLo) * NormTables::kInvStep;
  const int i = std::min(static_cast<int>(u), NormTables::kCells - 1);
  const double th = u - i;
  const double h = NormTables::kStep;
  const double xi = NormTables::kLo + h * i;
  const double f0 = nt.cdf[i];
  const double f1 = nt.cdf[i + 1];
  const double g0 = nt.pdf[i];
  const double g1 = nt.pdf[i + 1];
  const double th2 = th * th;
  const double th3 = th2 * th;
  const double h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
  const double h10 = th3 - 2.0 * th2 + th;
  const double h01 = 3.0 * th2 - 2.0 * th3;
  const double h11 = th3 - th2;
  *cdf = f0 * h00 + f1 * h01 + h * (g0 * h10 + g1 * h11);
  *pdf = g0 * h00 + g1 * h01 +
         h * (-xi * g0 * h10 - (xi + h) * g1 * h11);
}

/// Level = one master-grid time. Everything that depends on time alone is
/// hoisted here; with m = e * excess_over_var - s^2 Gamma (currency Merton
/// deviation scale) the band is
///   center     = ece + s * delta,
///   half-width = eps * halfc * cbrt(m^2),
///   alpha      = sigma * m.
struct LevelFields {
  double ece = 0.0;     // e * (mu - r) / sigma^2, e = 1 / (gamma v1)
  double halfc = 0.0;   // cbrt(0.75 * lambda_sum * e)
  double b = 0.0;       // 1 / (sigma sqrt(tau))
  double adrift = 0.0;  // (r + sigma^2 / 2) tau / (sigma sqrt(tau))
  double cbm0 = 0.0;    // cbrt(ece^2): claims with zero gamma
  double amt0 = 0.0;    // |ece|
};

/// Time-independent study constants plus the per-level table.
struct StudyGrid {
  std::vector<LevelFields> levels;
  const NormTables* tables = nullptr;
  PayoffKind kind = PayoffKind::kZero;
  double ln_strike = 0.0;
  double ln_s0 = 0.0;
  int n_master = 0;
  double dt_m = 0.0;
  double drift_dt = 0.0;  // (mu - sigma^2/2) dt_m
  double sig_sqdt = 0.0;  // sigma sqrt(dt_m)
};

StudyGrid build_grid(const RunContext& c, int n_master, double horizon) {
  StudyGrid g;
  g.tables = &norm_tables();
  g.kind = c.field->payoff().kind;
  g.ln_strike =
      (g.kind == PayoffKind::kCall || g.kind == PayoffKind::kPut)
          ? std::log(c.field->payoff().strike)
          : 0.0;
  g.ln_s0 = std::log(c.s0);
  g.n_master = n_master;
  g.dt_m = horizon / n_master;
  g.drift_dt = c.mu_minus_half * g.dt_m;
  g.sig_sqdt = c.sigma * std::sqrt(g.dt_m);
  g.levels.resize(static_cast<std::size_t>(n_master));
  for (int l = 0; l < n_master; ++l) {
    const double t = l == 0 ? c.t0 : c.t0 + horizon * l / n_master;
    const double tau = c.T - t;
    const double e = 1.0 / (c.gamma * c.merton->discount_factors(t).v1);
    LevelFields f;
    f.ece = e * c.excess_over_var;
    f.halfc = std::cbrt(0.75 * c.lambda_sum * e);
    const double sst = c.sigma * std::sqrt(tau);
    f.b = 1.0 / sst;
    f.adrift = (c.r + 0.5 * c.sigma * c.sigma) * tau * f.b;
    f.cbm0 = std::cbrt(f.ece * f.ece);
    f.amt0 = std::abs(f.ece);
    g.levels[static_cast<std::size_t>(l)] = f;
  }
  return g;
}

/// Shared per-(level, spot) band ingredients: center, cbrt(m^2), |m|.
struct BandFields {
  double center = 0.0;
  double cbm = 0.0;
  double amt = 0.0;
};

inline BandFields shared_fields(const StudyGrid& g, const LevelFields& f,
                                double s, double ln_s) {
  if (g.kind == PayoffKind::kZero) return {f.ece, f.cbm0, f.amt0};
  if (g.kind == PayoffKind::kForward) return {f.ece + s, f.cbm0, f.amt0};
  double nv = 0.0;
  double pv = 0.0;
  cdf_pdf(*g.tables, f.b * (ln_s - g.ln_strike) + f.adrift, &nv, &pv);
  const double delta = g.kind == PayoffKind::kCall ? nv : nv - 1.0;
  const double m = f.ece - s * pv * f.b;
  return {f.ece + s * delta, std::cbrt(m * m), std::abs(m)};
}

/// One epsilon row of the fused walk: cost constants and per-path state.
struct FastRow {
  double eps = 0.0;
  double e3_sell = 0.0;       // eps^3 lambda(1,0)
  double e3_buy = 0.0;        // eps^3 lambda(0,1)
  double one_plus_sell = 0.0;
  double inv_one_plus_sell = 0.0;
  double one_plus_buy = 0.0;
  double wsh = 0.0;      // kBarrierShrink sigma sqrt(stride dt_m)
  double step_dt = 0.0;  // stride * dt_m
  int stride = 1;

  double x = 0.0;
  double y = 0.0;
  double cost = 0.0;
  int prev_lvl = 0;
  int next_lvl = 0;
  bool insolvent = false;
};

/// Projection of one row onto [center - halfw, center + halfw], with the
/// same accounting as project_to_band; the solvency probe uses a
/// multiply-by-inverse because only its sign matters.
inline void project_fast(FastRow* rw, double center, double halfw) {
  const double hi = center + halfw;
  const double lo = center - halfw;
  if (rw->y > hi) {
    const double m = (rw->y - hi) / rw->one_plus_sell;
    rw->x += m;
    rw->y = hi;
    rw->cost += rw->e3_sell * m;
  } else if (rw->y < lo) {
    const double m = lo - rw->y;
    rw->x -= rw->one_plus_buy * m;
    rw->y = lo;
    rw->cost += rw->e3_buy * m;
  }
  const double liq =
      rw->x + (rw->y >= 0.0 ? rw->y * rw->inv_one_plus_sell
                            : rw->y * rw->one_plus_buy);
  if (liq < 0.0) rw->insolvent = true;
}

/// All epsilon rows of one master path in a single pass. Increments are
/// sign * z[i]; rows re-band only at multiples of their stride, so every
/// projection's incoming interval is a full stride and the precomputed
/// barrier correction is exact. kappa = 0 only: cash grows by interest
/// between row steps.
void run_fused(const RunContext& c, const StudyGrid& g, const double* z,
               double sign, FastRow* rows, std::size_t n_rows,
               double* utilities) {
  double s = c.s0;
  double ln_s = g.ln_s0;
  BandFields bf = shared_fields(g, g.levels[0], s, ln_s);
  for (std::size_t e = 0; e < n_rows; ++e) {
    FastRow& rw = rows[e];
    rw.x = c.x0;
    rw.y = c.y0;
    rw.cost = 0.0;
    rw.insolvent = false;
    rw.prev_lvl = 0;
    rw.next_lvl = std::min(g.n_master, rw.stride);
    project_fast(&rw, bf.center, rw.eps * g.levels[0].halfc * bf.cbm);
  }
  for (int i = 0; i < g.n_master; ++i) {
    const double inc = g.drift_dt + g.sig_sqdt * (sign * z[i]);
    const double growth = std::exp(inc);
    s *= growth;
    ln_s += inc;
    for (std::size_t e = 0; e < n_rows; ++e) rows[e].y *= growth;
    const int lvl = i + 1;
    if (lvl == g.n_master) break;  // terminal: the book rides into expiry
    bf = shared_fields(g, g.levels[static_cast<std::size_t>(lvl)], s, ln_s);
    const double halfc = g.levels[static_cast<std::size_t>(lvl)].halfc;
    for (std::size_t e = 0; e < n_rows; ++e) {
      FastRow& rw = rows[e];
      if (rw.next_lvl != lvl) continue;
      rw.x += c.r * rw.x * rw.step_dt;
      const double halfw =
          std::max(0.0, rw.eps * halfc * bf.cbm - rw.wsh * bf.amt);
      project_fast(&rw, bf.center, halfw);
      rw.prev_lvl = lvl;
      rw.next_lvl = std::min(g.n_master, lvl + rw.stride);
    }
  }
  const double claim = evaluate_payoff(c.field->payoff(), s);
  for (std::size_t e = 0; e < n_rows; ++e) {
    FastRow& rw = rows[e];
    rw.x += c.r * rw.x * (g.dt_m * (g.n_master - rw.prev_lvl));
    const double wealth =
        rw.x +
        (rw.y >= 0.0 ? rw.y / rw.one_plus_sell : rw.y * rw.one_plus_buy) -
        claim;
    utilities[e] = c.merton->prefs().u2(wealth);
  }
}

}  // namespace

void project_to_band(const CostStructure& costs, const BandSpec& band,
                     SimState* state) {
  const double e3 = costs.epsilon * costs.epsilon * costs.epsilon;
  const double hi = band.center + band.half_width;
  const double lo = band.center - band.half_width;
  if (state->y > hi) {
    const double m = (state->y - hi) / (1.0 + e3 * costs.lambda(1, 0));
    state->x += m;
    state->y = hi;
    state->sold += m;
    state->cost_paid += e3 * costs.lambda(1, 0) * m;
  } else if (state->y < lo) {
    const double m = lo - state->y;
    state->x -= (1.0 + e3 * costs.lambda(0, 1)) * m;
    state->y = lo;
    state->bought += m;
    state->cost_paid += e3 * costs.lambda(0, 1) * m;
  }
}

BandSpec nt_band(const CorrectorSolution& corrector, double t, double s,
                 double z) {
  (void)z;  // exponential utility: the band is wealth-independent
  SimSetup setup;
  setup.t0 = 0.0;
  setup.s0 = s;
  setup.x0 = 0.0;
  setup.y0 = 0.0;
  const RunContext c = make_context(corrector, setup);
  return band_eval(c, corrector.costs().epsilon, t, s).band;
}

SimResult simulate_reflected(const CorrectorSolution& corrector,
                             const SimSetup& setup, int n_paths,
                             std::uint64_t seed, double dt) {
  const MertonSolution& merton = corrector.merton();
  validate_setup(merton.market(), setup, n_paths, "simulate_reflected");
  const CostStructure& costs = corrector.costs();
  const double eps = costs.epsilon;
  double step = dt;
  if (step == 0.0) {
    if (!(eps > 0.0)) {
      throw std::invalid_argument(
          "simulate_reflected: the default step rule eps^2 / 50 needs a "
          "positive epsilon; pass dt explicitly");
    }
    step = eps * eps / 50.0;
  }
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument("simulate_reflected: dt must be positive");
  }

  const RunContext c = make_context(corrector, setup);
  const double horizon = c.T - c.t0;
  const int n_steps =
      std::max(1, static_cast<int>(std::ceil(horizon / step - 1e-9)));
  const double dt_eff = horizon / n_steps;
  const double sqrt_dt = std::sqrt(dt_eff);

  SimResult out;
  out.epsilon = eps;
  out.dt = dt_eff;
  out.n_steps = n_steps;
  out.path_utility.resize(n_paths);
  Eigen::VectorXd cost_paid(n_paths);
  Eigen::VectorXd cons_util(n_paths);

  std::vector<double> z(static_cast<std::size_t>(n_steps));
  for (int p = 0; p < n_paths; ++p) {
    const CounterRng rng(seed, static_cast<std::uint64_t>(p));
    rng.fill_normals(0, z.size(), z.data());
    const auto next = [&](int k) {
      Step s;
      s.dt = dt_eff;
      s.dw = sqrt_dt * z[static_cast<std::size_t>(k)];
      s.t_next = k + 1 == n_steps
                     ? c.T
                     : c.t0 + horizon * (k + 1) / n_steps;
      return s;
    };
    double utility = 0.0;
    double over = 0.0;
    const SimState st = run_path(c, eps, costs, n_steps, next, &utility, &over);
    out.path_utility[p] = utility;
    cost_paid[p] = st.cost_paid;
    cons_util[p] = st.consumption_utility;
    out.max_band_overshoot = std::max(out.max_band_overshoot, over);
    if (st.insolvent) ++out.insolvent_paths;
    out.consumption_clamps += st.consumption_clamps;
  }

  const std::size_t n = static_cast<std::size_t>(n_paths);
  out.mean_cost = pairwise_sum(cost_paid.data(), n) / static_cast<double>(n);
  out.mean_consumption_utility =
      pairwise_sum(cons_util.data(), n) / static_cast<double>(n);
  finalize_result(c, &out);
  return out;
}

const char* to_string(StudyVerdict verdict) {
  switch (verdict) {
    case StudyVerdict::kOk: return "ok";
    case StudyVerdict::kNoSignal: return "no-signal";
  }
  return "unknown";
}

ConvergenceStudy convergence_study(const CorrectorSolution& corrector,
                                   const SimSetup& setup,
                                   const std::vector<double>& eps_list,
                                   int n_paths, std::uint64_t seed,
                                   const StudyOptions& options) {
  const MertonSolution& merton = corrector.merton();
  validate_setup(merton.market(), setup, n_paths, "convergence_study");
  if (eps_list.size() < 3) {
    throw std::invalid_argument(
        "convergence_study: need at least three epsilon values");
  }
  for (double e : eps_list) {
    if (!(e > 0.0 && e <= 0.5) || !std::isfinite(e)) {
      throw std::invalid_argument(
          "convergence_study: every epsilon must lie in (0, 1/2]");
    }
  }
  {
    std::vector<double> sorted(eps_list);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument(
          "convergence_study: epsilon values must be distinct");
    }
  }
  if (options.master_dt != 0.0 &&
      (!(options.master_dt > 0.0) || !std::isfinite(options.master_dt))) {
    throw std::invalid_argument(
        "convergence_study: master_dt must be positive (0 selects the "
        "automatic rule)");
  }
  if (!options.strides.empty()) {
    if (options.strides.size() != eps_list.size()) {
      throw std::invalid_argument(
          "convergence_study: strides must match eps_list in length");
    }
    for (int k : options.strides) {
      if (k < 1) {
        throw std::invalid_argument(
            "convergence_study: every stride must be at least 1");
      }
    }
  }
  if (options.antithetic && (n_paths % 2 != 0 || n_paths < 4)) {
    throw std::invalid_argument(
        "convergence_study: antithetic pairing needs an even path count of "
        "at least 4");
  }

  const RunContext c = make_context(corrector, setup);
  const double horizon = c.T - c.t0;
  const double eps_min = *std::min_element(eps_list.begin(), eps_list.end());
  const double dt_rule =
      options.master_dt > 0.0 ? options.master_dt : eps_min * eps_min / 50.0;
  const int n_master = std::max(
      1, static_cast<int>(std::ceil(horizon / dt_rule - 1e-9)));
  const double dt_m = horizon / n_master;
  const double sqrt_dt_m = std::sqrt(dt_m);

  const std::size_t n_eps = eps_list.size();
  std::vector<int> stride(n_eps);
  std::vector<CostStructure> eps_costs;
  eps_costs.reserve(n_eps);
  for (std::size_t e = 0; e < n_eps; ++e) {
    if (!options.strides.empty()) {
      stride[e] = options.strides[e];
    } else {
      const double ideal = eps_list[e] * eps_list[e] / 50.0;
      stride[e] = static_cast<int>(
          std::max<long long>(1, std::llround(ideal / dt_m)));
    }
    eps_costs.push_back(corrector.costs().with_epsilon(eps_list[e]));
  }

  std::vector<Eigen::VectorXd> utilities(n_eps, Eigen::VectorXd(n_paths));
  std::vector<Eigen::VectorXd> cost_paid(n_eps, Eigen::VectorXd(n_paths));
  std::vector<int> insolvent(n_eps, 0);
  std::vector<double> z(static_cast<std::size_t>(n_master));

  const PayoffKind kind = c.field->payoff().kind;
  const bool closed_band = kind == PayoffKind::kZero ||
                           kind == PayoffKind::kCall ||
                           kind == PayoffKind::kPut ||
                           kind == PayoffKind::kForward;
  // The reference path evaluates the exact band (no tables), which the
  // zero-width lambda = 0 policy needs; closed claims with costs take the
  // fused pass.
  const bool fused = c.kappa == 0 && c.lambda_sum > 0.0 && closed_band;

  if (fused) {
    const StudyGrid grid = build_grid(c, n_master, horizon);
    std::vector<FastRow> rows(n_eps);
    for (std::size_t e = 0; e < n_eps; ++e) {
      FastRow& rw = rows[e];
      rw.eps = eps_list[e];
      rw.e3_sell = eps_costs[e].effective_cost(1, 0);
      rw.e3_buy = eps_costs[e].effective_cost(0, 1);
      rw.one_plus_sell = 1.0 + rw.e3_sell;
      rw.inv_one_plus_sell = 1.0 / rw.one_plus_sell;
      rw.one_plus_buy = 1.0 + rw.e3_buy;
      rw.stride = stride[e];
      rw.step_dt = dt_m * stride[e];
      rw.wsh = kBarrierShrink * c.sigma * std::sqrt(rw.step_dt);
    }
    std::vector<double> urow(n_eps);
    for (int p = 0; p < n_paths; ++p) {
      double sign = 1.0;
      if (options.antithetic) {
        if (p % 2 == 0) {
          CounterRng(seed, static_cast<std::uint64_t>(p / 2))
              .fill_normals(0, z.size(), z.data());
        } else {
          sign = -1.0;
        }
      } else {
        CounterRng(seed, static_cast<std::uint64_t>(p))
            .fill_normals(0, z.size(), z.data());
      }
      run_fused(c, grid, z.data(), sign, rows.data(), n_eps, urow.data());
      for (std::size_t e = 0; e < n_eps; ++e) {
        utilities[e][p] = urow[e];
        cost_paid[e][p] = rows[e].cost;
        if (rows[e].insolvent) ++insolvent[e];
      }
    }
  } else {
    std::vector<int> coarse_steps(n_eps);
    for (std::size_t e = 0; e < n_eps; ++e) {
      coarse_steps[e] = (n_master + stride[e] - 1) / stride[e];
    }
    for (int p = 0; p < n_paths; ++p) {
      double sign = 1.0;
      if (options.antithetic) {
        if (p % 2 == 0) {
          CounterRng(seed, static_cast<std::uint64_t>(p / 2))
              .fill_normals(0, z.size(), z.data());
        } else {
          sign = -1.0;
        }
      } else {
        CounterRng(seed, static_cast<std::uint64_t>(p))
            .fill_normals(0, z.size(), z.data());
      }
      for (std::size_t e = 0; e < n_eps; ++e) {
        const int k_e = stride[e];
        const auto next = [&](int j) {
          const int i0 = j * k_e;
          const int i1 = std::min(n_master, i0 + k_e);
          double acc = 0.0;
          for (int i = i0; i < i1; ++i) acc += z[static_cast<std::size_t>(i)];
          Step s;
          s.dt = dt_m * (i1 - i0);
          s.dw = sqrt_dt_m * (sign * acc);
          s.t_next = i1 == n_master ? c.T : c.t0 + horizon * i1 / n_master;
          return s;
        };
        double utility = 0.0;
        double over = 0.0;
        const SimState st = run_path(c, eps_list[e], eps_costs[e],
                                     coarse_steps[e], next, &utility, &over);
        utilities[e][p] = utility;
        cost_paid[e][p] = st.cost_paid;
        if (st.insolvent) ++insolvent[e];
      }
    }
  }

  const double v = merton.value(c.t0, c.s0, c.x0 + c.y0).v;
  ConvergenceStudy study;
  study.rows.reserve(n_eps);
  std::vector<double> log_eps;
  std::vector<double> log_delta;
  for (std::size_t e = 0; e < n_eps; ++e) {
    const std::size_t n = static_cast<std::size_t>(n_paths);
    double mean = 0.0;
    double se = 0.0;
    if (options.antithetic) {
      // The estimator is the pair average, so the standard error comes from
      // the spread of pair averages, not of raw paths.
      const int n_pairs = n_paths / 2;
      Eigen::VectorXd pm(n_pairs);
      for (int q = 0; q < n_pairs; ++q) {
        pm[q] = 0.5 * (utilities[e][2 * q] + utilities[e][2 * q + 1]);
      }
      const std::size_t np = static_cast<std::size_t>(n_pairs);
      mean = pairwise_sum(pm.data(), np) / static_cast<double>(np);
      Eigen::VectorXd sq(n_pairs);
      for (int q = 0; q < n_pairs; ++q) {
        const double d = pm[q] - mean;
        sq[q] = d * d;
      }
      se = std::sqrt(pairwise_sum(sq.data(), np) /
                     static_cast<double>(np - 1) / static_cast<double>(np));
    } else {
      mean = pairwise_sum(utilities[e].data(), n) / static_cast<double>(n);
      Eigen::VectorXd sq(n_paths);
      for (int p = 0; p < n_paths; ++p) {
        const double d = utilities[e][p] - mean;
        sq[p] = d * d;
      }
      se = std::sqrt(pairwise_sum(sq.data(), n) /
                     static_cast<double>(n - 1) / static_cast<double>(n));
    }
    ConvergenceRow row;
    row.epsilon = eps_list[e];
    row.delta = (v - mean) / (-v);
    const double eps2 = eps_list[e] * eps_list[e];
    row.delta_over_eps2 = row.delta / eps2;
    row.std_error = se / (-v) / eps2;
    row.mean_cost =
        pairwise_sum(cost_paid[e].data(), n) / static_cast<double>(n);
    row.insolvent_paths = insolvent[e];
    const double delta_se = se / (-v);
    row.usable = row.delta > 0.0 && delta_se <= 0.5 * row.delta;
    if (row.usable) {
      log_eps.push_back(std::log(row.epsilon));
      log_delta.push_back(std::log(row.delta));
    }
    study.rows.push_back(row);
  }

  if (log_eps.size() >= 2) {
    study.slope = fit_line(log_eps, log_delta).slope;
    study.verdict = StudyVerdict::kOk;
  } else {
    study.slope = std::numeric_limits<double>::quiet_NaN();
    study.verdict = StudyVerdict::kNoSignal;
  }
  return study;
}

}  // namespace smallcost
