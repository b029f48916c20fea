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
/// Second-order layer of the small-cost expansion: the field u_tilde that
/// accumulates the expected running cost of the no-trade band, solved by
/// finite differences (graded Crank-Nicolson with an exact near-expiry start
/// layer) and by Monte-Carlo quadrature along risk-neutral paths; the closed
/// form of the claim-free field; a mesh-refinement probe that detects payoffs
/// whose second-order term diverges; and the assembled price expansion
/// p(eps) = V + eps^2 h with h = (u_tilde_g - u_tilde_0) / (gamma v1).

#ifndef SMALLCOST_EXPANSION_HPP_
#define SMALLCOST_EXPANSION_HPP_

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "smallcost/blackscholes.hpp"
#include "smallcost/corrector.hpp"
#include "smallcost/market.hpp"

namespace smallcost {

/// Discretization request for the finite-difference second-order solver.
///
/// The log-spot grid is centered at ln(s_center) with half-width
/// width * sigma * sqrt(T - t0), n_space intervals (n_space must be even so
/// the center is a node). The time mesh is graded toward expiry,
/// t_k = T - (T - t0) * (k / n_time)^3, which integrates the
/// (T - t)^(-2/3) growth of the source for kinked payoffs at second order.
/// n_outer is the Gauss order of the near-expiry start layer.
struct GridSpec {
  double t0 = 0.0;          ///< earliest time the field must resolve
  double s_center = 100.0;  ///< spot at the center of the log-spot grid
  int n_space = 400;        ///< log-spot intervals, even, >= 50
  int n_time = 400;         ///< graded time intervals, >= 50
  double width = 6.0;       ///< grid half-width in units of sigma sqrt(T - t0)
  int n_outer = 32;         ///< Gauss order of the start-layer time integral
};

/// Which estimator produced a second-order field.
enum class UTildeSolver { kFiniteDifference, kMonteCarlo };

/// A tabulated second-order field u_tilde(t, s) >= 0 on a time x log-spot
/// grid, with bilinear interpolation between nodes. Finite-difference fields
/// resolve times up to T - tau_star (the start-layer edge); querying later
/// times is an error, not an extrapolation. Monte-Carlo fields carry a
/// matching table of standard errors.
class UTildeField {
 public:
  /// Validates shapes (times strictly increasing, values times x spots,
  /// std_errors empty or the same shape, all entries finite).
  UTildeField(Eigen::VectorXd times, Eigen::VectorXd log_spots,
              Eigen::MatrixXd values, Eigen::MatrixXd std_errors,
              UTildeSolver solver);

  /// Bilinear interpolation in (t, ln s). Throws std::domain_error when t is
  /// outside the resolved time range or s is outside the log-spot grid.
  double value_at(double t, double s) const;

  const Eigen::VectorXd& times() const { return times_; }
  const Eigen::VectorXd& log_spots() const { return log_spots_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::MatrixXd& std_errors() const { return std_errors_; }
  UTildeSolver solver() const { return solver_; }

  /// Latest resolved time (T - tau_star for finite-difference fields).
  double t_max() const { return times_[times_.size() - 1]; }
  /// Exponent of the mesh grading toward expiry, (T - t_k) ~ (k/N)^3.
  double grading_exponent() const { return 3.0; }

 private:
  Eigen::VectorXd times_;      // strictly increasing
  Eigen::VectorXd log_spots_;  // strictly increasing
  Eigen::MatrixXd values_;     // times x spots
  Eigen::MatrixXd std_errors_;  // empty, or times x spots (Monte-Carlo)
  UTildeSolver solver_;
};

/// Solves the linear second-order equation
///   -u_t - r s u_s - (sigma^2/2) s^2 u_ss + kappa v1(t) u = a_bar(t, s),
///   u(T, .) = 0,
/// backward on the graded mesh: Crank-Nicolson in log-spot with the five
/// steps nearest expiry fully implicit, one-sided zero-curvature boundary
/// rows at +-width standard deviations, and an exact-kernel start layer over
/// [T - tau_star, T] (outer Gauss rule in the cube-rooted time variable,
/// inner union-panel Gauss quadrature of the source against the Gaussian
/// transition kernel) where tau_star is the first graded time-to-expiry with
/// sigma sqrt(tau) >= 3 grid steps. The source is evaluated lazily from
/// closed-form greeks at every quadrature node, never interpolated.
///
/// Throws std::invalid_argument for grids under 50 points per dimension (or
/// odd n_space), for t0 >= T, and for discontinuous payoffs, whose
/// second-order term diverges (see divergence_probe).
UTildeField solve_u_tilde_fd(const CorrectorSolution& corrector,
                             const GridSpec& grid = GridSpec{});

/// Monte-Carlo estimate of u_tilde(t, s): the expectation of
/// int_t^T exp(-kappa int_t^u v1) a_bar(u, S_u) du over risk-neutral paths
/// sampled exactly on the same graded time mesh the finite-difference solver
/// uses (n_time intervals), with antithetic pairs sharing counter streams.
/// The time integral is a trapezoid except on the last interval, where for
/// kinked payoffs the (T - u)^(-2/3) growth of the source is integrated by
/// its power-law closed form from the left endpoint. The standard error is
/// computed over antithetic pair averages. For a payoff whose second-order
/// term diverges the estimate is mesh-dependent; run divergence_probe first.
///
/// Throws std::invalid_argument for n_paths < 100 or odd, t >= T, s <= 0, or
/// n_time < 2.
McEstimate u_tilde_mc(const CorrectorSolution& corrector, double t, double s,
                      int n_paths, std::uint64_t seed, int n_time = 400);

/// Closed form of the claim-free second-order term: the source is constant
/// in (t, s) when no claim is hedged, so u_tilde_0(t) is that constant times
/// the integral of the consumption discount, int_t^T exp(-kappa int_t^u v1).
double u_tilde_zero(const CorrectorSolution& corrector, double t);

/// Verdict of the mesh-refinement divergence probe.
enum class DivergenceVerdict { kConverged, kDiverged, kInconclusive };

const char* to_string(DivergenceVerdict v);

/// Result of divergence_probe: four estimates of the time integral of the
/// discounted spatial supremum of the source, on graded meshes refined by
/// factors of two, with their successive growth ratios.
struct DivergenceReport {
  DivergenceVerdict verdict = DivergenceVerdict::kInconclusive;
  Eigen::Vector4d estimates = Eigen::Vector4d::Zero();  ///< coarse to fine
  Eigen::Vector3d growth = Eigen::Vector3d::Zero();     ///< e2/e1, e3/e2, e4/e3
  double value = 0.0;          ///< finest estimate (meaningful if converged)
  double growth_factor = 0.0;  ///< last growth ratio (meaningful if diverged)
};

/// Integrates the discounted supremum over spot of the source on graded
/// meshes of 50, 100, 200, 400 intervals (supremum over a global log-spot
/// grid plus a strike window that shrinks like sigma sqrt(T - u), so the
/// near-expiry ridge of kinked payoffs is always sampled). Diverged iff the
/// estimates grow by more than 1.5x at each of the last two refinements;
/// converged iff the last two agree within 1%; inconclusive otherwise, with
/// all four estimates reported.
DivergenceReport divergence_probe(const CorrectorSolution& corrector, double t,
                                  double s);

/// The assembled price expansion at one (t, s).
struct PriceReport {
  double t = 0.0;
  double s = 0.0;
  double value = 0.0;      ///< frictionless indifference price V of the claim
  double u_tilde_g = 0.0;  ///< second-order term with the claim
  double u_tilde_0 = 0.0;  ///< second-order term without the claim
  double h = 0.0;          ///< price correction per eps^2
  /// Monte-Carlo cross-estimate of u_tilde_g. A zero standard error means
  /// the entry is exact (closed form) or the check was skipped.
  McEstimate mc_check;
  Eigen::VectorXd eps;    ///< the requested eps grid, order preserved
  Eigen::VectorXd p_eps;  ///< value + eps^2 h per entry
  DivergenceVerdict divergence = DivergenceVerdict::kInconclusive;
  AuditReport audit;  ///< regularity audit attached at assembly
};

/// Assembles the price expansion p(eps) = V + eps^2 h at (t, s): runs the
/// regularity audit and the divergence probe, solves the second-order field
/// by finite differences (closed form when the payoff has no curvature, so
/// the claim-free case prices to exactly V), cross-checks it by Monte-Carlo
/// when mc_paths > 0, and evaluates the eps grid. Refuses payoffs whose
/// probe verdict is diverged. Throws std::invalid_argument for t >= T,
/// s <= 0, or negative / non-finite eps entries.
PriceReport price_expansion(const CorrectorSolution& corrector, double t,
                            double s, const Eigen::VectorXd& eps_list,
                            const GridSpec& grid, int mc_paths = 20000,
                            std::uint64_t seed = 12345);

/// Convenience overload: grid centered at the query point (t0 = t,
/// s_center = s), default resolution.
PriceReport price_expansion(const CorrectorSolution& corrector, double t,
                            double s, const Eigen::VectorXd& eps_list);

/// A scalar field of (t, s, wealth), the general-utility hook of h_general.
using WealthField = std::function<double(double, double, double)>;

/// The utility-family-agnostic form of the price correction:
///   h(t, s, x) = (u_g(t, s, x + p) - u_0(t, s, x)) / v_g_z(t, s, x + p)
/// with p = p_g(t, s, x) the zeroth-order price. For exponential utility,
/// where u = -v * u_tilde and p_g = V, this reduces to
/// (u_tilde_g - u_tilde_0) / (gamma v1). Throws std::invalid_argument when a
/// field is missing and std::domain_error when the marginal value in wealth
/// vanishes (or is not finite) at the shifted point.
double h_general(const WealthField& u_g, const WealthField& u_0,
                 const WealthField& v_g_z, const WealthField& p_g, double t,
                 double s, double x);

}  // namespace smallcost

#endif  // SMALLCOST_EXPANSION_HPP_
