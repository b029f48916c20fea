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

#ifndef SMALLCOST_NUMERICS_HPP_
#define SMALLCOST_NUMERICS_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace smallcost {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

/// Standard normal density.
inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Standard normal distribution function, computed through erfc for accuracy
/// in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

/// Inverse of the standard normal distribution function (quantile).
///
/// Wichura's PPND16 rational approximations, accurate to about 1e-16 over
/// (0, 1). Throws std::invalid_argument outside the open unit interval.
double inverse_normal_cdf(double p);

/// Gauss-Legendre rule of order n on [-1, 1]. Nodes and weights are computed
/// once per order by Newton iteration on the Legendre recurrence and cached.
/// Thread-safe.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

/// Integrates f over [a, b] with a fixed-order Gauss-Legendre rule.
double gauss_integrate(const std::function<double(double)>& f, double a, double b,
                       int n = 16);

/// Adaptive Gauss-Legendre quadrature: bisects until the two-panel refinement
/// of each panel agrees with the single-panel value within the tolerance.
double adaptive_gauss(const std::function<double(double)>& f, double a, double b,
                      double abs_tol, int max_depth = 48);

/// Solves a tridiagonal system by the Thomas algorithm (no pivoting; intended
/// for the diagonally dominant systems produced by implicit time stepping).
/// lower[0] and upper[n-1] are ignored.
Eigen::VectorXd thomas_solve(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                             const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least-squares line through (x_i, y_i).
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace smallcost

#endif  // SMALLCOST_NUMERICS_HPP_
