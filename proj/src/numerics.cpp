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

#include "smallcost/numerics.hpp"

#include <map>
#include <mutex>

namespace smallcost {

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("inverse_normal_cdf: p must lie in (0, 1)");
  }
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
              3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
            4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
            2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
            5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

namespace {

// Newton iteration on the three-term Legendre recurrence; symmetric rule, so
// only the nonnegative half is iterated.
std::pair<std::vector<double>, std::vector<double>> build_gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-based initial guess.
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  return {x, w};
}

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
  return it->second;
}

double gauss_integrate(const std::function<double(double)>& f, double a, double b,
                       int n) {
  const auto& [x, w] = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += w[i] * f(mid + half * x[i]);
  return half * sum;
}

namespace {

double adaptive_gauss_impl(const std::function<double(double)>& f, double a, double b,
                           double whole, double tol, int depth, int max_depth) {
  const double mid = 0.5 * (a + b);
  const double left = gauss_integrate(f, a, mid, 12);
  const double right = gauss_integrate(f, mid, b, 12);
  if (depth >= max_depth || std::abs(left + right - whole) <= tol) {
    return left + right;
  }
  return adaptive_gauss_impl(f, a, mid, left, 0.5 * tol, depth + 1, max_depth) +
         adaptive_gauss_impl(f, mid, b, right, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace

double adaptive_gauss(const std::function<double(double)>& f, double a, double b,
                      double abs_tol, int max_depth) {
  if (!(b >= a)) throw std::invalid_argument("adaptive_gauss: b < a");
  if (a == b) return 0.0;
  const double whole = gauss_integrate(f, a, b, 12);
  return adaptive_gauss_impl(f, a, b, whole, abs_tol, 0, max_depth);
}

Eigen::VectorXd thomas_solve(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                             const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n) {
    throw std::invalid_argument("thomas_solve: size mismatch");
  }
  Eigen::VectorXd c(n), d(n), x(n);
  c[0] = upper[0] / diag[0];
  d[0] = rhs[0] / diag[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i] * c[i - 1];
    c[i] = upper[i] / m;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two matched points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

}  // namespace smallcost
