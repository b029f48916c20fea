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

#include <cmath>

#include "doctest.h"

using namespace smallcost;

TEST_CASE("normal cdf matches known values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-14));
  CHECK(normal_cdf(5.0) == doctest::Approx(0.9999997133484281).epsilon(1e-14));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("inverse normal cdf round-trips and hits known quantiles") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-6, 0.01, 0.2, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
    CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
  }
  // Round-trips through the cdf stay inside |x| <= 5: beyond that the cdf
  // saturates against 1.0 in double precision and x is unrecoverable.
  for (double x : {-5.0, -3.0, -0.5, 0.0, 0.5, 3.0, 5.0}) {
    CHECK(inverse_normal_cdf(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  }
  // Deep-tail quantiles from small q are still accurate.
  CHECK(normal_cdf(inverse_normal_cdf(1e-15)) == doctest::Approx(1e-15).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::invalid_argument);
}

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
  for (int n : {2, 4, 8, 16, 32}) {
    const auto& [x, w] = gauss_legendre(n);
    REQUIRE(static_cast<int>(x.size()) == n);
    double s0 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      s0 += w[i];
      s2 += w[i] * x[i] * x[i];
    }
    CHECK(s0 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s2 == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    // Degree-(2n-1) monomial is still exact.
    double shi = 0.0;
    for (int i = 0; i < n; ++i) shi += w[i] * std::pow(x[i], 2 * n - 2);
    CHECK(shi == doctest::Approx(2.0 / (2.0 * n - 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("fixed and adaptive quadrature agree with analytic integrals") {
  auto f = [](double t) { return std::exp(-t) * std::cos(3.0 * t); };
  // Antiderivative of e^{-t} cos(3t): e^{-t} (3 sin(3t) - cos(3t)) / 10.
  auto F = [](double t) {
    return std::exp(-t) * (3.0 * std::sin(3.0 * t) - std::cos(3.0 * t)) / 10.0;
  };
  const double exact = F(2.0) - F(0.0);
  CHECK(gauss_integrate(f, 0.0, 2.0, 32) == doctest::Approx(exact).epsilon(1e-13));
  CHECK(adaptive_gauss(f, 0.0, 2.0, 1e-12) == doctest::Approx(exact).epsilon(1e-12));
  // A kinked integrand exercises the recursion.
  auto g = [](double t) { return std::abs(t - 0.3141); };
  const double exact_g = 0.5 * (0.3141 * 0.3141 + (1.0 - 0.3141) * (1.0 - 0.3141));
  CHECK(adaptive_gauss(g, 0.0, 1.0, 1e-11) == doctest::Approx(exact_g).epsilon(1e-10));
}

TEST_CASE("tridiagonal solve matches dense solve") {
  const int n = 40;
  Eigen::VectorXd lower(n), diag(n), upper(n), rhs(n);
  for (int i = 0; i < n; ++i) {
    lower[i] = -1.0 + 0.01 * i;
    diag[i] = 4.0 + 0.1 * i;
    upper[i] = -1.5;
    rhs[i] = std::sin(0.3 * i);
  }
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    dense(i, i) = diag[i];
    if (i > 0) dense(i, i - 1) = lower[i];
    if (i < n - 1) dense(i, i + 1) = upper[i];
  }
  const Eigen::VectorXd x = thomas_solve(lower, diag, upper, rhs);
  const Eigen::VectorXd x_dense = dense.fullPivLu().solve(rhs);
  CHECK((x - x_dense).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("least-squares line fit recovers a noiseless line") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 17; ++i) {
    xs.push_back(0.1 * i - 0.4);
    ys.push_back(2.5 * xs.back() - 1.25);
  }
  const LineFit fit = fit_line(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(-1.25).epsilon(1e-12));
}
