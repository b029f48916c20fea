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

#include "smallcost/frictions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace smallcost {

namespace detail {

namespace {

constexpr double kPivotTol = 1e-11;

// One simplex phase on an explicit tableau. rows: constraints; the extra
// objective row carries reduced costs. Bland's rule (smallest entering index,
// smallest basic index on ratio ties) guarantees termination.
bool run_simplex(Eigen::MatrixXd& T, Eigen::VectorXd& obj, std::vector<int>& basis,
                 const std::vector<bool>& banned) {
  const Eigen::Index m = T.rows();
  const Eigen::Index ncols = T.cols() - 1;  // last column is the rhs
  for (int iter = 0; iter < 100000; ++iter) {
    int enter = -1;
    for (Eigen::Index j = 0; j < ncols; ++j) {
      if (!banned[static_cast<std::size_t>(j)] && obj[j] < -kPivotTol) {
        enter = static_cast<int>(j);
        break;
      }
    }
    if (enter < 0) return true;  // optimal
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (T(i, enter) > kPivotTol) {
        const double ratio = T(i, ncols) / T(i, enter);
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && (leave < 0 || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = static_cast<int>(i);
        }
      }
    }
    if (leave < 0) return false;  // unbounded
    // Pivot.
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != leave && std::abs(T(i, enter)) > 0.0) {
        T.row(i) -= T(i, enter) * T.row(leave);
      }
    }
    const double f = obj[enter];
    if (std::abs(f) > 0.0) {
      for (Eigen::Index j = 0; j <= ncols; ++j) obj[j] -= f * T(leave, j);
    }
    basis[leave] = enter;
  }
  return false;
}

// Reduced-cost row for cost vector c_ext given the current basis.
Eigen::VectorXd reduced_costs(const Eigen::MatrixXd& T, const Eigen::VectorXd& c_ext,
                              const std::vector<int>& basis) {
  const Eigen::Index ncols = T.cols() - 1;
  Eigen::VectorXd obj(ncols + 1);
  obj.head(ncols) = c_ext;
  obj[ncols] = 0.0;
  for (Eigen::Index i = 0; i < T.rows(); ++i) {
    const double cb = c_ext[basis[i]];
    if (cb != 0.0) obj -= cb * T.row(i).transpose();
  }
  return obj;
}

}  // namespace

bool simplex_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& c, Eigen::VectorXd* z_out,
                   double* objective_out) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) {
    throw std::invalid_argument("simplex_solve: dimension mismatch");
  }

  // Flip rows to nonnegative rhs; flipped rows get a surplus column and an
  // artificial basic variable.
  Eigen::MatrixXd Aw = A;
  Eigen::VectorXd bw = b;
  std::vector<bool> flipped(static_cast<std::size_t>(m), false);
  std::vector<int> art_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (bw[i] < 0.0) {
      Aw.row(i) = -Aw.row(i);
      bw[i] = -bw[i];
      flipped[static_cast<std::size_t>(i)] = true;
      art_rows.push_back(static_cast<int>(i));
    }
  }
  const Eigen::Index n_art = static_cast<Eigen::Index>(art_rows.size());
  const Eigen::Index ncols = n + m + n_art;

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, ncols + 1);
  T.block(0, 0, m, n) = Aw;
  std::vector<int> basis(m, -1);
  for (Eigen::Index i = 0; i < m; ++i) {
    T(i, ncols) = bw[i];
    T(i, n + i) = flipped[static_cast<std::size_t>(i)] ? -1.0 : 1.0;  // slack/surplus
    if (!flipped[static_cast<std::size_t>(i)]) basis[i] = static_cast<int>(n + i);
  }
  for (Eigen::Index k = 0; k < n_art; ++k) {
    const int i = art_rows[static_cast<std::size_t>(k)];
    T(i, n + m + k) = 1.0;
    basis[i] = static_cast<int>(n + m + k);
  }

  std::vector<bool> banned(static_cast<std::size_t>(ncols), false);

  if (n_art > 0) {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(ncols);
    c1.tail(n_art).setOnes();
    Eigen::VectorXd obj = reduced_costs(T, c1, basis);
    if (!run_simplex(T, obj, basis, banned)) return false;
    if (obj[ncols] < -1e-8) return false;  // phase-1 optimum positive: infeasible
    // Drive any leftover artificial out of the basis.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis[i] >= n + m) {
        for (Eigen::Index j = 0; j < n + m; ++j) {
          if (std::abs(T(i, j)) > kPivotTol) {
            T.row(i) /= T(i, j);
            for (Eigen::Index i2 = 0; i2 < m; ++i2) {
              if (i2 != i) T.row(i2) -= T(i2, j) * T.row(i);
            }
            basis[i] = static_cast<int>(j);
            break;
          }
        }
      }
    }
    for (Eigen::Index k = 0; k < n_art; ++k) {
      banned[static_cast<std::size_t>(n + m + k)] = true;
    }
  }

  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(ncols);
  c2.head(n) = c;
  Eigen::VectorXd obj = reduced_costs(T, c2, basis);
  if (!run_simplex(T, obj, basis, banned)) return false;

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] >= 0 && basis[i] < n) z[basis[i]] = T(i, ncols);
  }
  if (z_out != nullptr) *z_out = z;
  if (objective_out != nullptr) *objective_out = c.dot(z);
  return true;
}

}  // namespace detail

namespace {

// True when some pair of distinct risky assets admits a direct transfer; in
// that case the dual cone is strictly inside its box relaxation and the
// liquidation infimum needs the linear program.
bool has_inter_asset_route(const CostStructure& costs) {
  const int d = costs.d();
  for (int i = 1; i <= d; ++i) {
    for (int j = 1; j <= d; ++j) {
      if (i != j && !costs.is_forbidden(i, j)) return true;
    }
  }
  return false;
}

double eps3(const CostStructure& costs) {
  return costs.epsilon * costs.epsilon * costs.epsilon;
}

}  // namespace

LiquidationResult liquidation_value(const Portfolio& p, const CostStructure& costs) {
  const int d = costs.d();
  if (p.y.size() != d) {
    throw std::invalid_argument("liquidation_value: portfolio/cost dimension mismatch");
  }
  const double e3 = eps3(costs);

  if (!has_inter_asset_route(costs)) {
    // Separable box infimum: long legs take the per-asset lower dual vertex,
    // short legs the upper one.
    double value = p.x;
    for (int i = 1; i <= d; ++i) {
      const double yi = p.y[i - 1];
      value += yi >= 0.0 ? yi / (1.0 + e3 * costs.lambda(i, 0))
                         : yi * (1.0 + e3 * costs.lambda(0, i));
    }
    return {value, LiquidationMethod::kClosedForm};
  }

  // Variables z_i = r_i - L_i >= 0 with box bounds and one constraint per
  // allowed inter-asset pair.
  Eigen::VectorXd L(d), U(d);
  for (int i = 1; i <= d; ++i) {
    L[i - 1] = 1.0 / (1.0 + e3 * costs.lambda(i, 0));
    U[i - 1] = 1.0 + e3 * costs.lambda(0, i);
  }
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
    row[i] = 1.0;
    rows.push_back(row);
    rhs.push_back(U[i] - L[i]);
  }
  for (int i = 1; i <= d; ++i) {
    for (int j = 1; j <= d; ++j) {
      if (i == j || costs.is_forbidden(i, j)) continue;
      const double k = 1.0 + e3 * costs.lambda(i, j);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
      row[j - 1] = 1.0;
      row[i - 1] = -k;
      rows.push_back(row);
      rhs.push_back(k * L[i - 1] - L[j - 1]);
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), d);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    A.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
    b[static_cast<Eigen::Index>(k)] = rhs[k];
  }
  Eigen::VectorXd z;
  double obj = 0.0;
  if (!detail::simplex_solve(A, b, p.y, &z, &obj)) {
    throw std::runtime_error("liquidation_value: dual-cone linear program failed");
  }
  return {p.x + p.y.dot(L) + obj, LiquidationMethod::kLinearProgram};
}

double liquidation_limit(const Portfolio& p, const CostStructure& costs) {
  const int d = costs.d();
  if (p.y.size() != d) {
    throw std::invalid_argument("liquidation_limit: portfolio/cost dimension mismatch");
  }
  double limit = 0.0;
  for (int i = 1; i <= d; ++i) {
    const double yi = p.y[i - 1];
    limit += yi >= 0.0 ? yi * costs.lambda(i, 0) : -yi * costs.lambda(0, i);
  }
  return limit;
}

double liquidation_gap(const Portfolio& p, const CostStructure& costs) {
  const int d = costs.d();
  if (p.y.size() != d) {
    throw std::invalid_argument("liquidation_gap: portfolio/cost dimension mismatch");
  }
  const double e3 = eps3(costs);
  if (!has_inter_asset_route(costs)) {
    // Cancellation-free: each long leg loses y*e3*lam/(1+e3*lam), each short
    // leg exactly |y|*e3*lam.
    double gap = 0.0;
    for (int i = 1; i <= d; ++i) {
      const double yi = p.y[i - 1];
      gap += yi >= 0.0 ? yi * costs.lambda(i, 0) / (1.0 + e3 * costs.lambda(i, 0))
                       : -yi * costs.lambda(0, i);
    }
    return gap;
  }
  if (e3 == 0.0) return 0.0;
  // The generic route subtracts two near-equal numbers; extended precision
  // keeps roughly three extra digits, which covers eps down to ~1e-3.
  const long double gross = static_cast<long double>(p.x) +
                            static_cast<long double>(p.y.sum());
  const long double ell = static_cast<long double>(liquidation_value(p, costs).value);
  return static_cast<double>((gross - ell) / static_cast<long double>(e3));
}

bool solvency_check(const Portfolio& p, const CostStructure& costs) {
  return liquidation_value(p, costs).value >= 0.0;
}

Portfolio apply_transfer(const Portfolio& p, const Eigen::MatrixXd& transfers,
                         const CostStructure& costs) {
  const int n = costs.d() + 1;
  if (transfers.rows() != n || transfers.cols() != n) {
    throw std::invalid_argument("apply_transfer: transfer matrix must be (d+1) x (d+1)");
  }
  if (p.y.size() != costs.d()) {
    throw std::invalid_argument("apply_transfer: portfolio/cost dimension mismatch");
  }
  const double e3 = eps3(costs);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double l = transfers(i, j);
      if (!(l >= 0.0) || !std::isfinite(l)) {
        throw std::invalid_argument("apply_transfer: transfers must be nonnegative");
      }
      if (l > 0.0 && costs.is_forbidden(i, j)) {
        throw std::invalid_argument("apply_transfer: nonzero transfer on a forbidden pair");
      }
    }
  }
  Eigen::VectorXd pos(n);
  pos[0] = p.x;
  pos.tail(costs.d()) = p.y;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      pos[i] += transfers(j, i) - (1.0 + e3 * costs.lambda(i, j)) * transfers(i, j);
    }
  }
  return Portfolio(pos[0], pos.tail(costs.d()));
}

std::vector<Eigen::VectorXd> dual_cone_box_vertices(const CostStructure& costs) {
  const int d = costs.d();
  if (d > 20) throw std::invalid_argument("dual_cone_box_vertices: dimension too large");
  const double e3 = eps3(costs);
  std::vector<Eigen::VectorXd> vertices;
  const std::size_t count = std::size_t{1} << d;
  for (std::size_t mask = 0; mask < count; ++mask) {
    Eigen::VectorXd v(d + 1);
    v[0] = 1.0;
    for (int i = 1; i <= d; ++i) {
      const bool upper = (mask >> (i - 1)) & 1u;
      v[i] = upper ? 1.0 + e3 * costs.lambda(0, i)
                   : 1.0 / (1.0 + e3 * costs.lambda(i, 0));
    }
    vertices.push_back(std::move(v));
  }
  return vertices;
}

}  // namespace smallcost
