/* Copyright (c) 2026, the ctraj authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required, software distributed under the License is distributed on
 * an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 * express or implied. See the License for the specific language governing
 * permissions and limitations under the License.
 */

#include "ctraj/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace ctraj {
namespace {

constexpr double kInf = 1e30;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kDivisionGuard = 1e-10;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

struct Workspace {
  int n = 0;  // variables
  int m = 0;  // stacked rows (equality first)
  int m_eq = 0;

  // Unscaled data.
  Eigen::SparseMatrix<double> P, A;
  Eigen::VectorXd q, l, u;

  // Scaled data and scaling vectors.
  Eigen::SparseMatrix<double> Ps, As;
  Eigen::VectorXd qs, ls, us;
  Eigen::VectorXd d_scale, e_scale;  // variable / row scalings
  double cost_scale = 1.0;

  Eigen::VectorXd rho_vec, rho_inv_vec;
  double rho_bar = 0.1;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> kkt;
};

void build_stacked(const QpProblem& prob, Workspace& w) {
  w.n = prob.num_vars();
  w.m_eq = static_cast<int>(prob.b_eq.size());
  const int m_in = static_cast<int>(prob.lower.size());
  w.m = w.m_eq + m_in;

  w.P = prob.P;
  w.q = prob.q;
  w.A.resize(w.m, w.n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(prob.A_eq.nonZeros() + prob.A_in.nonZeros());
  for (int k = 0; k < prob.A_eq.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(prob.A_eq, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
    }
  }
  for (int k = 0; k < prob.A_in.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(prob.A_in, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()) + w.m_eq,
                        static_cast<int>(it.col()), it.value());
    }
  }
  w.A.setFromTriplets(trip.begin(), trip.end());

  w.l.resize(w.m);
  w.u.resize(w.m);
  w.l.head(w.m_eq) = prob.b_eq;
  w.u.head(w.m_eq) = prob.b_eq;
  w.l.tail(m_in) = prob.lower.cwiseMax(-kInf);
  w.u.tail(m_in) = prob.upper.cwiseMin(kInf);
}

// Modified Ruiz equilibration of [P A'; A 0] plus cost normalization.
void equilibrate(Workspace& w, const QpSettings& settings) {
  w.Ps = w.P;
  w.As = w.A;
  w.qs = w.q;
  w.ls = w.l;
  w.us = w.u;
  w.d_scale = Eigen::VectorXd::Ones(w.n);
  w.e_scale = Eigen::VectorXd::Ones(w.m);
  w.cost_scale = 1.0;
  if (!settings.scaling) return;

  Eigen::VectorXd col_norm(w.n), row_norm(w.m);
  for (int iter = 0; iter < settings.scaling_iterations; ++iter) {
    col_norm.setZero();
    row_norm.setZero();
    for (int k = 0; k < w.Ps.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(w.Ps, k); it; ++it) {
        col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
      }
    }
    for (int k = 0; k < w.As.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(w.As, k); it; ++it) {
        const double a = std::abs(it.value());
        col_norm[it.col()] = std::max(col_norm[it.col()], a);
        row_norm[it.row()] = std::max(row_norm[it.row()], a);
      }
    }
    Eigen::VectorXd d(w.n), e(w.m);
    for (int j = 0; j < w.n; ++j) {
      d[j] = col_norm[j] > kDivisionGuard ? 1.0 / std::sqrt(col_norm[j]) : 1.0;
    }
    for (int i = 0; i < w.m; ++i) {
      e[i] = row_norm[i] > kDivisionGuard ? 1.0 / std::sqrt(row_norm[i]) : 1.0;
    }

    w.Ps = d.asDiagonal() * w.Ps * d.asDiagonal();
    w.As = e.asDiagonal() * w.As * d.asDiagonal();
    w.qs = d.cwiseProduct(w.qs);
    for (int i = 0; i < w.m; ++i) {
      if (w.ls[i] > -kInf) w.ls[i] *= e[i];
      if (w.us[i] < kInf) w.us[i] *= e[i];
    }
    w.d_scale = w.d_scale.cwiseProduct(d);
    w.e_scale = w.e_scale.cwiseProduct(e);

    // Cost normalization.
    col_norm.setZero();
    for (int k = 0; k < w.Ps.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(w.Ps, k); it; ++it) {
        col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
      }
    }
    const double p_mean = w.n > 0 ? col_norm.sum() / w.n : 0.0;
    double denom = std::max(p_mean, inf_norm(w.qs));
    if (denom > kDivisionGuard) {
      const double gamma = 1.0 / denom;
      w.Ps *= gamma;
      w.qs *= gamma;
      w.cost_scale *= gamma;
    }
  }
}

void build_rho(Workspace& w, double rho_bar) {
  w.rho_bar = std::clamp(rho_bar, kRhoMin, kRhoMax);
  w.rho_vec.resize(w.m);
  for (int i = 0; i < w.m; ++i) {
    const bool equality = (w.us[i] - w.ls[i]) < 1e-12;
    w.rho_vec[i] = equality ? kRhoEqualityFactor * w.rho_bar : w.rho_bar;
  }
  w.rho_inv_vec = w.rho_vec.cwiseInverse();
}

void factorize(Workspace& w, double sigma) {
  Eigen::SparseMatrix<double> kkt(w.n + w.m, w.n + w.m);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(w.Ps.nonZeros() + 2 * w.As.nonZeros() + w.n + w.m);
  for (int k = 0; k < w.Ps.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w.Ps, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
    }
  }
  for (int j = 0; j < w.n; ++j) trip.emplace_back(j, j, sigma);
  for (int k = 0; k < w.As.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w.As, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()) + w.n,
                        static_cast<int>(it.col()), it.value());
      trip.emplace_back(static_cast<int>(it.col()),
                        static_cast<int>(it.row()) + w.n, it.value());
    }
  }
  for (int i = 0; i < w.m; ++i) {
    trip.emplace_back(w.n + i, w.n + i, -w.rho_inv_vec[i]);
  }
  kkt.setFromTriplets(trip.begin(), trip.end());
  w.kkt.compute(kkt);
  if (w.kkt.info() != Eigen::Success) {
    throw QpError("KKT factorization failed (numerical breakdown)");
  }
}

struct Residuals {
  double primal = 0.0, dual = 0.0;
  double primal_tol = 0.0, dual_tol = 0.0;
};

Residuals unscaled_residuals(const Workspace& w, const Eigen::VectorXd& x_un,
                             const Eigen::VectorXd& z_un, const Eigen::VectorXd& y_un,
                             const QpSettings& settings) {
  Residuals r;
  const Eigen::VectorXd ax = w.A * x_un;
  const Eigen::VectorXd px = w.P * x_un;
  const Eigen::VectorXd aty = w.A.transpose() * y_un;
  r.primal = inf_norm(ax - z_un);
  r.dual = inf_norm(px + w.q + aty);
  r.primal_tol = settings.abs_tol +
                 settings.rel_tol * std::max(inf_norm(ax), inf_norm(z_un));
  r.dual_tol = settings.abs_tol +
               settings.rel_tol * std::max({inf_norm(px), inf_norm(w.q), inf_norm(aty)});
  return r;
}

// Tries to improve the solution by solving the equality-constrained QP on the
// active rows. The result is kept only if the residuals improve and the
// active-row multipliers carry valid signs (degenerate active sets can yield
// sign-violating certificates, in which case the splitting solution stands).
void polish(const Workspace& w, const QpSettings& settings, QpSolution& sol) {
  std::vector<int> active;
  std::vector<double> active_rhs;
  std::vector<int> active_side;  // -1 lower, +1 upper, 0 equality
  Eigen::VectorXd y_full(w.m);
  y_full.head(w.m_eq) = sol.dual_eq;
  y_full.tail(w.m - w.m_eq) = sol.dual_in;
  for (int i = 0; i < w.m; ++i) {
    const bool equality = i < w.m_eq;
    if (equality) {
      active.push_back(i);
      active_rhs.push_back(w.l[i]);
      active_side.push_back(0);
    } else if (y_full[i] < 0.0 && w.l[i] > -kInf) {
      active.push_back(i);
      active_rhs.push_back(w.l[i]);
      active_side.push_back(-1);
    } else if (y_full[i] > 0.0 && w.u[i] < kInf) {
      active.push_back(i);
      active_rhs.push_back(w.u[i]);
      active_side.push_back(+1);
    }
  }
  {
    const int ma = static_cast<int>(active.size());
    std::vector<int> row_of(w.m, -1);
    for (int a = 0; a < ma; ++a) row_of[active[a]] = a;

    Eigen::VectorXd rhs(w.n + ma);
    rhs.head(w.n) = -w.q;
    for (int a = 0; a < ma; ++a) rhs[w.n + a] = active_rhs[a];

    const auto apply_kkt = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(w.n + ma);
      out.head(w.n) = w.P * v.head(w.n);
      for (int k = 0; k < w.A.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(w.A, k); it; ++it) {
          const int a = row_of[it.row()];
          if (a < 0) continue;
          out[it.col()] += it.value() * v[w.n + a];
          out[w.n + a] += it.value() * v[it.col()];
        }
      }
      return out;
    };

    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < w.P.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(w.P, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
      }
    }
    for (int k = 0; k < w.A.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(w.A, k); it; ++it) {
        const int a = row_of[it.row()];
        if (a < 0) continue;
        trip.emplace_back(w.n + a, static_cast<int>(it.col()), it.value());
        trip.emplace_back(static_cast<int>(it.col()), w.n + a, it.value());
      }
    }

    Eigen::VectorXd sol_vec;
    bool factored = false;

    // Exact solve of the unregularized active-set KKT when it is nonsingular.
    {
      Eigen::SparseMatrix<double> kkt(w.n + ma, w.n + ma);
      kkt.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(kkt);
      if (lu.info() == Eigen::Success) {
        sol_vec = lu.solve(rhs);
        for (int it = 0; it < 2; ++it) {
          sol_vec += lu.solve(rhs - apply_kkt(sol_vec));
        }
        factored = sol_vec.allFinite();
      }
    }

    // Fallback: regularized quasidefinite solve with iterative refinement.
    if (!factored) {
      auto reg_trip = trip;
      for (int j = 0; j < w.n; ++j) {
        reg_trip.emplace_back(j, j, settings.polish_delta);
      }
      for (int a = 0; a < ma; ++a) {
        reg_trip.emplace_back(w.n + a, w.n + a, -settings.polish_delta);
      }
      Eigen::SparseMatrix<double> kkt(w.n + ma, w.n + ma);
      kkt.setFromTriplets(reg_trip.begin(), reg_trip.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kkt);
      if (ldlt.info() != Eigen::Success) return;
      sol_vec = ldlt.solve(rhs);
      for (int it = 0; it < settings.polish_refine_steps; ++it) {
        sol_vec += ldlt.solve(rhs - apply_kkt(sol_vec));
      }
      if (!sol_vec.allFinite()) return;
    }

    // Prune sign-violating rows; accept once the certificate is clean.
    const double dual_scale =
        std::max(1.0, sol_vec.tail(ma).lpNorm<Eigen::Infinity>());
    std::vector<int> keep;
    for (int a = 0; a < ma; ++a) {
      const double nu = sol_vec[w.n + a];
      const bool bad = (active_side[a] < 0 && nu > 1e-9 * dual_scale) ||
                       (active_side[a] > 0 && nu < -1e-9 * dual_scale);
      if (!bad) keep.push_back(a);
    }
    if (static_cast<int>(keep.size()) != ma) {
      std::vector<int> next_active;
      std::vector<double> next_rhs;
      std::vector<int> next_side;
      for (const int a : keep) {
        next_active.push_back(active[a]);
        next_rhs.push_back(active_rhs[a]);
        next_side.push_back(active_side[a]);
      }
      active.swap(next_active);
      active_rhs.swap(next_rhs);
      active_side.swap(next_side);
      continue;
    }

    Eigen::VectorXd x_pol = sol_vec.head(w.n);
    Eigen::VectorXd y_pol = Eigen::VectorXd::Zero(w.m);
    for (int a = 0; a < ma; ++a) y_pol[active[a]] = sol_vec[w.n + a];
    Eigen::VectorXd z_pol = (w.A * x_pol).cwiseMax(w.l).cwiseMin(w.u);

    const Residuals r = unscaled_residuals(w, x_pol, z_pol, y_pol, settings);
    if (std::max(r.primal, r.dual) <
        std::max(sol.primal_residual, sol.dual_residual)) {
      sol.primal = x_pol;
      sol.dual_eq = y_pol.head(w.m_eq);
      sol.dual_in = y_pol.tail(w.m - w.m_eq);
      sol.primal_residual = r.primal;
      sol.dual_residual = r.dual;
      sol.polished = true;
    }
    return;
  }
}

bool primal_infeasibility_certificate(const Workspace& w,
                                      const Eigen::VectorXd& dy_un,
                                      double tol) {
  const double nrm = inf_norm(dy_un);
  if (nrm < 1e-14) return false;
  const Eigen::VectorXd v = dy_un / nrm;
  if (inf_norm(w.A.transpose() * v) > tol) return false;
  double support = 0.0;
  for (int i = 0; i < w.m; ++i) {
    if (v[i] > 0.0) {
      if (w.u[i] >= kInf) return false;
      support += w.u[i] * v[i];
    } else if (v[i] < 0.0) {
      if (w.l[i] <= -kInf) return false;
      support += w.l[i] * v[i];
    }
  }
  return support <= -tol;
}

bool dual_infeasibility_certificate(const Workspace& w, const Eigen::VectorXd& dx_un,
                                    double tol) {
  const double nrm = inf_norm(dx_un);
  if (nrm < 1e-14) return false;
  const Eigen::VectorXd v = dx_un / nrm;
  const Eigen::VectorXd pv = w.P * v;
  if (inf_norm(pv) > tol) return false;
  if (w.q.dot(v) > -tol) return false;
  const Eigen::VectorXd av = w.A * v;
  for (int i = 0; i < w.m; ++i) {
    if (w.u[i] < kInf && av[i] > tol) return false;
    if (w.l[i] > -kInf && av[i] < -tol) return false;
  }
  return true;
}

}  // namespace

void QpProblem::validate() const {
  const int n = num_vars();
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("qp dimension mismatch: " + what);
  };
  if (P.rows() != n || P.cols() != n) fail("P must be n x n");
  if (A_eq.rows() != b_eq.size()) fail("A_eq rows vs b_eq");
  if (A_eq.cols() != n && A_eq.rows() > 0) fail("A_eq cols vs n");
  if (A_in.rows() != lower.size() || A_in.rows() != upper.size()) {
    fail("A_in rows vs bounds");
  }
  if (A_in.cols() != n && A_in.rows() > 0) fail("A_in cols vs n");
  if ((lower.array() > upper.array()).any()) fail("lower > upper");
}

QpSolution solve_qp(const QpProblem& prob, const QpSettings& settings) {
  prob.validate();
  Workspace w;
  build_stacked(prob, w);
  equilibrate(w, settings);
  build_rho(w, settings.rho);
  factorize(w, settings.sigma);

  // Scaled iterates.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(w.n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(w.m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(w.m);
  if (settings.warm_primal.size() == w.n) {
    x = settings.warm_primal.cwiseQuotient(w.d_scale);
    z = w.As * x;
  }
  if (settings.warm_dual.size() == w.m) {
    y = w.cost_scale * settings.warm_dual.cwiseQuotient(w.e_scale);
  }

  Eigen::VectorXd rhs(w.n + w.m), xz_tilde(w.n + w.m);
  Eigen::VectorXd x_prev(w.n), y_prev(w.m);

  QpSolution sol;
  sol.status = QpStatus::max_iter;

  int iter = 0;
  for (iter = 1; iter <= settings.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;

    rhs.head(w.n) = settings.sigma * x - w.qs;
    rhs.tail(w.m) = z - w.rho_inv_vec.cwiseProduct(y);
    xz_tilde = w.kkt.solve(rhs);
    const auto x_tilde = xz_tilde.head(w.n);
    const Eigen::VectorXd z_tilde =
        z + w.rho_inv_vec.cwiseProduct(xz_tilde.tail(w.m) - y);

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Eigen::VectorXd z_relaxed =
        settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    const Eigen::VectorXd z_candidate = z_relaxed + w.rho_inv_vec.cwiseProduct(y);
    z = z_candidate.cwiseMax(w.ls).cwiseMin(w.us);
    y = w.rho_vec.cwiseProduct(z_candidate - z);

    // Unscaled iterates for the termination and certificate tests.
    const Eigen::VectorXd x_un = w.d_scale.cwiseProduct(x);
    const Eigen::VectorXd z_un = z.cwiseQuotient(w.e_scale);
    const Eigen::VectorXd y_un =
        w.e_scale.cwiseProduct(y) / w.cost_scale;

    const Residuals r = unscaled_residuals(w, x_un, z_un, y_un, settings);
    if (r.primal <= r.primal_tol && r.dual <= r.dual_tol) {
      sol.status = QpStatus::solved;
      sol.primal = x_un;
      sol.dual_eq = y_un.head(w.m_eq);
      sol.dual_in = y_un.tail(w.m - w.m_eq);
      sol.primal_residual = r.primal;
      sol.dual_residual = r.dual;
      break;
    }

    const Eigen::VectorXd dy_un =
        w.e_scale.cwiseProduct(y - y_prev) / w.cost_scale;
    if (primal_infeasibility_certificate(w, dy_un, settings.infeasibility_tol)) {
      sol.status = QpStatus::primal_infeasible;
      break;
    }
    const Eigen::VectorXd dx_un = w.d_scale.cwiseProduct(x - x_prev);
    if (dual_infeasibility_certificate(w, dx_un, settings.infeasibility_tol)) {
      sol.status = QpStatus::dual_infeasible;
      break;
    }

    if (settings.adaptive_rho && iter % settings.adaptive_interval == 0) {
      const Eigen::VectorXd ax = w.As * x;
      const Eigen::VectorXd px = w.Ps * x;
      const Eigen::VectorXd aty = w.As.transpose() * y;
      const double rp = inf_norm(ax - z) /
                        std::max({inf_norm(ax), inf_norm(z), kDivisionGuard});
      const double rd =
          inf_norm(px + w.qs + aty) /
          std::max({inf_norm(px), inf_norm(w.qs), inf_norm(aty), kDivisionGuard});
      const double ratio = std::sqrt(std::max(rp, kDivisionGuard) /
                                     std::max(rd, kDivisionGuard));
      const double rho_new = std::clamp(w.rho_bar * ratio, kRhoMin, kRhoMax);
      if (rho_new > 5.0 * w.rho_bar || rho_new < 0.2 * w.rho_bar) {
        build_rho(w, rho_new);
        factorize(w, settings.sigma);
      }
    }
  }

  if (sol.status == QpStatus::max_iter) {
    const Eigen::VectorXd x_un = w.d_scale.cwiseProduct(x);
    const Eigen::VectorXd z_un = z.cwiseQuotient(w.e_scale);
    const Eigen::VectorXd y_un = w.e_scale.cwiseProduct(y) / w.cost_scale;
    const Residuals r = unscaled_residuals(w, x_un, z_un, y_un, settings);
    sol.primal = x_un;
    sol.dual_eq = y_un.head(w.m_eq);
    sol.dual_in = y_un.tail(w.m - w.m_eq);
    sol.primal_residual = r.primal;
    sol.dual_residual = r.dual;
    sol.iterations = settings.max_iter;
  } else {
    sol.iterations = iter;
  }

  if (sol.status == QpStatus::solved && settings.polish) {
    polish(w, settings, sol);
  }
  return sol;
}

}  // namespace ctraj
