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

#ifndef CTRAJ_QP_HPP_
#define CTRAJ_QP_HPP_

#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace ctraj {

/// Convex quadratic program
///   minimize    1/2 z' P z + q' z
///   subject to  A_eq z = b_eq,
///               lower <= A_in z <= upper.
struct QpProblem {
  Eigen::SparseMatrix<double> P;  // n x n, symmetric PSD, full storage
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A_eq;
  Eigen::VectorXd b_eq;
  Eigen::SparseMatrix<double> A_in;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(q.size()); }
  void validate() const;  // throws std::invalid_argument on dimension mismatch
};

enum class QpStatus { solved, max_iter, primal_infeasible, dual_infeasible };

struct QpSettings {
  double abs_tol = 1e-6;
  double rel_tol = 1e-6;
  int max_iter = 20000;

  // Operator-splitting parameters.
  double sigma = 1e-6;       // primal regularization
  double alpha = 1.6;        // over-relaxation
  double rho = 0.1;          // initial step size
  bool adaptive_rho = true;
  int adaptive_interval = 50;

  bool scaling = true;
  int scaling_iterations = 10;

  bool polish = true;
  double polish_delta = 1e-9;
  int polish_refine_steps = 10;

  double infeasibility_tol = 1e-6;

  // Optional warm start; dual stacked as [eq; in].
  Eigen::VectorXd warm_primal;
  Eigen::VectorXd warm_dual;
};

struct QpSolution {
  Eigen::VectorXd primal;
  Eigen::VectorXd dual_eq;
  // Multipliers of the two-sided rows: nonnegative where the upper bound is
  // active, nonpositive where the lower bound is active.
  Eigen::VectorXd dual_in;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

class QpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves the QP by operator splitting (ADMM with over-relaxation, Ruiz
/// equilibration and adaptive step size), followed by an optional active-set
/// polish. Termination tests use unscaled residuals. Throws
/// std::invalid_argument on dimension mismatch and QpError on numerical
/// breakdown.
QpSolution solve_qp(const QpProblem& prob, const QpSettings& settings = {});

}  // namespace ctraj

#endif  // CTRAJ_QP_HPP_
