/*=============================================================================
 * Equality-constrained TV minimization
 *
 *        minimize ||z||_TV = sum_i |z_{i+1} - z_i|   subject to  A z = y
 *
 * solved as the linear program
 *
 *        minimize 1'u  s.t.  A z = y,  -u <= D z <= u
 *
 * (D the forward-difference operator) by a Mehrotra predictor-corrector
 * primal-dual interior-point method. Rows of A are scaled to unit norm before
 * solving. The reported gap is certified: the final multiplier of A z = y is
 * projected onto the exact dual feasible set before the dual value is taken.
 *===========================================================================*/
#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

namespace tvphase {

struct TvProblem {
    Eigen::MatrixXd A; // m x n
    Eigen::VectorXd y; // length m
};

enum class SolveStatus { Optimal, MaxIter, Infeasible };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

struct TvSolverOptions {
    double feas_tol = 1e-9;  // ||A x - y|| <= feas_tol (1 + ||y||)
    double gap_tol = 1e-9;   // certified duality gap, absolute
    int max_iter = 100;
    double step_fraction = 0.995;
    bool scale_rows = true;
};

struct TvSolution {
    Eigen::VectorXd x_hat;
    double objective = 0.0;     // ||x_hat||_TV
    double feas_residual = 0.0; // ||A x_hat - y||_2
    double gap = 0.0;           // objective minus a certified dual lower bound
    double dual_bound = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::MaxIter;
};

/* Throws DimensionError if shapes disagree or n < 3. A rank-deficient A yields
 * status Infeasible. */
TvSolution solve_tv(const TvProblem& problem, const TvSolverOptions& opts = {});

double tv_norm(std::span<const double> x);
double tv_norm(const Eigen::VectorXd& x);

/// ||x - x_hat||_2 <= tol, the exact-recovery criterion.
bool check_recovery(std::span<const double> x, std::span<const double> x_hat, double tol = 1e-6);

nlohmann::json status_record(const TvSolution& sol);

} // namespace tvphase
