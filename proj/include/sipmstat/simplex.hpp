#pragma once
// Derivative-free Nelder-Mead minimizer for the low-dimensional fit
// objectives. Callers handle parameter transforms and multi-start.

#include <Eigen/Core>
#include <functional>

namespace sipmstat {

struct SimplexOptions {
  int max_iterations = 4000;
  double f_tol = 1e-13;  ///< relative spread of simplex values
  double x_tol = 1e-11;  ///< simplex diameter
  int restarts = 1;      ///< re-runs from the best point with a shrunk step
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  bool converged = false;
  int evaluations = 0;
};

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& step,
                          const SimplexOptions& options = {});

}  // namespace sipmstat
