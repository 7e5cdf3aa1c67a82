#include "sipmstat/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace sipmstat {

namespace {

struct Vertex {
  Eigen::VectorXd x;
  double f = 0.0;
};

SimplexResult run_once(const std::function<double(const Eigen::VectorXd&)>& f,
                       const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                       const SimplexOptions& opt) {
  const int dim = static_cast<int>(x0.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Vertex> simplex(dim + 1);
  simplex[0] = {x0, eval(x0)};
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd x = x0;
    x(i) += step(i) != 0.0 ? step(i) : 1e-3;
    simplex[i + 1] = {x, eval(x)};
  }

  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  bool converged = false;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    const Vertex& best = simplex.front();
    Vertex& worst = simplex.back();

    double diameter = 0.0;
    for (int i = 1; i <= dim; ++i) {
      diameter = std::max(diameter, (simplex[i].x - best.x).norm());
    }
    const double spread = std::abs(worst.f - best.f);
    if (spread <= opt.f_tol * (std::abs(best.f) + opt.f_tol) ||
        diameter <= opt.x_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += simplex[i].x;
    centroid /= dim;

    const Eigen::VectorXd reflected = centroid + (centroid - worst.x);
    const double f_reflected = eval(reflected);

    if (f_reflected < best.f) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst.x);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        worst = {expanded, f_expanded};
      } else {
        worst = {reflected, f_reflected};
      }
    } else if (f_reflected < simplex[dim - 1].f) {
      worst = {reflected, f_reflected};
    } else {
      const bool outside = f_reflected < worst.f;
      Eigen::VectorXd contracted;
      if (outside) {
        contracted = centroid + 0.5 * (reflected - centroid);
      } else {
        contracted = centroid - 0.5 * (centroid - worst.x);
      }
      const double f_contracted = eval(contracted);
      if (f_contracted < std::min(f_reflected, worst.f)) {
        worst = {contracted, f_contracted};
      } else {
        // shrink toward the best vertex
        for (int i = 1; i <= dim; ++i) {
          simplex[i].x = best.x + 0.5 * (simplex[i].x - best.x);
          simplex[i].f = eval(simplex[i].x);
        }
      }
    }
  }

  std::sort(simplex.begin(), simplex.end(), by_value);
  return {simplex[0].x, simplex[0].f, converged, evals};
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0,
                          const Eigen::VectorXd& step,
                          const SimplexOptions& options) {
  SimplexResult result = run_once(f, x0, step, options);
  Eigen::VectorXd restart_step = step;
  for (int r = 0; r < options.restarts; ++r) {
    restart_step *= 0.1;
    SimplexResult again = run_once(f, result.x, restart_step, options);
    again.evaluations += result.evaluations;
    again.converged = again.converged && result.converged;
    if (again.value <= result.value) result = again;
  }
  return result;
}

}  // namespace sipmstat
