#pragma once

#include <functional>
#include <vector>

#include "dsstitch/types.hpp"

namespace dsstitch {

struct LbfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  int memory = 8;
  int max_line_search = 40;
  double armijo_c1 = 1e-4;
};

struct LbfgsResult {
  Vec x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective callback: returns f(x) and writes the gradient into `grad`.
using ObjectiveFn = std::function<double(const Vec& x, Vec& grad)>;

/// Limited-memory BFGS with backtracking line search. Fully deterministic:
/// no randomness, fixed evaluation order.
inline LbfgsResult lbfgs_minimize(const ObjectiveFn& objective, Vec x0,
                                  const LbfgsOptions& opts = {}) {
  const int n = static_cast<int>(x0.size());
  LbfgsResult result;
  Vec x = std::move(x0);
  Vec grad(n), new_grad(n);
  double fx = objective(x, grad);

  std::vector<Vec> s_hist, y_hist;
  std::vector<double> rho_hist;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    result.iterations = iter;
    if (grad.norm() <= opts.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Vec q = grad;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    } else {
      q /= std::max(grad.norm(), 1.0);
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vec dir = -q;
    double dir_deriv = grad.dot(dir);
    if (dir_deriv >= 0.0) {
      // Fall back to steepest descent if curvature info went stale.
      dir = -grad;
      dir_deriv = -grad.squaredNorm();
    }

    double step = 1.0;
    double new_fx = fx;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      const Vec cand = x + step * dir;
      new_fx = objective(cand, new_grad);
      if (std::isfinite(new_fx) &&
          new_fx <= fx + opts.armijo_c1 * step * dir_deriv) {
        const Vec s = step * dir;
        const Vec y = new_grad - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
          s_hist.push_back(s);
          y_hist.push_back(y);
          rho_hist.push_back(1.0 / sy);
          if (static_cast<int>(s_hist.size()) > opts.memory) {
            s_hist.erase(s_hist.begin());
            y_hist.erase(y_hist.begin());
            rho_hist.erase(rho_hist.begin());
          }
        }
        x = cand;
        fx = new_fx;
        grad = new_grad;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further progress possible at this scale
  }

  result.x = std::move(x);
  result.fx = fx;
  return result;
}

}  // namespace dsstitch
