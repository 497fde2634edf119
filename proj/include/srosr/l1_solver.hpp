#pragma once

// l1-regularized reconstruction over a Dictionary.
//
// solve_l1 computes
//
//     min ||x||_1   subject to   ||y - A x||_2 <= epsilon
//
// through the penalized problem  min 0.5 ||y - A x||^2 + lambda ||x||_1.  The
// penalized minimizer x(lambda) is piecewise linear in lambda and its residual
// norm is non-decreasing in lambda, so the constrained solution is x(lambda*)
// at the largest lambda* with ||y - A x(lambda*)|| = epsilon.  The homotopy
// (LARS-lasso) path is followed down from lambda_max = ||A^T y||_inf; on each
// linear segment the residual norm is a quadratic in the step, which gives
// lambda* in closed form once the segment containing it is reached.
//
// The constraint cannot be met when the distance from y to the span of the
// atoms exceeds epsilon (raw pixels with fewer atoms than pixels is the common
// case). Such inputs get x(lambda) at lambda = infeasible_penalty_ratio *
// lambda_max and constraint_met = false.
//
// Every returned code carries a duality-gap certificate for its penalty; a
// code whose relative gap exceeds gap_tolerance is polished by coordinate
// descent at the same penalty.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srosr/dictionary.hpp"
#include "srosr/error.hpp"

namespace srosr {

struct SolverOptions {
  /// Relative duality gap (gap / primal objective) required of every returned code.
  double gap_tolerance = 1e-6;
  /// Homotopy steps, or coordinate-descent sweeps, allowed per solve.
  int max_iterations = 10000;
  /// Penalty used when epsilon is below the distance to the span, as a fraction of lambda_max.
  double infeasible_penalty_ratio = 0.1;
  /// Lowest penalty the constrained path may reach, as a fraction of lambda_max.
  double min_penalty_ratio = 1e-9;
  /// Atoms whose Cholesky pivot falls below this (relative) are treated as collinear with the active set.
  double collinearity_tolerance = 1e-10;

  bool operator==(const SolverOptions&) const = default;
};

struct SparseCode {
  Eigen::VectorXd coefficients;
  double residual_norm = 0.0;
  /// Homotopy steps plus any polishing sweeps.
  int iterations = 0;
  /// Relative duality gap of the code for its penalty.
  double final_gap = 0.0;
  /// Penalty weight lambda the code minimizes for (0 for the zero code when ||y|| <= epsilon).
  double penalty = 0.0;
  /// False when no code reaches residual epsilon; the code is then the penalized fallback.
  bool constraint_met = true;
};

namespace detail {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Relative duality gap of x for the penalized problem, from Gram-space
// quantities only: corr = A^T y, gx = G x, yy = ||y||^2.
inline double relative_gap(const Eigen::VectorXd& corr, double yy, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& gx, double lambda) {
  const double rr = std::max(0.0, yy - 2.0 * corr.dot(x) + x.dot(gx));
  const double primal = 0.5 * rr + lambda * x.lpNorm<1>();
  const double dual_norm = (corr - gx).lpNorm<Eigen::Infinity>();
  const double scale = dual_norm > lambda ? lambda / dual_norm : 1.0;
  // theta = scale * r,  D(theta) = theta' y - 0.5 ||theta||^2
  const double dual = scale * (yy - corr.dot(x)) - 0.5 * scale * scale * rr;
  return primal > 0.0 ? std::max(0.0, primal - dual) / primal : 0.0;
}

// Cyclic coordinate descent with active-set passes; x and gx = G x are updated in place.
inline int coordinate_descent(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double yy, double lambda,
                              Eigen::VectorXd& x, Eigen::VectorXd& gx, const SolverOptions& opt, double& gap) {
  auto sweep = [&](auto&& indices) {
    bool changed = false;
    for (const Eigen::Index j : indices) {
      const double old = x[j];
      const double next = soft_threshold(old + (corr[j] - gx[j]) / gram(j, j), lambda / gram(j, j));
      if (next != old) {
        gx.noalias() += gram.col(j) * (next - old);
        x[j] = next;
        changed = true;
      }
    }
    return changed;
  };
  std::vector<Eigen::Index> all(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) all[static_cast<std::size_t>(j)] = j;
  std::vector<Eigen::Index> active;
  int sweeps = 0;
  gap = relative_gap(corr, yy, x, gx, lambda);
  while (gap > opt.gap_tolerance && sweeps < opt.max_iterations) {
    sweep(all);
    ++sweeps;
    active.clear();
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (x[j] != 0.0) active.push_back(j);
    }
    for (int inner = 0; inner < 100 && sweeps < opt.max_iterations; ++inner) {
      ++sweeps;
      if (!sweep(active)) break;
    }
    gap = relative_gap(corr, yy, x, gx, lambda);
  }
  return sweeps;
}

// Cholesky factor L (lower) of the Gram matrix restricted to the active set,
// in activation order, with column append and delete.
class ActiveCholesky {
 public:
  explicit ActiveCholesky(Eigen::Index capacity) : l_(Eigen::MatrixXd::Zero(capacity, capacity)) {}

  Eigen::Index size() const { return n_; }

  // g = G(active, j), gjj = G(j, j). Returns false if j is numerically collinear.
  bool append(const Eigen::VectorXd& g, double gjj, double tol) {
    if (n_ == l_.rows()) return false;
    Eigen::VectorXd w = g;
    if (n_ > 0) l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(w);
    const double pivot = gjj - w.squaredNorm();
    if (!(pivot > tol * gjj)) return false;
    l_.row(n_).head(n_) = w.transpose();
    l_(n_, n_) = std::sqrt(pivot);
    ++n_;
    return true;
  }

  // Deletes the k-th active variable; Givens rotations restore the triangle.
  void remove(Eigen::Index k) {
    for (Eigen::Index i = k; i + 1 < n_; ++i) l_.row(i).head(n_) = l_.row(i + 1).head(n_);
    for (Eigen::Index j = k; j + 1 < n_; ++j) {
      const double a = l_(j, j);
      const double b = l_(j, j + 1);
      const double r = std::hypot(a, b);
      const double c = a / r;
      const double s = b / r;
      for (Eigen::Index i = j; i + 1 < n_; ++i) {
        const double u = l_(i, j);
        const double v = l_(i, j + 1);
        l_(i, j) = c * u + s * v;
        l_(i, j + 1) = -s * u + c * v;
      }
    }
    l_.row(n_ - 1).setZero();
    l_.col(n_ - 1).setZero();
    --n_;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const auto tri = l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>();
    Eigen::VectorXd out = tri.solve(rhs);
    tri.transpose().solveInPlace(out);
    return out;
  }

 private:
  Eigen::MatrixXd l_;
  Eigen::Index n_ = 0;
};

struct HomotopyResult {
  Eigen::VectorXd x;
  double lambda = 0.0;
  bool reached_residual = false;
  int steps = 0;
};

// Follows the lasso path from lambda_max down to lambda_stop, or until the
// residual norm reaches residual_stop (if residual_stop >= 0), whichever comes first.
inline HomotopyResult homotopy_path(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y,
                                    const Eigen::VectorXd& corr0, double lambda_stop, double residual_stop,
                                    const SolverOptions& opt) {
  const auto& atoms = dict.atoms();
  const auto& gram = dict.gram();
  const Eigen::Index n = dict.num_atoms();

  HomotopyResult out;
  out.x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd corr = corr0;
  Eigen::VectorXd resid = y;
  Eigen::Index first = 0;
  double lambda = corr.cwiseAbs().maxCoeff(&first);
  if (lambda <= lambda_stop) {
    out.lambda = lambda_stop;
    return out;
  }

  ActiveCholesky chol(std::min(n, dict.dim()) + 1);
  std::vector<Eigen::Index> active;
  std::vector<double> signs;
  std::vector<char> in_active(static_cast<std::size_t>(n), 0);
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  chol.append(Eigen::VectorXd(0), gram(first, first), opt.collinearity_tolerance);
  active.push_back(first);
  signs.push_back(corr[first] > 0.0 ? 1.0 : -1.0);
  in_active[static_cast<std::size_t>(first)] = 1;
  Eigen::Index just_dropped = -1;

  const double lambda_max = lambda;
  const double slack = 1e-12 * lambda_max;
  Eigen::VectorXd a(n);
  Eigen::VectorXd u(dict.dim());
  bool fresh = true;
  while (true) {
    if (++out.steps > opt.max_iterations) {
      throw NumericalError("homotopy did not reach the target within " + std::to_string(opt.max_iterations) +
                           " steps (lambda " + std::to_string(lambda) + ")");
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    const Eigen::VectorXd d = chol.solve(Eigen::Map<const Eigen::VectorXd>(signs.data(), na));
    a.setZero();
    u.setZero();
    for (Eigen::Index i = 0; i < na; ++i) {
      a.noalias() += d[i] * gram.col(active[static_cast<std::size_t>(i)]);
      u.noalias() += d[i] * atoms.col(active[static_cast<std::size_t>(i)]);
    }

    enum class Event { Penalty, Residual, Enter, Leave } event = Event::Penalty;
    double gamma = lambda - lambda_stop;
    Eigen::Index who = -1;
    double enter_sign = 0.0;

    if (residual_stop >= 0.0) {
      // ||resid - g u||^2 = residual_stop^2, smallest root.
      const double rr = resid.squaredNorm();
      const double ru = resid.dot(u);
      const double uu = u.squaredNorm();
      const double excess = rr - residual_stop * residual_stop;
      const double disc = ru * ru - uu * excess;
      if (excess <= 0.0) {
        gamma = 0.0;
        event = Event::Residual;
      } else if (disc >= 0.0 && ru > 0.0) {
        const double g = excess / (ru + std::sqrt(disc));
        if (g < gamma) {
          gamma = g;
          event = Event::Residual;
        }
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (in_active[ju] || blocked[ju]) continue;
      // An atom that has drifted past lambda re-enters at once; the one just
      // dropped sits exactly at lambda and may only return after a real step.
      const double floor = j == just_dropped ? slack : 0.0;
      if (a[j] < 1.0 - 1e-12) {
        const double g = std::max(0.0, (lambda - corr[j]) / (1.0 - a[j]));
        if (g < gamma && g >= floor) {
          gamma = g;
          event = Event::Enter;
          who = j;
          enter_sign = 1.0;
        }
      }
      if (a[j] > -1.0 + 1e-12) {
        const double g = std::max(0.0, (lambda + corr[j]) / (1.0 + a[j]));
        if (g < gamma && g >= floor) {
          gamma = g;
          event = Event::Enter;
          who = j;
          enter_sign = -1.0;
        }
      }
    }
    for (Eigen::Index i = 0; i < na; ++i) {
      const Eigen::Index j = active[static_cast<std::size_t>(i)];
      if (d[i] == 0.0) continue;
      const double g = -out.x[j] / d[i];
      if (g > 0.0 && g < gamma) {
        gamma = g;
        event = Event::Leave;
        who = i;
      }
    }

    if (event == Event::Residual && !fresh) {
      // Locate the crossing from exact quantities rather than accumulated ones.
      resid = y - atoms * out.x;
      corr.noalias() = atoms.transpose() * resid;
      fresh = true;
      --out.steps;
      continue;
    }
    fresh = false;
    for (Eigen::Index i = 0; i < na; ++i) out.x[active[static_cast<std::size_t>(i)]] += gamma * d[i];
    resid.noalias() -= gamma * u;
    corr.noalias() -= gamma * a;
    lambda -= gamma;
    just_dropped = -1;

    if (event == Event::Penalty || event == Event::Residual) {
      out.lambda = std::max(lambda, lambda_stop);
      out.reached_residual = event == Event::Residual;
      return out;
    }
    if (event == Event::Enter) {
      Eigen::VectorXd g(na);
      for (Eigen::Index i = 0; i < na; ++i) g[i] = gram(active[static_cast<std::size_t>(i)], who);
      if (chol.append(g, gram(who, who), opt.collinearity_tolerance)) {
        active.push_back(who);
        signs.push_back(enter_sign);
        in_active[static_cast<std::size_t>(who)] = 1;
      } else {
        blocked[static_cast<std::size_t>(who)] = 1;
      }
    } else {
      const Eigen::Index j = active[static_cast<std::size_t>(who)];
      out.x[j] = 0.0;
      chol.remove(who);
      active.erase(active.begin() + who);
      signs.erase(signs.begin() + who);
      in_active[static_cast<std::size_t>(j)] = 0;
      std::fill(blocked.begin(), blocked.end(), 0);
      just_dropped = j;
    }
    if (out.steps % 64 == 0) {
      // Refresh accumulated quantities.
      resid = y - atoms * out.x;
      corr.noalias() = atoms.transpose() * resid;
      fresh = true;
    }
  }
}

inline void check_input(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != dict.dim()) {
    throw DataError("input dimension " + std::to_string(y.size()) + " does not match dictionary dimension " +
                    std::to_string(dict.dim()));
  }
  if (!y.allFinite()) throw DataError("input vector contains non-finite values");
}

// Attaches the certificate, polishing with coordinate descent if needed.
inline void certify(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::VectorXd& corr,
                    double lambda, const SolverOptions& opt, SparseCode& code) {
  const double yy = y.squaredNorm();
  Eigen::VectorXd gx = dict.gram() * code.coefficients;
  code.final_gap = lambda > 0.0 ? relative_gap(corr, yy, code.coefficients, gx, lambda) : 0.0;
  if (lambda > 0.0 && code.final_gap > opt.gap_tolerance) {
    code.iterations += coordinate_descent(dict.gram(), corr, yy, lambda, code.coefficients, gx, opt, code.final_gap);
    if (code.final_gap > opt.gap_tolerance) {
      throw NumericalError("l1 solver did not converge (lambda " + std::to_string(lambda) +
                           ", final relative gap " + std::to_string(code.final_gap) + ")");
    }
  }
  code.penalty = lambda;
  code.residual_norm = (y - dict.atoms() * code.coefficients).norm();
}

}  // namespace detail

/// Minimizer of 0.5 ||y - A x||^2 + lambda ||x||_1 by the homotopy path.
inline SparseCode solve_lasso(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                              const SolverOptions& opt = {}) {
  detail::check_input(dict, y);
  if (!(lambda >= 0.0)) throw ConfigError("penalty must be non-negative");
  const Eigen::VectorXd corr = dict.atoms().transpose() * y;
  auto path = detail::homotopy_path(dict, y, corr, lambda, -1.0, opt);
  SparseCode code;
  code.coefficients = std::move(path.x);
  code.iterations = path.steps;
  detail::certify(dict, y, corr, lambda, opt, code);
  return code;
}

/// Same problem as solve_lasso, by cyclic coordinate descent from zero.
inline SparseCode solve_lasso_cd(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                                 const SolverOptions& opt = {}) {
  detail::check_input(dict, y);
  if (!(lambda > 0.0)) throw ConfigError("coordinate descent needs a positive penalty");
  const Eigen::VectorXd corr = dict.atoms().transpose() * y;
  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(dict.num_atoms());
  Eigen::VectorXd gx = Eigen::VectorXd::Zero(dict.num_atoms());
  code.iterations =
      detail::coordinate_descent(dict.gram(), corr, y.squaredNorm(), lambda, code.coefficients, gx, opt, code.final_gap);
  if (code.final_gap > opt.gap_tolerance) {
    throw NumericalError("coordinate descent did not converge within " + std::to_string(opt.max_iterations) +
                         " sweeps (final relative gap " + std::to_string(code.final_gap) + ")");
  }
  code.penalty = lambda;
  code.residual_norm = (y - dict.atoms() * code.coefficients).norm();
  return code;
}

/// Minimum-l1 code of y with residual norm at most epsilon (see the file comment
/// for the fallback when that is impossible).
inline SparseCode solve_l1(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, double epsilon,
                           const SolverOptions& opt = {}) {
  detail::check_input(dict, y);
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");

  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(dict.num_atoms());
  code.residual_norm = y.norm();
  if (code.residual_norm <= epsilon) return code;

  const Eigen::VectorXd corr = dict.atoms().transpose() * y;
  const double lambda_max = corr.lpNorm<Eigen::Infinity>();
  const bool feasible = dict.span_distance(y) < epsilon;
  if (lambda_max == 0.0) {
    code.constraint_met = false;
    return code;
  }
  if (feasible) {
    // Borderline inputs (span distance within rounding of epsilon) may run the
    // path down to the penalty floor without reaching epsilon; they take the
    // fallback below.
    try {
      auto path = detail::homotopy_path(dict, y, corr, opt.min_penalty_ratio * lambda_max, epsilon, opt);
      if (path.reached_residual) {
        code.coefficients = std::move(path.x);
        code.iterations = path.steps;
        detail::certify(dict, y, corr, path.lambda, opt, code);
        return code;
      }
      code.iterations = path.steps;
    } catch (const NumericalError&) {
    }
  }
  const int spent = code.iterations;
  auto path = detail::homotopy_path(dict, y, corr, opt.infeasible_penalty_ratio * lambda_max, -1.0, opt);
  code.coefficients = std::move(path.x);
  code.iterations = spent + path.steps;
  code.constraint_met = false;
  detail::certify(dict, y, corr, path.lambda, opt, code);
  return code;
}

}  // namespace srosr
