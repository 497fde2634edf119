#pragma once

// Sparse representation-based classification: per-class residuals, the SRC
// decision rule, and the sparsity concentration and residual ratio scores.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "srosr/dictionary.hpp"
#include "srosr/l1_solver.hpp"

namespace srosr {

struct ResidualVector {
  /// One entry per dictionary class, in Dictionary::classes() order.
  Eigen::VectorXd per_class;
  std::size_t argmin_index = 0;
  ClassId argmin_class;
};

/// r_k = ||y - A_k x_k|| with x_k the class-k part of the code. Ties in the
/// argmin go to the earliest class in ClassLess order.
inline ResidualVector class_residuals(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y,
                                      const SparseCode& code) {
  if (code.coefficients.size() != dict.num_atoms()) {
    throw DataError("code length does not match dictionary size");
  }
  if (y.size() != dict.dim()) throw DataError("input dimension does not match dictionary");
  ResidualVector out;
  out.per_class.resize(static_cast<Eigen::Index>(dict.num_classes()));
  Eigen::VectorXd recon(dict.dim());
  for (std::size_t k = 0; k < dict.num_classes(); ++k) {
    recon = y;
    for (const auto j : dict.class_columns(k)) {
      const double c = code.coefficients[j];
      if (c != 0.0) recon.noalias() -= c * dict.atoms().col(j);
    }
    out.per_class[static_cast<Eigen::Index>(k)] = recon.norm();
  }
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < out.per_class.size(); ++k) {
    if (out.per_class[k] < out.per_class[best]) best = k;
  }
  out.argmin_index = static_cast<std::size_t>(best);
  out.argmin_class = dict.classes()[out.argmin_index];
  return out;
}

struct SrcResult {
  ClassId label;
  ResidualVector residuals;
  SparseCode code;
};

inline SrcResult src_classify(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y,
                              double epsilon, const SolverOptions& opt = {}) {
  SrcResult out;
  out.code = solve_l1(dict, y, epsilon, opt);
  out.residuals = class_residuals(dict, y, out.code);
  out.label = out.residuals.argmin_class;
  return out;
}

struct SciScore {
  double value = 0.0;
  /// Set when the code is identically zero; value is then 0.
  bool zero_code = false;
};

/// Sparsity concentration index (K max_k ||x_k||_1 / ||x||_1 - 1) / (K - 1).
inline SciScore sci(const SparseCode& code, const Dictionary& dict) {
  const auto k = dict.num_classes();
  if (k < 2) throw ConfigError("SCI needs at least two classes");
  if (code.coefficients.size() != dict.num_atoms()) throw DataError("code length does not match dictionary size");
  const double total = code.coefficients.lpNorm<1>();
  if (total == 0.0) return {0.0, true};
  double best = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double mass = 0.0;
    for (const auto j : dict.class_columns(c)) mass += std::abs(code.coefficients[j]);
    best = std::max(best, mass);
  }
  const double kd = static_cast<double>(k);
  const double value = (kd * best / total - 1.0) / (kd - 1.0);
  return {std::clamp(value, 0.0, 1.0), false};
}

inline constexpr double kRatioCap = 1e6;

/// Second-smallest residual over the smallest, capped at cap (also for a zero smallest residual).
inline double ratio_score(const ResidualVector& residuals, double cap = kRatioCap) {
  const auto& r = residuals.per_class;
  if (r.size() < 2) throw ConfigError("ratio score needs at least two classes");
  double first = std::numeric_limits<double>::infinity();
  double second = first;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    if (r[k] < first) {
      second = first;
      first = r[k];
    } else if (r[k] < second) {
      second = r[k];
    }
  }
  if (second == first) return 1.0;
  if (first == 0.0) return cap;
  return std::min(second / first, cap);
}

}  // namespace srosr
