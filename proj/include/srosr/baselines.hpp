#pragma once

// Reference rejectors built on plain SRC: sparsity concentration (SCI),
// residual ratio, and a raw reconstruction-error threshold ("naive").

#include <cstdint>
#include <limits>

#include "srosr/srosr.hpp"

namespace srosr {

inline Label sci_decide(const SrcResult& src, const Dictionary& dict, double alpha) {
  if (sci(src.code, dict).value < alpha) return std::nullopt;
  return src.label;
}

/// OPEN when SCI(x) < alpha.
inline Label sci_classify(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, double epsilon,
                          double alpha, const SolverOptions& opt = {}) {
  if (dict.num_classes() < 2) throw ConfigError("SCI rejection needs at least two classes");
  return sci_decide(src_classify(dict, y, epsilon, opt), dict, alpha);
}

inline Label ratio_decide(const SrcResult& src, double tau) {
  if (ratio_score(src.residuals) < tau) return std::nullopt;
  return src.label;
}

/// OPEN when second-smallest / smallest residual < tau.
inline Label ratio_classify(const Dictionary& dict, const Eigen::Ref<const Eigen::VectorXd>& y, double epsilon,
                            double tau, const SolverOptions& opt = {}) {
  if (dict.num_classes() < 2) throw ConfigError("ratio rejection needs at least two classes");
  return ratio_decide(src_classify(dict, y, epsilon, opt), tau);
}

/// alpha such that a fraction quantile_q of the harvested cross-test codes
/// (pooled over classes) has SCI >= alpha: the lower (1 - q)-quantile.
inline double calibrate_sci_alpha(const HarvestMap& harvest, double quantile_q) {
  if (!(quantile_q >= 0.0 && quantile_q <= 1.0)) throw ConfigError("calibration quantile must lie in [0, 1]");
  std::vector<double> pooled;
  for (const auto& [cls, errors] : harvest) pooled.insert(pooled.end(), errors.sci_values.begin(), errors.sci_values.end());
  return lower_quantile(std::move(pooled), 1.0 - quantile_q);
}

/// Same calibration for the residual ratio, never below 1.
inline double calibrate_ratio_tau(const HarvestMap& harvest, double quantile_q) {
  if (!(quantile_q >= 0.0 && quantile_q <= 1.0)) throw ConfigError("calibration quantile must lie in [0, 1]");
  std::vector<double> pooled;
  for (const auto& [cls, errors] : harvest) {
    pooled.insert(pooled.end(), errors.ratio_values.begin(), errors.ratio_values.end());
  }
  return std::max(1.0, lower_quantile(std::move(pooled), 1.0 - quantile_q));
}

struct NaiveModel {
  Dictionary dictionary;
  double error_threshold = std::numeric_limits<double>::infinity();
  double quantile_q = 0.95;
  double epsilon = 0.001;
  SolverOptions solver{};
};

/// Threshold = lower q-quantile of the matched errors pooled over all classes.
inline NaiveModel naive_fit(Dictionary dictionary, const HarvestMap& harvest, double quantile_q, double epsilon,
                            const SolverOptions& solver = {}) {
  if (!(quantile_q >= 0.0 && quantile_q <= 1.0)) throw ConfigError("naive quantile must lie in [0, 1]");
  std::vector<double> pooled;
  for (const auto& [cls, errors] : harvest) pooled.insert(pooled.end(), errors.matched.begin(), errors.matched.end());
  NaiveModel model;
  model.dictionary = std::move(dictionary);
  model.quantile_q = quantile_q;
  model.epsilon = epsilon;
  model.solver = solver;
  model.error_threshold = lower_quantile(std::move(pooled), quantile_q);
  if (!(model.error_threshold > 0.0)) {
    // An exact-zero quantile would reject everything not reproduced exactly.
    model.error_threshold = std::numeric_limits<double>::min();
  }
  return model;
}

inline NaiveModel naive_train(const LabeledDataset& data, double epsilon, double quantile_q, std::size_t rounds,
                              std::uint64_t seed, double train_fraction = 0.8, const SolverOptions& solver = {}) {
  const auto harvest = harvest_errors(data, {epsilon, rounds, train_fraction, solver}, seed);
  return naive_fit(Dictionary::from_dataset(data), harvest, quantile_q, epsilon, solver);
}

inline Label naive_decide(const NaiveModel& model, const ResidualVector& residuals) {
  if (residuals.per_class[static_cast<Eigen::Index>(residuals.argmin_index)] > model.error_threshold) {
    return std::nullopt;
  }
  return residuals.argmin_class;
}

/// y is scaled to unit norm first. OPEN when min_k r_k exceeds the threshold.
inline Label naive_classify(const NaiveModel& model, const Eigen::Ref<const Eigen::VectorXd>& y) {
  Eigen::VectorXd unit = y;
  if (const double norm = unit.norm(); norm > 0.0) unit /= norm;
  return naive_decide(model, src_classify(model.dictionary, unit, model.epsilon, model.solver).residuals);
}

}  // namespace srosr
