#pragma once

// Open set recognition on top of SRC.
//
// Training harvests reconstruction errors from repeated random cross splits of
// the training set: for every cross-test sample of class i, the residual r_i of
// its own class ("matched") and the sum of the residuals of all other classes
// ("non-matched sum"). Per class, the right tail of the matched errors and the
// right tail of the negated non-matched sums (the left tail of the sums) are
// modelled by Generalized Pareto distributions.
//
// At test time the candidate class k* = argmin r_k is scored by
//
//     S = G_m(r_k*) + w G_nm(-sum_{i != k*} r_i)
//
// and the sample is declared open when S > delta_t.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srosr/dataset.hpp"
#include "srosr/evt.hpp"
#include "srosr/rng.hpp"
#include "srosr/sparse.hpp"

namespace srosr {

struct ClassTailModels {
  GpdModel matched;
  /// Fitted on negated non-matched sums; absent when that fit failed.
  std::optional<GpdModel> inverted_nonmatched;
};

struct HarvestedErrors {
  std::vector<double> matched;
  std::vector<double> nonmatched_sums;
  /// SCI and residual ratio of each cross-test code, for calibrating the baselines.
  std::vector<double> sci_values;
  std::vector<double> ratio_values;
};

using HarvestMap = std::map<ClassId, HarvestedErrors, ClassLess>;

struct HarvestOptions {
  double epsilon = 0.001;
  std::size_t rounds = 20;
  double train_fraction = 0.8;
  SolverOptions solver{};
};

inline constexpr std::size_t kMinSamplesPerClassForHarvest = 5;

/// Runs `rounds` random cross splits. Round r uses the engine seeded with
/// derive_seed(seed, r); classes are split in ClassLess order. Output vectors
/// are ordered by round, then by cross-test position.
inline HarvestMap harvest_errors(const LabeledDataset& data, const HarvestOptions& opt, std::uint64_t seed) {
  if (opt.rounds == 0) throw ConfigError("number of harvest rounds must be at least 1");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) {
    throw ConfigError("cross-train fraction must lie in (0, 1)");
  }
  const auto normalized = normalize_columns(data);
  const auto groups = normalized.index_by_class();
  if (groups.size() < 2) throw DataError("error harvesting needs at least two classes");
  for (const auto& [cls, idx] : groups) {
    const auto n_train = static_cast<std::size_t>(std::floor(opt.train_fraction * static_cast<double>(idx.size())));
    if (idx.size() < kMinSamplesPerClassForHarvest || n_train == 0 || n_train == idx.size()) {
      throw DataError("class " + cls + " has " + std::to_string(idx.size()) +
                      " samples; cross splits need at least " + std::to_string(kMinSamplesPerClassForHarvest));
    }
  }

  HarvestMap out;
  for (const auto& [cls, idx] : groups) out[cls];

  for (std::size_t round = 0; round < opt.rounds; ++round) {
    Engine eng(derive_seed(seed, round));
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (const auto& [cls, idx] : groups) {
      auto order = idx;
      shuffle(std::span(order), eng);
      const auto n_train = static_cast<std::size_t>(std::floor(opt.train_fraction * static_cast<double>(order.size())));
      train_idx.insert(train_idx.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
      test_idx.insert(test_idx.end(), order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    }
    const auto cross_train = normalized.select(train_idx);
    const Dictionary dict(cross_train.features, cross_train.labels);
    for (const auto j : test_idx) {
      const auto& cls = normalized.labels[j];
      SrcResult src;
      try {
        src = src_classify(dict, normalized.features.col(static_cast<Eigen::Index>(j)), opt.epsilon, opt.solver);
      } catch (const NumericalError& e) {
        throw NumericalError("harvest round " + std::to_string(round) + ", class " + cls + ": " + e.what());
      }
      const auto k = static_cast<Eigen::Index>(dict.class_index(cls));
      const double matched = src.residuals.per_class[k];
      out[cls].matched.push_back(matched);
      out[cls].nonmatched_sums.push_back(src.residuals.per_class.sum() - matched);
      out[cls].sci_values.push_back(sci(src.code, dict).value);
      out[cls].ratio_values.push_back(ratio_score(src.residuals));
    }
  }
  return out;
}

/// Per-dataset defaults for the tail fraction and the rejection threshold
/// delta_t = delta_base * (1 + w).
struct DatasetPreset {
  std::string_view name;
  double rho;
  double delta_base;
};

inline constexpr DatasetPreset kPresetMnist{"mnist", 0.14, 0.006};
inline constexpr DatasetPreset kPresetYaleB{"yaleb", 0.10, 0.007};
inline constexpr DatasetPreset kPresetUiuc{"uiuc", 0.39, 0.05};
inline constexpr DatasetPreset kPresetCaltech256{"caltech256", 0.25, 0.1};

inline const DatasetPreset& find_preset(std::string_view name) {
  static constexpr DatasetPreset kAll[] = {kPresetMnist, kPresetYaleB, kPresetUiuc, kPresetCaltech256};
  for (const auto& p : kAll) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown dataset preset '" + std::string(name) + "'");
}

/// w = (1 - openness) / 3.
inline double fusion_weight(double openness_est) {
  if (!(openness_est >= 0.0 && openness_est < 1.0)) throw ConfigError("openness estimate must lie in [0, 1)");
  return (1.0 - openness_est) / 3.0;
}

inline double preset_delta(const DatasetPreset& preset, double weight_w) {
  return preset.delta_base * (1.0 + weight_w);
}

struct SrosrParams {
  double rho = kPresetMnist.rho;
  double epsilon = 0.001;
  std::size_t rounds = 20;
  double train_fraction = 0.8;
  double openness_est = 0.0;
  double delta_t = preset_delta(kPresetMnist, 1.0 / 3.0);
  /// Ignore the non-matched tail (w = 0).
  bool matched_only = false;
  SolverOptions solver{};
  GpdFitOptions gpd{};
};

struct SrosrModel {
  Dictionary dictionary;
  std::map<ClassId, ClassTailModels, ClassLess> tails;
  double epsilon = 0.001;
  double rho = 0.14;
  std::size_t rounds = 20;
  double train_fraction = 0.8;
  double weight_w = 1.0 / 3.0;
  double delta_t = 0.008;
  SolverOptions solver{};
  std::vector<std::string> fit_warnings;
};

/// Fits the per-class tail pairs from harvested errors.
inline SrosrModel fit_tails(Dictionary dictionary, const HarvestMap& harvest, const SrosrParams& params) {
  if (!(params.delta_t > 0.0)) throw ConfigError("rejection threshold delta_t must be positive");
  SrosrModel model;
  model.weight_w = params.matched_only ? 0.0 : fusion_weight(params.openness_est);
  model.dictionary = std::move(dictionary);
  model.epsilon = params.epsilon;
  model.rho = params.rho;
  model.rounds = params.rounds;
  model.train_fraction = params.train_fraction;
  model.delta_t = params.delta_t;
  model.solver = params.solver;

  for (const auto& cls : model.dictionary.classes()) {
    const auto it = harvest.find(cls);
    if (it == harvest.end()) throw DataError("no harvested errors for class " + cls);
    ClassTailModels tails;
    try {
      const auto fit = fit_gpd_tail(it->second.matched, params.rho, params.gpd);
      if (!fit.is_mle) model.fit_warnings.push_back("class " + cls + ": matched tail uses the moment estimate");
      tails.matched = fit.model;
    } catch (const Error& e) {
      throw NumericalError("class " + cls + ": matched tail fit failed: " + e.what());
    }
    std::vector<double> inverted(it->second.nonmatched_sums.size());
    std::transform(it->second.nonmatched_sums.begin(), it->second.nonmatched_sums.end(), inverted.begin(),
                   [](double v) { return -v; });
    try {
      const auto fit = fit_gpd_tail(inverted, params.rho, params.gpd);
      if (!fit.is_mle) model.fit_warnings.push_back("class " + cls + ": non-matched tail uses the moment estimate");
      tails.inverted_nonmatched = fit.model;
    } catch (const Error& e) {
      model.fit_warnings.push_back("class " + cls + ": non-matched tail fit failed: " + e.what());
    }
    model.tails.emplace(cls, tails);
  }
  return model;
}

inline SrosrModel train(const LabeledDataset& data, const SrosrParams& params, std::uint64_t seed) {
  HarvestOptions harvest_opt{params.epsilon, params.rounds, params.train_fraction, params.solver};
  const auto harvest = harvest_errors(data, harvest_opt, seed);
  return fit_tails(Dictionary::from_dataset(data), harvest, params);
}

inline double fuse_scores(double s_matched, double s_nonmatched, double weight_w) {
  if (!(s_matched >= 0.0 && s_matched <= 1.0) || !(s_nonmatched >= 0.0 && s_nonmatched <= 1.0)) {
    throw ConfigError("tail probabilities must lie in [0, 1]");
  }
  if (!(weight_w >= 0.0 && weight_w <= 1.0 / 3.0 + 1e-15)) throw ConfigError("fusion weight must lie in [0, 1/3]");
  return s_matched + weight_w * s_nonmatched;
}

struct SrosrDecision {
  Label label;
  ClassId candidate;
  double s_matched = 0.0;
  double s_nonmatched = 0.0;
  double fused = 0.0;
};

/// Decision from an already computed SRC result on the model's dictionary.
inline SrosrDecision decide(const SrosrModel& model, const ResidualVector& residuals) {
  SrosrDecision out;
  out.candidate = residuals.argmin_class;
  const auto it = model.tails.find(out.candidate);
  if (it == model.tails.end()) throw DataError("no tail models for class " + out.candidate);
  const double r_m = residuals.per_class[static_cast<Eigen::Index>(residuals.argmin_index)];
  const double r_nm = residuals.per_class.sum() - r_m;
  out.s_matched = tail_probability(it->second.matched, r_m);
  out.s_nonmatched = it->second.inverted_nonmatched ? tail_probability(*it->second.inverted_nonmatched, -r_nm) : 0.0;
  out.fused = fuse_scores(out.s_matched, out.s_nonmatched, model.weight_w);
  if (out.fused > model.delta_t) {
    out.label = std::nullopt;
  } else {
    out.label = out.candidate;
  }
  return out;
}

/// y is scaled to unit norm before coding, like the dictionary atoms.
inline SrosrDecision classify(const SrosrModel& model, const Eigen::Ref<const Eigen::VectorXd>& y) {
  Eigen::VectorXd unit = y;
  if (const double norm = unit.norm(); norm > 0.0) unit /= norm;
  const auto src = src_classify(model.dictionary, unit, model.epsilon, model.solver);
  return decide(model, src.residuals);
}

}  // namespace srosr
