#pragma once

// Open-set metrics and the openness sweep runner.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srosr/baselines.hpp"
#include "srosr/hash.hpp"

namespace srosr {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// TP: known sample given its own label. FN: known sample rejected or mislabeled.
/// FP: open sample given any known label. TN: open sample rejected.
inline ConfusionCounts score_predictions(const std::vector<Label>& predictions, const std::vector<Label>& truth) {
  if (predictions.size() != truth.size()) {
    throw DataError("score_predictions: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(truth.size()) + " ground-truth labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      if (predictions[i] && *predictions[i] == *truth[i]) ++c.tp; else ++c.fn;
    } else {
      if (predictions[i]) ++c.fp; else ++c.tn;
    }
  }
  return c;
}

/// False when precision or recall has a zero denominator.
inline bool f_measure_defined(const ConfusionCounts& c) { return c.tp + c.fp > 0 && c.tp + c.fn > 0; }

/// Harmonic mean of precision and recall; 0 when undefined (see f_measure_defined).
inline double f_measure(const ConfusionCounts& c) {
  if (!f_measure_defined(c)) return 0.0;
  const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

inline double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("accuracy of an empty confusion count");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

enum class MethodKind { Srosr, SrosrMatchedOnly, Naive, Sci, Ratio };

inline std::string_view method_kind_name(MethodKind k) {
  switch (k) {
    case MethodKind::Srosr: return "srosr";
    case MethodKind::SrosrMatchedOnly: return "srosr_matched_only";
    case MethodKind::Naive: return "naive";
    case MethodKind::Sci: return "sci";
    case MethodKind::Ratio: return "ratio";
  }
  return "?";
}

inline MethodKind parse_method_kind(std::string_view s) {
  for (auto k : {MethodKind::Srosr, MethodKind::SrosrMatchedOnly, MethodKind::Naive, MethodKind::Sci,
                 MethodKind::Ratio}) {
    if (method_kind_name(k) == s) return k;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct MethodConfig {
  /// Report label; defaults to the kind name.
  std::string name;
  MethodKind kind = MethodKind::Srosr;
  double epsilon = 0.001;
  std::size_t rounds = 20;
  /// Source of the rho and delta_t defaults.
  std::string preset = "mnist";
  std::optional<double> rho;
  /// Fixed threshold; otherwise preset base * (1 + w).
  std::optional<double> delta_t;
  /// Fixed SCI / ratio thresholds; otherwise calibrated on the training harvest.
  std::optional<double> alpha;
  std::optional<double> tau;
  /// Naive error quantile, and the acceptance level of calibrated SCI / ratio thresholds.
  double quantile_q = 0.95;

  std::string label() const { return name.empty() ? std::string(method_kind_name(kind)) : name; }
  bool operator==(const MethodConfig&) const = default;
};

struct OpennessLevel {
  std::size_t n_known = 6;
  std::size_t n_open = 0;
  bool operator==(const OpennessLevel&) const = default;
};

struct DatasetSource {
  /// "idx" or "csv".
  std::string loader = "idx";
  std::string path;
  /// IDX label file; unused for CSV.
  std::string labels_path;
  std::string label_column = "label";
  bool csv_header = true;
  /// IDX only: divide pixel bytes by 255.
  bool scale_pixels = true;
  bool operator==(const DatasetSource&) const = default;
};

struct SweepConfig {
  DatasetSource dataset;
  std::vector<MethodConfig> methods;
  std::vector<OpennessLevel> levels;
  double train_fraction = 0.8;
  /// Cross-train fraction of the error harvest.
  double harvest_fraction = 0.8;
  std::size_t trials = 10;
  /// 0 keeps every sample; otherwise each trial first subsamples each class.
  std::size_t max_per_class = 0;
  std::uint64_t master_seed = 0;
  SolverOptions solver{};
  bool operator==(const SweepConfig&) const = default;
};

struct MethodTrial {
  std::string method;
  ConfusionCounts counts;
  double f_measure = 0.0;
  double accuracy = 0.0;
  bool f_undefined = false;
  /// Decision threshold actually used (delta_t, alpha, tau, or error threshold).
  double threshold = 0.0;
  bool failed = false;
  std::string error;
  bool operator==(const MethodTrial&) const = default;
};

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  /// Fingerprint of the train and test splits all methods saw.
  std::uint64_t split_hash = 0;
  std::vector<ClassId> known_classes;
  std::vector<ClassId> open_classes;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<MethodTrial> methods;
  bool operator==(const TrialRecord&) const = default;
};

struct MethodSummary {
  std::string method;
  double f_measure_mean = 0.0;
  double f_measure_std = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  /// Trials that completed (failed trials are excluded from the means).
  std::size_t trials = 0;
  bool operator==(const MethodSummary&) const = default;
};

struct LevelResult {
  OpennessLevel level;
  double openness = 0.0;
  std::vector<MethodSummary> summaries;
  std::vector<TrialRecord> trials;
  bool operator==(const LevelResult&) const = default;
};

struct SweepResult {
  SweepConfig config;
  std::vector<LevelResult> levels;
  std::vector<std::string> warnings;
  bool operator==(const SweepResult&) const = default;
};

/// Loads the dataset a sweep configuration points at.
inline LabeledDataset load_source(const DatasetSource& source) {
  if (source.loader == "idx") {
    if (source.labels_path.empty()) throw ConfigError("idx dataset needs labels_path");
    return load_idx(source.path, source.labels_path, source.scale_pixels);
  }
  if (source.loader == "csv") return load_csv(source.path, {source.csv_header, source.label_column});
  throw ConfigError("unknown dataset loader '" + source.loader + "'");
}

inline std::uint64_t split_fingerprint(const OpenSetTrial& trial) {
  Fnv1a64 h;
  h.matrix(trial.train.features);
  for (const auto& l : trial.train.labels) h.text(l);
  h.matrix(trial.test.features);
  for (const auto& l : trial.test.labels) h.text(l);
  return h.value();
}

namespace detail {

inline void validate_sweep(const SweepConfig& config) {
  if (config.methods.empty()) throw ConfigError("sweep has no methods");
  if (config.trials == 0) throw ConfigError("sweep needs at least one trial per level");
  std::vector<std::string> names;
  for (const auto& m : config.methods) {
    if (std::find(names.begin(), names.end(), m.label()) != names.end()) {
      throw ConfigError("duplicate method name '" + m.label() + "'");
    }
    names.push_back(m.label());
    if (!(m.epsilon >= 0.0)) throw ConfigError("method " + m.label() + ": epsilon must be non-negative");
    if (m.rounds == 0) throw ConfigError("method " + m.label() + ": rounds must be at least 1");
    if (!(m.quantile_q >= 0.0 && m.quantile_q <= 1.0)) throw ConfigError("method " + m.label() + ": q must lie in [0, 1]");
    if (m.alpha && !(*m.alpha >= 0.0 && *m.alpha <= 1.0 + 1e-9)) throw ConfigError("alpha must lie in [0, 1]");
    if (m.tau && !(*m.tau >= 1.0)) throw ConfigError("tau must be at least 1");
    if (m.delta_t && !(*m.delta_t > 0.0)) throw ConfigError("delta_t must be positive");
    if (m.rho && !(*m.rho > 0.0 && *m.rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
    find_preset(m.preset);
  }
  for (const auto& l : config.levels) {
    if (l.n_known < 2) throw ConfigError("each openness level needs at least two known classes");
  }
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Runs every method on the same T trials per level. Trial t of level l uses
/// seed derive_seed(derive_seed(master_seed, l), t); from it come the per-class
/// subsample (stream 0), the class/sample split (stream 1) and the error harvest
/// (stream 2). Sparse codes and harvests are shared by methods with equal
/// (epsilon, rounds).
inline SweepResult run_openness_sweep(const LabeledDataset& data, const SweepConfig& config) {
  detail::validate_sweep(config);
  data.validate();
  SweepResult result;
  result.config = config;

  for (std::size_t li = 0; li < config.levels.size(); ++li) {
    const auto& level = config.levels[li];
    LevelResult lr;
    lr.level = level;
    lr.openness = openness(level.n_known, level.n_known, level.n_known + level.n_open);
    const std::uint64_t level_seed = derive_seed(config.master_seed, li);

    for (std::size_t t = 0; t < config.trials; ++t) {
      TrialRecord rec;
      rec.index = t;
      rec.seed = derive_seed(level_seed, t);
      auto fail_all = [&](const std::string& what) {
        result.warnings.push_back("level " + std::to_string(li) + " trial " + std::to_string(t) + ": " + what);
        for (const auto& m : config.methods) {
          MethodTrial mt;
          mt.method = m.label();
          mt.failed = true;
          mt.error = what;
          rec.methods.push_back(std::move(mt));
        }
      };

      OpenSetTrial trial;
      try {
        const auto pool = config.max_per_class > 0
                              ? subsample_per_class(data, config.max_per_class, derive_seed(rec.seed, 0))
                              : data;
        trial = sample_open_set_trial(pool, level.n_known, level.n_open, config.train_fraction,
                                      derive_seed(rec.seed, 1));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        fail_all(e.what());
        lr.trials.push_back(std::move(rec));
        continue;
      }
      rec.split_hash = split_fingerprint(trial);
      rec.known_classes = trial.known_classes;
      rec.open_classes = trial.open_classes;
      rec.n_train = trial.train.size();
      rec.n_test = trial.test.size();

      std::vector<Label> truth;
      truth.reserve(trial.test.size());
      for (const auto& l : trial.test.labels) {
        const bool known = std::find(trial.known_classes.begin(), trial.known_classes.end(), l) !=
                           trial.known_classes.end();
        truth.push_back(known ? Label(l) : std::nullopt);
      }

      std::optional<Dictionary> dict;
      std::optional<LabeledDataset> test;
      std::map<double, std::vector<SrcResult>> codes;
      std::map<std::pair<double, std::size_t>, HarvestMap> harvests;

      for (const auto& m : config.methods) {
        MethodTrial mt;
        mt.method = m.label();
        try {
          if (!dict) {
            dict.emplace(Dictionary::from_dataset(trial.train));
            test.emplace(normalize_columns(trial.test));
          }
          auto& src = codes[m.epsilon];
          if (src.empty()) {
            src.reserve(test->size());
            for (std::size_t j = 0; j < test->size(); ++j) {
              src.push_back(src_classify(*dict, test->features.col(static_cast<Eigen::Index>(j)), m.epsilon,
                                         config.solver));
            }
          }
          const bool needs_harvest = m.kind == MethodKind::Srosr || m.kind == MethodKind::SrosrMatchedOnly ||
                                     m.kind == MethodKind::Naive || (m.kind == MethodKind::Sci && !m.alpha) ||
                                     (m.kind == MethodKind::Ratio && !m.tau);
          const HarvestMap* harvest = nullptr;
          if (needs_harvest) {
            auto [it, fresh] = harvests.try_emplace({m.epsilon, m.rounds});
            if (fresh) {
              try {
                it->second = harvest_errors(trial.train, {m.epsilon, m.rounds, config.harvest_fraction, config.solver},
                                            derive_seed(rec.seed, 2));
              } catch (...) {
                harvests.erase(it);
                throw;
              }
            }
            harvest = &it->second;
          }

          std::vector<Label> pred;
          pred.reserve(src.size());
          switch (m.kind) {
            case MethodKind::Srosr:
            case MethodKind::SrosrMatchedOnly: {
              const auto& preset = find_preset(m.preset);
              SrosrParams p;
              p.rho = m.rho.value_or(preset.rho);
              p.epsilon = m.epsilon;
              p.rounds = m.rounds;
              p.train_fraction = config.harvest_fraction;
              p.openness_est = lr.openness;
              p.matched_only = m.kind == MethodKind::SrosrMatchedOnly;
              p.solver = config.solver;
              const double w = p.matched_only ? 0.0 : fusion_weight(lr.openness);
              p.delta_t = m.delta_t.value_or(preset_delta(preset, w));
              const auto model = fit_tails(*dict, *harvest, p);
              for (const auto& w_msg : model.fit_warnings) {
                result.warnings.push_back("level " + std::to_string(li) + " trial " + std::to_string(t) + " " +
                                          mt.method + ": " + w_msg);
              }
              mt.threshold = p.delta_t;
              for (const auto& s : src) pred.push_back(decide(model, s.residuals).label);
              break;
            }
            case MethodKind::Naive: {
              const auto model = naive_fit(*dict, *harvest, m.quantile_q, m.epsilon, config.solver);
              mt.threshold = model.error_threshold;
              for (const auto& s : src) pred.push_back(naive_decide(model, s.residuals));
              break;
            }
            case MethodKind::Sci: {
              const double alpha = m.alpha ? *m.alpha : calibrate_sci_alpha(*harvest, m.quantile_q);
              mt.threshold = alpha;
              for (const auto& s : src) pred.push_back(sci_decide(s, *dict, alpha));
              break;
            }
            case MethodKind::Ratio: {
              const double tau = m.tau ? *m.tau : calibrate_ratio_tau(*harvest, m.quantile_q);
              mt.threshold = tau;
              for (const auto& s : src) pred.push_back(ratio_decide(s, tau));
              break;
            }
          }
          mt.counts = score_predictions(pred, truth);
          mt.f_undefined = !f_measure_defined(mt.counts);
          mt.f_measure = f_measure(mt.counts);
          mt.accuracy = accuracy(mt.counts);
          if (mt.f_undefined) {
            result.warnings.push_back("level " + std::to_string(li) + " trial " + std::to_string(t) + " " +
                                      mt.method + ": F-measure undefined, scored 0");
          }
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          mt = MethodTrial{};
          mt.method = m.label();
          mt.failed = true;
          mt.error = e.what();
          result.warnings.push_back("level " + std::to_string(li) + " trial " + std::to_string(t) + " " +
                                    mt.method + " failed: " + e.what());
        }
        rec.methods.push_back(std::move(mt));
      }
      lr.trials.push_back(std::move(rec));
    }

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      MethodSummary s;
      s.method = config.methods[mi].label();
      std::vector<double> fs, accs;
      for (const auto& rec : lr.trials) {
        const auto& mt = rec.methods[mi];
        if (mt.failed) continue;
        fs.push_back(mt.f_measure);
        accs.push_back(mt.accuracy);
      }
      s.trials = fs.size();
      if (fs.empty()) {
        result.warnings.push_back("level " + std::to_string(li) + " " + s.method + ": every trial failed");
      }
      detail::mean_std(fs, s.f_measure_mean, s.f_measure_std);
      detail::mean_std(accs, s.accuracy_mean, s.accuracy_std);
      lr.summaries.push_back(std::move(s));
    }
    result.levels.push_back(std::move(lr));
  }
  return result;
}

}  // namespace srosr
