#pragma once

// JSON mapping of sweep configurations and results, and report files.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "srosr/harness.hpp"

namespace srosr {

using Json = nlohmann::json;

namespace detail {

// Rejects keys outside `allowed` so typos in config files fail loudly.
inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read_opt(j, key, v);
  out = v;
}

template <typename T>
void write_opt(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v; else j[key] = nullptr;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline void to_json(Json& j, const SolverOptions& o) {
  j = Json{{"gap_tolerance", o.gap_tolerance},
           {"max_iterations", o.max_iterations},
           {"infeasible_penalty_ratio", o.infeasible_penalty_ratio},
           {"min_penalty_ratio", o.min_penalty_ratio},
           {"collinearity_tolerance", o.collinearity_tolerance}};
}

inline void from_json(const Json& j, SolverOptions& o) {
  detail::check_keys(j, {"gap_tolerance", "max_iterations", "infeasible_penalty_ratio", "min_penalty_ratio",
                         "collinearity_tolerance"}, "solver");
  detail::read_opt(j, "gap_tolerance", o.gap_tolerance);
  detail::read_opt(j, "max_iterations", o.max_iterations);
  detail::read_opt(j, "infeasible_penalty_ratio", o.infeasible_penalty_ratio);
  detail::read_opt(j, "min_penalty_ratio", o.min_penalty_ratio);
  detail::read_opt(j, "collinearity_tolerance", o.collinearity_tolerance);
  if (!(o.gap_tolerance > 0.0)) throw ConfigError("solver gap_tolerance must be positive");
  if (o.max_iterations < 1) throw ConfigError("solver max_iterations must be at least 1");
  if (!(o.infeasible_penalty_ratio > 0.0 && o.infeasible_penalty_ratio < 1.0)) {
    throw ConfigError("infeasible_penalty_ratio must lie in (0, 1)");
  }
  if (!(o.min_penalty_ratio >= 0.0 && o.min_penalty_ratio < 1.0)) throw ConfigError("min_penalty_ratio must lie in [0, 1)");
}

inline void to_json(Json& j, const MethodConfig& m) {
  j = Json{{"name", m.name},       {"kind", method_kind_name(m.kind)}, {"epsilon", m.epsilon},
           {"rounds", m.rounds},      {"preset", m.preset},               {"quantile_q", m.quantile_q}};
  detail::write_opt(j, "rho", m.rho);
  detail::write_opt(j, "delta_t", m.delta_t);
  detail::write_opt(j, "alpha", m.alpha);
  detail::write_opt(j, "tau", m.tau);
}

inline void from_json(const Json& j, MethodConfig& m) {
  detail::check_keys(j, {"name", "kind", "epsilon", "rounds", "preset", "quantile_q", "rho", "delta_t", "alpha", "tau"},
                     "method");
  std::string kind;
  if (!j.contains("kind")) throw ConfigError("method entry needs a 'kind'");
  detail::read_opt(j, "kind", kind);
  m.kind = parse_method_kind(kind);
  detail::read_opt(j, "name", m.name);
  detail::read_opt(j, "epsilon", m.epsilon);
  detail::read_opt(j, "rounds", m.rounds);
  detail::read_opt(j, "preset", m.preset);
  detail::read_opt(j, "quantile_q", m.quantile_q);
  detail::read_opt(j, "rho", m.rho);
  detail::read_opt(j, "delta_t", m.delta_t);
  detail::read_opt(j, "alpha", m.alpha);
  detail::read_opt(j, "tau", m.tau);
}

inline void to_json(Json& j, const OpennessLevel& l) { j = Json{{"n_known", l.n_known}, {"n_open", l.n_open}}; }

inline void from_json(const Json& j, OpennessLevel& l) {
  detail::check_keys(j, {"n_known", "n_open"}, "level");
  detail::read_opt(j, "n_known", l.n_known);
  detail::read_opt(j, "n_open", l.n_open);
}

inline void to_json(Json& j, const DatasetSource& d) {
  j = Json{{"loader", d.loader},
           {"path", d.path},
           {"labels_path", d.labels_path},
           {"label_column", d.label_column},
           {"csv_header", d.csv_header},
           {"scale_pixels", d.scale_pixels}};
}

inline void from_json(const Json& j, DatasetSource& d) {
  detail::check_keys(j, {"loader", "path", "labels_path", "label_column", "csv_header", "scale_pixels"}, "dataset");
  detail::read_opt(j, "loader", d.loader);
  detail::read_opt(j, "path", d.path);
  detail::read_opt(j, "labels_path", d.labels_path);
  detail::read_opt(j, "label_column", d.label_column);
  detail::read_opt(j, "csv_header", d.csv_header);
  detail::read_opt(j, "scale_pixels", d.scale_pixels);
  if (d.loader != "idx" && d.loader != "csv") throw ConfigError("dataset loader must be 'idx' or 'csv'");
}

inline void to_json(Json& j, const SweepConfig& c) {
  j = Json{{"dataset", c.dataset},
           {"methods", c.methods},
           {"levels", c.levels},
           {"train_fraction", c.train_fraction},
           {"harvest_fraction", c.harvest_fraction},
           {"trials", c.trials},
           {"max_per_class", c.max_per_class},
           {"master_seed", c.master_seed},
           {"solver", c.solver}};
}

inline void from_json(const Json& j, SweepConfig& c) {
  detail::check_keys(j, {"dataset", "methods", "levels", "train_fraction", "harvest_fraction", "trials",
                         "max_per_class", "master_seed", "solver"}, "sweep config");
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<DatasetSource>();
  if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<MethodConfig>>();
  if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<OpennessLevel>>();
  if (j.contains("solver")) c.solver = j.at("solver").get<SolverOptions>();
  detail::read_opt(j, "train_fraction", c.train_fraction);
  detail::read_opt(j, "harvest_fraction", c.harvest_fraction);
  detail::read_opt(j, "trials", c.trials);
  detail::read_opt(j, "max_per_class", c.max_per_class);
  detail::read_opt(j, "master_seed", c.master_seed);
}

/// Reads a sweep config file. Each override is "key=value" with key a
/// '/'-separated path into the document ("trials", "methods/0/rho") and value
/// JSON, or a bare string when it does not parse. Relative dataset paths
/// resolve against the file's directory.
inline SweepConfig load_sweep_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const auto text = o.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    try {
      j[Json::json_pointer("/" + o.substr(0, eq))] = value;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot apply override '" + o + "': " + e.what());
    }
  }
  auto config = j.get<SweepConfig>();
  const auto base = std::filesystem::path(path).parent_path();
  for (auto* p : {&config.dataset.path, &config.dataset.labels_path}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return config;
}

inline void to_json(Json& j, const ConfusionCounts& c) {
  j = Json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

inline void from_json(const Json& j, ConfusionCounts& c) {
  c.tp = j.at("tp").get<std::uint64_t>();
  c.fp = j.at("fp").get<std::uint64_t>();
  c.tn = j.at("tn").get<std::uint64_t>();
  c.fn = j.at("fn").get<std::uint64_t>();
}

inline void to_json(Json& j, const MethodTrial& m) {
  j = Json{{"method", m.method},       {"counts", m.counts},       {"f_measure", m.f_measure},
           {"accuracy", m.accuracy},   {"f_undefined", m.f_undefined}, {"threshold", m.threshold},
           {"failed", m.failed},       {"error", m.error}};
}

inline void from_json(const Json& j, MethodTrial& m) {
  m.method = j.at("method").get<std::string>();
  m.counts = j.at("counts").get<ConfusionCounts>();
  m.f_measure = j.at("f_measure").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  m.f_undefined = j.at("f_undefined").get<bool>();
  m.threshold = j.at("threshold").get<double>();
  m.failed = j.at("failed").get<bool>();
  m.error = j.at("error").get<std::string>();
}

inline void to_json(Json& j, const TrialRecord& t) {
  j = Json{{"index", t.index},
           {"seed", t.seed},
           {"split_hash", t.split_hash},
           {"known_classes", t.known_classes},
           {"open_classes", t.open_classes},
           {"n_train", t.n_train},
           {"n_test", t.n_test},
           {"methods", t.methods}};
}

inline void from_json(const Json& j, TrialRecord& t) {
  t.index = j.at("index").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.split_hash = j.at("split_hash").get<std::uint64_t>();
  t.known_classes = j.at("known_classes").get<std::vector<ClassId>>();
  t.open_classes = j.at("open_classes").get<std::vector<ClassId>>();
  t.n_train = j.at("n_train").get<std::size_t>();
  t.n_test = j.at("n_test").get<std::size_t>();
  t.methods = j.at("methods").get<std::vector<MethodTrial>>();
}

inline void to_json(Json& j, const MethodSummary& s) {
  j = Json{{"method", s.method},
           {"f_measure_mean", s.f_measure_mean},
           {"f_measure_std", s.f_measure_std},
           {"accuracy_mean", s.accuracy_mean},
           {"accuracy_std", s.accuracy_std},
           {"trials", s.trials}};
}

inline void from_json(const Json& j, MethodSummary& s) {
  s.method = j.at("method").get<std::string>();
  s.f_measure_mean = j.at("f_measure_mean").get<double>();
  s.f_measure_std = j.at("f_measure_std").get<double>();
  s.accuracy_mean = j.at("accuracy_mean").get<double>();
  s.accuracy_std = j.at("accuracy_std").get<double>();
  s.trials = j.at("trials").get<std::size_t>();
}

inline void to_json(Json& j, const LevelResult& l) {
  j = Json{{"level", l.level}, {"openness", l.openness}, {"summaries", l.summaries}, {"trials", l.trials}};
}

inline void from_json(const Json& j, LevelResult& l) {
  l.level = j.at("level").get<OpennessLevel>();
  l.openness = j.at("openness").get<double>();
  l.summaries = j.at("summaries").get<std::vector<MethodSummary>>();
  l.trials = j.at("trials").get<std::vector<TrialRecord>>();
}

inline void to_json(Json& j, const SweepResult& r) {
  j = Json{{"config", r.config}, {"levels", r.levels}, {"warnings", r.warnings}};
}

inline void from_json(const Json& j, SweepResult& r) {
  r.config = j.at("config").get<SweepConfig>();
  r.levels = j.at("levels").get<std::vector<LevelResult>>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
}

inline constexpr std::string_view kReportCsvHeader =
    "openness,method,f_measure_mean,f_measure_std,accuracy_mean,accuracy_std,trials";

inline std::string report_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const auto& level : result.levels) {
    for (const auto& s : level.summaries) {
      out << detail::format_double(level.openness) << ',' << s.method << ',' << detail::format_double(s.f_measure_mean)
          << ',' << detail::format_double(s.f_measure_std) << ',' << detail::format_double(s.accuracy_mean) << ','
          << detail::format_double(s.accuracy_std) << ',' << s.trials << '\n';
    }
  }
  return out.str();
}

inline std::string report_json(const SweepResult& result) { return Json(result).dump(2) + "\n"; }

enum class ReportFormat { Csv, Json };

inline void emit_report(const SweepResult& result, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report " + path);
  out << (format == ReportFormat::Csv ? report_csv(result) : report_json(result));
  if (!out) throw DataError("I/O failure writing report " + path);
}

inline SweepResult load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report " + path);
  try {
    return Json::parse(in).get<SweepResult>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed report " + path + ": " + e.what());
  }
}

}  // namespace srosr
