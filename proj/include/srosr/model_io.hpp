#pragma once

// Model files. A model is a JSON envelope tagged "srosr" or "naive" plus a
// binary dictionary sidecar:
//
//   bytes 0-7    "SROSRDIC"
//   bytes 8-15   M (u64, little endian)
//   bytes 16-23  N (u64, little endian)
//   then         M * N float64 little endian, row-major
//
// The envelope names the sidecar relative to its own directory and pins it by
// the FNV-1a 64 hash of the sidecar bytes.

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <variant>

#include "srosr/report.hpp"

namespace srosr {

static_assert(std::endian::native == std::endian::little, "sidecar I/O assumes a little-endian host");

inline constexpr std::array<char, 8> kDictionaryMagic = {'S', 'R', 'O', 'S', 'R', 'D', 'I', 'C'};
inline constexpr int kModelFormatVersion = 1;

inline void to_json(Json& j, const GpdModel& m) {
  j = Json{{"sigma", m.sigma},
           {"xi", m.xi},
           {"threshold_u", m.threshold_u},
           {"tail_fraction", m.tail_fraction},
           {"n_exceedances", m.n_exceedances}};
}

inline void from_json(const Json& j, GpdModel& m) {
  m.sigma = j.at("sigma").get<double>();
  m.xi = j.at("xi").get<double>();
  m.threshold_u = j.at("threshold_u").get<double>();
  m.tail_fraction = j.at("tail_fraction").get<double>();
  m.n_exceedances = j.at("n_exceedances").get<std::size_t>();
  if (!(m.sigma > 0.0)) throw DataError("GPD scale must be positive");
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string dictionary_bytes(const Eigen::MatrixXd& atoms) {
  std::string out(kDictionaryMagic.begin(), kDictionaryMagic.end());
  auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  const auto m = static_cast<std::uint64_t>(atoms.rows());
  const auto n = static_cast<std::uint64_t>(atoms.cols());
  put(&m, 8);
  put(&n, 8);
  out.reserve(out.size() + m * n * 8);
  for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
    for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
      const double v = atoms(i, j);
      put(&v, 8);
    }
  }
  return out;
}

inline std::uint64_t content_hash(std::string_view bytes) {
  Fnv1a64 h;
  h.bytes(bytes.data(), bytes.size());
  return h.value();
}

inline Eigen::MatrixXd parse_dictionary_bytes(std::string_view bytes, const std::string& what) {
  if (bytes.size() < 24 || !std::equal(kDictionaryMagic.begin(), kDictionaryMagic.end(), bytes.begin())) {
    throw DataError(what + ": not a dictionary sidecar (bad magic)");
  }
  std::uint64_t m = 0, n = 0;
  std::memcpy(&m, bytes.data() + 8, 8);
  std::memcpy(&n, bytes.data() + 16, 8);
  if (m == 0 || n == 0 || m > (1ULL << 28) || n > (1ULL << 28) || (bytes.size() - 24) / 8 / m != n ||
      bytes.size() != 24 + m * n * 8) {
    throw DataError(what + ": sidecar size does not match its " + std::to_string(m) + "x" + std::to_string(n) +
                    " header");
  }
  Eigen::MatrixXd atoms(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  const char* p = bytes.data() + 24;
  for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
    for (Eigen::Index j = 0; j < atoms.cols(); ++j, p += 8) std::memcpy(&atoms(i, j), p, 8);
  }
  return atoms;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("I/O failure writing " + path.string());
}

// Writes the sidecar next to model_path and returns the envelope's reference to it.
inline Json save_dictionary(const Dictionary& dict, const std::filesystem::path& model_path) {
  auto sidecar = model_path;
  sidecar += ".dict";
  const auto bytes = dictionary_bytes(dict.atoms());
  write_file(sidecar, bytes);
  return Json{{"path", sidecar.filename().string()},
              {"content_hash", hex64(content_hash(bytes))},
              {"dim", dict.dim()},
              {"atoms", dict.num_atoms()},
              {"labels", dict.column_labels()}};
}

inline Dictionary load_dictionary(const Json& ref, const std::filesystem::path& model_path) {
  const auto sidecar = model_path.parent_path() / ref.at("path").get<std::string>();
  const auto bytes = read_file(sidecar);
  const auto expected = ref.at("content_hash").get<std::string>();
  if (hex64(content_hash(bytes)) != expected) {
    throw DataError("dictionary " + sidecar.string() + " does not match the hash recorded in the model");
  }
  auto atoms = parse_dictionary_bytes(bytes, sidecar.string());
  auto labels = ref.at("labels").get<std::vector<ClassId>>();
  if (atoms.rows() != ref.at("dim").get<Eigen::Index>() || atoms.cols() != ref.at("atoms").get<Eigen::Index>()) {
    throw DataError("dictionary " + sidecar.string() + " shape differs from the model record");
  }
  return Dictionary(std::move(atoms), std::move(labels));
}

inline Json envelope(std::string_view type) { return Json{{"type", type}, {"format_version", kModelFormatVersion}}; }

}  // namespace detail

inline void save_model(const SrosrModel& model, const std::filesystem::path& path) {
  Json j = detail::envelope("srosr");
  j["dictionary"] = detail::save_dictionary(model.dictionary, path);
  j["config"] = Json{{"epsilon", model.epsilon},
                     {"rho", model.rho},
                     {"rounds", model.rounds},
                     {"train_fraction", model.train_fraction},
                     {"weight_w", model.weight_w},
                     {"delta_t", model.delta_t},
                     {"solver", model.solver}};
  Json classes = Json::array();
  for (const auto& [cls, tails] : model.tails) {
    Json c{{"class", cls}, {"matched", tails.matched}};
    if (tails.inverted_nonmatched) c["inverted_nonmatched"] = *tails.inverted_nonmatched;
    else c["inverted_nonmatched"] = nullptr;
    classes.push_back(std::move(c));
  }
  j["classes"] = std::move(classes);
  j["warnings"] = model.fit_warnings;
  detail::write_file(path, j.dump(2) + "\n");
}

inline void save_model(const NaiveModel& model, const std::filesystem::path& path) {
  Json j = detail::envelope("naive");
  j["dictionary"] = detail::save_dictionary(model.dictionary, path);
  j["config"] = Json{{"epsilon", model.epsilon},
                     {"quantile_q", model.quantile_q},
                     {"error_threshold", model.error_threshold},
                     {"solver", model.solver}};
  detail::write_file(path, j.dump(2) + "\n");
}

using AnyModel = std::variant<SrosrModel, NaiveModel>;

inline AnyModel load_model(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("model " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("model " + path.string() + " has an unsupported format version");
    }
    const auto type = j.at("type").get<std::string>();
    const auto& cfg = j.at("config");
    if (type == "srosr") {
      SrosrModel m;
      m.dictionary = detail::load_dictionary(j.at("dictionary"), path);
      m.epsilon = cfg.at("epsilon").get<double>();
      m.rho = cfg.at("rho").get<double>();
      m.rounds = cfg.at("rounds").get<std::size_t>();
      m.train_fraction = cfg.at("train_fraction").get<double>();
      m.weight_w = cfg.at("weight_w").get<double>();
      m.delta_t = cfg.at("delta_t").get<double>();
      m.solver = cfg.at("solver").get<SolverOptions>();
      for (const auto& c : j.at("classes")) {
        ClassTailModels t;
        t.matched = c.at("matched").get<GpdModel>();
        if (!c.at("inverted_nonmatched").is_null()) t.inverted_nonmatched = c.at("inverted_nonmatched").get<GpdModel>();
        m.tails.emplace(c.at("class").get<ClassId>(), t);
      }
      for (const auto& cls : m.dictionary.classes()) {
        if (!m.tails.count(cls)) throw DataError("model " + path.string() + " has no tail models for class " + cls);
      }
      m.fit_warnings = j.at("warnings").get<std::vector<std::string>>();
      return m;
    }
    if (type == "naive") {
      NaiveModel m;
      m.dictionary = detail::load_dictionary(j.at("dictionary"), path);
      m.epsilon = cfg.at("epsilon").get<double>();
      m.quantile_q = cfg.at("quantile_q").get<double>();
      m.error_threshold = cfg.at("error_threshold").get<double>();
      m.solver = cfg.at("solver").get<SolverOptions>();
      return m;
    }
    throw DataError("model " + path.string() + " has unknown type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model " + path.string() + " is malformed: " + e.what());
  }
}

}  // namespace srosr
