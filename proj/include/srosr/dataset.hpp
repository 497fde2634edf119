#pragma once

// Labeled feature matrices, their file loaders, and open-set trial sampling.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srosr/error.hpp"
#include "srosr/rng.hpp"
#include "srosr/types.hpp"

namespace srosr {

/// Features are stored one sample per column (M rows x N columns).
struct LabeledDataset {
  Eigen::MatrixXd features;
  std::vector<ClassId> labels;

  Eigen::Index dim() const { return features.rows(); }
  std::size_t size() const { return labels.size(); }

  /// Distinct class ids in ClassLess order.
  std::vector<ClassId> classes() const {
    std::set<ClassId, ClassLess> seen(labels.begin(), labels.end());
    return {seen.begin(), seen.end()};
  }

  /// Sample indices grouped by class, each group in ascending index order.
  std::map<ClassId, std::vector<std::size_t>, ClassLess> index_by_class() const {
    std::map<ClassId, std::vector<std::size_t>, ClassLess> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
    return groups;
  }

  LabeledDataset select(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    out.features.resize(features.rows(), static_cast<Eigen::Index>(indices.size()));
    out.labels.reserve(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      out.features.col(static_cast<Eigen::Index>(j)) =
          features.col(static_cast<Eigen::Index>(indices[j]));
      out.labels.push_back(labels[indices[j]]);
    }
    return out;
  }

  /// Throws DataError if the invariants do not hold.
  void validate() const {
    if (static_cast<std::size_t>(features.cols()) != labels.size()) {
      throw DataError("dataset has " + std::to_string(features.cols()) + " feature columns but " +
                      std::to_string(labels.size()) + " labels");
    }
    if (!features.allFinite()) throw DataError("dataset contains non-finite feature values");
  }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw DataError("truncated IDX header in " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

inline std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image/label file pair (the MNIST container). Each image is
/// flattened row-major into one column. With scale_pixels the bytes are
/// divided by 255 so every feature lies in [0, 1].
inline LabeledDataset load_idx(const std::string& image_path, const std::string& label_path,
                               bool scale_pixels = true) {
  auto images = detail::open_binary(image_path);
  auto labels = detail::open_binary(label_path);

  if (const auto magic = detail::read_be32(images, image_path); magic != kIdxImageMagic) {
    throw DataError("bad image magic number in " + image_path);
  }
  if (const auto magic = detail::read_be32(labels, label_path); magic != kIdxLabelMagic) {
    throw DataError("bad label magic number in " + label_path);
  }
  const std::uint32_t n_images = detail::read_be32(images, image_path);
  const std::uint32_t rows = detail::read_be32(images, image_path);
  const std::uint32_t cols = detail::read_be32(images, image_path);
  const std::uint32_t n_labels = detail::read_be32(labels, label_path);
  if (n_images != n_labels) {
    throw DataError("image count " + std::to_string(n_images) + " does not match label count " +
                    std::to_string(n_labels));
  }

  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> image_bytes(pixels * n_images);
  std::vector<unsigned char> label_bytes(n_labels);
  if (!images.read(reinterpret_cast<char*>(image_bytes.data()),
                   static_cast<std::streamsize>(image_bytes.size()))) {
    throw DataError("truncated image payload in " + image_path);
  }
  if (!labels.read(reinterpret_cast<char*>(label_bytes.data()),
                   static_cast<std::streamsize>(label_bytes.size()))) {
    throw DataError("truncated label payload in " + label_path);
  }

  const double divisor = scale_pixels ? 255.0 : 1.0;
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(pixels), n_images);
  out.labels.reserve(n_labels);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    const unsigned char* img = image_bytes.data() + std::size_t(i) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      out.features(static_cast<Eigen::Index>(p), i) = img[p] / divisor;
    }
    out.labels.push_back(std::to_string(label_bytes[i]));
  }
  return out;
}

struct CsvOptions {
  bool header = true;
  /// Column name when header is set, otherwise a zero-based column index.
  std::string label_column = "label";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc{} || ptr != end || cell.empty()) {
    throw DataError("non-numeric feature cell '" + cell + "' at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
  }
  return value;
}

}  // namespace detail

/// One sample per row; every column other than the label column is a feature.
inline LabeledDataset load_csv(const std::string& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(detail::split_csv_line(line));
  }
  if (rows.empty()) throw DataError("empty CSV file " + path);

  std::size_t label_col = 0;
  std::size_t first_row = 0;
  if (options.header) {
    const auto& head = rows.front();
    const auto it = std::find(head.begin(), head.end(), options.label_column);
    if (it == head.end()) throw DataError("label column '" + options.label_column + "' missing in " + path);
    label_col = static_cast<std::size_t>(it - head.begin());
    first_row = 1;
  } else {
    const auto idx = detail::as_integer(options.label_column);
    if (!idx || *idx < 0) throw ConfigError("label column must be an index when the CSV has no header");
    label_col = static_cast<std::size_t>(*idx);
  }

  const std::size_t width = rows.front().size();
  if (label_col >= width) throw DataError("label column index out of range in " + path);
  const std::size_t n = rows.size() - first_row;
  if (n == 0) throw DataError("CSV file " + path + " has no data rows");

  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(width - 1), static_cast<Eigen::Index>(n));
  out.labels.reserve(n);
  for (std::size_t r = first_row; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != width) {
      throw DataError("ragged row " + std::to_string(r + 1) + " in " + path + ": expected " +
                      std::to_string(width) + " cells, got " + std::to_string(cells.size()));
    }
    Eigen::Index f = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_col) continue;
      out.features(f++, static_cast<Eigen::Index>(r - first_row)) = detail::parse_double(cells[c], r + 1, c);
    }
    out.labels.push_back(cells[label_col]);
  }
  out.validate();
  return out;
}

/// Writes the dataset with a header row; features first, label last.
inline void write_csv(const LabeledDataset& data, const std::string& path,
                      const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (Eigen::Index i = 0; i < data.dim(); ++i) out << 'f' << i << ',';
  out << label_column << '\n';
  char buf[32];
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
    for (Eigen::Index i = 0; i < data.dim(); ++i) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data.features(i, j));
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << data.labels[static_cast<std::size_t>(j)] << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

/// Scales every column to unit Euclidean norm.
inline LabeledDataset normalize_columns(LabeledDataset data) {
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
    const double norm = data.features.col(j).norm();
    if (!(norm > 0.0)) throw DataError("cannot normalize zero column " + std::to_string(j));
    data.features.col(j) /= norm;
  }
  return data;
}

/// Keeps at most max_per_class samples of each class, chosen uniformly at random.
/// Retained samples keep their original relative order.
inline LabeledDataset subsample_per_class(const LabeledDataset& data, std::size_t max_per_class,
                                          std::uint64_t seed) {
  Engine eng(seed);
  std::vector<std::size_t> keep;
  for (auto& [cls, idx] : data.index_by_class()) {
    shuffle(std::span(idx), eng);
    if (idx.size() > max_per_class) idx.resize(max_per_class);
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return data.select(keep);
}

struct OpenSetTrial {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<ClassId> known_classes;
  std::vector<ClassId> open_classes;
  /// Column indices into the source dataset.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
};

/// Draws n_known training classes and n_open further classes uniformly without
/// replacement. Each known class contributes floor(train_fraction * N_i) samples
/// to train and the rest to test; open classes go entirely to test.
inline OpenSetTrial sample_open_set_trial(const LabeledDataset& data, std::size_t n_known,
                                          std::size_t n_open, double train_fraction,
                                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (n_known == 0) throw ConfigError("at least one known class is required");
  auto groups = data.index_by_class();
  std::vector<ClassId> classes;
  for (const auto& [cls, idx] : groups) classes.push_back(cls);
  if (n_known + n_open > classes.size()) {
    throw DataError("dataset has " + std::to_string(classes.size()) + " classes, trial needs " +
                    std::to_string(n_known + n_open));
  }

  Engine eng(seed);
  shuffle(std::span(classes), eng);
  OpenSetTrial trial;
  trial.seed = seed;
  trial.known_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_known));
  trial.open_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_known),
                            classes.begin() + static_cast<std::ptrdiff_t>(n_known + n_open));
  std::sort(trial.known_classes.begin(), trial.known_classes.end(), ClassLess{});
  std::sort(trial.open_classes.begin(), trial.open_classes.end(), ClassLess{});

  for (const auto& cls : trial.known_classes) {
    auto idx = groups.at(cls);
    shuffle(std::span(idx), eng);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(idx.size())));
    if (n_train == 0 || n_train == idx.size()) {
      throw DataError("class " + cls + " has too few samples (" + std::to_string(idx.size()) +
                      ") for a train/test split");
    }
    trial.train_indices.insert(trial.train_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    trial.test_indices.insert(trial.test_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  for (const auto& cls : trial.open_classes) {
    const auto& idx = groups.at(cls);
    trial.test_indices.insert(trial.test_indices.end(), idx.begin(), idx.end());
  }
  trial.train = data.select(trial.train_indices);
  trial.test = data.select(trial.test_indices);
  return trial;
}

/// 1 - sqrt(2 n_train_classes / (n_target_classes + n_test_classes)).
inline double openness(std::size_t n_train_classes, std::size_t n_target_classes,
                       std::size_t n_test_classes) {
  const double denom = static_cast<double>(n_target_classes + n_test_classes);
  const double num = 2.0 * static_cast<double>(n_train_classes);
  if (denom <= 0.0 || num > denom) {
    throw ConfigError("openness requires 2*n_train <= n_target + n_test");
  }
  return 1.0 - std::sqrt(num / denom);
}

}  // namespace srosr
