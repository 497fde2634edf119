#pragma once

// Dictionary of unit-norm training atoms grouped by class.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srosr/dataset.hpp"
#include "srosr/error.hpp"
#include "srosr/types.hpp"

namespace srosr {

/// Besides the atoms it keeps the Gram matrix and an orthonormal basis of the
/// span of the atoms; both are computed once at construction.
class Dictionary {
 public:
  Dictionary() = default;

  /// Columns of atoms must have unit Euclidean norm (to 1e-9).
  Dictionary(Eigen::MatrixXd atoms, std::vector<ClassId> column_labels)
      : atoms_(std::move(atoms)), column_labels_(std::move(column_labels)) {
    if (static_cast<std::size_t>(atoms_.cols()) != column_labels_.size()) {
      throw DataError("dictionary has " + std::to_string(atoms_.cols()) + " atoms but " +
                      std::to_string(column_labels_.size()) + " labels");
    }
    if (atoms_.cols() == 0) throw DataError("dictionary has no atoms");
    if (!atoms_.allFinite()) throw DataError("dictionary contains non-finite values");
    for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
      if (std::abs(atoms_.col(j).norm() - 1.0) > 1e-9) {
        throw DataError("dictionary atom " + std::to_string(j) + " is not unit norm");
      }
    }
    std::set<ClassId, ClassLess> seen(column_labels_.begin(), column_labels_.end());
    classes_.assign(seen.begin(), seen.end());
    class_columns_.resize(classes_.size());
    column_class_.resize(column_labels_.size());
    for (std::size_t j = 0; j < column_labels_.size(); ++j) {
      const auto k = static_cast<std::size_t>(
          std::lower_bound(classes_.begin(), classes_.end(), column_labels_[j], ClassLess{}) -
          classes_.begin());
      class_columns_[k].push_back(static_cast<Eigen::Index>(j));
      column_class_[j] = k;
    }
    gram_ = atoms_.transpose() * atoms_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(atoms_);
    range_basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(atoms_.rows(), qr.rank());
  }

  /// Normalizes the dataset columns and uses them as atoms.
  static Dictionary from_dataset(const LabeledDataset& data) {
    auto normalized = normalize_columns(data);
    return Dictionary(std::move(normalized.features), std::move(normalized.labels));
  }

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  /// Orthonormal basis of the span of the atoms.
  const Eigen::MatrixXd& range_basis() const { return range_basis_; }

  /// Distance from y to the span of the atoms.
  double span_distance(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    const double inside = (range_basis_.transpose() * y).squaredNorm();
    return std::sqrt(std::max(0.0, y.squaredNorm() - inside));
  }
  const std::vector<ClassId>& column_labels() const { return column_labels_; }
  const std::vector<ClassId>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }
  Eigen::Index num_atoms() const { return atoms_.cols(); }
  Eigen::Index dim() const { return atoms_.rows(); }

  const std::vector<Eigen::Index>& class_columns(std::size_t k) const { return class_columns_.at(k); }
  std::size_t class_of_column(Eigen::Index j) const { return column_class_[static_cast<std::size_t>(j)]; }

  std::size_t class_index(const ClassId& id) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), id, ClassLess{});
    if (it == classes_.end() || *it != id) throw DataError("class '" + id + "' not in dictionary");
    return static_cast<std::size_t>(it - classes_.begin());
  }

 private:
  Eigen::MatrixXd atoms_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd range_basis_;
  std::vector<ClassId> column_labels_;
  std::vector<ClassId> classes_;
  std::vector<std::vector<Eigen::Index>> class_columns_;
  std::vector<std::size_t> column_class_;
};

}  // namespace srosr
