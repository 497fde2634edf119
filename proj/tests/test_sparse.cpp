#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "srosr/dataset.hpp"
#include "srosr/sparse.hpp"

using namespace srosr;

namespace {

struct OracleInstance {
  std::string name;
  Dictionary dict;
  Eigen::VectorXd y;
  double epsilon;
  double objective;
};

std::vector<OracleInstance> load_oracle() {
  std::ifstream in(std::string(SROSR_FIXTURE_DIR) + "/l1_oracle.json");
  const auto j = nlohmann::json::parse(in);
  std::vector<OracleInstance> out;
  for (const auto& e : j) {
    const auto m = e["rows"].get<Eigen::Index>();
    const auto n = e["cols"].get<Eigen::Index>();
    const auto flat = e["atoms_row_major"].get<std::vector<double>>();
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) a(i, k) = flat[static_cast<std::size_t>(i * n + k)];
    }
    const auto yv = e["y"].get<std::vector<double>>();
    out.push_back({e["name"].get<std::string>(), Dictionary(a, e["labels"].get<std::vector<ClassId>>()),
                   Eigen::Map<const Eigen::VectorXd>(yv.data(), m), e["epsilon"].get<double>(),
                   e["objective"].get<double>()});
  }
  return out;
}

Dictionary random_dictionary(Eigen::Index m, Eigen::Index n, std::size_t classes, std::uint64_t seed) {
  Engine eng(seed);
  Eigen::MatrixXd a(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = uniform01(eng) - 0.5;
    a.col(j).normalize();
  }
  std::vector<ClassId> labels;
  for (Eigen::Index j = 0; j < n; ++j) labels.push_back(std::to_string(static_cast<std::size_t>(j) % classes));
  return Dictionary(a, labels);
}

Eigen::VectorXd random_unit(Eigen::Index m, std::uint64_t seed) {
  Engine eng(seed);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y[i] = uniform01(eng) - 0.5;
  return y.normalized();
}

}  // namespace

TEST(SolveL1, MatchesFrozenConicOracle) {
  const auto instances = load_oracle();
  ASSERT_EQ(instances.size(), 201u);
  for (const auto& inst : instances) {
    const auto code = solve_l1(inst.dict, inst.y, inst.epsilon);
    EXPECT_TRUE(code.constraint_met) << inst.name;
    EXPECT_NEAR(code.coefficients.lpNorm<1>(), inst.objective, 1e-4) << inst.name;
    EXPECT_LE(code.residual_norm, inst.epsilon + 1e-6) << inst.name;
  }
}

TEST(SolveL1, SparseEightByTwelveInstance) {
  const auto instances = load_oracle();
  const auto& inst = instances.back();
  ASSERT_EQ(inst.name, "sparse-8x12");
  const auto code = solve_l1(inst.dict, inst.y, inst.epsilon);
  EXPECT_NEAR(code.coefficients.lpNorm<1>(), inst.objective, 1e-4);
  EXPECT_NEAR(code.coefficients[2], 0.8, 1e-3);
  EXPECT_NEAR(code.coefficients[9], -0.5, 1e-3);
}

TEST(SolveL1, SingleAtomInput) {
  const auto dict = random_dictionary(20, 12, 3, 4);
  const Eigen::VectorXd y = dict.atoms().col(2);
  const auto code = solve_l1(dict, y, 1e-6);
  EXPECT_GE(std::abs(code.coefficients[2]) / code.coefficients.lpNorm<1>(), 0.99);
}

TEST(SolveL1, ZeroInputGivesZeroCode) {
  const auto dict = random_dictionary(6, 9, 3, 2);
  const auto code = solve_l1(dict, Eigen::VectorXd::Zero(6), 0.01);
  EXPECT_EQ(code.coefficients.lpNorm<1>(), 0.0);
  EXPECT_EQ(code.residual_norm, 0.0);
}

TEST(SolveL1, ResidualNormIsRecomputable) {
  const auto dict = random_dictionary(8, 14, 2, 9);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto y = random_unit(8, 100 + s);
    const auto code = solve_l1(dict, y, 0.05);
    EXPECT_NEAR(code.residual_norm, (y - dict.atoms() * code.coefficients).norm(), 1e-8);
    EXPECT_LE(code.residual_norm, 0.05 + 1e-6);
    EXPECT_LE(code.final_gap, 1e-6);
  }
}

TEST(SolveL1, InfeasibleEpsilonFallsBackAndFlags) {
  // 3 atoms in R^10: most inputs are far from the span.
  const auto dict = random_dictionary(10, 3, 3, 1);
  const auto y = random_unit(10, 77);
  ASSERT_GT(dict.span_distance(y), 0.1);
  SolverOptions opt;
  const auto code = solve_l1(dict, y, 1e-3, opt);
  EXPECT_FALSE(code.constraint_met);
  const double lambda_max = (dict.atoms().transpose() * y).lpNorm<Eigen::Infinity>();
  EXPECT_NEAR(code.penalty, opt.infeasible_penalty_ratio * lambda_max, 1e-12);
  const auto direct = solve_lasso(dict, y, code.penalty, opt);
  EXPECT_LE((direct.coefficients - code.coefficients).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SolveL1, Errors) {
  const auto dict = random_dictionary(5, 7, 2, 3);
  EXPECT_THROW(solve_l1(dict, Eigen::VectorXd::Ones(4), 0.1), DataError);
  EXPECT_THROW(solve_l1(dict, Eigen::VectorXd::Ones(5), -1.0), ConfigError);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(5);
  bad[1] = std::nan("");
  EXPECT_THROW(solve_l1(dict, bad, 0.1), DataError);
}

TEST(SolveL1, IterationBudgetExceededIsNumericalError) {
  const auto dict = random_dictionary(10, 16, 2, 5);
  SolverOptions opt;
  opt.max_iterations = 1;
  EXPECT_THROW(solve_l1(dict, random_unit(10, 3), 1e-4, opt), NumericalError);
}

TEST(SolveLasso, HomotopyAgreesWithCoordinateDescent) {
  const auto dict = random_dictionary(30, 60, 4, 8);
  SolverOptions opt;
  opt.gap_tolerance = 1e-10;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto y = random_unit(30, 500 + s);
    const double lambda = 0.05 * (1 + s % 3);
    const auto a = solve_lasso(dict, y, lambda, opt);
    const auto b = solve_lasso_cd(dict, y, lambda, opt);
    auto objective = [&](const SparseCode& c) {
      return 0.5 * std::pow(c.residual_norm, 2) + lambda * c.coefficients.lpNorm<1>();
    };
    EXPECT_NEAR(objective(a), objective(b), 1e-9);
  }
}

TEST(Dictionary, RejectsNonUnitAtoms) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(0, 0) = 1.1;
  EXPECT_THROW(Dictionary(a, {"a", "b", "c"}), DataError);
  EXPECT_THROW(Dictionary(Eigen::MatrixXd::Identity(3, 3), {"a", "b"}), DataError);
}

TEST(Dictionary, ClassIndexPartitionsColumns) {
  const auto dict = random_dictionary(4, 11, 3, 6);
  std::vector<int> seen(11, 0);
  for (std::size_t k = 0; k < dict.num_classes(); ++k) {
    for (const auto j : dict.class_columns(k)) {
      ++seen[static_cast<std::size_t>(j)];
      EXPECT_EQ(dict.class_of_column(j), k);
    }
  }
  for (const int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(dict.class_index("nope"), DataError);
}

TEST(ClassResiduals, ZeroCodeGivesNormOfInput) {
  const auto dict = random_dictionary(6, 9, 3, 2);
  const Eigen::VectorXd y = random_unit(6, 8) * 2.5;
  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(9);
  const auto r = class_residuals(dict, y, code);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(r.per_class[k], 2.5, 1e-12);
  EXPECT_EQ(r.argmin_index, 0u);
}

TEST(ClassResiduals, IndicatorCodeOfOneAtom) {
  const auto dict = random_dictionary(5, 6, 3, 21);
  // atom 4 belongs to class "1"
  const Eigen::VectorXd y = dict.atoms().col(4);
  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(6);
  code.coefficients[4] = 1.0;
  const auto r = class_residuals(dict, y, code);
  EXPECT_NEAR(r.per_class[1], 0.0, 1e-15);
  EXPECT_EQ(r.argmin_class, "1");
  // other classes reconstruct nothing
  EXPECT_NEAR(r.per_class[0], 1.0, 1e-12);
  EXPECT_NEAR(r.per_class[2], 1.0, 1e-12);
}

TEST(ClassResiduals, TriangleBound) {
  const auto dict = random_dictionary(8, 15, 3, 13);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto y = random_unit(8, s);
    const auto code = solve_l1(dict, y, 0.01);
    const auto r = class_residuals(dict, y, code);
    for (std::size_t k = 0; k < 3; ++k) {
      double part = 0.0;
      Eigen::VectorXd rec = Eigen::VectorXd::Zero(8);
      for (const auto j : dict.class_columns(k)) rec += code.coefficients[j] * dict.atoms().col(j);
      part = rec.norm();
      EXPECT_GE(r.per_class[static_cast<Eigen::Index>(k)], 0.0);
      EXPECT_LE(r.per_class[static_cast<Eigen::Index>(k)], y.norm() + part + 1e-12);
    }
  }
}

TEST(ClassResiduals, SingleClassEqualsOverallResidual) {
  auto base = random_dictionary(6, 8, 1, 4);
  const auto y = random_unit(6, 2);
  const auto code = solve_l1(base, y, 0.01);
  const auto r = class_residuals(base, y, code);
  ASSERT_EQ(r.per_class.size(), 1);
  EXPECT_NEAR(r.per_class[0], code.residual_norm, 1e-12);
}

TEST(SrcClassify, TrainingAtomIsOwnClass) {
  const auto dict = random_dictionary(30, 24, 4, 17);
  for (Eigen::Index j = 0; j < 24; ++j) {
    const auto res = src_classify(dict, dict.atoms().col(j), 0.001);
    EXPECT_EQ(res.label, dict.column_labels()[static_cast<std::size_t>(j)]);
  }
}

TEST(SrcClassify, OneClassDictionary) {
  const auto dict = random_dictionary(6, 5, 1, 4);
  EXPECT_EQ(src_classify(dict, random_unit(6, 1), 0.01).label, "0");
}

TEST(SrcClassify, PermutationEquivariance) {
  const auto dict = random_dictionary(12, 20, 4, 23);
  std::vector<ClassId> relabeled;
  const std::vector<ClassId> names = {"zeta", "alpha", "mid", "7"};
  for (const auto& l : dict.column_labels()) relabeled.push_back(names[std::stoul(l)]);
  const Dictionary other(dict.atoms(), relabeled);
  for (std::uint64_t s = 0; s < 15; ++s) {
    const auto y = random_unit(12, 900 + s);
    const auto a = src_classify(dict, y, 0.01);
    const auto b = src_classify(other, y, 0.01);
    EXPECT_EQ(names[std::stoul(a.label)], b.label);
  }
}

TEST(Sci, ReferenceValues) {
  const Dictionary dict(Eigen::MatrixXd::Identity(3, 3), {"a", "b", "c"});
  SparseCode code;
  code.coefficients = Eigen::Vector3d(0.0, 2.0, 0.0);
  EXPECT_DOUBLE_EQ(sci(code, dict).value, 1.0);
  code.coefficients = Eigen::Vector3d(1.0 / 3, -1.0 / 3, 1.0 / 3);
  EXPECT_NEAR(sci(code, dict).value, 0.0, 1e-15);
  code.coefficients = Eigen::Vector3d(0.5, 0.3, -0.2);
  EXPECT_NEAR(sci(code, dict).value, 0.25, 1e-12);
}

TEST(Sci, ZeroCodeAndSingleClass) {
  const Dictionary dict(Eigen::MatrixXd::Identity(3, 3), {"a", "b", "c"});
  SparseCode code;
  code.coefficients = Eigen::Vector3d::Zero();
  const auto s = sci(code, dict);
  EXPECT_EQ(s.value, 0.0);
  EXPECT_TRUE(s.zero_code);
  const Dictionary one(Eigen::MatrixXd::Identity(3, 3), {"a", "a", "a"});
  EXPECT_THROW(sci(code, one), ConfigError);
}

TEST(Sci, BoundedAndScaleInvariant) {
  const auto dict = random_dictionary(10, 16, 4, 31);
  Engine eng(5);
  for (int t = 0; t < 200; ++t) {
    SparseCode code;
    code.coefficients.resize(16);
    for (Eigen::Index j = 0; j < 16; ++j) code.coefficients[j] = uniform01(eng) < 0.5 ? 0.0 : uniform01(eng) - 0.5;
    if (code.coefficients.lpNorm<1>() == 0.0) continue;
    const double v = sci(code, dict).value;
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    SparseCode scaled = code;
    scaled.coefficients *= 0.1 + 10.0 * uniform01(eng);
    EXPECT_NEAR(sci(scaled, dict).value, v, 1e-12);
  }
}

TEST(RatioScore, ReferenceValues) {
  ResidualVector r;
  r.per_class = Eigen::Vector3d(0.1, 0.5, 0.9);
  EXPECT_NEAR(ratio_score(r), 5.0, 1e-12);
  r.per_class = Eigen::Vector3d(0.4, 0.7, 0.4);
  EXPECT_EQ(ratio_score(r), 1.0);
  r.per_class = Eigen::Vector3d(0.3, 0.0, 0.8);
  EXPECT_EQ(ratio_score(r), kRatioCap);
  r.per_class = Eigen::VectorXd::Constant(1, 0.2);
  EXPECT_THROW(ratio_score(r), ConfigError);
}
