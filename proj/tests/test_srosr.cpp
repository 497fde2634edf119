#include <gtest/gtest.h>

#include <algorithm>

#include "srosr/srosr.hpp"

using namespace srosr;

namespace {

LabeledDataset mnist_subset(std::size_t per_class, std::size_t n_classes, std::uint64_t seed) {
  static const auto full = load_idx(std::string(SROSR_DATA_DIR) + "/mnist3k-images-idx3-ubyte",
                                    std::string(SROSR_DATA_DIR) + "/mnist3k-labels-idx1-ubyte");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (std::stoul(full.labels[i]) < n_classes) keep.push_back(i);
  }
  return subsample_per_class(full.select(keep), per_class, seed);
}

class TrainedMnist : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new LabeledDataset(mnist_subset(50, 6, 3));
    SrosrParams p;
    p.openness_est = 0.0;
    p.delta_t = preset_delta(kPresetMnist, fusion_weight(0.0));
    model_ = new SrosrModel(train(*data_, p, 17));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete data_;
  }
  static LabeledDataset* data_;
  static SrosrModel* model_;
};

LabeledDataset* TrainedMnist::data_ = nullptr;
SrosrModel* TrainedMnist::model_ = nullptr;

}  // namespace

TEST(Harvest, RepeatedAtomsGiveZeroMatchedError) {
  LabeledDataset d;
  d.features = Eigen::MatrixXd::Zero(4, 10);
  for (Eigen::Index j = 0; j < 5; ++j) d.features(0, j) = 1.0;
  for (Eigen::Index j = 5; j < 10; ++j) d.features(1, j) = 1.0;
  d.labels = {"a", "a", "a", "a", "a", "b", "b", "b", "b", "b"};
  const auto h = harvest_errors(d, {0.001, 1, 0.8, {}}, 1);
  for (const auto& [cls, e] : h) {
    ASSERT_EQ(e.matched.size(), 1u);
    EXPECT_LE(e.matched[0], 0.001 + 1e-9);
    EXPECT_NEAR(e.nonmatched_sums[0], 1.0, 1e-9);
  }
}

TEST(Harvest, OneClassIsRejected) {
  LabeledDataset d;
  d.features = Eigen::MatrixXd::Identity(5, 5);
  d.labels = std::vector<ClassId>(5, "a");
  EXPECT_THROW(harvest_errors(d, {}, 1), DataError);
}

TEST(Harvest, SmallClassIsRejected) {
  LabeledDataset d;
  d.features = Eigen::MatrixXd::Identity(8, 8);
  d.labels = {"a", "a", "a", "a", "a", "b", "b", "b"};
  EXPECT_THROW(harvest_errors(d, {}, 1), DataError);
}

TEST(Harvest, CountsAndDeterminism) {
  const auto d = mnist_subset(30, 6, 8);
  const HarvestOptions opt{0.001, 5, 0.8, {}};
  const auto a = harvest_errors(d, opt, 21);
  const auto b = harvest_errors(d, opt, 21);
  ASSERT_EQ(a.size(), 6u);
  for (const auto& [cls, e] : a) {
    // 30 - floor(0.8 * 30) = 6 cross-test samples per round
    EXPECT_EQ(e.matched.size(), 5u * 6u);
    EXPECT_EQ(e.nonmatched_sums.size(), 5u * 6u);
    EXPECT_EQ(e.matched, b.at(cls).matched);
    EXPECT_EQ(e.nonmatched_sums, b.at(cls).nonmatched_sums);
  }
  const auto c = harvest_errors(d, opt, 22);
  EXPECT_NE(a.begin()->second.matched, c.begin()->second.matched);
}

TEST(Fusion, WeightFormula) {
  EXPECT_EQ(fusion_weight(0.0), 1.0 / 3.0);
  EXPECT_NEAR(fusion_weight(openness(6, 6, 10)), 0.2887, 1e-4);
  EXPECT_THROW(fusion_weight(1.0), ConfigError);
  EXPECT_THROW(fusion_weight(-0.1), ConfigError);
}

TEST(Fusion, ScoreExamples) {
  EXPECT_EQ(fuse_scores(0.0, 0.0, 0.2), 0.0);
  EXPECT_NEAR(fuse_scores(1.0, 1.0, 1.0 / 3.0), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(fuse_scores(0.2, 0.6, 0.25), 0.35, 1e-15);
  EXPECT_THROW(fuse_scores(1.2, 0.0, 0.1), ConfigError);
  EXPECT_THROW(fuse_scores(0.5, -0.1, 0.1), ConfigError);
  EXPECT_THROW(fuse_scores(0.5, 0.5, 0.5), ConfigError);
}

TEST(Fusion, BoundsOverGrid) {
  for (double sm = 0.0; sm <= 1.0; sm += 0.05) {
    for (double snm = 0.0; snm <= 1.0; snm += 0.05) {
      for (double w = 0.0; w <= 1.0 / 3.0; w += 1.0 / 30.0) {
        const double f = fuse_scores(sm, snm, w);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0 + w + 1e-15);
      }
    }
  }
}

TEST(Presets, DefaultValues) {
  EXPECT_EQ(find_preset("mnist").rho, 0.14);
  EXPECT_EQ(find_preset("yaleb").delta_base, 0.007);
  EXPECT_EQ(find_preset("uiuc").rho, 0.39);
  EXPECT_EQ(find_preset("caltech256").delta_base, 0.1);
  EXPECT_NEAR(preset_delta(kPresetMnist, 1.0 / 3.0), 0.008, 1e-15);
  EXPECT_THROW(find_preset("cifar"), ConfigError);
}

TEST_F(TrainedMnist, OneTailPairPerClass) {
  EXPECT_EQ(model_->tails.size(), 6u);
  for (const auto& [cls, t] : model_->tails) {
    EXPECT_GT(t.matched.sigma, 0.0);
    ASSERT_TRUE(t.inverted_nonmatched.has_value());
    EXPECT_GT(t.inverted_nonmatched->sigma, 0.0);
    EXPECT_GE(t.matched.n_exceedances, kMinExceedances);
  }
  EXPECT_EQ(model_->weight_w, 1.0 / 3.0);
}

TEST_F(TrainedMnist, ReplayedAtomKeepsOwnLabel) {
  for (std::size_t j = 0; j < data_->size(); j += 25) {
    const auto d = classify(*model_, data_->features.col(static_cast<Eigen::Index>(j)));
    EXPECT_EQ(d.s_matched, 0.0);
    ASSERT_TRUE(d.label.has_value());
    EXPECT_EQ(*d.label, data_->labels[j]);
  }
}

TEST_F(TrainedMnist, FarOutlierIsOpen) {
  Engine eng(4);
  Eigen::VectorXd noise(data_->dim());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = uniform01(eng);
  const auto d = classify(*model_, noise);
  const auto& tail = model_->tails.at(d.candidate).matched;
  EXPECT_GT(d.s_matched, 0.0);
  EXPECT_GT(d.fused, model_->delta_t);
  EXPECT_FALSE(d.label.has_value());
  EXPECT_GT(d.s_matched, tail_probability(tail, tail.threshold_u));
}

TEST_F(TrainedMnist, DecisionRecordIsConsistent) {
  const auto test = mnist_subset(60, 6, 99);
  for (std::size_t j = 0; j < test.size(); j += 13) {
    Eigen::VectorXd y = test.features.col(static_cast<Eigen::Index>(j));
    const auto d = classify(*model_, y);
    EXPECT_NEAR(d.fused, d.s_matched + model_->weight_w * d.s_nonmatched, 1e-15);
    EXPECT_GE(d.fused, 0.0);
    EXPECT_LE(d.fused, 1.0 + model_->weight_w);
    EXPECT_EQ(d.label.has_value(), !(d.fused > model_->delta_t));
  }
}

TEST_F(TrainedMnist, ThresholdSemantics) {
  const auto test = mnist_subset(60, 6, 98);
  auto open_model = *model_;
  open_model.delta_t = 1.0 + open_model.weight_w;
  auto strict_model = *model_;
  strict_model.delta_t = 0.0;
  for (std::size_t j = 0; j < test.size(); j += 7) {
    Eigen::VectorXd y = test.features.col(static_cast<Eigen::Index>(j));
    y.normalize();
    const auto src = src_classify(model_->dictionary, y, model_->epsilon, model_->solver);
    const auto lenient = decide(open_model, src.residuals);
    ASSERT_TRUE(lenient.label.has_value());
    EXPECT_EQ(*lenient.label, src.label);
    const auto strict = decide(strict_model, src.residuals);
    EXPECT_EQ(strict.label.has_value(), strict.fused == 0.0);
  }
}

TEST_F(TrainedMnist, MatchedOnlyIgnoresNonMatchedTail) {
  auto m = *model_;
  m.weight_w = 0.0;
  const auto test = mnist_subset(60, 6, 97);
  for (std::size_t j = 0; j < test.size(); j += 17) {
    const auto d = classify(m, test.features.col(static_cast<Eigen::Index>(j)));
    EXPECT_EQ(d.fused, d.s_matched);
  }
}

TEST_F(TrainedMnist, ScoresMonotoneInResiduals) {
  const auto& cls = model_->dictionary.classes()[2];
  ResidualVector r;
  r.per_class = Eigen::VectorXd::Constant(6, 1.5);
  r.argmin_index = 2;
  r.argmin_class = cls;
  double prev_m = 0.0;
  for (double rm = 0.0; rm < 1.5; rm += 0.01) {
    r.per_class[2] = rm;
    const auto d = decide(*model_, r);
    EXPECT_GE(d.s_matched, prev_m);
    prev_m = d.s_matched;
  }
  r.per_class[2] = 0.5;
  double prev_nm = 0.0;
  for (double other = 2.0; other > 0.5; other -= 0.01) {
    for (Eigen::Index k = 0; k < 6; ++k) {
      if (k != 2) r.per_class[k] = other;
    }
    const auto d = decide(*model_, r);
    EXPECT_GE(d.s_nonmatched, prev_nm);
    prev_nm = d.s_nonmatched;
  }
}

TEST_F(TrainedMnist, MissingTailModelIsDataError) {
  auto m = *model_;
  m.tails.erase(m.tails.begin());
  ResidualVector r;
  r.per_class = Eigen::VectorXd::Zero(6);
  r.argmin_index = 0;
  r.argmin_class = model_->dictionary.classes()[0];
  EXPECT_THROW(decide(m, r), DataError);
}

TEST(FitTails, MatchedFailureRefusesModel) {
  const auto d = mnist_subset(30, 3, 5);
  const auto harvest = harvest_errors(d, {0.001, 2, 0.8, {}}, 1);
  SrosrParams p;
  p.rounds = 2;
  // 2 rounds * 6 samples * 0.14 is far below 20 exceedances
  EXPECT_THROW(fit_tails(Dictionary::from_dataset(d), harvest, p), NumericalError);
}

TEST(FitTails, RejectsNonPositiveThreshold) {
  const auto d = mnist_subset(30, 3, 5);
  SrosrParams p;
  p.delta_t = 0.0;
  EXPECT_THROW(fit_tails(Dictionary::from_dataset(d), {}, p), ConfigError);
}
