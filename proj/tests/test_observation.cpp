#include <gtest/gtest.h>

#include <random>

#include "segalign/observation.hpp"

using namespace segalign;

namespace {

FeatureSequence seq(const std::string& id, std::initializer_list<std::initializer_list<float>> rows) {
  FeatureSequence x{id, FeatureMatrix(static_cast<Eigen::Index>(rows.size()),
                                      static_cast<Eigen::Index>(rows.begin()->size()))};
  Eigen::Index t = 0;
  for (const auto& r : rows) {
    Eigen::Index d = 0;
    for (float v : r) x.values(t, d++) = v;
    ++t;
  }
  return x;
}

}  // namespace

TEST(Gaussian, FitsPerStateMeanAndVariance) {
  const auto x = seq("v", {{0.f}, {2.f}, {10.f}, {14.f}});
  std::vector<LabeledSequence> data{{&x, {0, 0, 1, 1}}};
  const auto g = GaussianScorer::fit(data, 3);
  EXPECT_DOUBLE_EQ(g.means()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.variances()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.means()(1, 0), 12.0);
  EXPECT_DOUBLE_EQ(g.variances()(1, 0), 4.0);
  // State 2 has no frames and falls back to the global statistics.
  EXPECT_DOUBLE_EQ(g.means()(2, 0), 6.5);
  const auto s = g.score(x);
  EXPECT_NEAR(s(0, 0), -0.5 * std::log(2 * M_PI) - 0.5, 1e-12);
  EXPECT_GT(s(3, 1), s(3, 0));
}

TEST(Gaussian, VarianceFloorApplies) {
  const auto x = seq("v", {{1.f, 2.f}, {1.f, 2.f}});
  std::vector<LabeledSequence> data{{&x, {0, 0}}};
  const auto g = GaussianScorer::fit(data, 1, 0.5);
  EXPECT_EQ(g.variances()(0, 0), 0.5);
  EXPECT_TRUE(g.score(x).allFinite());
}

TEST(Gaussian, JsonRoundTripIsExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n;
  FeatureSequence x{"v", FeatureMatrix(30, 3)};
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values.data()[i] = n(rng);
  std::vector<int> targets;
  for (int t = 0; t < 30; ++t) targets.push_back(t / 10);
  std::vector<LabeledSequence> data{{&x, targets}};
  const auto g = GaussianScorer::fit(data, 3);
  const auto back = GaussianScorer::from_json(nlohmann::json::parse(g.to_json().dump()));
  EXPECT_EQ(g.score(x), back.score(x));
}

TEST(Gaussian, RejectsDimensionMismatch) {
  const auto x = seq("v", {{1.f}});
  const auto y = seq("w", {{1.f, 2.f}});
  std::vector<LabeledSequence> data{{&x, {0}}};
  const auto g = GaussianScorer::fit(data, 1);
  EXPECT_THROW(g.score(y), Error);
}

TEST(StatePrior, RelativeFrequencyWithFloor) {
  const auto x = seq("v", {{0.f}, {0.f}, {0.f}, {0.f}});
  std::vector<LabeledSequence> data{{&x, {0, 0, 0, 1}}};
  const auto p = fit_state_prior(data, 4);
  EXPECT_DOUBLE_EQ(p.prob[0], 0.75);
  EXPECT_DOUBLE_EQ(p.prob[1], 0.25);
  EXPECT_DOUBLE_EQ(p.prob[2], 1.0 / 40.0);
}

TEST(Bayes, SubtractsLogPrior) {
  ScoreMatrix post(1, 2);
  post << std::log(0.6), std::log(0.4);
  StatePrior p{{0.5, 0.25}, 0.05};
  const auto s = bayes_scores(post, p);
  EXPECT_NEAR(s(0, 0), std::log(0.6 / 0.5), 1e-15);
  EXPECT_NEAR(s(0, 1), std::log(0.4 / 0.25), 1e-15);
}

TEST(TrainingSet, ChecksLengths) {
  const auto x = seq("v", {{0.f}, {1.f}});
  StateSpace s({1});
  StateAlignment al{"v", {{0, 0, 0}}};
  EXPECT_THROW(make_training_set({x}, {al}, s), Error);
}

TEST(ScorerKind, Parse) {
  EXPECT_EQ(parse_scorer_kind("gru"), ScorerKind::recurrent);
  EXPECT_EQ(parse_scorer_kind("mlp"), ScorerKind::feedforward);
  EXPECT_THROW(parse_scorer_kind("svm"), Error);
}
