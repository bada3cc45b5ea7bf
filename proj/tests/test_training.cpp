#include <gtest/gtest.h>

#include "segalign/report.hpp"
#include "segalign/synth.hpp"
#include "segalign/training.hpp"

using namespace segalign;

namespace {

SyntheticSpec tiny_spec(std::uint64_t seed = 3) {
  SyntheticSpec s;
  s.actions = {"a", "b", "c"};
  s.states_per_action = {2, 2, 2};
  s.dim = 4;
  s.durations = {6.0};
  s.templates = {{"a", "b", "c"}, {"c", "a", "b"}, {"b", "c", "a"}};
  s.videos_per_template = {4, 4, 4};
  s.noise_scale = 0.5;
  s.mean_spread = 2.0;
  s.seed = seed;
  return s;
}

TrainingData weak_data(const SyntheticCorpus& c) {
  return {c.vocabulary, c.features, c.transcripts, {}, {}, c.segmentations};
}

}  // namespace

TEST(Training, SubactionCount) {
  EXPECT_EQ(subaction_count(200, 4, 10), 5);
  EXPECT_EQ(subaction_count(47, 1, 10), 5);
  EXPECT_EQ(subaction_count(4, 1, 10), 1);
  EXPECT_EQ(subaction_count(0, 0, 10), 1);
}

TEST(Training, LinearInitSplitsEvenly) {
  const auto r = linear_init({100, 101}, {{"x", {0, 1}}, {"y", {1, 0}}}, 3, 10);
  // 201 frames over 4 instances at m = 10: round(5.025) = 5.
  EXPECT_EQ(r.space.states_per_action(), (std::vector<int>{5, 5, 1}));
  const auto sx = alignment_to_segmentation(r.alignments[0]);
  EXPECT_EQ(sx.segments[0].length(), 50);
  const auto sy = alignment_to_segmentation(r.alignments[1]);
  EXPECT_EQ(sy.segments[0].length(), 51);
  EXPECT_EQ(sy.segments[1].length(), 50);
  for (const auto& al : r.alignments) EXPECT_EQ(check_monotone(al), "");
  EXPECT_THROW(linear_init({1}, {{"x", {0, 1}}}, 2, 10), Error);
}

TEST(Training, ReestimatePreservesActionBoundaries) {
  StateSpace s({1, 1});
  const Segmentation seg{"v", {{0, 0, 46}, {1, 47, 49}}};
  const auto al = uniform_alignment(seg, s);
  const auto r = reestimate_subactions({al}, s, 10);
  EXPECT_EQ(r.space.states_per_action(), (std::vector<int>{5, 1}));
  EXPECT_EQ(alignment_to_segmentation(r.alignments[0]), seg);
  EXPECT_EQ(r.alignments[0].frames[46].subaction, 4);
}

TEST(Training, FrameChangeRate) {
  StateAlignment a{"v", std::vector<FrameState>(100, {0, 0, 0})};
  auto b = a;
  EXPECT_EQ(frame_change_rate({a}, {b}), 0.0);
  b.frames[99] = {1, 0, 1};
  EXPECT_DOUBLE_EQ(frame_change_rate({a}, {b}), 0.01);
  StateAlignment c{"v", std::vector<FrameState>(100, {1, 0, 0})};
  EXPECT_EQ(frame_change_rate({a}, {c}), 1.0);
  // Subaction renumbering alone is not a change.
  auto d = a;
  d.frames[50].subaction = 1;
  EXPECT_EQ(frame_change_rate({a}, {d}), 0.0);
  StateAlignment e{"v", std::vector<FrameState>(99, {0, 0, 0})};
  EXPECT_THROW(frame_change_rate({a}, {e}), Error);
}

TEST(Training, RealignFixedPoint) {
  // A scorer that reproduces the current alignment's one-hot posteriors
  // realigns to the same alignment.
  const auto c = generate_corpus(tiny_spec());
  auto spec = tiny_spec();
  spec.noise_scale = 0.0;
  const auto clean = generate_corpus(spec);
  const auto data = make_training_set(clean.features, clean.alignments, clean.space);
  const auto g = GaussianScorer::fit(data, clean.space.num_states());
  const auto hmm = estimate_transitions(clean.alignments, clean.space);
  const auto r = realign_all(g, hmm, {}, clean.features, clean.transcripts, clean.alignments, 2);
  EXPECT_TRUE(r.infeasible.empty());
  EXPECT_EQ(r.alignments, clean.alignments);
}

TEST(Training, InfeasibleVideoKeepsPreviousAlignment) {
  const auto c = generate_corpus(tiny_spec());
  const auto data = make_training_set(c.features, c.alignments, c.space);
  const auto g = GaussianScorer::fit(data, c.space.num_states());
  auto hmm = estimate_transitions(c.alignments, c.space);
  std::vector<FeatureSequence> videos{c.features[0], FeatureSequence{"short", c.features[0].values.topRows(3)}};
  std::vector<Transcript> ts{c.transcripts[0], {"short", c.transcripts[0].actions}};
  StateAlignment prev{"short", {{ts[1].actions[0], 0, 0}, {ts[1].actions[1], 0, 1}, {ts[1].actions[2], 0, 2}}};
  const auto r = realign_all(g, hmm, {}, videos, ts, {c.alignments[0], prev}, 1);
  ASSERT_EQ(r.infeasible, (std::vector<std::string>{"short"}));
  EXPECT_EQ(r.alignments[1], prev);
  EXPECT_THROW(realign_all(g, hmm, {}, {videos[1]}, {ts[1]}, {prev}, 1), Error);
}

TEST(Training, WeakTrainingImprovesAndStops) {
  const auto c = generate_corpus(tiny_spec());
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.jobs = 2;
  const auto r = train(cfg, weak_data(c));
  ASSERT_GE(r.iterations.size(), 2u);
  EXPECT_GT(*r.iterations.back().mof, *r.iterations.front().mof);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.iterations.back().change_rate, 0.05);
  for (const auto& al : r.alignments) EXPECT_EQ(check_monotone(al), "");
  for (const auto& it : r.iterations) {
    EXPECT_GE(it.change_rate, 0.0);
    EXPECT_LE(it.change_rate, 1.0);
  }
}

TEST(Training, IterationLimitStillYieldsAModel) {
  const auto c = generate_corpus(tiny_spec());
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.max_iterations = 1;
  cfg.stop_threshold = 1e-9;
  const auto r = train(cfg, weak_data(c));
  EXPECT_EQ(r.iterations.size(), 2u);
  EXPECT_FALSE(r.converged);
  ASSERT_TRUE(r.model.scorer);
  EXPECT_EQ(r.model.scorer->num_states(), r.model.hmm.space.num_states());
}

TEST(Training, SparseLabelsAreSatisfiedEveryIteration) {
  const auto c = generate_corpus(tiny_spec());
  auto d = weak_data(c);
  d.sparse_labels = sample_sparse_labels(c.segmentations, 0.05, 4);
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.supervision = Supervision::sparse;
  bool seen = false;
  const auto r = train(cfg, d, [&](const IterationReport& rep, const Model&, const std::vector<StateAlignment>& als) {
    seen = true;
    EXPECT_EQ(rep.constraint_failures, 0);
    for (std::size_t v = 0; v < als.size(); ++v)
      for (const auto& l : d.sparse_labels[v]) EXPECT_EQ(als[v].frames[static_cast<std::size_t>(l.frame)].action, l.action);
  });
  EXPECT_TRUE(seen);
}

TEST(Training, FullSupervisionUsesGroundTruthLengths) {
  const auto c = generate_corpus(tiny_spec());
  TrainingData d{c.vocabulary, c.features, c.transcripts, {}, c.segmentations, {}};
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.supervision = Supervision::full;
  const auto r = train(cfg, d);
  ASSERT_EQ(r.iterations.size(), 1u);
  EXPECT_GT(*r.iterations[0].mof, 0.8);
  // Mean action length 12 at m = 5 gives round(2.4) = 2 states.
  double frames = 0, inst = 0;
  for (const auto& s : c.segmentations)
    for (const auto& g : s.segments)
      if (g.action == 0) {
        frames += g.length();
        inst += 1;
      }
  EXPECT_EQ(r.model.hmm.space.states_of(0), subaction_count(frames, inst, 5));
}

TEST(Training, SparseWithAllFramesMatchesGroundTruthBoundaries) {
  const auto c = generate_corpus(tiny_spec());
  auto d = weak_data(c);
  d.sparse_labels = sample_sparse_labels(c.segmentations, 1.0, 4);
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.supervision = Supervision::sparse;
  const auto r = train(cfg, d);
  EXPECT_EQ(to_segmentations(r.alignments), c.segmentations);
}

TEST(Training, ConfigValidation) {
  TrainConfig cfg;
  cfg.stop_threshold = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.stop_threshold = 0.05;
  cfg.frames_per_subaction = 0;
  EXPECT_THROW(cfg.validate(), Error);
  const auto c = generate_corpus(tiny_spec());
  TrainConfig sparse;
  sparse.supervision = Supervision::sparse;
  EXPECT_THROW(train(sparse, weak_data(c)), Error);
}

TEST(Training, DeterministicReports) {
  const auto c = generate_corpus(tiny_spec());
  TrainConfig cfg;
  cfg.frames_per_subaction = 5;
  cfg.jobs = 3;
  const auto a = train(cfg, weak_data(c));
  cfg.jobs = 1;
  const auto b = train(cfg, weak_data(c));
  EXPECT_EQ(training_summary(a, cfg).dump(), training_summary(b, cfg).dump());
  EXPECT_EQ(to_json(a.model).dump(), to_json(b.model).dump());
}
