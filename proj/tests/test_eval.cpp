#include <gtest/gtest.h>

#include <random>

#include "metric_oracle.hpp"
#include "segalign/eval.hpp"
#include "test_util.hpp"

using namespace segalign;

TEST(Eval, MofExamples) {
  Segmentation a{"v", {{0, 0, 3}}};
  Segmentation b{"v", {{1, 0, 3}}};
  Segmentation c{"v", {{0, 0, 2}, {1, 3, 3}}};
  EXPECT_EQ(mof({a}, {a}), 1.0);
  EXPECT_EQ(mof({a}, {b}), 0.0);
  EXPECT_EQ(mof({c}, {a}), 0.75);
}

TEST(Eval, JaccardExamples) {
  // D = [0, 9], G = [5, 14] within a 20-frame video.
  Segmentation pred{"v", {{0, 0, 9}, {1, 10, 19}}};
  Segmentation gt{"v", {{0, 0, 4}, {0, 5, 14}, {1, 15, 19}}};
  Segmentation p2{"v", {{1, 0, 4}, {0, 5, 9}, {2, 10, 19}}};
  Segmentation g2{"v", {{1, 0, 4}, {0, 5, 14}, {2, 15, 19}}};
  EXPECT_DOUBLE_EQ(jaccard_iod({p2}, {g2}), (1.0 + 1.0 + 0.5) / 3.0);
  Segmentation p3{"v", {{1, 0, 4}, {0, 5, 14}, {2, 15, 19}}};
  Segmentation g3{"v", {{1, 0, 9}, {0, 10, 14}, {2, 15, 19}}};
  // Middle pair: D = [5, 14], G = [10, 14] -> IoD 0.5, IoU 0.5.
  EXPECT_DOUBLE_EQ(jaccard_iou({p3}, {g3}), (0.5 + 0.5 + 1.0) / 3.0);
  Segmentation p4{"v", {{0, 0, 9}, {1, 10, 19}}};
  Segmentation g4{"v", {{0, 0, 4}, {1, 5, 19}}};
  EXPECT_DOUBLE_EQ(jaccard_iod({p4}, {g4}), (0.5 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(jaccard_iou({p4}, {g4}), (0.5 + 10.0 / 15.0) / 2.0);
  EXPECT_THROW(jaccard_iod({pred}, {gt}), Error);
  EXPECT_NO_THROW(jaccard_iod({pred}, {gt}, JaccardMatching::class_union));
}

TEST(Eval, HalfOverlapExample) {
  // Single pair D = [0, 9], G = [5, 14] padded so both tile 15 frames.
  Segmentation pred{"v", {{0, 0, 9}, {1, 10, 14}}};
  Segmentation gt{"v", {{1, 0, 4}, {0, 5, 14}}};
  const auto r = evaluate({pred}, {gt});
  EXPECT_EQ(r.matching, JaccardMatching::class_union);
  // Class 0: |G n D| = 5, |D| = 10, |G u D| = 15; class 1: G = [0, 4], D = [10, 14].
  EXPECT_DOUBLE_EQ(r.iod, (0.5 + 0.0) / 2.0);
  EXPECT_DOUBLE_EQ(r.iou, (1.0 / 3.0 + 0.0) / 2.0);
}

TEST(Eval, ErrorsOnMismatch) {
  Segmentation a{"v", {{0, 0, 3}}};
  Segmentation b{"w", {{0, 0, 3}}};
  Segmentation c{"v", {{0, 0, 4}}};
  EXPECT_THROW(mof({a}, {b}), Error);
  EXPECT_THROW(mof({a}, {c}), Error);
  EXPECT_THROW(mof({a}, {}), Error);
}

TEST(Eval, MatchesSetComputations) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nv(1, 3), tl(5, 20), ns(1, 4);
    std::vector<Segmentation> pred, gt, aligned;
    for (int v = 0; v < nv(rng); ++v) {
      const int T = tl(rng);
      const std::string id = "v" + std::to_string(v);
      gt.push_back(testutil::random_segmentation(rng, id, T, std::min(T, ns(rng)), 3));
      pred.push_back(testutil::random_segmentation(rng, id, T, std::min(T, ns(rng)), 3));
      // Same transcript, different boundaries.
      auto same = testutil::random_segmentation(rng, id, T, static_cast<int>(gt.back().segments.size()), 3);
      for (std::size_t n = 0; n < same.segments.size(); ++n) same.segments[n].action = gt.back().segments[n].action;
      aligned.push_back(same);
    }
    const auto u = testutil::set_metrics(pred, gt, JaccardMatching::class_union);
    EXPECT_EQ(mof(pred, gt), u.mof);
    EXPECT_EQ(jaccard_iod(pred, gt, JaccardMatching::class_union), u.iod);
    EXPECT_EQ(jaccard_iou(pred, gt, JaccardMatching::class_union), u.iou);
    const auto o = testutil::set_metrics(aligned, gt, JaccardMatching::transcript_order);
    EXPECT_EQ(jaccard_iod(aligned, gt), o.iod);
    EXPECT_EQ(jaccard_iou(aligned, gt), o.iou);
    EXPECT_LE(u.iou, u.iod);
    EXPECT_LE(o.iou, o.iod);
  }
}

TEST(Eval, PerClassAccuracyAndOrderInvariance) {
  Segmentation p1{"a", {{0, 0, 1}, {1, 2, 3}}};
  Segmentation g1{"a", {{0, 0, 2}, {1, 3, 3}}};
  Segmentation p2{"b", {{1, 0, 1}}};
  Segmentation g2{"b", {{1, 0, 1}}};
  const auto r = evaluate({p1, p2}, {g1, g2});
  EXPECT_EQ(r.per_class.at(0).correct, 2);
  EXPECT_EQ(r.per_class.at(0).total, 3);
  EXPECT_EQ(r.per_class.at(1).correct, 3);
  EXPECT_EQ(mof({p1, p2}, {g1, g2}), mof({p2, p1}, {g2, g1}));
}
