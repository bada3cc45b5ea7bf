#pragma once

// Frame accuracy and Jaccard indices over segmentations.
//
// Jaccard matching: when predicted and ground-truth transcripts agree
// (alignment task) segments are paired one-to-one in transcript order.
// Otherwise every ground-truth segment is compared with the union of the
// predicted frames of its class in the same video.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "segalign/core.hpp"

namespace segalign {

enum class JaccardMatching { transcript_order, class_union };

inline std::string_view to_string(JaccardMatching m) {
  return m == JaccardMatching::transcript_order ? "transcript-order" : "class-union";
}

struct ClassAccuracy {
  long long correct = 0;
  long long total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct EvalReport {
  double mof = 0.0;
  double iod = 0.0;
  double iou = 0.0;
  std::map<ActionId, ClassAccuracy> per_class;  // keyed by ground-truth class
  int videos = 0;
  JaccardMatching matching = JaccardMatching::transcript_order;
};

namespace detail {

inline void check_pairs(const std::vector<Segmentation>& pred, const std::vector<Segmentation>& gt) {
  if (pred.size() != gt.size()) throw Error("prediction and ground truth video counts differ");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].video_id != gt[i].video_id)
      throw Error("video order differs: '" + pred[i].video_id + "' vs '" + gt[i].video_id + "'");
    require_tiling(pred[i]);
    require_tiling(gt[i]);
    if (pred[i].num_frames() != gt[i].num_frames())
      throw Error("video '" + gt[i].video_id + "' has " + std::to_string(gt[i].num_frames()) +
                  " ground-truth frames but " + std::to_string(pred[i].num_frames()) + " predicted");
  }
}

inline int overlap(const Segment& a, const Segment& b) {
  return std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start) + 1);
}

struct JaccardSums {
  double iod = 0.0, iou = 0.0;
  long long pairs = 0;
};

inline JaccardSums jaccard_sums(const std::vector<Segmentation>& pred,
                                const std::vector<Segmentation>& gt, JaccardMatching matching) {
  check_pairs(pred, gt);
  JaccardSums s;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const auto& P = pred[v].segments;
    const auto& G = gt[v].segments;
    if (matching == JaccardMatching::transcript_order) {
      if (segmentation_transcript(pred[v]).actions != segmentation_transcript(gt[v]).actions)
        throw Error("transcripts of '" + gt[v].video_id + "' differ between prediction and ground truth");
      for (std::size_t n = 0; n < G.size(); ++n) {
        const double inter = overlap(P[n], G[n]);
        s.iod += inter / P[n].length();
        s.iou += inter / (P[n].length() + G[n].length() - inter);
        ++s.pairs;
      }
    } else {
      for (const auto& g : G) {
        double inter = 0.0, detected = 0.0;
        for (const auto& p : P)
          if (p.action == g.action) {
            inter += overlap(p, g);
            detected += p.length();
          }
        s.iod += detected > 0 ? inter / detected : 0.0;
        const double uni = detected + g.length() - inter;
        s.iou += uni > 0 ? inter / uni : 0.0;
        ++s.pairs;
      }
    }
  }
  return s;
}

}  // namespace detail

// Correct frames over all frames, pooled over videos.
inline double mof(const std::vector<Segmentation>& pred, const std::vector<Segmentation>& gt) {
  detail::check_pairs(pred, gt);
  long long correct = 0, total = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const auto a = segmentation_frames(pred[v]);
    const auto b = segmentation_frames(gt[v]);
    for (std::size_t t = 0; t < a.size(); ++t) correct += a[t] == b[t];
    total += static_cast<long long>(a.size());
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

// Mean |G n D| / |D| over matched segment pairs.
inline double jaccard_iod(const std::vector<Segmentation>& pred, const std::vector<Segmentation>& gt,
                          JaccardMatching matching = JaccardMatching::transcript_order) {
  const auto s = detail::jaccard_sums(pred, gt, matching);
  return s.pairs ? s.iod / static_cast<double>(s.pairs) : 0.0;
}

// Mean |G n D| / |G u D| over matched segment pairs.
inline double jaccard_iou(const std::vector<Segmentation>& pred, const std::vector<Segmentation>& gt,
                          JaccardMatching matching = JaccardMatching::transcript_order) {
  const auto s = detail::jaccard_sums(pred, gt, matching);
  return s.pairs ? s.iou / static_cast<double>(s.pairs) : 0.0;
}

inline bool transcripts_agree(const std::vector<Segmentation>& pred,
                              const std::vector<Segmentation>& gt) {
  for (std::size_t v = 0; v < pred.size() && v < gt.size(); ++v)
    if (segmentation_transcript(pred[v]).actions != segmentation_transcript(gt[v]).actions)
      return false;
  return pred.size() == gt.size();
}

inline EvalReport evaluate(const std::vector<Segmentation>& pred, const std::vector<Segmentation>& gt) {
  detail::check_pairs(pred, gt);
  EvalReport r;
  r.videos = static_cast<int>(gt.size());
  r.matching = transcripts_agree(pred, gt) ? JaccardMatching::transcript_order
                                           : JaccardMatching::class_union;
  r.mof = mof(pred, gt);
  const auto s = detail::jaccard_sums(pred, gt, r.matching);
  if (s.pairs) {
    r.iod = s.iod / static_cast<double>(s.pairs);
    r.iou = s.iou / static_cast<double>(s.pairs);
  }
  for (std::size_t v = 0; v < gt.size(); ++v) {
    const auto a = segmentation_frames(pred[v]);
    const auto b = segmentation_frames(gt[v]);
    for (std::size_t t = 0; t < b.size(); ++t) {
      auto& c = r.per_class[b[t]];
      ++c.total;
      c.correct += a[t] == b[t];
    }
  }
  return r;
}

}  // namespace segalign
