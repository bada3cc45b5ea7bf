#pragma once

// Sparse frame annotations as hard constraints on a decoded alignment.
//
// Each annotated frame is assigned to one segment of its class so that the
// summed distance to the segments is minimal (a monotone warping over label
// and segment indices); the segment boundaries are then shifted as little as
// possible so that every annotated frame falls inside its segment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "segalign/core.hpp"

namespace segalign {

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

// Frames the annotation must move to fall inside the segment; infinite when
// the classes differ.
inline double label_segment_distance(int frame, ActionId label, const Segment& seg) {
  if (label != seg.action) return kInfiniteDistance;
  if (frame < seg.start) return static_cast<double>(seg.start - frame);
  if (frame > seg.end) return static_cast<double>(frame - seg.end);
  return 0.0;
}

struct AnnotationAssignment {
  std::vector<int> segment_of;  // per label
  double total_distance = 0.0;
};

// When `reserve_frames` is set, only assignments that leave at least one frame
// for every segment are admissible, so the result can always be realized by
// adjust_boundaries.
inline AnnotationAssignment assign_annotations(const Segmentation& seg,
                                               const std::vector<SparseLabel>& labels,
                                               bool reserve_frames = false) {
  require_tiling(seg);
  require_sorted(labels);
  const int N = static_cast<int>(seg.segments.size());
  const int F = static_cast<int>(labels.size());
  const int T = seg.num_frames();
  AnnotationAssignment out;
  if (F == 0) return out;

  std::string missing;
  for (const auto& l : labels) {
    if (l.frame < 0 || l.frame >= T)
      throw Error("annotation frame " + std::to_string(l.frame) + " outside video '" +
                  seg.video_id + "'");
    const bool present = std::any_of(seg.segments.begin(), seg.segments.end(),
                                     [&](const Segment& s) { return s.action == l.action; });
    if (!present) missing += " frame " + std::to_string(l.frame);
  }
  if (!missing.empty())
    throw Error("annotations of '" + seg.video_id +
                "' name classes absent from its transcript:" + missing);

  auto room_ok = [&](int i_prev, int n_prev, int i, int n) {
    if (!reserve_frames) return true;
    if (i_prev < 0) return labels[static_cast<std::size_t>(i)].frame >= n;
    if (n == n_prev) return true;
    return labels[static_cast<std::size_t>(i)].frame - labels[static_cast<std::size_t>(i_prev)].frame >=
           n - n_prev;
  };
  auto tail_ok = [&](int i, int n) {
    return !reserve_frames || T - 1 - labels[static_cast<std::size_t>(i)].frame >= N - 1 - n;
  };

  const double inf = kInfiniteDistance;
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(F),
                                        std::vector<double>(static_cast<std::size_t>(N), inf));
  std::vector<std::vector<int>> from(static_cast<std::size_t>(F),
                                     std::vector<int>(static_cast<std::size_t>(N), -1));
  for (int n = 0; n < N; ++n) {
    const double d = label_segment_distance(labels[0].frame, labels[0].action,
                                            seg.segments[static_cast<std::size_t>(n)]);
    if (room_ok(-1, -1, 0, n)) cost[0][static_cast<std::size_t>(n)] = d;
  }
  for (int i = 1; i < F; ++i) {
    const auto& l = labels[static_cast<std::size_t>(i)];
    for (int n = 0; n < N; ++n) {
      const double d = label_segment_distance(l.frame, l.action, seg.segments[static_cast<std::size_t>(n)]);
      if (d == inf) continue;
      double best = inf;
      int arg = -1;
      for (int m = 0; m <= n; ++m) {
        const double c = cost[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(m)];
        if (c < best && room_ok(i - 1, m, i, n)) {
          best = c;
          arg = m;
        }
      }
      if (arg >= 0) {
        cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)] = best + d;
        from[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)] = arg;
      }
    }
  }
  double best = inf;
  int arg = -1;
  for (int n = 0; n < N; ++n) {
    const double c = cost[static_cast<std::size_t>(F - 1)][static_cast<std::size_t>(n)];
    if (c < best && tail_ok(F - 1, n)) {
      best = c;
      arg = n;
    }
  }
  if (arg < 0)
    throw Error("no finite-cost assignment of the annotations of '" + seg.video_id +
                "' to its segments");
  out.segment_of.assign(static_cast<std::size_t>(F), -1);
  out.total_distance = best;
  for (int i = F - 1; i >= 0; --i) {
    out.segment_of[static_cast<std::size_t>(i)] = arg;
    arg = from[static_cast<std::size_t>(i)][static_cast<std::size_t>(arg)];
  }
  return out;
}

// Moves segment boundaries minimally so that each annotated frame lies in its
// assigned segment; every segment keeps at least one frame. Segments whose
// span changed get their visited subactions redistributed evenly.
inline StateAlignment adjust_boundaries(const StateAlignment& al,
                                        const AnnotationAssignment& assignment,
                                        const std::vector<SparseLabel>& labels) {
  if (assignment.segment_of.size() != labels.size())
    throw Error("assignment does not match the annotations");
  const Segmentation seg = alignment_to_segmentation(al);
  const int N = static_cast<int>(seg.segments.size());
  const int T = seg.num_frames();
  if (labels.empty() || assignment.total_distance == 0.0) return al;

  // Boundary b[n] is the first frame of segment n; b[0] = 0, b[N] = T.
  std::vector<int> lo(static_cast<std::size_t>(N + 1)), hi(static_cast<std::size_t>(N + 1));
  for (int n = 0; n <= N; ++n) {
    lo[static_cast<std::size_t>(n)] = n;
    hi[static_cast<std::size_t>(n)] = T - (N - n);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int n = assignment.segment_of[i];
    const int tau = labels[i].frame;
    if (n < 0 || n >= N || seg.segments[static_cast<std::size_t>(n)].action != labels[i].action)
      throw Error("annotation at frame " + std::to_string(tau) + " is assigned to an incompatible segment");
    for (int m = n + 1; m <= N; ++m) lo[static_cast<std::size_t>(m)] = std::max(lo[static_cast<std::size_t>(m)], tau + 1);
    for (int m = 0; m <= n; ++m) hi[static_cast<std::size_t>(m)] = std::min(hi[static_cast<std::size_t>(m)], tau);
  }
  for (int n = 1; n <= N; ++n)
    lo[static_cast<std::size_t>(n)] = std::max(lo[static_cast<std::size_t>(n)], lo[static_cast<std::size_t>(n - 1)] + 1);
  for (int n = N - 1; n >= 0; --n)
    hi[static_cast<std::size_t>(n)] = std::min(hi[static_cast<std::size_t>(n)], hi[static_cast<std::size_t>(n + 1)] - 1);
  std::vector<int> b(static_cast<std::size_t>(N + 1));
  b[0] = 0;
  b[static_cast<std::size_t>(N)] = T;
  for (int n = 1; n < N; ++n) {
    if (lo[static_cast<std::size_t>(n)] > hi[static_cast<std::size_t>(n)])
      throw Error("annotations of '" + al.video_id +
                  "' would force a segment below one frame; cannot adjust boundaries");
    b[static_cast<std::size_t>(n)] =
        std::clamp(seg.segments[static_cast<std::size_t>(n)].start, lo[static_cast<std::size_t>(n)],
                   hi[static_cast<std::size_t>(n)]);
  }
  if (lo[0] > 0 || hi[0] < 0 || lo[static_cast<std::size_t>(N)] > T)
    throw Error("annotations of '" + al.video_id + "' cannot be satisfied");

  StateAlignment out = al;
  for (int n = 0; n < N; ++n) {
    const auto& old = seg.segments[static_cast<std::size_t>(n)];
    Segment s{old.action, b[static_cast<std::size_t>(n)], b[static_cast<std::size_t>(n + 1)] - 1};
    if (s.start == old.start && s.end == old.end) continue;
    int visited = 0;
    for (int t = old.start; t <= old.end; ++t)
      visited = std::max(visited, al.frames[static_cast<std::size_t>(t)].subaction + 1);
    fill_segment_uniform(out.frames, s, visited, n);
  }
  require_monotone(out);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (out.frames[static_cast<std::size_t>(labels[i].frame)].action != labels[i].action)
      throw Error("boundary adjustment left frame " + std::to_string(labels[i].frame) +
                  " of '" + al.video_id + "' with the wrong class");
  return out;
}

// Assign then adjust, with room reserved for every segment.
inline StateAlignment apply_annotations(const StateAlignment& al,
                                        const std::vector<SparseLabel>& labels) {
  if (labels.empty()) return al;
  const auto seg = alignment_to_segmentation(al);
  const auto assignment = assign_annotations(seg, labels, /*reserve_frames=*/true);
  return adjust_boundaries(al, assignment, labels);
}

}  // namespace segalign
