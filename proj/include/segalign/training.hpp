#pragma once

// Iterative training: linear initialization, then repeated scorer fitting,
// realignment, optional sparse-label adjustment and subaction reestimation
// until few frame labels change.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segalign/constraints.hpp"
#include "segalign/core.hpp"
#include "segalign/decoder.hpp"
#include "segalign/eval.hpp"
#include "segalign/features.hpp"
#include "segalign/hmm.hpp"
#include "segalign/model.hpp"
#include "segalign/observation.hpp"
#include "segalign/parallel.hpp"

namespace segalign {

enum class Supervision { weak, sparse, full };

inline std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::weak: return "weak";
    case Supervision::sparse: return "sparse";
    case Supervision::full: return "full";
  }
  return "?";
}

inline Supervision parse_supervision(std::string_view s) {
  if (s == "weak") return Supervision::weak;
  if (s == "sparse") return Supervision::sparse;
  if (s == "full") return Supervision::full;
  throw Error("unknown supervision '" + std::string(s) + "' (valid: weak, sparse, full)");
}

struct TrainConfig {
  int frames_per_subaction = 10;  // m
  ScorerConfig scorer{};
  PriorKind prior = PriorKind::half_gaussian;
  int max_iterations = 15;
  double stop_threshold = 0.05;
  Supervision supervision = Supervision::weak;
  std::uint64_t seed = 0;
  int max_run_length = 0;  // 0: derived from the mean state lengths
  int jobs = 1;

  void validate() const {
    if (frames_per_subaction < 1) throw Error("frames_per_subaction must be at least 1");
    if (!(stop_threshold > 0.0 && stop_threshold < 1.0)) throw Error("stop_threshold must lie in (0, 1)");
    if (max_iterations < 1) throw Error("max_iterations must be at least 1");
    if (max_run_length < 0) throw Error("max_run_length must be non-negative");
  }
};

struct TrainingData {
  LabelVocabulary vocabulary;
  std::vector<FeatureSequence> videos;
  std::vector<Transcript> transcripts;               // parallel to videos
  std::vector<std::vector<SparseLabel>> sparse_labels;  // sparse mode, parallel to videos
  std::vector<Segmentation> ground_truth;            // full mode, parallel to videos
  std::vector<Segmentation> reference;               // optional, for training MoF only
};

struct IterationReport {
  int iteration = 0;
  double change_rate = 1.0;
  std::vector<int> states_per_action;
  double skip_fraction = 0.0;
  std::optional<double> mof;
  int infeasible_videos = 0;
  int constraint_failures = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<IterationReport> iterations;  // iteration 0 is the initialization
  std::vector<StateAlignment> alignments;   // final training alignments
  bool converged = false;
};

// round(frames / (instances * m)), at least 1.
inline int subaction_count(double frames, double instances, int m) {
  if (instances <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::lround(frames / (instances * m))));
}

struct InitResult {
  StateSpace space;
  std::vector<StateAlignment> alignments;
};

// Equal-size action segments per video; one subaction count shared by all
// actions, from the corpus-wide frames per action instance.
inline InitResult linear_init(const std::vector<int>& frames, const std::vector<Transcript>& transcripts,
                              int num_actions, int m) {
  if (frames.size() != transcripts.size()) throw Error("every video needs a transcript");
  double total_frames = 0.0, total_instances = 0.0;
  std::vector<bool> present(static_cast<std::size_t>(num_actions), false);
  for (std::size_t v = 0; v < frames.size(); ++v) {
    validate(transcripts[v]);
    const int N = static_cast<int>(transcripts[v].actions.size());
    if (frames[v] < N)
      throw Error("video '" + transcripts[v].video_id + "' has " + std::to_string(frames[v]) +
                  " frames but " + std::to_string(N) + " transcript actions");
    total_frames += frames[v];
    total_instances += N;
    for (ActionId a : transcripts[v].actions) {
      if (a < 0 || a >= num_actions) throw Error("transcript label outside the vocabulary");
      present[static_cast<std::size_t>(a)] = true;
    }
  }
  const int K = subaction_count(total_frames, total_instances, m);
  std::vector<int> counts(static_cast<std::size_t>(num_actions), 1);
  for (int a = 0; a < num_actions; ++a)
    if (present[static_cast<std::size_t>(a)]) counts[static_cast<std::size_t>(a)] = K;
  InitResult out{StateSpace(counts), {}};
  for (std::size_t v = 0; v < frames.size(); ++v) {
    const auto& tr = transcripts[v];
    const auto sizes = split_evenly(frames[v], static_cast<int>(tr.actions.size()));
    Segmentation seg{tr.video_id, {}};
    int t = 0;
    for (std::size_t n = 0; n < sizes.size(); ++n) {
      seg.segments.push_back({tr.actions[n], t, t + sizes[n] - 1});
      t += sizes[n];
    }
    out.alignments.push_back(uniform_alignment(seg, out.space));
  }
  return out;
}

// New K_a from the mean realigned instance length of each action (actions
// without instances keep their count); states spread evenly per segment.
inline InitResult reestimate_subactions(const std::vector<StateAlignment>& alignments,
                                        const StateSpace& previous, int m) {
  const auto A = static_cast<std::size_t>(previous.num_actions());
  std::vector<double> frames(A, 0.0), instances(A, 0.0);
  std::vector<Segmentation> segs;
  for (const auto& al : alignments) {
    segs.push_back(alignment_to_segmentation(al));
    for (const auto& s : segs.back().segments) {
      frames[static_cast<std::size_t>(s.action)] += s.length();
      instances[static_cast<std::size_t>(s.action)] += 1.0;
    }
  }
  std::vector<int> counts = previous.states_per_action();
  for (std::size_t a = 0; a < A; ++a)
    if (instances[a] > 0) counts[a] = subaction_count(frames[a], instances[a], m);
  InitResult out{StateSpace(counts), {}};
  for (const auto& s : segs) out.alignments.push_back(uniform_alignment(s, out.space));
  return out;
}

// Changed action labels over all frames.
inline double frame_change_rate(const std::vector<StateAlignment>& prev,
                                const std::vector<StateAlignment>& next) {
  if (prev.size() != next.size()) throw Error("alignment sets differ in size");
  long long changed = 0, total = 0;
  for (std::size_t v = 0; v < prev.size(); ++v) {
    if (prev[v].size() != next[v].size())
      throw Error("alignments of '" + prev[v].video_id + "' differ in length");
    for (std::size_t t = 0; t < prev[v].size(); ++t) changed += prev[v].frames[t].action != next[v].frames[t].action;
    total += static_cast<long long>(prev[v].size());
  }
  return total ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
}

struct RealignResult {
  std::vector<StateAlignment> alignments;
  std::vector<std::string> infeasible;  // videos that kept their previous alignment
};

// Forced alignment of every video to its own transcript. Videos too short
// for their transcript keep `previous`.
inline RealignResult realign_all(const Scorer& scorer, const HmmModel& hmm, const DecodeOptions& options,
                                 const std::vector<FeatureSequence>& videos,
                                 const std::vector<Transcript>& transcripts,
                                 const std::vector<StateAlignment>& previous, int jobs) {
  if (videos.size() != transcripts.size() || videos.size() != previous.size())
    throw Error("realignment inputs differ in size");
  RealignResult out;
  out.alignments.resize(videos.size());
  std::vector<char> failed(videos.size(), 0);
  parallel_for(videos.size(), jobs, [&](std::size_t v) {
    try {
      const auto scores = scorer.score(videos[v]);
      out.alignments[v] = align_to_transcript(scores, transcripts[v], hmm, options).alignment;
    } catch (const InfeasibleError&) {
      out.alignments[v] = previous[v];
      failed[v] = 1;
    }
  });
  for (std::size_t v = 0; v < videos.size(); ++v)
    if (failed[v]) out.infeasible.push_back(videos[v].video_id);
  if (!videos.empty() && out.infeasible.size() == videos.size())
    throw Error("realignment failed for every video");
  return out;
}

inline std::vector<Segmentation> to_segmentations(const std::vector<StateAlignment>& als) {
  std::vector<Segmentation> out;
  out.reserve(als.size());
  for (const auto& al : als) out.push_back(alignment_to_segmentation(al));
  return out;
}

namespace detail {

inline void check_training_data(const TrainingData& d, Supervision mode) {
  if (d.videos.empty()) throw Error("no training videos");
  if (d.transcripts.size() != d.videos.size()) throw Error("every video needs a transcript");
  for (std::size_t v = 0; v < d.videos.size(); ++v)
    if (d.transcripts[v].video_id != d.videos[v].video_id)
      throw Error("transcript order does not match video order at '" + d.videos[v].video_id + "'");
  if (mode == Supervision::sparse && d.sparse_labels.size() != d.videos.size())
    throw Error("sparse supervision needs a label list per video");
  if (mode == Supervision::full && d.ground_truth.size() != d.videos.size())
    throw Error("full supervision needs a ground-truth segmentation per video");
  if (!d.reference.empty() && d.reference.size() != d.videos.size())
    throw Error("reference segmentations must cover every video");
}

inline Model fit_model(const TrainConfig& cfg, const TrainingData& d, const StateSpace& space,
                       const std::vector<StateAlignment>& alignments, std::uint64_t seed) {
  const auto data = make_training_set(d.videos, alignments, space);
  Model m;
  m.vocabulary = d.vocabulary;
  m.scorer = fit_scorer(cfg.scorer, data, space.num_states(), seed).scorer;
  m.hmm = estimate_transitions(alignments, space, cfg.frames_per_subaction);
  m.grammar = build_grammar(d.transcripts);
  m.prior = cfg.prior;
  m.frames_per_subaction = cfg.frames_per_subaction;
  m.max_run_length = cfg.max_run_length;
  return m;
}

inline std::optional<double> training_mof(const TrainingData& d, const std::vector<StateAlignment>& als) {
  if (d.reference.empty()) return std::nullopt;
  return mof(to_segmentations(als), d.reference);
}

}  // namespace detail

using IterationCallback =
    std::function<void(const IterationReport&, const Model&, const std::vector<StateAlignment>&)>;

inline TrainResult train(const TrainConfig& cfg, const TrainingData& d,
                         const IterationCallback& on_iteration = {}) {
  cfg.validate();
  detail::check_training_data(d, cfg.supervision);
  using clock = std::chrono::steady_clock;
  const int m = cfg.frames_per_subaction;
  const int A = static_cast<int>(d.vocabulary.size());
  TrainResult result;

  if (cfg.supervision == Supervision::full) {
    const auto t0 = clock::now();
    std::vector<double> frames(static_cast<std::size_t>(A), 0.0), instances(static_cast<std::size_t>(A), 0.0);
    for (std::size_t v = 0; v < d.videos.size(); ++v) {
      const auto& g = d.ground_truth[v];
      if (g.video_id != d.videos[v].video_id || g.num_frames() != d.videos[v].frames())
        throw Error("ground truth for '" + d.videos[v].video_id + "' does not match its features");
      for (const auto& s : g.segments) {
        frames[static_cast<std::size_t>(s.action)] += s.length();
        instances[static_cast<std::size_t>(s.action)] += 1.0;
      }
    }
    std::vector<int> counts(static_cast<std::size_t>(A));
    for (std::size_t a = 0; a < counts.size(); ++a) counts[a] = subaction_count(frames[a], instances[a], m);
    const StateSpace space(counts);
    std::vector<StateAlignment> gt;
    for (const auto& g : d.ground_truth) gt.push_back(uniform_alignment(g, space));
    result.model = detail::fit_model(cfg, d, space, gt, cfg.seed);
    const auto realigned = realign_all(*result.model.scorer, result.model.hmm,
                                       result.model.decode_options(), d.videos, d.transcripts, gt, cfg.jobs);
    IterationReport r;
    r.iteration = 1;
    r.change_rate = frame_change_rate(gt, realigned.alignments);
    r.states_per_action = counts;
    r.skip_fraction = skip_state_fraction(realigned.alignments);
    r.mof = d.reference.empty() ? mof(to_segmentations(realigned.alignments), d.ground_truth)
                                : *detail::training_mof(d, realigned.alignments);
    r.infeasible_videos = static_cast<int>(realigned.infeasible.size());
    r.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.iterations.push_back(r);
    result.alignments = realigned.alignments;
    result.converged = true;
    if (on_iteration) on_iteration(r, result.model, result.alignments);
    return result;
  }

  auto t0 = clock::now();
  std::vector<int> lengths;
  for (const auto& x : d.videos) lengths.push_back(x.frames());
  auto [space, alignments] = linear_init(lengths, d.transcripts, A, m);
  {
    IterationReport r;
    r.iteration = 0;
    r.change_rate = 1.0;
    r.states_per_action = space.states_per_action();
    r.skip_fraction = skip_state_fraction(alignments);
    r.mof = detail::training_mof(d, alignments);
    r.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.iterations.push_back(r);
  }

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    t0 = clock::now();
    Model model = detail::fit_model(cfg, d, space, alignments, cfg.seed + static_cast<std::uint64_t>(it));
    auto realigned = realign_all(*model.scorer, model.hmm, model.decode_options(), d.videos,
                                 d.transcripts, alignments, cfg.jobs);
    IterationReport r;
    r.iteration = it;
    r.infeasible_videos = static_cast<int>(realigned.infeasible.size());
    if (cfg.supervision == Supervision::sparse) {
      std::vector<char> failed(d.videos.size(), 0);
      parallel_for(d.videos.size(), cfg.jobs, [&](std::size_t v) {
        try {
          realigned.alignments[v] = apply_annotations(realigned.alignments[v], d.sparse_labels[v]);
        } catch (const Error&) {
          failed[v] = 1;
        }
      });
      for (char f : failed) r.constraint_failures += f;
    }
    r.skip_fraction = skip_state_fraction(realigned.alignments);
    r.mof = detail::training_mof(d, realigned.alignments);
    r.change_rate = frame_change_rate(alignments, realigned.alignments);
    auto re = reestimate_subactions(realigned.alignments, space, m);
    space = std::move(re.space);
    alignments = std::move(re.alignments);
    r.states_per_action = space.states_per_action();
    r.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.iterations.push_back(r);
    if (on_iteration) on_iteration(r, model, alignments);
    if (r.change_rate < cfg.stop_threshold) {
      result.converged = true;
      break;
    }
  }
  result.model = detail::fit_model(cfg, d, space, alignments,
                                   cfg.seed + static_cast<std::uint64_t>(result.iterations.size()));
  result.alignments = std::move(alignments);
  return result;
}

}  // namespace segalign
