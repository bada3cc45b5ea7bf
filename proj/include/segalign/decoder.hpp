#pragma once

// Grammar-constrained Viterbi decoding with a run-length prior.
//
// A hypothesis is (trie edge, subaction index, run length). Every trie edge
// carries one copy of its action's chain, so each hypothesis has exactly one
// predecessor position and the only choice during the recursion is over the
// predecessor's run length. Without a prior the run length is dropped.
//
// Ties are broken deterministically: among end hypotheses the lower global
// state id wins, then the lower edge index; everywhere else the predecessor
// that stayed longer in its state (the self-transition) wins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "segalign/core.hpp"
#include "segalign/hmm.hpp"
#include "segalign/length_prior.hpp"
#include "segalign/scores.hpp"

namespace segalign {

enum class DecodeMode { segmentation, alignment };

struct DecodeOptions {
  PriorKind prior = PriorKind::none;
  int max_run_length = 0;  // 0: ceil(4 * max mean state length)
  double beam = 0.0;       // log-domain beam width; 0 disables pruning
};

struct DecodeRequest {
  const ScoreMatrix& scores;
  const TranscriptGrammar& grammar;
  const HmmModel& hmm;
  DecodeOptions options{};
  DecodeMode mode = DecodeMode::segmentation;
  std::string video_id{};
};

// Scores within this relative distance are ties, resolved by the fixed
// preference order (self over enter, longer run, lower end state and edge).
inline constexpr double kTieTolerance = 1e-10;

inline bool clearly_better(double candidate, double incumbent) {
  if (!(incumbent > kNegInf)) return candidate > incumbent;
  return candidate > incumbent + kTieTolerance * std::max(1.0, std::abs(incumbent));
}

struct DecodeResult {
  StateAlignment alignment;
  Segmentation segmentation;
  double log_score = kNegInf;
  bool consistent = false;  // independent rescoring matches log_score
};

// ----------------------------------------------------------------------------
// Lattice: trie edges expanded into subaction positions.
// ----------------------------------------------------------------------------

class DecodeLattice {
 public:
  struct Position {
    int edge = 0;
    int subaction = 0;
    int state = 0;          // global state id
    ActionId action = 0;
    int pred = -1;          // predecessor position, -1 for chain starts under the root
    bool final = false;     // last subaction of its chain
    bool accepting = false; // final and the edge ends in an accepting trie node
  };

  DecodeLattice(const TranscriptGrammar& grammar, const StateSpace& space) {
    const auto& nodes = grammar.nodes();
    // Edge e ends in trie node e + 1; node ids are assigned in creation order
    // so a parent edge always precedes its children.
    std::vector<int> final_pos(nodes.size(), -1);
    for (std::size_t node = 1; node < nodes.size(); ++node) {
      const auto& n = nodes[node];
      const ActionId a = n.parent_edge_label;
      if (a < 0 || a >= space.num_actions())
        throw Error("grammar uses action id " + std::to_string(a) + " unknown to the model");
      const int edge = static_cast<int>(node) - 1;
      const int parent_final = n.parent == TranscriptGrammar::root()
                                   ? -1
                                   : final_pos[static_cast<std::size_t>(n.parent)];
      const int k_count = space.states_of(a);
      for (int k = 0; k < k_count; ++k) {
        Position p;
        p.edge = edge;
        p.subaction = k;
        p.state = space.global(a, k);
        p.action = a;
        p.pred = k == 0 ? parent_final : static_cast<int>(positions_.size()) - 1;
        p.final = k == k_count - 1;
        p.accepting = p.final && n.accepting;
        positions_.push_back(p);
      }
      final_pos[node] = static_cast<int>(positions_.size()) - 1;
    }
    // End candidates ordered by (state id, edge).
    for (int i = 0; i < static_cast<int>(positions_.size()); ++i)
      if (positions_[static_cast<std::size_t>(i)].accepting) ends_.push_back(i);
    std::stable_sort(ends_.begin(), ends_.end(), [&](int a, int b) {
      const auto& pa = positions_[static_cast<std::size_t>(a)];
      const auto& pb = positions_[static_cast<std::size_t>(b)];
      return std::tie(pa.state, pa.edge) < std::tie(pb.state, pb.edge);
    });
    min_frames_ = shortest_path_states(grammar, space);
  }

  const std::vector<Position>& positions() const { return positions_; }
  const std::vector<int>& ends() const { return ends_; }
  int min_frames() const { return min_frames_; }

  static int shortest_path_states(const TranscriptGrammar& grammar, const StateSpace& space) {
    int best = std::numeric_limits<int>::max();
    for (const auto& path : grammar.paths()) {
      int n = 0;
      for (ActionId a : path) n += space.states_of(a);
      best = std::min(best, n);
    }
    return best;
  }

 private:
  std::vector<Position> positions_;
  std::vector<int> ends_;
  int min_frames_ = 0;
};

// ----------------------------------------------------------------------------
// Independent rescoring of a complete alignment.
// ----------------------------------------------------------------------------

// Sum of observation scores, transition log probabilities, and the log prior
// value of every completed run, evaluated directly rather than via ratios.
inline double path_log_score(const ScoreMatrix& scores, const HmmModel& hmm, PriorKind prior,
                             const StateAlignment& al) {
  const auto& space = hmm.space;
  double total = 0.0;
  int run = 0;
  for (std::size_t t = 0; t < al.frames.size(); ++t) {
    const auto& f = al.frames[t];
    const int s = space.global(f.action, f.subaction);
    total += scores(static_cast<Eigen::Index>(t), s);
    if (t > 0) {
      const auto& p = al.frames[t - 1];
      const int ps = space.global(p.action, p.subaction);
      const bool self = p.segment == f.segment && p.subaction == f.subaction;
      total += self ? hmm.log_self[static_cast<std::size_t>(ps)]
                    : hmm.log_advance[static_cast<std::size_t>(ps)];
      if (!self) {
        total += log_prior_value(prior, run, hmm.mean_length[static_cast<std::size_t>(ps)]);
        run = 0;
      }
    }
    ++run;
  }
  if (!al.frames.empty()) {
    const auto& f = al.frames.back();
    const int s = space.global(f.action, f.subaction);
    total += log_prior_value(prior, run, hmm.mean_length[static_cast<std::size_t>(s)]);
  }
  return total;
}

namespace detail {

inline void check_scores(const ScoreMatrix& scores, const HmmModel& hmm) {
  if (scores.cols() != hmm.num_states())
    throw Error("score matrix has " + std::to_string(scores.cols()) + " columns, model has " +
                std::to_string(hmm.num_states()) + " states");
  if (scores.rows() < 1) throw Error("score matrix has no frames");
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    bool any = false;
    for (Eigen::Index s = 0; s < scores.cols(); ++s) {
      const double v = scores(t, s);
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw Error("score at frame " + std::to_string(t) + " is not a valid log-likelihood");
      any = any || v > kNegInf;
    }
    if (!any) throw Error("all scores are -inf at frame " + std::to_string(t));
  }
}

inline StateAlignment alignment_from_positions(const std::string& video_id,
                                               const DecodeLattice& lattice,
                                               const std::vector<int>& pos,
                                               const std::vector<char>& entered) {
  StateAlignment al;
  al.video_id = video_id;
  al.frames.resize(pos.size());
  int segment = 0;
  for (std::size_t t = 0; t < pos.size(); ++t) {
    const auto& p = lattice.positions()[static_cast<std::size_t>(pos[t])];
    if (t > 0 && entered[t] && p.subaction == 0) ++segment;
    al.frames[t] = {p.action, p.subaction, segment};
  }
  return al;
}

}  // namespace detail

inline int effective_run_cap(const DecodeOptions& opt, const HmmModel& hmm, int frames) {
  int cap = opt.max_run_length > 0 ? opt.max_run_length
                                   : static_cast<int>(std::ceil(4.0 * hmm.max_mean_length()));
  // At least 2 so that entering a state and holding at the cap stay distinct.
  return std::clamp(cap, 2, std::max(frames, 2));
}

inline DecodeResult viterbi(const DecodeRequest& req) {
  const ScoreMatrix& scores = req.scores;
  const HmmModel& hmm = req.hmm;
  if (req.mode == DecodeMode::alignment && !req.grammar.single_path())
    throw Error("alignment mode requires a single-path grammar");
  if (req.grammar.language_size() == 0) throw Error("grammar is empty");
  detail::check_scores(scores, hmm);

  const DecodeLattice lattice(req.grammar, hmm.space);
  const int T = static_cast<int>(scores.rows());
  if (lattice.min_frames() > T)
    throw InfeasibleError("video '" + req.video_id + "' has " + std::to_string(T) +
                          " frames but the shortest grammar path needs " +
                          std::to_string(lattice.min_frames()));

  const auto& pos = lattice.positions();
  const int P = static_cast<int>(pos.size());
  const PriorKind prior = req.options.prior;
  const bool with_length = prior != PriorKind::none;
  const int L = with_length ? effective_run_cap(req.options, hmm, T) : 1;

  // Per-position transition weights, ratio prior folded in.
  std::vector<double> w_enter(static_cast<std::size_t>(P));
  std::vector<double> w_self(static_cast<std::size_t>(P) * static_cast<std::size_t>(L));
  for (int i = 0; i < P; ++i) {
    const auto& p = pos[static_cast<std::size_t>(i)];
    const double len = hmm.mean_length[static_cast<std::size_t>(p.state)];
    const double trans_in =
        p.pred < 0 ? 0.0
                   : hmm.log_advance[static_cast<std::size_t>(pos[static_cast<std::size_t>(p.pred)].state)];
    w_enter[static_cast<std::size_t>(i)] =
        trans_in + (with_length ? log_ratio_prior(prior, 1, len) : 0.0);
    for (int l = 2; l <= L; ++l)
      w_self[static_cast<std::size_t>(i * L + l - 1)] =
          hmm.log_self[static_cast<std::size_t>(p.state)] + log_ratio_prior(prior, l, len);
    if (!with_length) w_self[static_cast<std::size_t>(i)] = hmm.log_self[static_cast<std::size_t>(p.state)];
  }
  // At the cap a self-transition keeps the run length and the cap's ratio.
  auto w_hold = [&](int i) { return w_self[static_cast<std::size_t>(i * L + L - 1)]; };

  const std::size_t width = static_cast<std::size_t>(P) * static_cast<std::size_t>(L);
  std::vector<double> q(width, kNegInf), nq(width, kNegInf);
  // Backpointers: for run length 1, the predecessor's run length (or, without
  // a length prior, 1 = entered / 0 = self); for the cap, whether it held.
  std::vector<std::int32_t> enter_from(static_cast<std::size_t>(T) * static_cast<std::size_t>(P), 0);
  std::vector<char> held(with_length ? static_cast<std::size_t>(T) * static_cast<std::size_t>(P) : 0, 0);

  auto Q = [&](std::vector<double>& v, int i, int l) -> double& {
    return v[static_cast<std::size_t>(i * L + l - 1)];
  };

  for (int i = 0; i < P; ++i) {
    const auto& p = pos[static_cast<std::size_t>(i)];
    if (p.subaction == 0 && p.pred < 0)
      Q(q, i, 1) = (0.0 + w_enter[static_cast<std::size_t>(i)]) + scores(0, p.state);
  }

  for (int t = 1; t < T; ++t) {
    std::fill(nq.begin(), nq.end(), kNegInf);
    const std::size_t row = static_cast<std::size_t>(t) * static_cast<std::size_t>(P);
    for (int i = 0; i < P; ++i) {
      const auto& p = pos[static_cast<std::size_t>(i)];
      const double obs = scores(t, p.state);
      if (!with_length) {
        double best = q[static_cast<std::size_t>(i)] + w_self[static_cast<std::size_t>(i)];
        std::int32_t entered = 0;
        if (p.pred >= 0) {
          const double c = q[static_cast<std::size_t>(p.pred)] + w_enter[static_cast<std::size_t>(i)];
          if (clearly_better(c, best)) {
            best = c;
            entered = 1;
          }
        }
        nq[static_cast<std::size_t>(i)] = best + obs;
        enter_from[row + static_cast<std::size_t>(i)] = entered;
        continue;
      }
      // Run lengths 2 .. L-1: forced self-transition.
      for (int l = 2; l < L; ++l)
        Q(nq, i, l) = (Q(q, i, l - 1) + w_self[static_cast<std::size_t>(i * L + l - 1)]) + obs;
      {
        double best = Q(q, i, L) + w_hold(i);
        char h = 1;
        const double c = Q(q, i, L - 1) + w_self[static_cast<std::size_t>(i * L + L - 1)];
        if (clearly_better(c, best)) {
          best = c;
          h = 0;
        }
        Q(nq, i, L) = best + obs;
        held[row + static_cast<std::size_t>(i)] = h;
      }
      // Run length 1: entered from the predecessor position.
      if (p.pred >= 0) {
        double best = kNegInf;
        std::int32_t from = L;
        for (int l = L; l >= 1; --l) {
          const double c = Q(q, p.pred, l) + w_enter[static_cast<std::size_t>(i)];
          if (clearly_better(c, best)) {
            best = c;
            from = l;
          }
        }
        Q(nq, i, 1) = best + obs;
        enter_from[row + static_cast<std::size_t>(i)] = from;
      }
    }
    if (req.options.beam > 0.0) {
      const double top = *std::max_element(nq.begin(), nq.end());
      for (double& v : nq)
        if (v < top - req.options.beam) v = kNegInf;
    }
    std::swap(q, nq);
  }

  // Pick the end hypothesis.
  double best = kNegInf;
  int best_pos = -1, best_l = 1;
  for (int i : lattice.ends()) {
    for (int l = L; l >= 1; --l) {
      if (clearly_better(Q(q, i, l), best)) {
        best = Q(q, i, l);
        best_pos = i;
        best_l = l;
      }
    }
  }
  if (best_pos < 0 || !(best > kNegInf))
    throw InfeasibleError("video '" + req.video_id +
                          "' has no grammar-consistent path with finite score");

  // Backtrace.
  std::vector<int> path(static_cast<std::size_t>(T));
  std::vector<char> entered(static_cast<std::size_t>(T), 0);
  int cur = best_pos, l = best_l;
  for (int t = T - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = cur;
    if (t == 0) break;
    const std::size_t idx = static_cast<std::size_t>(t) * static_cast<std::size_t>(P) +
                            static_cast<std::size_t>(cur);
    if (!with_length) {
      if (enter_from[idx]) {
        entered[static_cast<std::size_t>(t)] = 1;
        cur = pos[static_cast<std::size_t>(cur)].pred;
      }
      continue;
    }
    if (l == 1) {
      entered[static_cast<std::size_t>(t)] = 1;
      l = enter_from[idx];
      cur = pos[static_cast<std::size_t>(cur)].pred;
    } else if (l == L && held[idx]) {
      // stays at the cap
    } else {
      --l;
    }
  }

  DecodeResult res;
  res.alignment = detail::alignment_from_positions(req.video_id, lattice, path, entered);
  res.segmentation = alignment_to_segmentation(res.alignment);
  res.log_score = best;
  const double rescored = path_log_score(scores, hmm, prior, res.alignment);
  res.consistent = std::abs(rescored - best) <= 1e-9 * std::max(1.0, std::abs(best));
  return res;
}

inline DecodeResult align_to_transcript(const ScoreMatrix& scores, const Transcript& transcript,
                                        const HmmModel& hmm, const DecodeOptions& options = {}) {
  const auto grammar = single_path_grammar(transcript);
  return viterbi({scores, grammar, hmm, options, DecodeMode::alignment, transcript.video_id});
}

// ----------------------------------------------------------------------------
// Exhaustive oracle.
// ----------------------------------------------------------------------------

namespace detail {

// Calls fn(lengths) for every composition of `total` into `parts` positive parts.
template <typename Fn>
void for_each_composition(int total, int parts, std::vector<int>& lengths, Fn&& fn) {
  if (parts == 1) {
    lengths.push_back(total);
    fn(lengths);
    lengths.pop_back();
    return;
  }
  for (int first = 1; first <= total - (parts - 1); ++first) {
    lengths.push_back(first);
    for_each_composition(total - first, parts - 1, lengths, fn);
    lengths.pop_back();
  }
}

}  // namespace detail

// Enumerates every grammar-consistent monotone alignment and keeps the best
// under path_log_score. Scores within kTieTolerance (relative) are ties, resolved by
// the same preference order as viterbi.
inline DecodeResult brute_force_decode(const DecodeRequest& req) {
  const auto& scores = req.scores;
  const auto& hmm = req.hmm;
  const int T = static_cast<int>(scores.rows());
  if (T > 14 || hmm.num_states() > 8)
    throw Error("instance too large for exhaustive decoding (T <= 14, states <= 8)");
  detail::check_scores(scores, hmm);
  const auto& space = hmm.space;

  struct Candidate {
    StateAlignment al;
    double score;
    std::vector<int> end_key;  // state id, grammar path rank
    std::vector<int> runs;     // run length per frame
  };
  std::vector<Candidate> best;
  double best_score = kNegInf;

  // Edge identity for the tie-break: the trie node reached by each prefix.
  const auto paths = req.grammar.enumerate();
  for (const auto& path : paths) {
    int node = TranscriptGrammar::root();
    for (ActionId a : path) node = req.grammar.node(node).children.at(a);
    const int edge = node - 1;

    std::vector<std::pair<ActionId, int>> chain;  // (action, subaction)
    std::vector<int> seg_of;
    for (std::size_t n = 0; n < path.size(); ++n)
      for (int k = 0; k < space.states_of(path[n]); ++k) {
        chain.emplace_back(path[n], k);
        seg_of.push_back(static_cast<int>(n));
      }
    const int M = static_cast<int>(chain.size());
    if (M > T) continue;
    std::vector<int> lengths;
    detail::for_each_composition(T, M, lengths, [&](const std::vector<int>& lens) {
      StateAlignment al;
      al.video_id = req.video_id;
      std::vector<int> runs;
      for (int j = 0; j < M; ++j)
        for (int r = 1; r <= lens[static_cast<std::size_t>(j)]; ++r) {
          al.frames.push_back({chain[static_cast<std::size_t>(j)].first,
                               chain[static_cast<std::size_t>(j)].second,
                               seg_of[static_cast<std::size_t>(j)]});
          runs.push_back(r);
        }
      const double sc = path_log_score(scores, hmm, req.options.prior, al);
      if (!(sc > kNegInf)) return;
      const auto& last = al.frames.back();
      Candidate c{std::move(al), sc, {space.global(last.action, last.subaction), edge},
                  std::move(runs)};
      const double tol = best.empty() ? 0.0 : kTieTolerance * std::max(1.0, std::abs(best_score));
      if (best.empty() || sc > best_score + tol) {
        best.clear();
        best_score = sc;
        best.push_back(std::move(c));
      } else if (sc >= best_score - tol) {
        best.push_back(std::move(c));
      }
    });
  }
  if (best.empty())
    throw InfeasibleError("video '" + req.video_id +
                          "' has no grammar-consistent path with finite score");

  // Preference: lower end state, then lower edge, then (walking backwards)
  // the longer current run.
  auto preferred = [](const Candidate& a, const Candidate& b) {
    if (a.end_key != b.end_key) return a.end_key < b.end_key;
    for (std::size_t t = a.runs.size(); t-- > 0;)
      if (a.runs[t] != b.runs[t]) return a.runs[t] > b.runs[t];
    return false;
  };
  const auto it = std::min_element(best.begin(), best.end(), preferred);
  DecodeResult res;
  res.alignment = it->al;
  res.segmentation = alignment_to_segmentation(res.alignment);
  res.log_score = it->score;
  res.consistent = true;
  return res;
}

}  // namespace segalign
