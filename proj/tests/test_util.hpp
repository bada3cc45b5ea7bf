#pragma once

// Random instances shared by the unit and acceptance tests.

#include <random>
#include <set>
#include <vector>

#include "segalign/segalign.hpp"

namespace segalign::testutil {

inline HmmModel random_hmm(std::mt19937_64& rng, const StateSpace& space) {
  std::uniform_real_distribution<double> p(0.05, 0.95), len(1.0, 5.0);
  HmmModel h;
  h.space = space;
  for (int s = 0; s < space.num_states(); ++s) {
    const double ps = p(rng);
    h.log_self.push_back(std::log(ps));
    h.log_advance.push_back(std::log(1.0 - ps));
    h.mean_length.push_back(len(rng));
  }
  return h;
}

inline ScoreMatrix random_scores(std::mt19937_64& rng, int T, int S) {
  std::uniform_real_distribution<double> u(-6.0, 0.0);
  ScoreMatrix m(T, S);
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s) m(t, s) = u(rng);
  return m;
}

struct DecodeInstance {
  StateSpace space;
  HmmModel hmm;
  TranscriptGrammar grammar;
  ScoreMatrix scores;
};

// Up to `max_states` states, up to `max_paths` grammar paths of 1..3
// actions, T frames with T >= the shortest path.
inline DecodeInstance random_decode_instance(std::mt19937_64& rng, int max_T, int max_states,
                                             int max_paths) {
  std::uniform_int_distribution<int> n_actions(1, 3);
  const int A = n_actions(rng);
  std::vector<int> counts;
  int budget = max_states;
  for (int a = 0; a < A; ++a) {
    const int remaining_actions = A - a - 1;
    std::uniform_int_distribution<int> k(1, std::max(1, std::min(3, budget - remaining_actions)));
    counts.push_back(k(rng));
    budget -= counts.back();
  }
  DecodeInstance inst{StateSpace(counts), {}, {}, {}};
  inst.hmm = random_hmm(rng, inst.space);
  std::uniform_int_distribution<int> n_paths(1, max_paths), plen(1, 3), act(0, A - 1);
  const int P = n_paths(rng);
  for (int i = 0; i < P; ++i) {
    std::vector<ActionId> path;
    const int n = plen(rng);
    for (int j = 0; j < n; ++j) path.push_back(act(rng));
    inst.grammar.add(path);
  }
  int min_frames = DecodeLattice::shortest_path_states(inst.grammar, inst.space);
  std::uniform_int_distribution<int> tdist(std::min(min_frames, max_T), max_T);
  const int T = std::max(min_frames, tdist(rng));
  inst.scores = random_scores(rng, T, inst.space.num_states());
  return inst;
}

// Random tiling segmentation of T frames into N segments over A classes.
inline Segmentation random_segmentation(std::mt19937_64& rng, const std::string& id, int T, int N, int A) {
  std::vector<int> cuts;
  for (int t = 1; t < T; ++t) cuts.push_back(t);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(static_cast<std::size_t>(N - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(T);
  std::uniform_int_distribution<int> act(0, A - 1);
  Segmentation s{id, {}};
  for (int n = 0; n < N; ++n)
    s.segments.push_back({act(rng), cuts[static_cast<std::size_t>(n)], cuts[static_cast<std::size_t>(n + 1)] - 1});
  return s;
}

}  // namespace segalign::testutil
