#pragma once

// Feed-forward subaction chains. Each state either loops or advances; the
// advance of a chain-final state is the exit into the next action, whose
// action-level probability is 1 whenever the grammar admits it.

#include <cmath>
#include <limits>
#include <vector>

#include "segalign/core.hpp"

namespace segalign {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct HmmModel {
  StateSpace space;
  std::vector<double> log_self;     // per global state
  std::vector<double> log_advance;  // per global state; exit for final states
  std::vector<double> mean_length;  // per global state, in frames

  int num_states() const { return space.num_states(); }
  double max_mean_length() const {
    double m = 1.0;
    for (double v : mean_length) m = std::max(m, v);
    return m;
  }
};

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

namespace detail {

inline void for_each_alignment_check(const std::vector<StateAlignment>& alignments,
                                     const StateSpace& space) {
  if (alignments.empty()) throw Error("no alignments given");
  for (const auto& al : alignments) {
    require_monotone(al);
    for (const auto& f : al.frames) {
      if (f.action < 0 || f.action >= space.num_actions() || f.subaction < 0 ||
          f.subaction >= space.states_of(f.action))
        throw Error("alignment for '" + al.video_id + "' references a state outside the model");
    }
  }
}

}  // namespace detail

struct TransitionCounts {
  std::vector<long long> self;
  std::vector<long long> leave;
};

inline TransitionCounts count_transitions(const std::vector<StateAlignment>& alignments,
                                          const StateSpace& space) {
  TransitionCounts c{std::vector<long long>(static_cast<std::size_t>(space.num_states()), 0),
                     std::vector<long long>(static_cast<std::size_t>(space.num_states()), 0)};
  for (const auto& al : alignments) {
    for (std::size_t t = 1; t < al.frames.size(); ++t) {
      const auto& p = al.frames[t - 1];
      const auto& q = al.frames[t];
      const auto s = static_cast<std::size_t>(space.global(p.action, p.subaction));
      if (p.segment == q.segment && p.subaction == q.subaction)
        ++c.self[s];
      else
        ++c.leave[s];
    }
  }
  return c;
}

// Relative transition frequencies pooled over all videos. States never seen
// as a transition source get 0.5 / 0.5.
inline HmmModel estimate_transitions(const std::vector<StateAlignment>& alignments,
                                     const StateSpace& space, double default_length = 10.0);

// Total frames aligned to each state divided by its number of runs; states
// without any run get `default_length`.
inline std::vector<double> mean_state_lengths(const std::vector<StateAlignment>& alignments,
                                              const StateSpace& space, double default_length) {
  const auto n = static_cast<std::size_t>(space.num_states());
  std::vector<long long> frames(n, 0), runs(n, 0);
  for (const auto& al : alignments) {
    for (std::size_t t = 0; t < al.frames.size(); ++t) {
      const auto& f = al.frames[t];
      const auto s = static_cast<std::size_t>(space.global(f.action, f.subaction));
      ++frames[s];
      if (t == 0 || al.frames[t - 1].segment != f.segment ||
          al.frames[t - 1].subaction != f.subaction)
        ++runs[s];
    }
  }
  std::vector<double> out(n, default_length);
  for (std::size_t s = 0; s < n; ++s)
    if (runs[s] > 0) out[s] = static_cast<double>(frames[s]) / static_cast<double>(runs[s]);
  return out;
}

inline HmmModel estimate_transitions(const std::vector<StateAlignment>& alignments,
                                     const StateSpace& space, double default_length) {
  detail::for_each_alignment_check(alignments, space);
  const auto counts = count_transitions(alignments, space);
  HmmModel hmm;
  hmm.space = space;
  const auto n = static_cast<std::size_t>(space.num_states());
  hmm.log_self.resize(n);
  hmm.log_advance.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const long long total = counts.self[s] + counts.leave[s];
    if (total == 0) {
      hmm.log_self[s] = std::log(0.5);
      hmm.log_advance[s] = std::log(0.5);
      continue;
    }
    const double p_self = static_cast<double>(counts.self[s]) / static_cast<double>(total);
    hmm.log_self[s] = safe_log(p_self);
    hmm.log_advance[s] = safe_log(1.0 - p_self);
  }
  hmm.mean_length = mean_state_lengths(alignments, space, default_length);
  return hmm;
}

// Fraction of state runs that last exactly one frame.
inline double skip_state_fraction(const std::vector<StateAlignment>& alignments) {
  long long runs = 0, singles = 0;
  for (const auto& al : alignments) {
    std::size_t t = 0;
    while (t < al.frames.size()) {
      std::size_t u = t + 1;
      while (u < al.frames.size() && al.frames[u].segment == al.frames[t].segment &&
             al.frames[u].subaction == al.frames[t].subaction)
        ++u;
      ++runs;
      if (u - t == 1) ++singles;
      t = u;
    }
  }
  return runs == 0 ? 0.0 : static_cast<double>(singles) / static_cast<double>(runs);
}

}  // namespace segalign
