#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace segalign {

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when no path of the requested grammar fits into the available frames.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

using ActionId = int;

// ----------------------------------------------------------------------------
// LabelVocabulary: dense, stable ids for action names.
// ----------------------------------------------------------------------------

class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> names) {
    for (auto& n : names) add(n);
  }

  // Returns the existing id if the name is known.
  ActionId add(std::string_view name) {
    if (name.empty()) throw Error("empty action label");
    auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const ActionId id = static_cast<ActionId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
  }

  ActionId id(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error("unknown action label '" + std::string(name) + "'");
    return it->second;
  }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  const std::string& name(ActionId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
      throw Error("action id out of range: " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelVocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ActionId> index_;
};

// ----------------------------------------------------------------------------
// Transcript
// ----------------------------------------------------------------------------

struct Transcript {
  std::string video_id;
  std::vector<ActionId> actions;

  bool operator==(const Transcript&) const = default;
};

inline void validate(const Transcript& t) {
  if (t.actions.empty()) throw Error("empty transcript for video '" + t.video_id + "'");
}

// ----------------------------------------------------------------------------
// StateSpace: per-action subaction chains flattened into dense global ids.
//
// State k (0-based) of action a has global id offset(a) + k.
// ----------------------------------------------------------------------------

class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<int> states_per_action) : counts_(std::move(states_per_action)) {
    offsets_.reserve(counts_.size());
    int total = 0;
    for (std::size_t a = 0; a < counts_.size(); ++a) {
      if (counts_[a] < 1)
        throw Error("action " + std::to_string(a) + " needs at least one subaction state");
      offsets_.push_back(total);
      total += counts_[a];
    }
    action_of_.resize(static_cast<std::size_t>(total));
    for (std::size_t a = 0; a < counts_.size(); ++a)
      for (int k = 0; k < counts_[a]; ++k)
        action_of_[static_cast<std::size_t>(offsets_[a] + k)] = static_cast<ActionId>(a);
  }

  int num_actions() const { return static_cast<int>(counts_.size()); }
  int num_states() const { return static_cast<int>(action_of_.size()); }
  int states_of(ActionId a) const { return counts_.at(static_cast<std::size_t>(a)); }
  int global(ActionId a, int k) const {
    if (k < 0 || k >= states_of(a)) throw Error("subaction index out of range");
    return offsets_[static_cast<std::size_t>(a)] + k;
  }
  int first(ActionId a) const { return global(a, 0); }
  int last(ActionId a) const { return global(a, states_of(a) - 1); }
  ActionId action_of(int state) const { return action_of_.at(static_cast<std::size_t>(state)); }
  int index_in_action(int state) const {
    return state - offsets_[static_cast<std::size_t>(action_of(state))];
  }
  bool is_final(int state) const { return state == last(action_of(state)); }

  const std::vector<int>& states_per_action() const { return counts_; }

  bool operator==(const StateSpace& o) const { return counts_ == o.counts_; }

 private:
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<ActionId> action_of_;
};

// Splits `total` items into `parts` consecutive groups whose sizes differ by at
// most one; the remainder goes to the earliest groups.
inline std::vector<int> split_evenly(int total, int parts) {
  if (parts < 1 || total < 0) throw Error("invalid split");
  std::vector<int> sizes(static_cast<std::size_t>(parts), total / parts);
  for (int i = 0; i < total % parts; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

// ----------------------------------------------------------------------------
// StateAlignment
//
// One entry per frame. `segment` is the index of the action instance the frame
// belongs to, so back-to-back repeats of one action stay distinguishable.
// ----------------------------------------------------------------------------

struct FrameState {
  ActionId action = 0;
  int subaction = 0;  // 0-based index within the action's chain
  int segment = 0;

  bool operator==(const FrameState&) const = default;
};

struct StateAlignment {
  std::string video_id;
  std::vector<FrameState> frames;

  std::size_t size() const { return frames.size(); }
  bool operator==(const StateAlignment&) const = default;
};

// Returns an empty string when valid, otherwise a description of the first
// violation found.
inline std::string check_monotone(const StateAlignment& al) {
  if (al.frames.empty()) return "alignment has no frames";
  const auto& f0 = al.frames.front();
  if (f0.segment != 0) return "first frame must belong to segment 0";
  if (f0.subaction != 0) return "first frame must be the first subaction of its action";
  for (std::size_t t = 1; t < al.frames.size(); ++t) {
    const auto& p = al.frames[t - 1];
    const auto& c = al.frames[t];
    if (c.segment == p.segment) {
      if (c.action != p.action)
        return "action changes inside segment at frame " + std::to_string(t);
      if (c.subaction != p.subaction && c.subaction != p.subaction + 1)
        return "subaction jumps from " + std::to_string(p.subaction) + " to " +
               std::to_string(c.subaction) + " at frame " + std::to_string(t);
    } else if (c.segment == p.segment + 1) {
      if (c.subaction != 0)
        return "segment starting at frame " + std::to_string(t) + " does not start at subaction 0";
    } else {
      return "segment index jumps at frame " + std::to_string(t);
    }
  }
  return {};
}

inline void require_monotone(const StateAlignment& al) {
  if (auto why = check_monotone(al); !why.empty())
    throw Error("non-monotone alignment for video '" + al.video_id + "': " + why);
}

// Builds an alignment from per-frame global state ids, inferring instance
// boundaries: a new instance starts whenever the frame is not the same state
// or the next state of the same action.
inline StateAlignment alignment_from_states(std::string video_id, const std::vector<int>& states,
                                            const StateSpace& space) {
  StateAlignment al;
  al.video_id = std::move(video_id);
  al.frames.reserve(states.size());
  int segment = 0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int s = states[t];
    FrameState f{space.action_of(s), space.index_in_action(s), segment};
    if (t > 0) {
      const int prev = states[t - 1];
      const bool same_instance = s == prev || (space.action_of(s) == space.action_of(prev) &&
                                               s == prev + 1);
      if (!same_instance) f.segment = ++segment;
    }
    al.frames.push_back(f);
  }
  require_monotone(al);
  return al;
}

inline std::vector<int> global_states(const StateAlignment& al, const StateSpace& space) {
  std::vector<int> out;
  out.reserve(al.frames.size());
  for (const auto& f : al.frames) out.push_back(space.global(f.action, f.subaction));
  return out;
}

inline std::vector<ActionId> frame_actions(const StateAlignment& al) {
  std::vector<ActionId> out;
  out.reserve(al.frames.size());
  for (const auto& f : al.frames) out.push_back(f.action);
  return out;
}

// Run-length collapse of the alignment into its action sequence.
inline Transcript extract_actions(const StateAlignment& al) {
  require_monotone(al);
  Transcript t{al.video_id, {}};
  int current = -1;
  for (const auto& f : al.frames) {
    if (f.segment != current) {
      t.actions.push_back(f.action);
      current = f.segment;
    }
  }
  return t;
}

// ----------------------------------------------------------------------------
// Segmentation
// ----------------------------------------------------------------------------

struct Segment {
  ActionId action = 0;
  int start = 0;  // inclusive
  int end = 0;    // inclusive

  int length() const { return end - start + 1; }
  bool operator==(const Segment&) const = default;
};

struct Segmentation {
  std::string video_id;
  std::vector<Segment> segments;

  int num_frames() const { return segments.empty() ? 0 : segments.back().end + 1; }
  bool operator==(const Segmentation&) const = default;
};

inline void require_tiling(const Segmentation& seg) {
  if (seg.segments.empty()) throw Error("segmentation of '" + seg.video_id + "' is empty");
  int expect = 0;
  for (const auto& s : seg.segments) {
    if (s.start != expect || s.end < s.start)
      throw Error("segmentation of '" + seg.video_id + "' does not tile the video at frame " +
                  std::to_string(expect));
    expect = s.end + 1;
  }
}

inline Segmentation alignment_to_segmentation(const StateAlignment& al) {
  require_monotone(al);
  Segmentation seg{al.video_id, {}};
  for (std::size_t t = 0; t < al.frames.size(); ++t) {
    const auto& f = al.frames[t];
    if (t == 0 || f.segment != al.frames[t - 1].segment)
      seg.segments.push_back({f.action, static_cast<int>(t), static_cast<int>(t)});
    else
      seg.segments.back().end = static_cast<int>(t);
  }
  return seg;
}

inline std::vector<ActionId> segmentation_frames(const Segmentation& seg) {
  std::vector<ActionId> out;
  out.reserve(static_cast<std::size_t>(seg.num_frames()));
  for (const auto& s : seg.segments)
    for (int t = s.start; t <= s.end; ++t) out.push_back(s.action);
  return out;
}

inline Transcript segmentation_transcript(const Segmentation& seg) {
  Transcript t{seg.video_id, {}};
  for (const auto& s : seg.segments) t.actions.push_back(s.action);
  return t;
}

// Frames of one segment spread over `states` subactions with split_evenly.
// Segments shorter than their chain visit only its first `length` states.
inline void fill_segment_uniform(std::vector<FrameState>& frames, const Segment& s, int states,
                                 int segment_index) {
  const auto sizes = split_evenly(s.length(), states);
  int t = s.start;
  for (int k = 0; k < states; ++k)
    for (int r = 0; r < sizes[static_cast<std::size_t>(k)]; ++r)
      frames[static_cast<std::size_t>(t++)] = {s.action, k, segment_index};
}

// Alignment that spreads each segment's frames evenly over its action's chain.
inline StateAlignment uniform_alignment(const Segmentation& seg, const StateSpace& space) {
  require_tiling(seg);
  StateAlignment al;
  al.video_id = seg.video_id;
  al.frames.resize(static_cast<std::size_t>(seg.num_frames()));
  for (std::size_t n = 0; n < seg.segments.size(); ++n) {
    const auto& s = seg.segments[n];
    fill_segment_uniform(al.frames, s, space.states_of(s.action), static_cast<int>(n));
  }
  return al;
}

// ----------------------------------------------------------------------------
// SparseLabel
// ----------------------------------------------------------------------------

struct SparseLabel {
  int frame = 0;
  ActionId action = 0;

  bool operator==(const SparseLabel&) const = default;
};

inline void require_sorted(const std::vector<SparseLabel>& labels) {
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i].frame <= labels[i - 1].frame)
      throw Error("sparse label frames must be strictly increasing");
}

// ----------------------------------------------------------------------------
// TranscriptGrammar: an unweighted, prefix-merged trie over action labels.
// ----------------------------------------------------------------------------

class TranscriptGrammar {
 public:
  struct Node {
    std::map<ActionId, int> children;  // label -> child node
    int parent = -1;
    int parent_edge_label = -1;
    bool accepting = false;
  };

  TranscriptGrammar() { nodes_.emplace_back(); }

  static constexpr int root() { return 0; }

  // Inserting an already known transcript is a no-op.
  void add(const std::vector<ActionId>& path) {
    if (path.empty()) throw Error("grammar paths must be non-empty");
    int node = root();
    for (ActionId a : path) {
      auto it = nodes_[static_cast<std::size_t>(node)].children.find(a);
      if (it == nodes_[static_cast<std::size_t>(node)].children.end()) {
        const int child = static_cast<int>(nodes_.size());
        Node n;
        n.parent = node;
        n.parent_edge_label = a;
        nodes_.push_back(std::move(n));
        nodes_[static_cast<std::size_t>(node)].children.emplace(a, child);
        node = child;
      } else {
        node = it->second;
      }
    }
    if (!nodes_[static_cast<std::size_t>(node)].accepting) {
      nodes_[static_cast<std::size_t>(node)].accepting = true;
      paths_.push_back(path);
    }
  }

  bool accepts(const std::vector<ActionId>& path) const {
    int node = root();
    for (ActionId a : path) {
      const auto& ch = nodes_[static_cast<std::size_t>(node)].children;
      auto it = ch.find(a);
      if (it == ch.end()) return false;
      node = it->second;
    }
    return !path.empty() && nodes_[static_cast<std::size_t>(node)].accepting;
  }

  // Walks the trie; independent of the stored path list.
  std::vector<std::vector<ActionId>> enumerate() const {
    std::vector<std::vector<ActionId>> out;
    std::vector<ActionId> prefix;
    enumerate_from(root(), prefix, out);
    return out;
  }

  // Distinct paths in insertion order.
  const std::vector<std::vector<ActionId>>& paths() const { return paths_; }
  std::size_t language_size() const { return paths_.size(); }
  bool single_path() const { return paths_.size() == 1; }

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

 private:
  void enumerate_from(int node, std::vector<ActionId>& prefix,
                      std::vector<std::vector<ActionId>>& out) const {
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    if (n.accepting) out.push_back(prefix);
    for (const auto& [label, child] : n.children) {
      prefix.push_back(label);
      enumerate_from(child, prefix, out);
      prefix.pop_back();
    }
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<ActionId>> paths_;
};

inline TranscriptGrammar build_grammar(const std::vector<Transcript>& transcripts) {
  if (transcripts.empty()) throw Error("cannot build a grammar from zero transcripts");
  TranscriptGrammar g;
  for (const auto& t : transcripts) {
    validate(t);
    g.add(t.actions);
  }
  return g;
}

inline TranscriptGrammar single_path_grammar(const Transcript& t) {
  validate(t);
  TranscriptGrammar g;
  g.add(t.actions);
  return g;
}

}  // namespace segalign
