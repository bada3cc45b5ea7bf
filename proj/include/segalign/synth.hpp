#pragma once

// Synthetic corpora drawn from a known subaction HMM: geometric state
// durations and diagonal Gaussian emissions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "segalign/core.hpp"
#include "segalign/features.hpp"

namespace segalign {

struct SyntheticSpec {
  std::vector<std::string> actions;            // label names
  std::vector<int> states_per_action;          // K_a
  int dim = 8;
  std::vector<std::vector<double>> means;      // S x D; empty: drawn from N(0, mean_spread^2)
  std::vector<std::vector<double>> variances;  // S x D; empty: all ones
  std::vector<double> durations;               // mean frames per state (S entries or one shared)
  std::vector<std::vector<std::string>> templates;
  std::vector<int> videos_per_template;
  double noise_scale = 1.0;
  double mean_spread = 1.0;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  LabelVocabulary vocabulary;
  StateSpace space;
  std::vector<FeatureSequence> features;
  std::vector<Transcript> transcripts;
  std::vector<Segmentation> segmentations;
  std::vector<StateAlignment> alignments;
};

// Every action must occur after at least two distinct predecessors and
// before at least two distinct successors, counting the video start and end
// as contexts. Returns a description of the violations (empty if none).
inline std::string learnability_violations(const std::vector<std::vector<ActionId>>& templates,
                                           int num_actions) {
  constexpr int kStart = -1, kEnd = -2;
  std::vector<std::set<int>> pred(static_cast<std::size_t>(num_actions)),
      succ(static_cast<std::size_t>(num_actions));
  for (const auto& t : templates)
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto a = static_cast<std::size_t>(t[i]);
      pred[a].insert(i == 0 ? kStart : t[i - 1]);
      succ[a].insert(i + 1 == t.size() ? kEnd : t[i + 1]);
    }
  std::string out;
  for (int a = 0; a < num_actions; ++a) {
    const auto np = pred[static_cast<std::size_t>(a)].size();
    const auto ns = succ[static_cast<std::size_t>(a)].size();
    if (np < 2 || ns < 2)
      out += " action " + std::to_string(a) + " (" + std::to_string(np) + " predecessors, " +
             std::to_string(ns) + " successors);";
  }
  return out;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  if (j.contains("actions") && j["actions"].is_array()) {
    s.actions = j["actions"].get<std::vector<std::string>>();
  } else {
    const int n = j.at("num_actions").get<int>();
    for (int a = 0; a < n; ++a) s.actions.push_back("a" + std::to_string(a));
  }
  const auto& k = j.at("states_per_action");
  if (k.is_number_integer())
    s.states_per_action.assign(s.actions.size(), k.get<int>());
  else
    s.states_per_action = k.get<std::vector<int>>();
  s.dim = j.value("dim", s.dim);
  if (j.contains("means")) s.means = j["means"].get<std::vector<std::vector<double>>>();
  if (j.contains("variances")) s.variances = j["variances"].get<std::vector<std::vector<double>>>();
  const auto& d = j.at("durations");
  if (d.is_number())
    s.durations = {d.get<double>()};
  else
    s.durations = d.get<std::vector<double>>();
  s.templates = j.at("templates").get<std::vector<std::vector<std::string>>>();
  const auto& v = j.at("videos_per_template");
  if (v.is_number_integer())
    s.videos_per_template.assign(s.templates.size(), v.get<int>());
  else
    s.videos_per_template = v.get<std::vector<int>>();
  s.noise_scale = j.value("noise_scale", s.noise_scale);
  s.mean_spread = j.value("mean_spread", s.mean_spread);
  s.seed = j.value("seed", s.seed);
  return s;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  nlohmann::json j{{"actions", s.actions},
                   {"states_per_action", s.states_per_action},
                   {"dim", s.dim},
                   {"durations", s.durations},
                   {"templates", s.templates},
                   {"videos_per_template", s.videos_per_template},
                   {"noise_scale", s.noise_scale},
                   {"mean_spread", s.mean_spread},
                   {"seed", s.seed}};
  if (!s.means.empty()) j["means"] = s.means;
  if (!s.variances.empty()) j["variances"] = s.variances;
  return j;
}

inline void validate(const SyntheticSpec& s) {
  const auto A = s.actions.size();
  if (A == 0) throw Error("synthetic spec has no actions");
  if (s.states_per_action.size() != A) throw Error("states_per_action must have one entry per action");
  for (int k : s.states_per_action)
    if (k < 1) throw Error("every action needs at least one state");
  if (s.dim < 1) throw Error("feature dimension must be at least 1");
  int S = 0;
  for (int k : s.states_per_action) S += k;
  auto check_matrix = [&](const std::vector<std::vector<double>>& m, const char* what) {
    if (m.empty()) return;
    if (static_cast<int>(m.size()) != S) throw Error(std::string(what) + " must have one row per state");
    for (const auto& r : m)
      if (static_cast<int>(r.size()) != s.dim) throw Error(std::string(what) + " rows must have dim entries");
  };
  check_matrix(s.means, "means");
  check_matrix(s.variances, "variances");
  for (const auto& r : s.variances)
    for (double v : r)
      if (!(v > 0.0)) throw Error("variances must be positive");
  if (s.durations.size() != 1 && static_cast<int>(s.durations.size()) != S)
    throw Error("durations must be one value or one per state");
  for (double d : s.durations)
    if (!(d >= 1.0)) throw Error("mean state durations must be at least 1 frame");
  if (s.templates.empty()) throw Error("synthetic spec has no transcript templates");
  if (s.videos_per_template.size() != s.templates.size())
    throw Error("videos_per_template must have one entry per template");
  for (int v : s.videos_per_template)
    if (v < 0) throw Error("videos_per_template must be non-negative");
  if (!(s.noise_scale >= 0.0)) throw Error("noise_scale must be non-negative");
  LabelVocabulary vocab(s.actions);
  std::vector<std::vector<ActionId>> ids;
  for (const auto& t : s.templates) {
    if (t.empty()) throw Error("empty transcript template");
    std::vector<ActionId> row;
    for (const auto& name : t) row.push_back(vocab.id(name));
    ids.push_back(std::move(row));
  }
  const auto bad = learnability_violations(ids, static_cast<int>(A));
  if (!bad.empty()) throw Error("templates violate the learnability precondition:" + bad);
}

inline SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
  validate(spec);
  SyntheticCorpus c{LabelVocabulary(spec.actions), StateSpace(spec.states_per_action), {}, {}, {}, {}};
  const int S = c.space.num_states();
  const int D = spec.dim;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd mu(S, D), sd(S, D);
  for (int s = 0; s < S; ++s)
    for (int d = 0; d < D; ++d) {
      mu(s, d) = spec.means.empty() ? spec.mean_spread * normal(rng)
                                    : spec.means[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)];
      sd(s, d) = spec.variances.empty()
                     ? 1.0
                     : std::sqrt(spec.variances[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)]);
    }
  auto duration = [&](int s) {
    const double mean = spec.durations.size() == 1 ? spec.durations[0]
                                                   : spec.durations[static_cast<std::size_t>(s)];
    if (mean <= 1.0) return 1;
    std::geometric_distribution<int> g(1.0 / mean);
    return 1 + g(rng);
  };

  int video = 0;
  for (std::size_t k = 0; k < spec.templates.size(); ++k)
    for (int r = 0; r < spec.videos_per_template[k]; ++r, ++video) {
      char id[32];
      std::snprintf(id, sizeof id, "vid%03d", video);
      Transcript tr{id, {}};
      StateAlignment al{id, {}};
      for (std::size_t n = 0; n < spec.templates[k].size(); ++n) {
        const ActionId a = c.vocabulary.id(spec.templates[k][n]);
        tr.actions.push_back(a);
        for (int j = 0; j < c.space.states_of(a); ++j) {
          const int len = duration(c.space.global(a, j));
          for (int i = 0; i < len; ++i) al.frames.push_back({a, j, static_cast<int>(n)});
        }
      }
      FeatureSequence x{id, FeatureMatrix(static_cast<Eigen::Index>(al.frames.size()), D)};
      for (std::size_t t = 0; t < al.frames.size(); ++t) {
        const int s = c.space.global(al.frames[t].action, al.frames[t].subaction);
        for (int d = 0; d < D; ++d)
          x.values(static_cast<Eigen::Index>(t), d) =
              static_cast<float>(mu(s, d) + spec.noise_scale * sd(s, d) * normal(rng));
      }
      c.segmentations.push_back(alignment_to_segmentation(al));
      c.transcripts.push_back(std::move(tr));
      c.alignments.push_back(std::move(al));
      c.features.push_back(std::move(x));
    }
  return c;
}

// round(fraction * T) distinct frames per video, uniformly at random, labeled
// from the ground truth.
inline std::vector<std::vector<SparseLabel>> sample_sparse_labels(
    const std::vector<Segmentation>& ground_truth, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("label fraction must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<SparseLabel>> out;
  for (const auto& g : ground_truth) {
    const auto frames = segmentation_frames(g);
    const int T = static_cast<int>(frames.size());
    const int n = static_cast<int>(std::lround(fraction * T));
    std::vector<int> idx(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) idx[static_cast<std::size_t>(t)] = t;
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, T - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(n));
    std::sort(idx.begin(), idx.end());
    std::vector<SparseLabel> labels;
    for (int t : idx) labels.push_back({t, frames[static_cast<std::size_t>(t)]});
    out.push_back(std::move(labels));
  }
  return out;
}

}  // namespace segalign
