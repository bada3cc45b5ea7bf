#pragma once

// Fitting observation scorers and the on-disk model checkpoint.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "segalign/core.hpp"
#include "segalign/decoder.hpp"
#include "segalign/hmm.hpp"
#include "segalign/io.hpp"
#include "segalign/length_prior.hpp"
#include "segalign/neural.hpp"
#include "segalign/observation.hpp"

namespace segalign {

struct ScorerConfig {
  ScorerKind kind = ScorerKind::gaussian;
  NeuralConfig neural{};
  double variance_floor = GaussianScorer::kDefaultVarianceFloor;
};

struct FitResult {
  std::shared_ptr<const Scorer> scorer;
  std::vector<double> loss_history;  // neural scorers only
};

inline FitResult fit_scorer(const ScorerConfig& cfg, const std::vector<LabeledSequence>& data,
                            int num_states, std::uint64_t seed) {
  if (data.empty()) throw Error("no training sequences");
  const int dim = data.front().features->dim();
  FitResult out;
  switch (cfg.kind) {
    case ScorerKind::gaussian:
      out.scorer = std::make_shared<GaussianScorer>(GaussianScorer::fit(data, num_states, cfg.variance_floor));
      return out;
    case ScorerKind::feedforward: {
      auto s = std::make_shared<FeedForwardScorer>(dim, cfg.neural.hidden, num_states);
      s->initialize(seed);
      s->set_prior(fit_state_prior(data, num_states));
      NeuralConfig nc = cfg.neural;
      nc.seed = seed;
      out.loss_history = s->train(data, nc);
      out.scorer = std::move(s);
      return out;
    }
    case ScorerKind::recurrent: {
      auto s = std::make_shared<RecurrentScorer>(dim, cfg.neural.hidden, num_states, cfg.neural.chunk_length);
      s->initialize(seed);
      s->set_prior(fit_state_prior(data, num_states));
      NeuralConfig nc = cfg.neural;
      nc.seed = seed;
      out.loss_history = s->train(data, nc);
      out.scorer = std::move(s);
      return out;
    }
  }
  throw Error("unknown scorer kind");
}

inline std::shared_ptr<const Scorer> scorer_from_json(const nlohmann::json& j) {
  const auto kind = parse_scorer_kind(j.at("kind").get<std::string>());
  switch (kind) {
    case ScorerKind::gaussian: return std::make_shared<GaussianScorer>(GaussianScorer::from_json(j));
    case ScorerKind::feedforward: return std::make_shared<FeedForwardScorer>(FeedForwardScorer::from_json(j));
    case ScorerKind::recurrent: return std::make_shared<RecurrentScorer>(RecurrentScorer::from_json(j));
  }
  throw Error("unknown scorer kind");
}

// ----------------------------------------------------------------------------
// Model
// ----------------------------------------------------------------------------

struct Model {
  LabelVocabulary vocabulary;
  HmmModel hmm;
  TranscriptGrammar grammar;
  std::shared_ptr<const Scorer> scorer;
  PriorKind prior = PriorKind::none;
  int frames_per_subaction = 10;
  int max_run_length = 0;

  DecodeOptions decode_options() const { return {prior, max_run_length, 0.0}; }
};

inline constexpr int kModelFormatVersion = 1;

namespace detail {

// Log probabilities may be -inf, which JSON cannot hold; those become null.
inline nlohmann::json log_probs_to_json(const std::vector<double>& v) {
  auto j = nlohmann::json::array();
  for (double x : v) j.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return j;
}

inline std::vector<double> log_probs_from_json(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.is_null() ? kNegInf : x.get<double>());
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const Model& m) {
  if (!m.scorer) throw Error("model has no scorer");
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : m.grammar.paths()) {
    std::vector<std::string> names;
    for (ActionId a : p) names.push_back(m.vocabulary.name(a));
    paths.push_back(names);
  }
  return {{"format", "segalign-model"},
          {"version", kModelFormatVersion},
          {"labels", m.vocabulary.names()},
          {"states_per_action", m.hmm.space.states_per_action()},
          {"log_self", detail::log_probs_to_json(m.hmm.log_self)},
          {"log_advance", detail::log_probs_to_json(m.hmm.log_advance)},
          {"mean_length", m.hmm.mean_length},
          {"grammar", paths},
          {"prior", std::string(to_string(m.prior))},
          {"frames_per_subaction", m.frames_per_subaction},
          {"max_run_length", m.max_run_length},
          {"scorer", m.scorer->to_json()}};
}

inline Model model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "segalign-model")
    throw Error("not a segalign model checkpoint");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw Error("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
  Model m;
  m.vocabulary = LabelVocabulary(j.at("labels").get<std::vector<std::string>>());
  m.hmm.space = StateSpace(j.at("states_per_action").get<std::vector<int>>());
  m.hmm.log_self = detail::log_probs_from_json(j.at("log_self"));
  m.hmm.log_advance = detail::log_probs_from_json(j.at("log_advance"));
  m.hmm.mean_length = j.at("mean_length").get<std::vector<double>>();
  const auto S = static_cast<std::size_t>(m.hmm.space.num_states());
  if (m.hmm.log_self.size() != S || m.hmm.log_advance.size() != S || m.hmm.mean_length.size() != S)
    throw Error("checkpoint transition tables do not match the state space");
  for (const auto& p : j.at("grammar")) {
    std::vector<ActionId> ids;
    for (const auto& name : p) ids.push_back(m.vocabulary.id(name.get<std::string>()));
    m.grammar.add(ids);
  }
  m.prior = parse_prior_kind(j.at("prior").get<std::string>());
  m.frames_per_subaction = j.at("frames_per_subaction").get<int>();
  m.max_run_length = j.at("max_run_length").get<int>();
  m.scorer = scorer_from_json(j.at("scorer"));
  if (m.scorer->num_states() != m.hmm.space.num_states())
    throw Error("checkpoint scorer does not match the state space");
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& m) {
  write_text_atomically(path, to_json(m).dump(1) + "\n");
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace segalign
