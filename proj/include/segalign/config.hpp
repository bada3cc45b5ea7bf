#pragma once

// JSON run configuration for training. Unknown keys and wrong types are
// rejected before any work starts.

#include <set>
#include <string>

#include "json.hpp"
#include "segalign/training.hpp"

namespace segalign {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw Error(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) {
      std::string valid;
      for (const auto& k : allowed) valid += (valid.empty() ? "" : ", ") + k;
      throw Error("unknown key '" + key + "' in " + where + " (valid: " + valid + ")");
    }
}

template <typename T>
T typed(const nlohmann::json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  const std::string where = "train config";
  detail::reject_unknown_keys(j, {"frames_per_subaction", "scorer", "prior", "max_iterations",
                                  "stop_threshold", "supervision", "seed", "max_run_length"},
                              where);
  TrainConfig c;
  c.frames_per_subaction = detail::typed(j, "frames_per_subaction", c.frames_per_subaction, where);
  c.max_iterations = detail::typed(j, "max_iterations", c.max_iterations, where);
  c.stop_threshold = detail::typed(j, "stop_threshold", c.stop_threshold, where);
  c.seed = detail::typed(j, "seed", c.seed, where);
  c.max_run_length = detail::typed(j, "max_run_length", c.max_run_length, where);
  if (j.contains("prior")) c.prior = parse_prior_kind(detail::typed<std::string>(j, "prior", "", where));
  if (j.contains("supervision"))
    c.supervision = parse_supervision(detail::typed<std::string>(j, "supervision", "", where));
  if (j.contains("scorer")) {
    const auto& s = j.at("scorer");
    const std::string sw = "scorer config";
    detail::reject_unknown_keys(s, {"kind", "hidden", "learning_rate", "batch_size", "epochs",
                                    "chunk_length", "variance_floor"},
                                sw);
    if (s.contains("kind")) c.scorer.kind = parse_scorer_kind(detail::typed<std::string>(s, "kind", "", sw));
    auto& n = c.scorer.neural;
    n.hidden = detail::typed(s, "hidden", n.hidden, sw);
    n.learning_rate = detail::typed(s, "learning_rate", n.learning_rate, sw);
    n.batch_size = detail::typed(s, "batch_size", n.batch_size, sw);
    n.epochs = detail::typed(s, "epochs", n.epochs, sw);
    n.chunk_length = detail::typed(s, "chunk_length", n.chunk_length, sw);
    c.scorer.variance_floor = detail::typed(s, "variance_floor", c.scorer.variance_floor, sw);
    if (n.hidden < 1 || n.batch_size < 1 || n.epochs < 0 || n.chunk_length < 1 || !(n.learning_rate > 0.0))
      throw Error("scorer config has out-of-range values");
    if (!(c.scorer.variance_floor > 0.0)) throw Error("variance_floor must be positive");
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"frames_per_subaction", c.frames_per_subaction},
          {"scorer",
           {{"kind", std::string(to_string(c.scorer.kind))},
            {"hidden", c.scorer.neural.hidden},
            {"learning_rate", c.scorer.neural.learning_rate},
            {"batch_size", c.scorer.neural.batch_size},
            {"epochs", c.scorer.neural.epochs},
            {"chunk_length", c.scorer.neural.chunk_length},
            {"variance_floor", c.scorer.variance_floor}}},
          {"prior", std::string(to_string(c.prior))},
          {"max_iterations", c.max_iterations},
          {"stop_threshold", c.stop_threshold},
          {"supervision", std::string(to_string(c.supervision))},
          {"seed", c.seed},
          {"max_run_length", c.max_run_length}};
}

}  // namespace segalign
