#pragma once

// JSON forms of training and evaluation reports. Wall-clock times are kept
// out of these so that reruns produce identical bytes.

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "segalign/decoder.hpp"
#include "segalign/eval.hpp"
#include "segalign/training.hpp"

namespace segalign {

inline nlohmann::json to_json(const IterationReport& r, const LabelVocabulary& vocab) {
  nlohmann::json states = nlohmann::json::object();
  for (std::size_t a = 0; a < r.states_per_action.size(); ++a)
    states[vocab.name(static_cast<ActionId>(a))] = r.states_per_action[a];
  nlohmann::json j{{"iteration", r.iteration},
                   {"change_rate", r.change_rate},
                   {"states_per_action", states},
                   {"skip_state_fraction", r.skip_fraction},
                   {"infeasible_videos", r.infeasible_videos},
                   {"constraint_failures", r.constraint_failures}};
  j["training_mof"] = r.mof ? nlohmann::json(*r.mof) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json training_summary(const TrainResult& res, const TrainConfig& cfg) {
  nlohmann::json its = nlohmann::json::array();
  for (const auto& r : res.iterations) its.push_back(to_json(r, res.model.vocabulary));
  return {{"supervision", std::string(to_string(cfg.supervision))},
          {"prior", std::string(to_string(cfg.prior))},
          {"converged", res.converged},
          {"iterations", its}};
}

inline nlohmann::json timings_json(const std::vector<IterationReport>& reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back({{"iteration", r.iteration}, {"wall_seconds", r.wall_seconds}});
  return j;
}

inline nlohmann::json to_json(const EvalReport& r, const LabelVocabulary& vocab) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [a, c] : r.per_class)
    per_class[vocab.name(a)] = {{"accuracy", c.accuracy()}, {"frames", c.total}};
  return {{"videos", r.videos},
          {"mof", r.mof},
          {"iod", r.iod},
          {"iou", r.iou},
          {"jaccard_matching", std::string(to_string(r.matching))},
          {"per_class", per_class}};
}

// Fixed-width text table of the selected metrics ("all" or one of mof/iod/iou).
inline std::string eval_table(const EvalReport& r, const LabelVocabulary& vocab,
                              const std::string& metric = "all") {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4);
  o << "videos  " << r.videos << "\n";
  if (metric == "all" || metric == "mof") o << "MoF     " << r.mof << "\n";
  if (metric == "all" || metric == "iod") o << "IoD     " << r.iod << "  (" << to_string(r.matching) << ")\n";
  if (metric == "all" || metric == "iou") o << "IoU     " << r.iou << "  (" << to_string(r.matching) << ")\n";
  if (metric == "all" || metric == "mof") {
    o << "class                 accuracy   frames\n";
    for (const auto& [a, c] : r.per_class)
      o << std::left << std::setw(20) << vocab.name(a) << std::right << std::setw(10) << c.accuracy()
        << std::setw(9) << c.total << "\n";
  }
  return o.str();
}

// Decoded video: segments plus state runs.
inline nlohmann::json decode_result_json(const DecodeResult& d, const LabelVocabulary& vocab) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : d.segmentation.segments)
    segs.push_back({{"label", vocab.name(s.action)}, {"start", s.start}, {"end", s.end}});
  nlohmann::json runs = nlohmann::json::array();
  const auto& f = d.alignment.frames;
  for (std::size_t t = 0; t < f.size();) {
    std::size_t u = t + 1;
    while (u < f.size() && f[u].segment == f[t].segment && f[u].subaction == f[t].subaction) ++u;
    runs.push_back({{"label", vocab.name(f[t].action)},
                    {"subaction", f[t].subaction},
                    {"start", static_cast<int>(t)},
                    {"end", static_cast<int>(u - 1)}});
    t = u;
  }
  return {{"video_id", d.segmentation.video_id},
          {"log_score", d.log_score},
          {"segments", segs},
          {"alignment", runs}};
}

// Segmentations from a decode output document; labels are added to `vocab`.
inline std::vector<Segmentation> segmentations_from_json(const nlohmann::json& j, LabelVocabulary& vocab) {
  std::vector<Segmentation> out;
  for (const auto& v : j.at("videos")) {
    Segmentation seg{v.at("video_id").get<std::string>(), {}};
    for (const auto& s : v.at("segments"))
      seg.segments.push_back({vocab.add(s.at("label").get<std::string>()), s.at("start").get<int>(),
                              s.at("end").get<int>()});
    require_tiling(seg);
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace segalign
