#pragma once

// Frame-level observation scorers.
//
// A scorer maps a feature sequence to a T x num_states matrix of log scores
// usable as log p(x_t | s) in decoding. Generative scorers return log
// densities directly; discriminative ones return log p(s | x_t) - log p(s),
// dropping the state-independent constant of Bayes' rule.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "segalign/core.hpp"
#include "segalign/features.hpp"
#include "segalign/scores.hpp"

namespace segalign {

enum class ScorerKind { gaussian, feedforward, recurrent };

inline std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::gaussian: return "gaussian";
    case ScorerKind::feedforward: return "feedforward";
    case ScorerKind::recurrent: return "recurrent";
  }
  return "gaussian";
}

inline ScorerKind parse_scorer_kind(std::string_view s) {
  if (s == "gaussian") return ScorerKind::gaussian;
  if (s == "feedforward" || s == "mlp") return ScorerKind::feedforward;
  if (s == "recurrent" || s == "gru") return ScorerKind::recurrent;
  throw Error("unknown scorer '" + std::string(s) + "' (valid: gaussian, feedforward, recurrent)");
}

// ----------------------------------------------------------------------------
// Training data: per video features plus one global state id per frame.
// ----------------------------------------------------------------------------

struct LabeledSequence {
  const FeatureSequence* features = nullptr;
  std::vector<int> targets;
};

inline std::vector<LabeledSequence> make_training_set(const std::vector<FeatureSequence>& videos,
                                                      const std::vector<StateAlignment>& alignments,
                                                      const StateSpace& space) {
  if (videos.size() != alignments.size())
    throw Error("feature and alignment counts differ");
  std::vector<LabeledSequence> out;
  out.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (static_cast<int>(alignments[i].size()) != videos[i].frames())
      throw Error("alignment for '" + alignments[i].video_id + "' does not cover its " +
                  std::to_string(videos[i].frames()) + " frames");
    out.push_back({&videos[i], global_states(alignments[i], space)});
  }
  return out;
}

// ----------------------------------------------------------------------------
// StatePrior
// ----------------------------------------------------------------------------

struct StatePrior {
  std::vector<double> prob;
  double floor = 0.0;

  std::size_t size() const { return prob.size(); }
};

// Relative frame frequency of each state, floored at 1 / (10 * num_states).
inline StatePrior fit_state_prior(const std::vector<LabeledSequence>& data, int num_states) {
  if (num_states < 1) throw Error("state prior needs at least one state");
  std::vector<double> counts(static_cast<std::size_t>(num_states), 0.0);
  double total = 0.0;
  for (const auto& seq : data)
    for (int s : seq.targets) {
      counts.at(static_cast<std::size_t>(s)) += 1.0;
      total += 1.0;
    }
  StatePrior p;
  p.floor = 1.0 / (10.0 * num_states);
  p.prob.resize(counts.size());
  for (std::size_t s = 0; s < counts.size(); ++s)
    p.prob[s] = std::max(total > 0 ? counts[s] / total : 0.0, p.floor);
  return p;
}

// log p(s | x_t) - log p(s) per frame and state.
inline ScoreMatrix bayes_scores(const ScoreMatrix& log_posteriors, const StatePrior& prior) {
  if (static_cast<std::size_t>(log_posteriors.cols()) != prior.size())
    throw Error("posterior and prior state counts differ");
  ScoreMatrix out = log_posteriors;
  for (Eigen::Index s = 0; s < out.cols(); ++s)
    out.col(s).array() -= std::log(prior.prob[static_cast<std::size_t>(s)]);
  return out;
}

namespace detail {

// Row-major nested arrays; doubles round-trip exactly through nlohmann::json.
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw Error("expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Scorer interface
// ----------------------------------------------------------------------------

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScorerKind kind() const = 0;
  virtual int num_states() const = 0;
  virtual int input_dim() const = 0;
  virtual ScoreMatrix score(const FeatureSequence& x) const = 0;
  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_input(const FeatureSequence& x) const {
    if (x.dim() != input_dim())
      throw Error("feature dimension " + std::to_string(x.dim()) + " of '" + x.video_id +
                  "' does not match the scorer's " + std::to_string(input_dim()));
    if (x.frames() < 1) throw Error("feature sequence '" + x.video_id + "' has no frames");
  }
};

// ----------------------------------------------------------------------------
// GaussianScorer: one diagonal Gaussian per state.
// ----------------------------------------------------------------------------

class GaussianScorer final : public Scorer {
 public:
  static constexpr double kDefaultVarianceFloor = 1e-4;

  GaussianScorer(Eigen::MatrixXd means, Eigen::MatrixXd variances,
                 double variance_floor = kDefaultVarianceFloor)
      : means_(std::move(means)), variances_(std::move(variances)), floor_(variance_floor) {
    if (means_.rows() != variances_.rows() || means_.cols() != variances_.cols())
      throw Error("gaussian means and variances differ in shape");
    if (!(floor_ > 0.0)) throw Error("variance floor must be positive");
    variances_ = variances_.cwiseMax(floor_);
    log_norm_.resize(means_.rows());
    for (Eigen::Index s = 0; s < means_.rows(); ++s)
      log_norm_(s) = -0.5 * (variances_.row(s).array() * (2.0 * std::numbers::pi)).log().sum();
  }

  // Per-state sample mean and (population) variance over the aligned frames.
  // States without frames fall back to the global statistics.
  static GaussianScorer fit(const std::vector<LabeledSequence>& data, int num_states,
                            double variance_floor = kDefaultVarianceFloor) {
    if (data.empty()) throw Error("cannot fit a scorer without data");
    const int D = data.front().features->dim();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(num_states, D);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(num_states);
    Eigen::RowVectorXd gsum = Eigen::RowVectorXd::Zero(D);
    double gcount = 0.0;
    for (const auto& seq : data) {
      if (seq.features->dim() != D) throw Error("inconsistent feature dimensions");
      for (std::size_t t = 0; t < seq.targets.size(); ++t) {
        const Eigen::RowVectorXd x =
            seq.features->values.row(static_cast<Eigen::Index>(t)).cast<double>();
        sum.row(seq.targets[t]) += x;
        count(seq.targets[t]) += 1.0;
        gsum += x;
        gcount += 1.0;
      }
    }
    const Eigen::RowVectorXd gmean = gsum / gcount;
    Eigen::MatrixXd means(num_states, D);
    for (int s = 0; s < num_states; ++s)
      means.row(s) = count(s) > 0 ? Eigen::RowVectorXd(sum.row(s) / count(s)) : gmean;

    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(num_states, D);
    Eigen::RowVectorXd gsq = Eigen::RowVectorXd::Zero(D);
    for (const auto& seq : data)
      for (std::size_t t = 0; t < seq.targets.size(); ++t) {
        const Eigen::RowVectorXd x =
            seq.features->values.row(static_cast<Eigen::Index>(t)).cast<double>();
        sq.row(seq.targets[t]) += (x - means.row(seq.targets[t])).array().square().matrix();
        gsq += (x - gmean).array().square().matrix();
      }
    const Eigen::RowVectorXd gvar = gsq / gcount;
    Eigen::MatrixXd vars(num_states, D);
    for (int s = 0; s < num_states; ++s)
      vars.row(s) = count(s) > 0 ? Eigen::RowVectorXd(sq.row(s) / count(s)) : gvar;
    return GaussianScorer(std::move(means), std::move(vars), variance_floor);
  }

  ScorerKind kind() const override { return ScorerKind::gaussian; }
  int num_states() const override { return static_cast<int>(means_.rows()); }
  int input_dim() const override { return static_cast<int>(means_.cols()); }
  const Eigen::MatrixXd& means() const { return means_; }
  const Eigen::MatrixXd& variances() const { return variances_; }
  double variance_floor() const { return floor_; }

  double log_density(const Eigen::RowVectorXd& x, int s) const {
    return log_norm_(s) -
           0.5 * ((x - means_.row(s)).array().square() / variances_.row(s).array()).sum();
  }

  ScoreMatrix score(const FeatureSequence& x) const override {
    check_input(x);
    ScoreMatrix out(x.frames(), num_states());
    for (Eigen::Index t = 0; t < x.values.rows(); ++t) {
      const Eigen::RowVectorXd row = x.values.row(t).cast<double>();
      for (int s = 0; s < num_states(); ++s) out(t, s) = log_density(row, s);
    }
    return out;
  }

  nlohmann::json to_json() const override {
    return {{"kind", "gaussian"},
            {"states", num_states()},
            {"dim", input_dim()},
            {"variance_floor", floor_},
            {"means", detail::matrix_to_json(means_)},
            {"variances", detail::matrix_to_json(variances_)}};
  }

  static GaussianScorer from_json(const nlohmann::json& j) {
    return GaussianScorer(detail::matrix_from_json(j.at("means")),
                          detail::matrix_from_json(j.at("variances")),
                          j.at("variance_floor").get<double>());
  }

 private:
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  double floor_;
  Eigen::VectorXd log_norm_;
};

}  // namespace segalign
