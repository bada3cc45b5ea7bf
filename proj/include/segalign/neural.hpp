#pragma once

// Discriminative frame scorers: a one-hidden-layer ReLU network over the
// current frame, and a single-layer GRU run over a fixed-length chunk of the
// frames ending at t, with a softmax over subaction states on top.
//
// Parameters live in one flat vector so that SGD updates and the finite
// difference gradient check can treat both networks alike.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "segalign/observation.hpp"

namespace segalign {

struct NeuralConfig {
  int hidden = 64;
  double learning_rate = 0.01;
  int batch_size = 32;
  int epochs = 2;
  int chunk_length = 21;  // recurrent only; frames [t - 20, t]
  std::uint64_t seed = 0;
};

// Inputs for a minibatch: one D x B matrix per chunk step (oldest first).
using ChunkBatch = std::vector<Eigen::MatrixXd>;

namespace detail {

inline Eigen::MatrixXd log_softmax_cols(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index b = 0; b < z.cols(); ++b) {
    const double m = z.col(b).maxCoeff();
    const double lse = m + std::log((z.col(b).array() - m).exp().sum());
    out.col(b) = z.col(b).array() - lse;
  }
  return out;
}

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& a) { return 1.0 / (1.0 + (-a).exp()); }

// Chunk of `length` frames ending at t, left-padded by repeating frame 0.
inline ChunkBatch gather_chunks(const std::vector<std::pair<const FeatureSequence*, int>>& items,
                                int length) {
  ChunkBatch steps(static_cast<std::size_t>(length));
  const auto B = static_cast<Eigen::Index>(items.size());
  const Eigen::Index D = items.empty() ? 0 : items.front().first->dim();
  for (int j = 0; j < length; ++j) {
    auto& m = steps[static_cast<std::size_t>(j)];
    m.resize(D, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& [x, t] = items[static_cast<std::size_t>(b)];
      const int frame = std::max(0, t - (length - 1) + j);
      m.col(b) = x->values.row(frame).transpose().cast<double>();
    }
  }
  return steps;
}

}  // namespace detail

// ----------------------------------------------------------------------------
// NeuralScorer: shared parameter handling, training loop and Bayes scoring.
// ----------------------------------------------------------------------------

class NeuralScorer : public Scorer {
 public:
  int num_states() const override { return states_; }
  int input_dim() const override { return dim_; }
  int hidden() const { return hidden_; }
  int chunk_length() const { return chunk_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  const StatePrior& prior() const { return prior_; }
  void set_prior(StatePrior p) {
    if (static_cast<int>(p.size()) != states_) throw Error("prior size does not match scorer");
    prior_ = std::move(p);
  }

  // Log posteriors log p(s | chunk), S x B.
  virtual Eigen::MatrixXd log_posteriors(const ChunkBatch& x) const = 0;

  // Mean cross-entropy over the batch; fills `grad` (same layout as params)
  // when non-null.
  virtual double loss_and_gradient(const ChunkBatch& x, const std::vector<int>& targets,
                                   Eigen::VectorXd* grad) const = 0;

  // Log posteriors for every frame of a sequence, T x S.
  ScoreMatrix frame_log_posteriors(const FeatureSequence& x) const {
    check_input(x);
    ScoreMatrix out(x.frames(), states_);
    constexpr int kBlock = 256;
    for (int t0 = 0; t0 < x.frames(); t0 += kBlock) {
      std::vector<std::pair<const FeatureSequence*, int>> items;
      for (int t = t0; t < std::min(x.frames(), t0 + kBlock); ++t) items.emplace_back(&x, t);
      const Eigen::MatrixXd lp = log_posteriors(detail::gather_chunks(items, chunk_));
      out.middleRows(t0, static_cast<Eigen::Index>(items.size())) = lp.transpose();
    }
    return out;
  }

  ScoreMatrix score(const FeatureSequence& x) const override {
    return bayes_scores(frame_log_posteriors(x), prior_);
  }

  // Plain minibatch SGD on the per-frame cross-entropy. Returns the mean
  // training loss of each epoch, preceded by the loss before training.
  std::vector<double> train(const std::vector<LabeledSequence>& data, const NeuralConfig& cfg) {
    std::vector<std::pair<const FeatureSequence*, int>> examples;
    std::vector<int> labels;
    for (const auto& seq : data) {
      if (seq.features->dim() != dim_) throw Error("feature dimension does not match scorer");
      for (std::size_t t = 0; t < seq.targets.size(); ++t) {
        if (seq.targets[t] < 0 || seq.targets[t] >= states_)
          throw Error("training target outside the scorer's state range");
        examples.emplace_back(seq.features, static_cast<int>(t));
        labels.push_back(seq.targets[t]);
      }
    }
    if (examples.empty()) throw Error("no training frames");
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> history{dataset_loss(examples, labels)};
    Eigen::VectorXd grad(params_.size());
    const auto bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        std::vector<std::pair<const FeatureSequence*, int>> items;
        std::vector<int> targets;
        for (std::size_t i = start; i < end; ++i) {
          items.push_back(examples[order[i]]);
          targets.push_back(labels[order[i]]);
        }
        const double loss = loss_and_gradient(detail::gather_chunks(items, chunk_), targets, &grad);
        total += loss * static_cast<double>(end - start);
        params_ -= cfg.learning_rate * grad;
      }
      history.push_back(total / static_cast<double>(order.size()));
    }
    return history;
  }

  nlohmann::json to_json() const override {
    return {{"kind", std::string(to_string(kind()))},
            {"states", states_},
            {"dim", dim_},
            {"hidden", hidden_},
            {"chunk_length", chunk_},
            {"params", detail::vector_to_json(params_)},
            {"prior", prior_.prob},
            {"prior_floor", prior_.floor}};
  }

 protected:
  NeuralScorer(int dim, int hidden, int states, int chunk, Eigen::Index num_params)
      : dim_(dim), hidden_(hidden), states_(states), chunk_(chunk),
        params_(Eigen::VectorXd::Zero(num_params)) {
    if (dim < 1 || hidden < 1 || states < 1 || chunk < 1)
      throw Error("neural scorer dimensions must be positive");
    prior_.prob.assign(static_cast<std::size_t>(states), 1.0 / states);
    prior_.floor = 1.0 / (10.0 * states);
  }

  void load_common(const nlohmann::json& j) {
    const auto p = detail::vector_from_json(j.at("params"));
    if (p.size() != params_.size()) throw Error("checkpoint parameter count mismatch");
    params_ = p;
    StatePrior prior;
    prior.prob = j.at("prior").get<std::vector<double>>();
    prior.floor = j.at("prior_floor").get<double>();
    set_prior(std::move(prior));
  }

  // Xavier-uniform fill of a block, in place.
  static void xavier(Eigen::Ref<Eigen::VectorXd> block, int fan_in, int fan_out,
                     std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = u(rng);
  }

  double dataset_loss(const std::vector<std::pair<const FeatureSequence*, int>>& examples,
                      const std::vector<int>& labels) const {
    double total = 0.0;
    constexpr std::size_t kBlock = 512;
    for (std::size_t s = 0; s < examples.size(); s += kBlock) {
      const std::size_t e = std::min(examples.size(), s + kBlock);
      std::vector<std::pair<const FeatureSequence*, int>> items(examples.begin() + static_cast<std::ptrdiff_t>(s),
                                                                 examples.begin() + static_cast<std::ptrdiff_t>(e));
      std::vector<int> targets(labels.begin() + static_cast<std::ptrdiff_t>(s),
                               labels.begin() + static_cast<std::ptrdiff_t>(e));
      total += loss_and_gradient(detail::gather_chunks(items, chunk_), targets, nullptr) *
               static_cast<double>(e - s);
    }
    return total / static_cast<double>(examples.size());
  }

  int dim_, hidden_, states_, chunk_;
  Eigen::VectorXd params_;
  StatePrior prior_;
};

// ----------------------------------------------------------------------------
// FeedForwardScorer: softmax(W2 relu(W1 x + b1) + b2) on the current frame.
// ----------------------------------------------------------------------------

class FeedForwardScorer final : public NeuralScorer {
 public:
  FeedForwardScorer(int dim, int hidden, int states)
      : NeuralScorer(dim, hidden, states, 1,
                     static_cast<Eigen::Index>(hidden) * dim + hidden +
                         static_cast<Eigen::Index>(states) * hidden + states) {}

  // Random hidden layer, zero output layer: initial posteriors are uniform.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params_.setZero();
    xavier(params_.segment(0, hidden_ * dim_), dim_, hidden_, rng);
  }

  ScorerKind kind() const override { return ScorerKind::feedforward; }

  Eigen::MatrixXd log_posteriors(const ChunkBatch& x) const override {
    const auto& in = x.back();
    const Eigen::MatrixXd h = ((W1() * in).colwise() + b1()).cwiseMax(0.0);
    return detail::log_softmax_cols((W2() * h).colwise() + b2());
  }

  double loss_and_gradient(const ChunkBatch& x, const std::vector<int>& targets,
                           Eigen::VectorXd* grad) const override {
    const auto& in = x.back();
    const auto B = static_cast<double>(targets.size());
    const Eigen::MatrixXd a = (W1() * in).colwise() + b1();
    const Eigen::MatrixXd h = a.cwiseMax(0.0);
    const Eigen::MatrixXd lp = detail::log_softmax_cols((W2() * h).colwise() + b2());
    double loss = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b)
      loss -= lp(targets[b], static_cast<Eigen::Index>(b));
    loss /= B;
    if (!grad) return loss;

    Eigen::MatrixXd dz = lp.array().exp();
    for (std::size_t b = 0; b < targets.size(); ++b) dz(targets[b], static_cast<Eigen::Index>(b)) -= 1.0;
    dz /= B;
    grad->resize(params_.size());
    auto g = blocks(*grad);
    g.W2 = dz * h.transpose();
    g.b2 = dz.rowwise().sum();
    const Eigen::MatrixXd da = ((W2().transpose() * dz).array() * (a.array() > 0.0).cast<double>()).matrix();
    g.W1 = da * in.transpose();
    g.b1 = da.rowwise().sum();
    return loss;
  }

  static FeedForwardScorer from_json(const nlohmann::json& j) {
    FeedForwardScorer s(j.at("dim").get<int>(), j.at("hidden").get<int>(), j.at("states").get<int>());
    s.load_common(j);
    return s;
  }

 private:
  struct Blocks {
    Eigen::Map<Eigen::MatrixXd> W1;
    Eigen::Map<Eigen::VectorXd> b1;
    Eigen::Map<Eigen::MatrixXd> W2;
    Eigen::Map<Eigen::VectorXd> b2;
  };

  Blocks blocks(Eigen::VectorXd& v) const {
    double* p = v.data();
    const Eigen::Index H = hidden_, D = dim_, S = states_;
    return {Eigen::Map<Eigen::MatrixXd>(p, H, D), Eigen::Map<Eigen::VectorXd>(p + H * D, H),
            Eigen::Map<Eigen::MatrixXd>(p + H * D + H, S, H),
            Eigen::Map<Eigen::VectorXd>(p + H * D + H + S * H, S)};
  }

  Eigen::Map<const Eigen::MatrixXd> W1() const { return {params_.data(), hidden_, dim_}; }
  Eigen::Map<const Eigen::VectorXd> b1() const {
    return {params_.data() + static_cast<Eigen::Index>(hidden_) * dim_, hidden_};
  }
  Eigen::Map<const Eigen::MatrixXd> W2() const {
    return {params_.data() + static_cast<Eigen::Index>(hidden_) * dim_ + hidden_, states_, hidden_};
  }
  Eigen::Map<const Eigen::VectorXd> b2() const {
    return {params_.data() + static_cast<Eigen::Index>(hidden_) * dim_ + hidden_ +
                static_cast<Eigen::Index>(states_) * hidden_,
            states_};
  }
};

// ----------------------------------------------------------------------------
// RecurrentScorer: single GRU layer over the chunk, softmax on the last step.
//
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h
// ----------------------------------------------------------------------------

class RecurrentScorer final : public NeuralScorer {
 public:
  RecurrentScorer(int dim, int hidden, int states, int chunk_length = 21)
      : NeuralScorer(dim, hidden, states, chunk_length,
                     3 * (static_cast<Eigen::Index>(hidden) * dim +
                          static_cast<Eigen::Index>(hidden) * hidden + hidden) +
                         static_cast<Eigen::Index>(states) * hidden + states) {}

  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params_.setZero();
    const Eigen::Index H = hidden_, D = dim_;
    for (int g = 0; g < 3; ++g) {
      xavier(params_.segment(off_W(g), H * D), dim_, hidden_, rng);
      xavier(params_.segment(off_U(g), H * H), hidden_, hidden_, rng);
    }
  }

  ScorerKind kind() const override { return ScorerKind::recurrent; }

  Eigen::MatrixXd log_posteriors(const ChunkBatch& x) const override {
    const Eigen::Index B = x.front().cols();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden_, B);
    for (const auto& xt : x) h = step(xt, h).h;
    return detail::log_softmax_cols((V() * h).colwise() + c());
  }

  double loss_and_gradient(const ChunkBatch& x, const std::vector<int>& targets,
                           Eigen::VectorXd* grad) const override {
    const Eigen::Index B = x.front().cols();
    const double nb = static_cast<double>(targets.size());
    std::vector<Step> steps;
    steps.reserve(x.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden_, B);
    for (const auto& xt : x) {
      steps.push_back(step(xt, h));
      h = steps.back().h;
    }
    const Eigen::MatrixXd lp = detail::log_softmax_cols((V() * h).colwise() + c());
    double loss = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) loss -= lp(targets[b], static_cast<Eigen::Index>(b));
    loss /= nb;
    if (!grad) return loss;

    grad->setZero(params_.size());
    double* gp = grad->data();
    const Eigen::Index H = hidden_, D = dim_, S = states_;
    Eigen::MatrixXd dout = lp.array().exp();
    for (std::size_t b = 0; b < targets.size(); ++b) dout(targets[b], static_cast<Eigen::Index>(b)) -= 1.0;
    dout /= nb;
    Eigen::Map<Eigen::MatrixXd>(gp + off_V(), S, H) = dout * h.transpose();
    Eigen::Map<Eigen::VectorXd>(gp + off_c(), S) = dout.rowwise().sum();

    auto gW = [&](int g) { return Eigen::Map<Eigen::MatrixXd>(gp + off_W(g), H, D); };
    auto gU = [&](int g) { return Eigen::Map<Eigen::MatrixXd>(gp + off_U(g), H, H); };
    auto gb = [&](int g) { return Eigen::Map<Eigen::VectorXd>(gp + off_b(g), H); };

    Eigen::MatrixXd dh = V().transpose() * dout;
    for (std::size_t j = steps.size(); j-- > 0;) {
      const Step& s = steps[j];
      const Eigen::MatrixXd& hp = s.h_prev;
      const Eigen::ArrayXXd dn = dh.array() * (1.0 - s.z.array());
      const Eigen::ArrayXXd dz = dh.array() * (hp.array() - s.n.array());
      Eigen::MatrixXd dhp = (dh.array() * s.z.array()).matrix();

      const Eigen::MatrixXd dan = (dn * (1.0 - s.n.array().square())).matrix();
      const Eigen::MatrixXd rh = (s.r.array() * hp.array()).matrix();
      gW(2) += dan * x[j].transpose();
      gU(2) += dan * rh.transpose();
      gb(2) += dan.rowwise().sum();
      const Eigen::MatrixXd drh = U(2).transpose() * dan;
      const Eigen::ArrayXXd dr = drh.array() * hp.array();
      dhp += (drh.array() * s.r.array()).matrix();

      const Eigen::MatrixXd daz = (dz * s.z.array() * (1.0 - s.z.array())).matrix();
      gW(0) += daz * x[j].transpose();
      gU(0) += daz * hp.transpose();
      gb(0) += daz.rowwise().sum();
      dhp += U(0).transpose() * daz;

      const Eigen::MatrixXd dar = (dr * s.r.array() * (1.0 - s.r.array())).matrix();
      gW(1) += dar * x[j].transpose();
      gU(1) += dar * hp.transpose();
      gb(1) += dar.rowwise().sum();
      dhp += U(1).transpose() * dar;

      dh = std::move(dhp);
    }
    return loss;
  }

  static RecurrentScorer from_json(const nlohmann::json& j) {
    RecurrentScorer s(j.at("dim").get<int>(), j.at("hidden").get<int>(), j.at("states").get<int>(),
                      j.at("chunk_length").get<int>());
    s.load_common(j);
    return s;
  }

 private:
  struct Step {
    Eigen::MatrixXd h_prev, z, r, n, h;
  };

  // Gate g: 0 = update (z), 1 = reset (r), 2 = candidate (n).
  Eigen::Index gate_size() const {
    return static_cast<Eigen::Index>(hidden_) * dim_ + static_cast<Eigen::Index>(hidden_) * hidden_ + hidden_;
  }
  Eigen::Index off_W(int g) const { return g * gate_size(); }
  Eigen::Index off_U(int g) const { return off_W(g) + static_cast<Eigen::Index>(hidden_) * dim_; }
  Eigen::Index off_b(int g) const { return off_U(g) + static_cast<Eigen::Index>(hidden_) * hidden_; }
  Eigen::Index off_V() const { return 3 * gate_size(); }
  Eigen::Index off_c() const { return off_V() + static_cast<Eigen::Index>(states_) * hidden_; }

  Eigen::Map<const Eigen::MatrixXd> W(int g) const { return {params_.data() + off_W(g), hidden_, dim_}; }
  Eigen::Map<const Eigen::MatrixXd> U(int g) const { return {params_.data() + off_U(g), hidden_, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> b(int g) const { return {params_.data() + off_b(g), hidden_}; }
  Eigen::Map<const Eigen::MatrixXd> V() const { return {params_.data() + off_V(), states_, hidden_}; }
  Eigen::Map<const Eigen::VectorXd> c() const { return {params_.data() + off_c(), states_}; }

  Step step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h) const {
    Step s;
    s.h_prev = h;
    s.z = detail::sigmoid(((W(0) * x + U(0) * h).colwise() + b(0)).array()).matrix();
    s.r = detail::sigmoid(((W(1) * x + U(1) * h).colwise() + b(1)).array()).matrix();
    const Eigen::MatrixXd rh = (s.r.array() * h.array()).matrix();
    s.n = ((W(2) * x + U(2) * rh).colwise() + b(2)).array().tanh().matrix();
    s.h = ((1.0 - s.z.array()) * s.n.array() + s.z.array() * h.array()).matrix();
    return s;
  }
};

// ----------------------------------------------------------------------------
// Gradient check
// ----------------------------------------------------------------------------

struct GradientSample {
  ChunkBatch inputs;
  std::vector<int> targets;
};

// Largest relative deviation between the analytic gradient and central
// finite differences, |a - n| / max(|a|, |n|, 1e-4).
inline double gradient_check(const NeuralScorer& scorer, const GradientSample& sample,
                             double step = 1e-5) {
  Eigen::VectorXd analytic;
  scorer.loss_and_gradient(sample.inputs, sample.targets, &analytic);
  // Perturb a private copy through the mutable interface.
  std::unique_ptr<NeuralScorer> probe;
  if (scorer.kind() == ScorerKind::feedforward)
    probe = std::make_unique<FeedForwardScorer>(static_cast<const FeedForwardScorer&>(scorer));
  else
    probe = std::make_unique<RecurrentScorer>(static_cast<const RecurrentScorer&>(scorer));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double orig = probe->params()(i);
    probe->mutable_params()(i) = orig + step;
    const double up = probe->loss_and_gradient(sample.inputs, sample.targets, nullptr);
    probe->mutable_params()(i) = orig - step;
    const double down = probe->loss_and_gradient(sample.inputs, sample.targets, nullptr);
    probe->mutable_params()(i) = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

}  // namespace segalign
