// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
// usage: acceptance <synthetic corpus spec.json>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "constraint_oracle.hpp"
#include "metric_oracle.hpp"
#include "segalign/segalign.hpp"
#include "test_util.hpp"

using namespace segalign;
using Clock = std::chrono::steady_clock;

namespace {

const PriorKind kAllPriors[] = {PriorKind::none, PriorKind::box, PriorKind::linear_decay,
                                PriorKind::half_poisson, PriorKind::half_gaussian};

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int instances = 0, score_mismatch = 0, path_mismatch = 0;
  for (auto kind : kAllPriors) {
    for (int i = 0; i < 500; ++i) {
      auto inst = testutil::random_decode_instance(rng, 12, 6, 3);
      const int T = static_cast<int>(inst.scores.rows());
      // A run cap of T makes the search exact.
      DecodeRequest req{inst.scores, inst.grammar, inst.hmm, {kind, T, 0.0}};
      const auto v = viterbi(req);
      const auto b = brute_force_decode(req);
      ++instances;
      if (!(std::abs(v.log_score - b.log_score) <= 1e-9)) ++score_mismatch;
      if (!(v.alignment == b.alignment)) ++path_mismatch;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << instances << " instances, " << score_mismatch << " score mismatches, " << path_mismatch
    << " path mismatches, " << fmt("%.1f", secs) << " s";
  return {score_mismatch == 0 && path_mismatch == 0 && secs < 120.0, d.str()};
}

Outcome telescoping() {
  const double lens[] = {0.5, 1.0, 2.5, 7.0, 10.0, 33.3, 100.0};
  double worst = 0.0;
  int monotone_violations = 0;
  for (auto kind : kAllPriors)
    for (double len : lens) {
      double log_product = 0.0;
      for (int L = 1; L <= 200; ++L) {
        log_product += log_ratio_prior(kind, L, len);
        worst = std::max(worst, std::abs(log_product - log_prior_value(kind, L, len)));
        if (prior_value(kind, L, len) > prior_value(kind, L - 1, len)) ++monotone_violations;
      }
    }
  std::ostringstream d;
  d << "max |log product - log prior| = " << worst << ", monotonicity violations " << monotone_violations;
  return {worst <= 1e-9 && monotone_violations == 0, d.str()};
}

Outcome worked_example() {
  HmmModel h;
  h.space = StateSpace({2});
  h.log_self = {std::log(0.5), 0.0};
  h.log_advance = {std::log(0.5), kNegInf};
  h.mean_length = {1.0, 1.0};
  ScoreMatrix s(3, 2);
  s << std::log(0.9), std::log(0.1), std::log(0.4), std::log(0.6), std::log(0.2), std::log(0.8);
  const auto g = single_path_grammar({"v", {0}});
  const auto r = viterbi({s, g, h, {}, DecodeMode::alignment, "v"});
  // Hand enumeration: the monotone paths are [s1,s2,s2] and [s1,s1,s2].
  const double hand_best = 0.9 * 0.5 * 0.6 * 1.0 * 0.8;
  const double hand_other = 0.9 * 0.5 * 0.4 * 0.5 * 0.8;
  const auto path = global_states(r.alignment, h.space);
  const double p = std::exp(r.log_score);
  std::ostringstream d;
  d << "path [";
  for (std::size_t i = 0; i < path.size(); ++i) d << (i ? "," : "") << "s" << path[i] + 1;
  d << "], score " << fmt("%.12f", p) << " (hand: " << hand_best << " vs " << hand_other << ")";
  const bool ok = path == std::vector<int>{0, 1, 1} && std::abs(p - 0.216) < 1e-12 &&
                  std::abs(hand_best - 0.216) < 1e-12 && hand_other < hand_best;
  return {ok, d.str()};
}

void randomize(NeuralScorer& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Eigen::Index i = 0; i < s.mutable_params().size(); ++i) s.mutable_params()(i) = n(rng);
}

GradientSample random_sample(std::mt19937_64& rng, int D, int S, int B, int chunk) {
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> target(0, S - 1);
  GradientSample g;
  for (int j = 0; j < chunk; ++j) {
    Eigen::MatrixXd m(D, B);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    g.inputs.push_back(m);
  }
  for (int b = 0; b < B; ++b) g.targets.push_back(target(rng));
  return g;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5);
  double ff = 0.0, gru = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    FeedForwardScorer f(5, 7, 4);
    randomize(f, 100 + trial);
    ff = std::max(ff, gradient_check(f, random_sample(rng, 5, 4, 6, 1)));
    RecurrentScorer r(4, 5, 4, 6);
    randomize(r, 200 + trial);
    gru = std::max(gru, gradient_check(r, random_sample(rng, 4, 4, 5, 6)));
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "max relative error feedforward " << ff << ", recurrent " << gru << ", " << fmt("%.1f", secs) << " s";
  return {ff < 1e-4 && gru < 1e-4 && secs < 60.0, d.str()};
}

struct SyntheticRun {
  TrainResult result;
  std::vector<std::string> iteration_models;
  std::vector<std::string> iteration_reports;
  double seconds = 0.0;
};

TrainingData weak_data(const SyntheticCorpus& c) {
  return {c.vocabulary, c.features, c.transcripts, {}, {}, c.segmentations};
}

TrainConfig base_config() {
  TrainConfig cfg;
  cfg.seed = 1;
  return cfg;
}

SyntheticRun run_training(const TrainConfig& cfg, const TrainingData& d) {
  SyntheticRun run;
  const auto t0 = Clock::now();
  run.result = train(cfg, d, [&](const IterationReport& r, const Model& m, const std::vector<StateAlignment>&) {
    run.iteration_models.push_back(to_json(m).dump(1));
    run.iteration_reports.push_back(to_json(r, m.vocabulary).dump(1));
  });
  run.seconds = seconds_since(t0);
  return run;
}

Outcome weak_recovery(const SyntheticRun& run, const SyntheticCorpus& c) {
  const auto& its = run.result.iterations;
  const double init = *its.front().mof, final_mof = *its.back().mof;
  long frames = 0;
  for (const auto& x : c.features) frames += x.frames();
  const int n_iter = static_cast<int>(its.size()) - 1;
  const bool stopped = run.result.converged ? its.back().change_rate < 0.05 : n_iter == 15;
  std::ostringstream d;
  d << c.features.size() << " videos, mean T " << fmt("%.1f", static_cast<double>(frames) / c.features.size())
    << ", init MoF " << fmt("%.4f", init) << ", final MoF " << fmt("%.4f", final_mof) << " after " << n_iter
    << " iterations (" << (run.result.converged ? "change rate below 5%" : "iteration limit") << "), "
    << fmt("%.1f", run.seconds) << " s";
  return {final_mof >= 0.75 && final_mof > init && stopped && run.seconds < 600.0, d.str()};
}

Outcome skip_states(const SyntheticRun& with_prior, const TrainingData& d) {
  auto cfg = base_config();
  cfg.prior = PriorKind::none;
  const auto without = run_training(cfg, d);
  const double a = with_prior.result.iterations.back().skip_fraction;
  const double b = without.result.iterations.back().skip_fraction;
  std::ostringstream o;
  o << "skip-state fraction half-gaussian " << fmt("%.4f", a) << " vs none " << fmt("%.4f", b);
  return {a < b, o.str()};
}

Outcome sparse_monotone(const SyntheticCorpus& c, double weak_mof) {
  std::vector<double> mofs{weak_mof};
  bool matches_gt = false;
  int failures = 0;
  for (double f : {0.01, 0.1, 1.0}) {
    auto d = weak_data(c);
    d.sparse_labels = sample_sparse_labels(c.segmentations, f, 11);
    auto cfg = base_config();
    cfg.supervision = Supervision::sparse;
    const auto r = train(cfg, d);
    mofs.push_back(*r.iterations.back().mof);
    for (const auto& it : r.iterations) failures += it.constraint_failures;
    if (f == 1.0) matches_gt = to_segmentations(r.alignments) == c.segmentations;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < mofs.size(); ++i) monotone = monotone && mofs[i] >= mofs[i - 1];
  std::ostringstream d;
  d << "MoF at 0/0.01/0.1/1.0: " << fmt("%.4f", mofs[0]) << " " << fmt("%.4f", mofs[1]) << " "
    << fmt("%.4f", mofs[2]) << " " << fmt("%.4f", mofs[3]) << "; fraction 1.0 "
    << (matches_gt ? "reproduces" : "does not reproduce") << " the ground-truth boundaries; " << failures
    << " constraint failures";
  return {monotone && matches_gt && failures == 0, d.str()};
}

Outcome constraint_dp() {
  std::mt19937_64 rng(31);
  int checked = 0, cost_mismatch = 0, residual = 0;
  for (int trial = 0; checked < 1200 && trial < 5000; ++trial) {
    std::uniform_int_distribution<int> nseg(1, 6), nlab(1, 5), tlen(8, 24);
    const int N = nseg(rng), F = nlab(rng);
    const int T = std::max(tlen(rng), N + F);
    const auto seg = testutil::random_segmentation(rng, "v", T, N, 3);
    std::vector<int> frames;
    for (int t = 0; t < T; ++t) frames.push_back(t);
    std::shuffle(frames.begin(), frames.end(), rng);
    frames.resize(static_cast<std::size_t>(F));
    std::sort(frames.begin(), frames.end());
    std::vector<SparseLabel> labels;
    std::uniform_int_distribution<int> pick(0, N - 1);
    for (int f : frames) labels.push_back({f, seg.segments[static_cast<std::size_t>(pick(rng))].action});
    for (bool reserve : {false, true}) {
      const double oracle = testutil::exhaustive_assignment_cost(seg, labels, reserve);
      if (oracle == kInfiniteDistance) continue;
      const auto a = assign_annotations(seg, labels, reserve);
      ++checked;
      if (a.total_distance != oracle) ++cost_mismatch;
      if (!reserve) continue;
      const auto out = alignment_to_segmentation(adjust_boundaries(uniform_alignment(seg, StateSpace({2, 2, 2})), a, labels));
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (label_segment_distance(labels[i].frame, labels[i].action,
                                   out.segments[static_cast<std::size_t>(a.segment_of[i])]) != 0.0)
          ++residual;
    }
  }
  std::ostringstream d;
  d << checked << " instances, " << cost_mismatch << " cost mismatches, " << residual
    << " labels with nonzero distance after adjustment";
  return {checked >= 1000 && cost_mismatch == 0 && residual == 0, d.str()};
}

Outcome metrics() {
  std::mt19937_64 rng(99);
  int mismatches = 0, order_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nv(1, 3), tl(5, 20), ns(1, 4);
    std::vector<Segmentation> pred, gt, aligned;
    const int V = nv(rng);
    for (int v = 0; v < V; ++v) {
      const int T = tl(rng);
      const std::string id = "v" + std::to_string(v);
      gt.push_back(testutil::random_segmentation(rng, id, T, std::min(T, ns(rng)), 3));
      pred.push_back(testutil::random_segmentation(rng, id, T, std::min(T, ns(rng)), 3));
      auto same = testutil::random_segmentation(rng, id, T, static_cast<int>(gt.back().segments.size()), 3);
      for (std::size_t n = 0; n < same.segments.size(); ++n) same.segments[n].action = gt.back().segments[n].action;
      aligned.push_back(same);
    }
    const auto u = testutil::set_metrics(pred, gt, JaccardMatching::class_union);
    const auto o = testutil::set_metrics(aligned, gt, JaccardMatching::transcript_order);
    if (mof(pred, gt) != u.mof || jaccard_iod(pred, gt, JaccardMatching::class_union) != u.iod ||
        jaccard_iou(pred, gt, JaccardMatching::class_union) != u.iou || mof(aligned, gt) != o.mof ||
        jaccard_iod(aligned, gt) != o.iod || jaccard_iou(aligned, gt) != o.iou)
      ++mismatches;
    if (u.iou > u.iod || o.iou > o.iod) ++order_violations;
  }
  std::ostringstream d;
  d << "100 cases, " << mismatches << " mismatches, " << order_violations << " cases with IoU > IoD";
  return {mismatches == 0 && order_violations == 0, d.str()};
}

Outcome determinism(const SyntheticRun& first, const TrainingData& d) {
  const auto cfg = base_config();
  const auto second = run_training(cfg, d);
  const bool summary = training_summary(first.result, cfg).dump() == training_summary(second.result, cfg).dump();
  const bool model = to_json(first.result.model).dump() == to_json(second.result.model).dump();
  const bool per_iter = first.iteration_models == second.iteration_models &&
                        first.iteration_reports == second.iteration_reports;
  std::ostringstream o;
  o << "reports " << (summary ? "identical" : "differ") << ", final checkpoint " << (model ? "identical" : "differs")
    << ", " << first.iteration_models.size() << " per-iteration checkpoints and reports "
    << (per_iter ? "identical" : "differ");
  return {summary && model && per_iter, o.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <synthetic corpus spec.json>\n";
    return 2;
  }
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  };

  report(1, "viterbi matches brute force", oracle_equivalence);
  report(2, "length prior telescoping and monotonicity", telescoping);
  report(3, "worked decode example", worked_example);
  report(4, "neural gradient checks", gradient_checks);

  SyntheticCorpus corpus;
  SyntheticRun weak;
  std::string setup_error;
  try {
    std::ifstream in(argv[1]);
    if (!in) throw Error(std::string("cannot open ") + argv[1]);
    corpus = generate_corpus(synthetic_spec_from_json(nlohmann::json::parse(in)));
    weak = run_training(base_config(), weak_data(corpus));
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto needs_corpus = [&](const std::function<Outcome()>& f) {
    return [&, f]() -> Outcome {
      if (!setup_error.empty()) return {false, "synthetic training failed: " + setup_error};
      return f();
    };
  };

  report(5, "synthetic weak-supervision recovery", needs_corpus([&] { return weak_recovery(weak, corpus); }));
  report(6, "length prior reduces skip states", needs_corpus([&] { return skip_states(weak, weak_data(corpus)); }));
  report(7, "sparse supervision monotonicity",
         needs_corpus([&] { return sparse_monotone(corpus, *weak.result.iterations.back().mof); }));
  report(8, "constraint DP exactness", constraint_dp);
  report(9, "metrics match set computations", metrics);
  report(10, "determinism", needs_corpus([&] { return determinism(weak, weak_data(corpus)); }));

  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
