// segalign: train, decode, eval and synth subcommands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segalign/segalign.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace segalign;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_atomically(path, j.dump(2) + "\n"); }

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SEGALIGN_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error("SEGALIGN_SEED must be a non-negative integer, got '" + std::string(s) + "'");
  }
}

// Orders per-video inputs like the feature directory.
template <typename T>
std::vector<T> by_video(const std::vector<FeatureSequence>& videos, const std::map<std::string, T>& items,
                        const std::string& what, bool required) {
  std::vector<T> out;
  for (const auto& x : videos) {
    const auto it = items.find(x.video_id);
    if (it == items.end()) {
      if (required) throw Error("no " + what + " for video '" + x.video_id + "'");
      out.emplace_back();
      continue;
    }
    out.push_back(it->second);
  }
  return out;
}

std::map<std::string, Transcript> index_transcripts(const std::vector<Transcript>& ts) {
  std::map<std::string, Transcript> out;
  for (const auto& t : ts)
    if (!out.emplace(t.video_id, t).second) throw Error("duplicate transcript for '" + t.video_id + "'");
  return out;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, features, transcripts, sparse_labels, ground_truth, reference, out, prior;
  int jobs = default_jobs();
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(a.config));
  if (!a.prior.empty()) cfg.prior = parse_prior_kind(a.prior);
  if (const auto s = env_seed()) cfg.seed = *s;
  if (!a.sparse_labels.empty()) cfg.supervision = Supervision::sparse;
  if (!a.ground_truth.empty()) cfg.supervision = Supervision::full;
  cfg.jobs = a.jobs;
  cfg.validate();

  TrainingData d;
  d.videos = load_feature_dir(a.features);
  const auto transcripts = read_transcripts(fs::path(a.transcripts), d.vocabulary);
  d.transcripts = by_video(d.videos, index_transcripts(transcripts), "transcript", true);
  if (cfg.supervision == Supervision::sparse) {
    if (a.sparse_labels.empty()) throw Error("sparse supervision needs --sparse-labels");
    d.sparse_labels = by_video(d.videos, read_sparse_labels(fs::path(a.sparse_labels), d.vocabulary),
                               "sparse labels", false);
  }
  if (cfg.supervision == Supervision::full) {
    if (a.ground_truth.empty()) throw Error("full supervision needs --ground-truth");
    d.ground_truth = by_video(d.videos, read_segmentations(fs::path(a.ground_truth), d.vocabulary),
                              "ground truth", true);
  }
  if (!a.reference.empty())
    d.reference = by_video(d.videos, read_segmentations(fs::path(a.reference), d.vocabulary),
                           "reference segmentation", true);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_json(out / "run.json", {{"command", "train"},
                                {"config", to_json(cfg)},
                                {"seed", cfg.seed},
                                {"jobs", cfg.jobs},
                                {"features", a.features},
                                {"transcripts", a.transcripts},
                                {"sparse_labels", a.sparse_labels},
                                {"ground_truth", a.ground_truth},
                                {"reference", a.reference}});

  auto on_iteration = [&](const IterationReport& r, const Model& m, const std::vector<StateAlignment>&) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%02d", r.iteration);
    save_model(out / (std::string(name) + ".model.json"), m);
    write_json(out / (std::string(name) + ".report.json"), to_json(r, d.vocabulary));
    std::cerr << "iteration " << r.iteration << ": change rate " << r.change_rate;
    if (r.mof) std::cerr << ", training MoF " << *r.mof;
    if (r.infeasible_videos) std::cerr << ", " << r.infeasible_videos << " infeasible videos kept";
    if (r.constraint_failures) std::cerr << ", " << r.constraint_failures << " constraint failures";
    std::cerr << "\n";
  };
  const auto res = train(cfg, d, on_iteration);

  save_model(out / "model.json", res.model);
  write_json(out / "reports.json", training_summary(res, cfg));
  write_json(out / "timings.json", timings_json(res.iterations));
  write_atomically(out / "alignments.tsv", [&](std::ostream& o) {
    write_segmentations(o, to_segmentations(res.alignments), d.vocabulary);
  });
  std::cerr << (res.converged ? "converged" : "stopped at the iteration limit") << " after "
            << res.iterations.back().iteration << " iterations\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct DecodeArgs {
  std::string model, features, transcripts, out, mode = "segment", prior;
  int max_run_length = -1;
  double beam = 0.0;
  int jobs = default_jobs();
};

int run_decode(const DecodeArgs& a) {
  Model model = load_model(a.model);
  DecodeOptions opt = model.decode_options();
  if (!a.prior.empty()) opt.prior = parse_prior_kind(a.prior);
  if (a.max_run_length >= 0) opt.max_run_length = a.max_run_length;
  opt.beam = a.beam;
  const bool align = a.mode == "align";
  if (!align && a.mode != "segment") throw Error("unknown mode '" + a.mode + "' (valid: segment, align)");

  const auto videos = load_feature_dir(a.features);
  std::vector<Transcript> transcripts;
  if (align) {
    if (a.transcripts.empty()) throw Error("--mode align needs --transcripts");
    LabelVocabulary vocab = model.vocabulary;
    const auto ts = read_transcripts(fs::path(a.transcripts), vocab);
    if (vocab.size() != model.vocabulary.size()) throw Error("transcripts use labels unknown to the model");
    transcripts = by_video(videos, index_transcripts(ts), "transcript", true);
  }

  std::vector<DecodeResult> results(videos.size());
  parallel_for(videos.size(), a.jobs, [&](std::size_t v) {
    const auto scores = model.scorer->score(videos[v]);
    if (align)
      results[v] = align_to_transcript(scores, transcripts[v], model.hmm, opt);
    else
      results[v] = viterbi({scores, model.grammar, model.hmm, opt, DecodeMode::segmentation, videos[v].video_id});
  });

  json vids = json::array();
  for (const auto& r : results) vids.push_back(decode_result_json(r, model.vocabulary));
  json doc{{"mode", align ? "align" : "segment"},
           {"prior", std::string(to_string(opt.prior))},
           {"max_run_length", opt.max_run_length},
           {"videos", vids}};
  write_json(a.out, doc);
  const fs::path run = fs::path(a.out).parent_path() / (fs::path(a.out).stem().string() + ".run.json");
  write_json(run, {{"command", "decode"},
                   {"model", a.model},
                   {"features", a.features},
                   {"transcripts", a.transcripts},
                   {"mode", a.mode},
                   {"prior", std::string(to_string(opt.prior))},
                   {"max_run_length", opt.max_run_length},
                   {"beam", opt.beam},
                   {"jobs", a.jobs}});
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, metric = "all", out;
};

int run_eval(const EvalArgs& a) {
  if (a.metric != "all" && a.metric != "mof" && a.metric != "iod" && a.metric != "iou")
    throw Error("unknown metric '" + a.metric + "' (valid: mof, iod, iou, all)");
  LabelVocabulary vocab;
  const auto pred = segmentations_from_json(read_json_file(a.pred), vocab);
  const auto gt_map = read_segmentations(fs::path(a.gt), vocab);
  std::vector<Segmentation> gt;
  for (const auto& p : pred) {
    const auto it = gt_map.find(p.video_id);
    if (it == gt_map.end()) throw Error("no ground truth for video '" + p.video_id + "'");
    gt.push_back(it->second);
  }
  const auto report = evaluate(pred, gt);
  json j = to_json(report, vocab);
  if (a.metric != "all") j = {{"videos", report.videos}, {a.metric, j.at(a.metric)}, {"jaccard_matching", j.at("jaccard_matching")}};
  std::cout << eval_table(report, vocab, a.metric);
  if (!a.out.empty()) {
    write_json(a.out, j);
    const fs::path run = fs::path(a.out).parent_path() / (fs::path(a.out).stem().string() + ".run.json");
    write_json(run, {{"command", "eval"}, {"pred", a.pred}, {"gt", a.gt}, {"metric", a.metric}});
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  double label_fraction = 0.0;
};

int run_synth(const SynthArgs& a) {
  auto spec = synthetic_spec_from_json(read_json_file(a.spec));
  if (const auto s = env_seed()) spec.seed = *s;
  const auto corpus = generate_corpus(spec);
  const fs::path out = a.out;
  fs::create_directories(out);
  save_feature_dir(out / "features", corpus.features);
  write_atomically(out / "transcripts.tsv",
                   [&](std::ostream& o) { write_transcripts(o, corpus.transcripts, corpus.vocabulary); });
  write_atomically(out / "ground_truth.tsv",
                   [&](std::ostream& o) { write_segmentations(o, corpus.segmentations, corpus.vocabulary); });
  if (a.label_fraction > 0.0) {
    const auto labels = sample_sparse_labels(corpus.segmentations, a.label_fraction, spec.seed + 1);
    std::map<std::string, std::vector<SparseLabel>> by_id;
    for (std::size_t v = 0; v < labels.size(); ++v) by_id[corpus.segmentations[v].video_id] = labels[v];
    write_atomically(out / "sparse_labels.tsv",
                     [&](std::ostream& o) { write_sparse_labels(o, by_id, corpus.vocabulary); });
  }
  write_json(out / "run.json", {{"command", "synth"},
                                {"spec", to_json(spec)},
                                {"seed", spec.seed},
                                {"label_fraction", a.label_fraction}});
  std::cerr << "wrote " << corpus.features.size() << " videos to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised temporal action segmentation with subaction HMMs"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model from transcripts, sparse labels or full annotations");
  train_cmd->add_option("--config", ta.config, "JSON training config");
  train_cmd->add_option("--features", ta.features, "Feature directory with manifest.tsv")->required();
  train_cmd->add_option("--transcripts", ta.transcripts, "Transcript file (video_id TAB labels)")->required();
  auto* sparse_opt = train_cmd->add_option("--sparse-labels", ta.sparse_labels,
                                           "Sparse frame labels (video_id TAB frame TAB label); selects sparse supervision");
  auto* gt_opt = train_cmd->add_option("--ground-truth", ta.ground_truth,
                                       "Ground-truth segments (video_id TAB label TAB start TAB end); selects full supervision");
  sparse_opt->excludes(gt_opt);
  train_cmd->add_option("--reference", ta.reference, "Ground-truth segments used only to report training MoF");
  train_cmd->add_option("--length-prior", ta.prior,
                        std::string("Length prior, overrides the config (") + kPriorChoices + ")");
  train_cmd->add_option("--out", ta.out, "Output directory for reports and checkpoints")->required();
  train_cmd->add_option("--jobs", ta.jobs, "Worker threads for per-video work")->check(CLI::PositiveNumber);

  DecodeArgs da;
  auto* decode_cmd = app.add_subcommand("decode", "Segment or align videos with a trained model");
  decode_cmd->add_option("--model", da.model, "Model checkpoint (model.json)")->required();
  decode_cmd->add_option("--features", da.features, "Feature directory with manifest.tsv")->required();
  decode_cmd->add_option("--transcripts", da.transcripts, "Transcript file, required for --mode align");
  decode_cmd->add_option("--mode", da.mode, "segment: decode with the grammar; align: align to transcripts");
  decode_cmd->add_option("--length-prior", da.prior,
                         std::string("Length prior, overrides the checkpoint (") + kPriorChoices + ")");
  decode_cmd->add_option("--max-run-length", da.max_run_length,
                         "Cap on tracked run lengths; 0 derives it from the mean state lengths");
  decode_cmd->add_option("--beam", da.beam, "Log-domain beam width; 0 disables pruning");
  decode_cmd->add_option("--out", da.out, "Output JSON file")->required();
  decode_cmd->add_option("--jobs", da.jobs, "Worker threads for per-video work")->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score decoded segmentations against ground truth");
  eval_cmd->add_option("--pred", ea.pred, "Decode output JSON")->required();
  eval_cmd->add_option("--gt", ea.gt, "Ground-truth segments file")->required();
  eval_cmd->add_option("--metric", ea.metric, "mof, iod, iou or all");
  eval_cmd->add_option("--out", ea.out, "Write the JSON report here instead of stdout");

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus from a JSON spec");
  synth_cmd->add_option("--spec", sa.spec, "Synthetic corpus spec (JSON)")->required();
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--label-fraction", sa.label_fraction,
                        "Also write sparse_labels.tsv with this fraction of frames labeled")
      ->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);
  try {
    if (train_cmd->parsed()) return run_train(ta);
    if (decode_cmd->parsed()) return run_decode(da);
    if (eval_cmd->parsed()) return run_eval(ea);
    if (synth_cmd->parsed()) return run_synth(sa);
  } catch (const std::exception& e) {
    std::cerr << "segalign: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
