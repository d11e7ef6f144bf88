// Command-line front end: synth, train, eval, ensemble, analyze, gradcheck.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mcvqa/analysis.hpp"
#include "mcvqa/errors.hpp"
#include "mcvqa/pipeline.hpp"
#include "mcvqa/synthetic.hpp"
#include "mcvqa/toy.hpp"
#include "mcvqa/training.hpp"

namespace {

using namespace mcvqa;

const CLI::Validator kVariantName(
    [](std::string& s) -> std::string {
      if (parse_kind(s)) return {};
      return "unknown variant '" + s + "'; valid kinds: " + valid_kind_list();
    },
    "KIND", "variant");

const CLI::Validator kSplitName(
    [](std::string& s) -> std::string {
      if (parse_split_name(s)) return {};
      return "unknown split '" + s + "'; expected train, val or test";
    },
    "SPLIT", "split");

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  SyntheticTaskSpec spec = a.spec.empty() ? SyntheticTaskSpec{} : load_synthetic_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  auto data = generate_synthetic(spec);
  write_synthetic(a.out, data);
  std::printf("wrote %zu/%zu/%zu questions over %zu images to %s\n", data.train.samples.size(),
              data.val.samples.size(), data.test.samples.size(), data.images.size(), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string variant;
  std::string data;
  std::string config;
  std::string preset = "full";
  std::string out;
  std::string log;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const ModelKind kind = *parse_kind(a.variant);
  ModelVariant variant = a.preset == "synthetic" ? synthetic_variant(kind) : ModelVariant::defaults(kind);
  if (!a.config.empty()) {
    auto cfg = KeyValueConfig::load(a.config);
    if (cfg.has("kind")) {
      std::string k;
      cfg.read("kind", k);
      if (k != a.variant) throw ConfigError(a.config + ": kind=" + k + " contradicts --variant " + a.variant);
    }
    variant = variant_from_config(cfg, variant);
    cfg.reject_unknown();
  }
  if (a.seed) variant.seed = *a.seed;
  variant.validate();

  auto dir = DataDirectory::open(a.data);
  auto train_split = dir.split(SplitName::train);
  auto val_split = dir.split(SplitName::val);
  std::vector<DatasetSplit> splits{train_split, val_split};
  check_disjoint(splits);

  TrainConfig config = TrainConfig::from_variant(variant);
  config.snapshot_path = a.out;
  config.eval_workers = a.workers;
  if (config.max_iterations == 0) {
    std::fprintf(stderr, "warning: max_iterations is 0; writing the untrained initial parameters\n");
  }
  auto progress = [&](const TrainLogEntry& e) {
    if (a.quiet) return;
    std::printf("iteration %zu loss %.6f val_acc %.4f%s\n", e.iteration, e.train_loss, e.val_accuracy,
                e.is_best ? " best" : "");
    std::fflush(stdout);
  };
  auto result = train(variant, dir.dims, dir.table, train_split, val_split, config, {}, progress);
  save_checkpoint(a.out, result.checkpoint);
  if (!a.log.empty()) write_train_log(a.log, result.log);
  std::printf("%s: best val_acc %.4f at iteration %llu; checkpoint %s\n", kind_name(kind),
              result.checkpoint.best_validation_accuracy,
              static_cast<unsigned long long>(result.checkpoint.iteration), a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string preds_out;
  std::size_t workers = 1;
};

int run_eval(const EvalArgs& a) {
  auto model = Model::from_checkpoint(load_checkpoint(a.ckpt));
  auto dir = DataDirectory::open(a.data);
  if (!(dir.dims == model.dims())) throw DimensionError("checkpoint dimensions do not match the data in " + a.data);
  auto split = dir.split(*parse_split_name(a.split));
  auto ev = evaluate(model, split, dir.table, a.workers);
  std::vector<AccuracyRow> rows{{kind_name(model.variant().kind), ev.accuracy}};
  std::cout << format_accuracy_table(rows);
  if (!a.preds_out.empty()) {
    write_prediction_dump(a.preds_out, VoteMatrix::from_predictions(kind_name(model.variant().kind), split,
                                                                    ev.predictions));
  }
  return 0;
}

VoteMatrix load_votes(const std::vector<std::string>& paths) {
  VoteMatrix votes;
  for (const auto& p : paths) votes.append_models(read_prediction_dump(p));
  votes.validate();
  return votes;
}

struct PredsArgs {
  std::vector<std::string> preds;
  std::string out;
  std::string votes_out;
  bool svg = false;
};

int run_ensemble(const PredsArgs& a) {
  auto votes = load_votes(a.preds);
  auto table = format_accuracy_table(accuracy_table(votes));
  write_text(a.out, table);
  if (!a.votes_out.empty()) {
    VoteMatrix ens;
    ens.model_names = {"ensemble"};
    ens.question_ids = votes.question_ids;
    ens.qtypes = votes.qtypes;
    ens.labels = votes.labels;
    for (auto p : ensemble_predictions(votes)) ens.votes.push_back({p});
    write_prediction_dump(a.votes_out, ens);
  }
  std::cout << table;
  return 0;
}

int run_analyze(const PredsArgs& a) {
  auto votes = load_votes(a.preds);
  std::filesystem::create_directories(a.out);
  const std::filesystem::path out(a.out);
  auto report = bias_report(votes);
  write_text(out / "accuracy.tsv", format_accuracy_table(accuracy_table(votes)));
  write_text(out / "bias.tsv", format_bias_report(report));
  write_text(out / "histogram.tsv", format_correct_histogram(report));
  if (a.svg) write_text(out / "histogram.svg", correct_histogram_svg(report));
  std::cout << format_bias_report(report);
  return 0;
}

struct GradcheckArgs {
  std::string variant;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
};

int run_gradcheck(const GradcheckArgs& a) {
  const ModelKind kind = *parse_kind(a.variant);
  auto toy = make_toy_problem(a.seed);
  Rng rng(a.seed);
  Model model(toy_variant(kind), toy.dims, toy.table.fingerprint(), rng);
  auto sample = make_toy_sample(toy, rng, 4, 6);
  auto r = grad_check(model, sample, toy.table, a.tolerance);
  std::printf("%s max_relative_error %.3e (%s[%zu]: analytic %.6e numeric %.6e; %zu entries)\n", kind_name(kind),
              r.report.max_relative_error, r.report.worst_parameter.c_str(), r.report.worst_index,
              r.report.analytic, r.report.numeric, r.report.checked);
  if (!r.passed) {
    std::fprintf(stderr, "error: max relative error %.3e exceeds tolerance %.3e\n", r.report.max_relative_error,
                 a.tolerance);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-choice visual question answering: training, evaluation and bias analysis"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic grid-colour dataset");
  s->add_option("--spec", synth.spec, "key=value task spec (grid, channels, colors, embed_dim, cell_fraction, "
                                      "train, val, test, seed); defaults when omitted")
      ->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed, overrides the spec");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model and write its best-validation checkpoint");
  t->add_option("--variant", tr.variant, "Model kind: " + valid_kind_list())->required()->check(kVariantName);
  t->add_option("--data", tr.data, "Data directory with train.tsv, val.tsv, embeddings.txt, images.bin")
      ->required();
  t->add_option("--config", tr.config, "key=value overrides of the variant hyperparameters")
      ->check(CLI::ExistingFile);
  t->add_option("--preset", tr.preset, "Hyperparameter base: full (per-kind defaults) or synthetic (desk-scale sizes)")
      ->check(CLI::IsMember({"full", "synthetic"}));
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Training log path (iteration, loss, val_acc, is_best)");
  t->add_option("--seed", tr.seed, "Random seed for initialisation, shuffling and dropout");
  t->add_option("--workers", tr.workers, "Validation threads")->check(CLI::PositiveNumber);
  t->add_flag("--quiet", tr.quiet, "Suppress per-iteration lines");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Print the accuracy row of a checkpoint on one split");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "Data directory")->required();
  e->add_option("--split", ev.split, "train, val or test")->check(kSplitName);
  e->add_option("--preds-out", ev.preds_out, "Write the per-question prediction dump here");
  e->add_option("--workers", ev.workers, "Evaluation threads")->check(CLI::PositiveNumber);

  PredsArgs ens;
  auto* en = app.add_subcommand("ensemble", "Majority-vote ensemble over prediction dumps");
  en->add_option("--preds", ens.preds, "Prediction dumps, one or more models each")
      ->required()
      ->check(CLI::ExistingFile);
  en->add_option("--out", ens.out, "Accuracy table output")->required();
  en->add_option("--votes-out", ens.votes_out, "Write the ensemble's prediction dump here");

  PredsArgs an;
  auto* a = app.add_subcommand("analyze", "Bias analysis over prediction dumps");
  a->add_option("--preds", an.preds, "Prediction dumps, one or more models each")
      ->required()
      ->check(CLI::ExistingFile);
  a->add_option("--out", an.out, "Report directory (accuracy.tsv, bias.tsv, histogram.tsv)")->required();
  a->add_flag("--svg", an.svg, "Also write histogram.svg");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient check at toy sizes");
  g->add_option("--variant", gc.variant, "Model kind: " + valid_kind_list())->required()->check(kVariantName);
  g->add_option("--tolerance", gc.tolerance, "Largest acceptable relative error")->check(CLI::PositiveNumber);
  g->add_option("--seed", gc.seed, "Seed of the toy problem and initialisation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return run_synth(synth);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (en->parsed()) return run_ensemble(ens);
    if (a->parsed()) return run_analyze(an);
    if (g->parsed()) return run_gradcheck(gc);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 1;
}
