#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "mcvqa/analysis.hpp"
#include "mcvqa/errors.hpp"
#include "mcvqa/pipeline.hpp"
#include "mcvqa/synthetic.hpp"
#include "mcvqa/toy.hpp"
#include "mcvqa/training.hpp"

namespace py = pybind11;
using namespace mcvqa;

namespace {

ModelKind kind_or_throw(const std::string& name) {
  auto k = parse_kind(name);
  if (!k) throw ConfigError("unknown variant '" + name + "'; valid kinds: " + valid_kind_list());
  return *k;
}

py::dict accuracy_dict(const AccuracyBreakdown& a) {
  py::dict by_type;
  for (auto t : kQuestionTypes)
    if (a[t]) by_type[qtype_name(t)] = *a[t];
  py::dict out;
  out["overall"] = a.overall;
  out["correct"] = a.correct;
  out["total"] = a.total;
  out["by_type"] = by_type;
  return out;
}

py::dict synthesize(const std::filesystem::path& out, std::size_t train, std::size_t val, std::size_t test,
                    std::uint64_t seed, std::size_t grid, std::size_t channels, std::size_t colors,
                    std::size_t embed_dim, double cell_fraction) {
  SyntheticTaskSpec spec;
  spec.train = train;
  spec.val = val;
  spec.test = test;
  spec.seed = seed;
  spec.grid = grid;
  spec.channels = channels;
  spec.colors = colors;
  spec.embed_dim = embed_dim;
  spec.cell_fraction = cell_fraction;
  spec.validate();
  auto data = generate_synthetic(spec);
  write_synthetic(out, data);
  py::dict r;
  r["train"] = data.train.samples.size();
  r["val"] = data.val.samples.size();
  r["test"] = data.test.samples.size();
  r["images"] = data.images.size();
  return r;
}

py::dict train_model(const std::string& variant_name, const std::filesystem::path& data, const std::filesystem::path& out,
                     const std::string& preset, std::optional<std::size_t> max_iterations,
                     std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> log) {
  const ModelKind kind = kind_or_throw(variant_name);
  if (preset != "full" && preset != "synthetic") throw ConfigError("preset must be 'full' or 'synthetic'");
  ModelVariant v = preset == "synthetic" ? synthetic_variant(kind) : ModelVariant::defaults(kind);
  if (max_iterations) v.max_iterations = *max_iterations;
  if (seed) v.seed = *seed;
  v.validate();
  auto dir = DataDirectory::open(data);
  auto train_split = dir.split(SplitName::train);
  auto val_split = dir.split(SplitName::val);
  TrainConfig cfg = TrainConfig::from_variant(v);
  cfg.snapshot_path = out;
  TrainResult result;
  {
    py::gil_scoped_release release;
    result = train(v, dir.dims, dir.table, train_split, val_split, cfg);
  }
  save_checkpoint(out, result.checkpoint);
  if (log) write_train_log(*log, result.log);
  py::list entries;
  for (const auto& e : result.log.entries) entries.append(py::make_tuple(e.iteration, e.train_loss, e.val_accuracy));
  py::dict r;
  r["variant"] = kind_name(kind);
  r["best_val_accuracy"] = result.checkpoint.best_validation_accuracy;
  r["iteration"] = result.checkpoint.iteration;
  r["log"] = entries;
  return r;
}

py::dict evaluate_checkpoint(const std::filesystem::path& ckpt, const std::filesystem::path& data,
                             const std::string& split_name, std::optional<std::filesystem::path> preds_out) {
  auto model = Model::from_checkpoint(load_checkpoint(ckpt));
  auto dir = DataDirectory::open(data);
  if (!(dir.dims == model.dims())) throw DimensionError("checkpoint dimensions do not match the data");
  auto which = parse_split_name(split_name);
  if (!which) throw ConfigError("split must be train, val or test");
  auto split = dir.split(*which);
  Evaluation ev;
  {
    py::gil_scoped_release release;
    ev = evaluate(model, split, dir.table);
  }
  if (preds_out) {
    write_prediction_dump(*preds_out,
                          VoteMatrix::from_predictions(kind_name(model.variant().kind), split, ev.predictions));
  }
  py::dict r = accuracy_dict(ev.accuracy);
  r["predictions"] = ev.predictions;
  return r;
}

py::dict analyze(const std::vector<std::filesystem::path>& preds) {
  if (preds.empty()) throw ConfigError("analyze needs at least one prediction file");
  VoteMatrix votes;
  for (const auto& p : preds) votes.append_models(read_prediction_dump(p));
  votes.validate();
  const auto report = bias_report(votes);
  py::dict difficulty;
  for (const auto& row : report.rows) {
    py::dict d;
    d["hard"] = row.hard;
    d["fair"] = row.fair;
    d["easy"] = row.easy;
    d["questions"] = row.questions;
    difficulty[py::str(row.name)] = d;
  }
  py::dict sole;
  for (std::size_t m = 0; m < report.model_names.size(); ++m) sole[py::str(report.model_names[m])] = report.sole_expert[m];
  py::dict accuracy;
  for (const auto& row : accuracy_table(votes)) accuracy[py::str(row.name)] = accuracy_dict(row.accuracy);
  py::dict r;
  r["difficulty"] = difficulty;
  r["all_correct"] = report.all_correct;
  r["none_correct"] = report.none_correct;
  r["correct_histogram"] = report.correct_histogram;
  r["single_expert_questions"] = report.single_expert_questions;
  r["sole_expert"] = sole;
  r["accuracy"] = accuracy;
  return r;
}

py::dict gradcheck(const std::string& variant, std::uint64_t seed, double tolerance) {
  const ModelKind kind = kind_or_throw(variant);
  auto toy = make_toy_problem(seed);
  Rng rng(seed);
  Model model(toy_variant(kind), toy.dims, toy.table.fingerprint(), rng);
  auto sample = make_toy_sample(toy, rng, 4, 6);
  auto r = grad_check(model, sample, toy.table, tolerance);
  py::dict out;
  out["passed"] = r.passed;
  out["max_relative_error"] = r.report.max_relative_error;
  out["worst_parameter"] = r.report.worst_parameter;
  out["worst_index"] = r.report.worst_index;
  out["checked"] = r.report.checked;
  return out;
}

std::vector<double> adam_step(const std::vector<double>& theta, const std::vector<double>& grad, double learning_rate,
                              double beta1, double beta2, double epsilon) {
  if (theta.size() != grad.size()) throw DimensionError("theta and grad differ in length");
  AdamState state(AdamConfig{learning_rate, beta1, beta2, epsilon}, Shape{theta.size()});
  Tensor t = Tensor::vector(theta);
  adam_update(state, t, Tensor::vector(grad));
  return t.values();
}

}  // namespace

PYBIND11_MODULE(_mcvqa, m) {
  m.doc() = "Multiple-choice VQA models, training and ensemble analysis";
  py::register_exception<Error>(m, "Error");

  m.def("kinds", [] {
    std::vector<std::string> out;
    for (auto k : kAllKinds) out.emplace_back(kind_name(k));
    return out;
  });
  m.def("majority_vote", [](const std::vector<OptionIndex>& row) { return majority_vote(row); }, py::arg("row"),
        "Option with the most votes; ties go to the lowest index.");
  m.def("classify_difficulty",
        [](std::size_t correct, std::size_t models) { return std::string(difficulty_name(classify_difficulty(correct, models))); },
        py::arg("correct"), py::arg("models") = 10);
  m.def("adam_step", &adam_step, py::arg("theta"), py::arg("grad"), py::arg("learning_rate") = 1e-3,
        py::arg("beta1") = 0.9, py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-8,
        "One Adam update from fresh moment estimates.");
  m.def("gradcheck", &gradcheck, py::arg("variant"), py::arg("seed") = 1, py::arg("tolerance") = 1e-4);
  m.def("synthesize", &synthesize, py::arg("out"), py::arg("train") = 4000, py::arg("val") = 1000,
        py::arg("test") = 1000, py::arg("seed") = 1, py::arg("grid") = 4, py::arg("channels") = 8,
        py::arg("colors") = 4, py::arg("embed_dim") = 16, py::arg("cell_fraction") = 0.5);
  m.def("train", &train_model, py::arg("variant"), py::arg("data"), py::arg("out"), py::arg("preset") = "synthetic",
        py::arg("max_iterations") = py::none(), py::arg("seed") = py::none(), py::arg("log") = py::none());
  m.def("evaluate", &evaluate_checkpoint, py::arg("ckpt"), py::arg("data"), py::arg("split") = "test",
        py::arg("preds_out") = py::none());
  m.def("analyze", &analyze, py::arg("preds"));
}
