#include "mcvqa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

std::string group_of(const std::string& name) {
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

// Group with the largest absolute gradient entry; NaN counts as infinite.
std::string largest_gradient_group(Model& model) {
  std::string best;
  double best_mag = -1.0;
  model.visit_parameters([&](const std::string& name, Parameter& p) {
    double mag = 0.0;
    for (double g : p.grad.values()) mag = std::max(mag, std::isnan(g) ? std::numeric_limits<double>::infinity() : std::abs(g));
    if (mag > best_mag) {
      best_mag = mag;
      best = group_of(name);
    }
  });
  return best + " (max |grad| " + io::format_double(best_mag) + ")";
}

[[noreturn]] void numeric_failure(Model& model, std::size_t iteration, const std::string& sample_id) {
  throw NumericError("non-finite loss at iteration " + std::to_string(iteration) + " on sample '" + sample_id +
                     "'; largest gradient in " + largest_gradient_group(model));
}

}  // namespace

TrainConfig TrainConfig::from_variant(const ModelVariant& v) {
  TrainConfig c;
  c.learning_rate = v.learning_rate;
  c.batch_size = v.batch_size;
  c.max_iterations = v.max_iterations;
  c.seed = v.seed;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (eval_workers == 0) throw ConfigError("eval_workers must be at least 1");
}

double TrainLog::best_val_accuracy() const {
  double best = 0.0;
  for (const auto& e : entries) best = std::max(best, e.val_accuracy);
  return best;
}

std::string format_train_log(const TrainLog& log) {
  std::string out = "iteration\tloss\tval_acc\tis_best\n";
  for (const auto& e : log.entries) {
    out += std::to_string(e.iteration) + "\t" + io::format_double(e.train_loss) + "\t" +
           io::format_double(e.val_accuracy) + "\t" + (e.is_best ? "1" : "0") + "\n";
  }
  return out;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  io::write_file(path, format_train_log(log));
}

TrainResult train(const ModelVariant& variant, const ModelDims& dims, const EmbeddingTable& table,
                  const DatasetSplit& train_split, const DatasetSplit& val_split, const TrainConfig& config,
                  const ValidationHook& validate, const ProgressHook& progress) {
  config.validate();
  if (train_split.samples.empty()) throw ConfigError("training split is empty");
  if (val_split.samples.empty() && !validate) throw ConfigError("validation split is empty");
  if (table.dim() != dims.embed_dim) throw DimensionError("embedding table dimension differs from model dims");

  Rng rng(config.seed);
  Model model(variant, dims, table.fingerprint(), rng);
  for (const auto& s : train_split.samples) model.check_sample(s);

  TrainResult result;
  result.checkpoint = model.to_checkpoint(0.0, 0);

  auto params = model.named_parameters();
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  std::vector<AdamState> states;
  for (const auto& np : params) states.emplace_back(adam, np.param->value.shape());

  std::vector<std::size_t> order(train_split.samples.size());
  double best = -std::numeric_limits<double>::infinity();
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + config.batch_size);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      model.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        const QaSample& s = train_split.samples[order[i]];
        Graph g(true);
        auto scores = model.forward(g, s, table, Mode::train, &rng);
        Var ce = neg_log_at(scores.probs, s.label, kLogFloor);
        g.backward(ce, inv);
        if (!std::isfinite(ce[0])) numeric_failure(model, it, s.id);
        batch_loss += ce[0] * inv;
      }
      {
        Graph g(true);
        if (auto p = model.penalty(g)) {
          g.backward(*p);
          batch_loss += (*p)[0];
        }
      }
      if (!std::isfinite(batch_loss)) numeric_failure(model, it, "<penalty>");
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].param->grad.all_finite()) {
          throw NumericError("non-finite gradient at iteration " + std::to_string(it) + "; largest gradient in " +
                             largest_gradient_group(model));
        }
        adam_update(states[k], params[k].param->value, params[k].param->grad);
      }
      loss_sum += batch_loss;
      ++batches;
    }

    TrainLogEntry entry;
    entry.iteration = it;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    entry.val_accuracy = validate ? validate(model, it) : evaluate(model, val_split, table, config.eval_workers).accuracy.overall;
    entry.is_best = entry.val_accuracy > best;
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (entry.is_best) {
      best = entry.val_accuracy;
      result.checkpoint = model.to_checkpoint(best, it);
      if (!config.snapshot_path.empty()) save_checkpoint(config.snapshot_path, result.checkpoint);
    }
    result.log.entries.push_back(entry);
    if (progress) progress(entry);
  }
  if (config.max_iterations == 0 && !config.snapshot_path.empty()) {
    save_checkpoint(config.snapshot_path, result.checkpoint);
  }
  return result;
}

AccuracyBreakdown accuracy_breakdown(std::span<const OptionIndex> predictions, std::span<const OptionIndex> labels,
                                     std::span<const QuestionType> qtypes) {
  if (predictions.size() != labels.size() || labels.size() != qtypes.size()) {
    throw AlignmentError("predictions (" + std::to_string(predictions.size()) + "), labels (" +
                         std::to_string(labels.size()) + ") and qtypes (" + std::to_string(qtypes.size()) +
                         ") differ in length");
  }
  AccuracyBreakdown out;
  std::array<std::size_t, kQuestionTypes.size()> correct{};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto t = static_cast<std::size_t>(qtypes[i]);
    const bool ok = predictions[i] == labels[i];
    out.counts[t] += 1;
    correct[t] += ok;
    out.correct += ok;
  }
  out.total = predictions.size();
  out.overall = out.total ? static_cast<double>(out.correct) / static_cast<double>(out.total) : 0.0;
  for (std::size_t t = 0; t < out.by_type.size(); ++t) {
    if (out.counts[t]) out.by_type[t] = static_cast<double>(correct[t]) / static_cast<double>(out.counts[t]);
  }
  return out;
}

Evaluation evaluate(const Model& model, const DatasetSplit& split, const EmbeddingTable& table, std::size_t workers) {
  if (split.samples.empty()) throw ConfigError(std::string(split_name(split.name)) + " split is empty");
  model.check_table(table);
  const std::size_t n = split.samples.size();
  Evaluation out;
  out.predictions.assign(n, 0);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out.predictions[i] = predict(model.score(split.samples[i], table));
  };
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          run(n * w / workers, n * (w + 1) / workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<OptionIndex> labels;
  std::vector<QuestionType> qtypes;
  for (const auto& s : split.samples) {
    labels.push_back(s.label);
    qtypes.push_back(s.qtype);
  }
  out.accuracy = accuracy_breakdown(out.predictions, labels, qtypes);
  return out;
}

}  // namespace mcvqa
