#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcvqa/data.hpp"
#include "mcvqa/model.hpp"

namespace mcvqa {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  /// One iteration is one full pass over the training split.
  std::size_t max_iterations = 60;
  std::uint64_t seed = 1;
  /// Written each time validation accuracy improves; empty disables.
  std::filesystem::path snapshot_path;
  /// Threads used for validation.
  std::size_t eval_workers = 1;

  static TrainConfig from_variant(const ModelVariant& v);
  /// Rejects a negative or non-finite learning rate and an empty minibatch.
  void validate() const;
};

struct TrainLogEntry {
  std::size_t iteration = 0;
  /// Mean over minibatches of (mean cross-entropy + penalty).
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  bool is_best = false;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  /// Largest validation accuracy, 0 for an empty log.
  double best_val_accuracy() const;
};

/// Tab-separated "iteration loss val_acc is_best" with a header line. Wall
/// time is left out so identical runs give identical files.
std::string format_train_log(const TrainLog& log);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

/// Replaces full validation: receives the model after `iteration` and
/// returns its validation accuracy.
using ValidationHook = std::function<double(const Model& model, std::size_t iteration)>;
using ProgressHook = std::function<void(const TrainLogEntry& entry)>;

struct TrainResult {
  /// Best-validation snapshot; the initial parameters when no iteration ran.
  Checkpoint checkpoint;
  TrainLog log;
};

/// Minibatch Adam training with per-iteration validation. Returns the
/// snapshot with the strictly highest validation accuracy, never simply the
/// last one. Throws NumericError on a non-finite loss.
TrainResult train(const ModelVariant& variant, const ModelDims& dims, const EmbeddingTable& table,
                  const DatasetSplit& train_split, const DatasetSplit& val_split, const TrainConfig& config,
                  const ValidationHook& validate = {}, const ProgressHook& progress = {});

/// Per-qtype and overall accuracy. Question types absent from the split have
/// no value.
struct AccuracyBreakdown {
  std::array<std::optional<double>, kQuestionTypes.size()> by_type{};
  std::array<std::size_t, kQuestionTypes.size()> counts{};
  std::size_t correct = 0;
  std::size_t total = 0;
  double overall = 0.0;

  const std::optional<double>& operator[](QuestionType t) const { return by_type[static_cast<std::size_t>(t)]; }
};

/// Throws AlignmentError unless the three spans have equal length.
AccuracyBreakdown accuracy_breakdown(std::span<const OptionIndex> predictions, std::span<const OptionIndex> labels,
                                     std::span<const QuestionType> qtypes);

struct Evaluation {
  AccuracyBreakdown accuracy;
  std::vector<OptionIndex> predictions;
};

/// Scores every sample with dropout off. The result does not depend on
/// `workers`.
Evaluation evaluate(const Model& model, const DatasetSplit& split, const EmbeddingTable& table,
                    std::size_t workers = 1);

}  // namespace mcvqa
