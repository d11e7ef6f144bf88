#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcvqa/data.hpp"
#include "mcvqa/training.hpp"

namespace mcvqa {

/// Chosen option of every model on every question, plus the ground truth.
struct VoteMatrix {
  std::vector<std::string> model_names;
  std::vector<std::string> question_ids;
  std::vector<QuestionType> qtypes;
  std::vector<OptionIndex> labels;
  /// votes[q][m]
  std::vector<std::vector<OptionIndex>> votes;

  std::size_t questions() const { return votes.size(); }
  std::size_t models() const { return model_names.size(); }
  bool correct(std::size_t q, std::size_t m) const { return votes[q][m] == labels[q]; }
  std::size_t correct_count(std::size_t q) const;
  std::vector<OptionIndex> column(std::size_t m) const;

  /// Single-model matrix from an evaluation of `split`.
  static VoteMatrix from_predictions(std::string model_name, const DatasetSplit& split,
                                     std::span<const OptionIndex> predictions);
  /// Appends `other`'s models. Question ids, labels and qtypes must match
  /// row for row, else AlignmentError.
  void append_models(const VoteMatrix& other);
  /// Throws AlignmentError for ragged rows and DimensionError for entries ≥ 4.
  void validate() const;
};

/// Option with the most votes; ties go to the lowest option index.
OptionIndex majority_vote(std::span<const OptionIndex> row);
std::vector<OptionIndex> ensemble_predictions(const VoteMatrix& votes);

enum class Difficulty { hard, fair, easy };
const char* difficulty_name(Difficulty d);
/// Hard below 0.3·M correct models, easy above 0.7·M, fair otherwise.
Difficulty classify_difficulty(std::size_t correct, std::size_t models);

struct DifficultyRow {
  std::string name;  // qtype name or "overall"
  std::size_t questions = 0;
  double hard = 0.0;
  double fair = 0.0;
  double easy = 0.0;
};

struct BiasReport {
  /// One row per question type present, in column order, then "overall".
  std::vector<DifficultyRow> rows;
  double all_correct = 0.0;
  double none_correct = 0.0;
  /// histogram[k] = questions answered correctly by exactly k models.
  std::vector<std::size_t> correct_histogram;
  /// Questions answered correctly by exactly one model.
  std::size_t single_expert_questions = 0;
  /// Per model: its share of the single-expert questions (0 when there are none).
  std::vector<double> sole_expert;
  std::vector<std::string> model_names;
};

/// Throws ConfigError on an empty matrix.
BiasReport bias_report(const VoteMatrix& votes);

struct AccuracyRow {
  std::string name;
  AccuracyBreakdown accuracy;
};

/// One row per model followed by an "ensemble" row from majority_vote.
std::vector<AccuracyRow> accuracy_table(const VoteMatrix& votes);

/// Tab-separated: model, what, who, when, how, where, why, overall. Absent
/// question types print "-".
std::string format_accuracy_table(std::span<const AccuracyRow> rows);
std::string format_bias_report(const BiasReport& report);
/// "correct_models\tquestions\tfraction" lines.
std::string format_correct_histogram(const BiasReport& report);
/// Static bar chart of the correct-count distribution.
std::string correct_histogram_svg(const BiasReport& report);

/// Header "#" line with the model names, then per question:
/// id, qtype, label, one chosen index per model (tab-separated).
std::string format_prediction_dump(const VoteMatrix& votes);
void write_prediction_dump(const std::filesystem::path& path, const VoteMatrix& votes);
VoteMatrix parse_prediction_dump(std::string_view text, const std::string& source = "<dump>");
VoteMatrix read_prediction_dump(const std::filesystem::path& path);

}  // namespace mcvqa
