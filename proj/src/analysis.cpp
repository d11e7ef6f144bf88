#include "mcvqa/analysis.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double ratio(std::size_t num, std::size_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    auto tab = line.find('\t');
    out.push_back(line.substr(0, tab));
    if (tab == std::string_view::npos) break;
    line.remove_prefix(tab + 1);
  }
  return out;
}

}  // namespace

std::size_t VoteMatrix::correct_count(std::size_t q) const {
  std::size_t n = 0;
  for (std::size_t m = 0; m < votes[q].size(); ++m) n += correct(q, m);
  return n;
}

std::vector<OptionIndex> VoteMatrix::column(std::size_t m) const {
  std::vector<OptionIndex> out;
  out.reserve(votes.size());
  for (const auto& row : votes) out.push_back(row.at(m));
  return out;
}

VoteMatrix VoteMatrix::from_predictions(std::string model_name, const DatasetSplit& split,
                                        std::span<const OptionIndex> predictions) {
  if (predictions.size() != split.samples.size()) {
    throw AlignmentError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(split.samples.size()) + " questions");
  }
  VoteMatrix v;
  v.model_names.push_back(std::move(model_name));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& s = split.samples[i];
    v.question_ids.push_back(s.id);
    v.qtypes.push_back(s.qtype);
    v.labels.push_back(s.label);
    v.votes.push_back({predictions[i]});
  }
  return v;
}

void VoteMatrix::append_models(const VoteMatrix& other) {
  if (models() == 0 && questions() == 0) {
    *this = other;
    return;
  }
  if (other.questions() != questions()) {
    throw AlignmentError("prediction sets cover " + std::to_string(questions()) + " and " +
                         std::to_string(other.questions()) + " questions");
  }
  for (std::size_t q = 0; q < questions(); ++q) {
    if (other.question_ids[q] != question_ids[q] || other.labels[q] != labels[q] || other.qtypes[q] != qtypes[q]) {
      throw AlignmentError("prediction sets disagree at row " + std::to_string(q + 1) + " ('" + question_ids[q] +
                           "' vs '" + other.question_ids[q] + "')");
    }
    votes[q].insert(votes[q].end(), other.votes[q].begin(), other.votes[q].end());
  }
  model_names.insert(model_names.end(), other.model_names.begin(), other.model_names.end());
}

void VoteMatrix::validate() const {
  const std::size_t n = votes.size();
  if (question_ids.size() != n || qtypes.size() != n || labels.size() != n) {
    throw AlignmentError("vote matrix metadata does not match its row count");
  }
  for (std::size_t q = 0; q < n; ++q) {
    if (votes[q].size() != models()) {
      throw AlignmentError("row " + std::to_string(q) + " has " + std::to_string(votes[q].size()) + " votes, expected " +
                           std::to_string(models()));
    }
    if (labels[q] >= kNumCandidates) throw DimensionError("label out of range at row " + std::to_string(q));
    for (auto v : votes[q])
      if (v >= kNumCandidates) throw DimensionError("vote out of range at row " + std::to_string(q));
  }
}

OptionIndex majority_vote(std::span<const OptionIndex> row) {
  if (row.empty()) throw DimensionError("majority vote needs at least one model");
  std::array<std::size_t, kNumCandidates> counts{};
  for (auto v : row) {
    if (v >= kNumCandidates) throw DimensionError("vote out of range");
    counts[v] += 1;
  }
  return static_cast<OptionIndex>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<OptionIndex> ensemble_predictions(const VoteMatrix& votes) {
  std::vector<OptionIndex> out;
  out.reserve(votes.questions());
  for (const auto& row : votes.votes) out.push_back(majority_vote(row));
  return out;
}

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::hard: return "hard";
    case Difficulty::fair: return "fair";
    case Difficulty::easy: return "easy";
  }
  return "?";
}

Difficulty classify_difficulty(std::size_t correct, std::size_t models) {
  if (10 * correct < 3 * models) return Difficulty::hard;
  if (10 * correct > 7 * models) return Difficulty::easy;
  return Difficulty::fair;
}

BiasReport bias_report(const VoteMatrix& votes) {
  votes.validate();
  if (votes.questions() == 0 || votes.models() == 0) throw ConfigError("bias report needs a non-empty vote matrix");
  const std::size_t M = votes.models();
  BiasReport r;
  r.model_names = votes.model_names;
  r.correct_histogram.assign(M + 1, 0);
  std::vector<std::size_t> sole(M, 0);
  std::array<std::array<std::size_t, 3>, kQuestionTypes.size()> per_type{};
  std::array<std::size_t, 3> total{};
  for (std::size_t q = 0; q < votes.questions(); ++q) {
    const std::size_t k = votes.correct_count(q);
    r.correct_histogram[k] += 1;
    const auto d = static_cast<std::size_t>(classify_difficulty(k, M));
    per_type[static_cast<std::size_t>(votes.qtypes[q])][d] += 1;
    total[d] += 1;
    if (k == 1) {
      r.single_expert_questions += 1;
      for (std::size_t m = 0; m < M; ++m)
        if (votes.correct(q, m)) sole[m] += 1;
    }
  }
  auto row = [](std::string name, const std::array<std::size_t, 3>& c) {
    DifficultyRow out;
    out.name = std::move(name);
    out.questions = c[0] + c[1] + c[2];
    out.hard = ratio(c[0], out.questions);
    out.fair = ratio(c[1], out.questions);
    out.easy = ratio(c[2], out.questions);
    return out;
  };
  for (auto t : kQuestionTypes) {
    const auto& c = per_type[static_cast<std::size_t>(t)];
    if (c[0] + c[1] + c[2]) r.rows.push_back(row(qtype_name(t), c));
  }
  r.rows.push_back(row("overall", total));
  r.all_correct = ratio(r.correct_histogram[M], votes.questions());
  r.none_correct = ratio(r.correct_histogram[0], votes.questions());
  for (std::size_t m = 0; m < M; ++m) r.sole_expert.push_back(ratio(sole[m], r.single_expert_questions));
  return r;
}

std::vector<AccuracyRow> accuracy_table(const VoteMatrix& votes) {
  votes.validate();
  std::vector<AccuracyRow> rows;
  for (std::size_t m = 0; m < votes.models(); ++m) {
    rows.push_back({votes.model_names[m], accuracy_breakdown(votes.column(m), votes.labels, votes.qtypes)});
  }
  if (votes.models() > 0) {
    rows.push_back({"ensemble", accuracy_breakdown(ensemble_predictions(votes), votes.labels, votes.qtypes)});
  }
  return rows;
}

std::string format_accuracy_table(std::span<const AccuracyRow> rows) {
  std::string out = "model";
  for (auto t : kQuestionTypes) out += std::string("\t") + qtype_name(t);
  out += "\toverall\n";
  for (const auto& r : rows) {
    out += r.name;
    for (const auto& v : r.accuracy.by_type) out += "\t" + (v ? fixed(*v) : std::string("-"));
    out += "\t" + fixed(r.accuracy.overall) + "\n";
  }
  return out;
}

std::string format_bias_report(const BiasReport& report) {
  std::string out = "qtype\tquestions\thard\tfair\teasy\n";
  for (const auto& r : report.rows) {
    out += r.name + "\t" + std::to_string(r.questions) + "\t" + fixed(r.hard) + "\t" + fixed(r.fair) + "\t" +
           fixed(r.easy) + "\n";
  }
  out += "\nall_correct\t" + fixed(report.all_correct) + "\n";
  out += "none_correct\t" + fixed(report.none_correct) + "\n";
  out += "\nsingle_expert_questions\t" + std::to_string(report.single_expert_questions) + "\n";
  out += "model\tsole_expert\n";
  for (std::size_t m = 0; m < report.model_names.size(); ++m) {
    out += report.model_names[m] + "\t" + fixed(report.sole_expert[m]) + "\n";
  }
  return out;
}

std::string format_correct_histogram(const BiasReport& report) {
  std::size_t total = 0;
  for (auto c : report.correct_histogram) total += c;
  std::string out = "correct_models\tquestions\tfraction\n";
  for (std::size_t k = 0; k < report.correct_histogram.size(); ++k) {
    out += std::to_string(k) + "\t" + std::to_string(report.correct_histogram[k]) + "\t" +
           fixed(ratio(report.correct_histogram[k], total)) + "\n";
  }
  return out;
}

std::string correct_histogram_svg(const BiasReport& report) {
  const auto& h = report.correct_histogram;
  std::size_t total = 0, peak = 1;
  for (auto c : h) {
    total += c;
    peak = std::max(peak, c);
  }
  const int bar = 40, gap = 10, height = 200, margin = 30;
  const int width = margin * 2 + static_cast<int>(h.size()) * (bar + gap);
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height + 2 * margin) + "\">\n";
  out += "<text x=\"" + std::to_string(margin) + "\" y=\"18\" font-size=\"12\">questions by number of correct models (n=" +
         std::to_string(total) + ")</text>\n";
  for (std::size_t k = 0; k < h.size(); ++k) {
    const int bh = static_cast<int>(static_cast<double>(height) * static_cast<double>(h[k]) / static_cast<double>(peak));
    const int x = margin + static_cast<int>(k) * (bar + gap);
    const int y = margin + height - bh;
    out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(bar) +
           "\" height=\"" + std::to_string(bh) + "\" fill=\"#4878a8\"/>\n";
    out += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(margin + height + 14) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + std::to_string(k) + "</text>\n";
    out += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(y - 3) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + fixed(ratio(h[k], total)) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string format_prediction_dump(const VoteMatrix& votes) {
  votes.validate();
  std::string out = "#";
  for (const auto& name : votes.model_names) out += "\t" + name;
  out += "\n";
  for (std::size_t q = 0; q < votes.questions(); ++q) {
    out += votes.question_ids[q] + "\t" + qtype_name(votes.qtypes[q]) + "\t" + std::to_string(votes.labels[q]);
    for (auto v : votes.votes[q]) out += "\t" + std::to_string(v);
    out += "\n";
  }
  return out;
}

void write_prediction_dump(const std::filesystem::path& path, const VoteMatrix& votes) {
  io::write_file(path, format_prediction_dump(votes));
}

VoteMatrix parse_prediction_dump(std::string_view text, const std::string& source) {
  VoteMatrix v;
  std::size_t lineno = 0;
  bool header = false;
  while (!text.empty()) {
    ++lineno;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (!header) {
      if (fields[0] != "#" || fields.size() < 2) throw ParseError(source, lineno, "expected '#' header naming the models");
      for (std::size_t i = 1; i < fields.size(); ++i) v.model_names.emplace_back(fields[i]);
      header = true;
      continue;
    }
    if (fields.size() != 3 + v.models()) {
      throw ParseError(source, lineno,
                       "expected " + std::to_string(3 + v.models()) + " fields, got " + std::to_string(fields.size()));
    }
    auto qt = parse_qtype(fields[1]);
    if (!qt) throw ParseError(source, lineno, "unknown question type '" + std::string(fields[1]) + "'");
    auto option = [&](std::string_view f) {
      unsigned value = 0;
      if (!io::parse_int(f, value) || value >= kNumCandidates) {
        throw ParseError(source, lineno, "option index must be 0..3, got '" + std::string(f) + "'");
      }
      return static_cast<OptionIndex>(value);
    };
    v.question_ids.emplace_back(fields[0]);
    v.qtypes.push_back(*qt);
    v.labels.push_back(option(fields[2]));
    std::vector<OptionIndex> row;
    for (std::size_t i = 3; i < fields.size(); ++i) row.push_back(option(fields[i]));
    v.votes.push_back(std::move(row));
  }
  if (!header) throw ParseError(source, lineno, "empty prediction dump");
  return v;
}

VoteMatrix read_prediction_dump(const std::filesystem::path& path) {
  return parse_prediction_dump(io::read_file(path), path.string());
}

}  // namespace mcvqa
