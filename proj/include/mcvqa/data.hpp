#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcvqa/encoders.hpp"
#include "mcvqa/scoring.hpp"

namespace mcvqa {

/// Question categories in report column order.
enum class QuestionType { what, who, when, how, where, why };
inline constexpr std::array<QuestionType, 6> kQuestionTypes = {QuestionType::what, QuestionType::who,
                                                               QuestionType::when, QuestionType::how,
                                                               QuestionType::where, QuestionType::why};
const char* qtype_name(QuestionType t);
std::optional<QuestionType> parse_qtype(std::string_view s);

using ImagePtr = std::shared_ptr<const ImageGrid>;
using ImageFeatureMap = std::map<std::string, ImagePtr, std::less<>>;

struct QaSample {
  std::string id;
  TokenSequence question;
  std::array<TokenSequence, kNumCandidates> answers;
  std::string image_ref;
  ImagePtr image;
  OptionIndex label = 0;
  QuestionType qtype = QuestionType::what;
};

enum class SplitName { train, val, test };
const char* split_name(SplitName s);

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<QaSample> samples;
};

inline constexpr std::size_t kDefaultMaxLength = 32;

/// Lowercases and splits on every non-alphanumeric character.
std::vector<std::string> tokenize(std::string_view text);

/// Parses a QA record file (one tab-separated record per line:
/// id, qtype, image_ref, label, question, answer0..answer3).
DatasetSplit load_dataset(const std::filesystem::path& path, SplitName name, const EmbeddingTable& table,
                          const ImageFeatureMap& images, std::size_t max_length = kDefaultMaxLength);
void write_dataset(const std::filesystem::path& path, const DatasetSplit& split, const EmbeddingTable& table);

/// Throws SplitContaminationError if two splits share an image_ref.
void check_disjoint(std::span<const DatasetSplit> splits);

/// Text format "token v1 ... vd", one token per line. `expected_dim == 0`
/// takes the dimension from the first line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t expected_dim = 0);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

ImageFeatureMap load_image_features(const std::filesystem::path& path);
void write_image_features(const std::filesystem::path& path, const ImageFeatureMap& images);

struct PaddedBatch {
  std::vector<TokenSequence> sequences;
  std::vector<std::vector<bool>> mask;  // true marks a real token
};

/// Zero-prefix pads every sequence to `length`; longer input is an error.
PaddedBatch pad_and_mask(std::span<const std::vector<TokenId>> batch, std::size_t length);
TokenSequence pad_sequence(std::span<const TokenId> ids, std::size_t length);

}  // namespace mcvqa
