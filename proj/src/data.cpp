#include "mcvqa/data.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

constexpr std::string_view kImageMagic = "VQIF";
constexpr std::uint32_t kImageVersion = 1;

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const TokenSequence& seq, const EmbeddingTable& table) {
  std::string out;
  for (TokenId id : seq.tokens()) {
    if (!out.empty()) out += ' ';
    const auto& tok = table.token(id);
    out += tok.empty() ? "oov" : tok;
  }
  return out;
}

}  // namespace

const char* qtype_name(QuestionType t) {
  switch (t) {
    case QuestionType::what: return "what";
    case QuestionType::who: return "who";
    case QuestionType::when: return "when";
    case QuestionType::how: return "how";
    case QuestionType::where: return "where";
    case QuestionType::why: return "why";
  }
  return "?";
}

std::optional<QuestionType> parse_qtype(std::string_view s) {
  for (auto t : kQuestionTypes)
    if (s == qtype_name(t)) return t;
  return std::nullopt;
}

const char* split_name(SplitName s) {
  switch (s) {
    case SplitName::train: return "train";
    case SplitName::val: return "val";
    case SplitName::test: return "test";
  }
  return "?";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TokenSequence pad_sequence(std::span<const TokenId> ids, std::size_t length) {
  if (ids.size() > length) {
    throw LengthError("sequence of length " + std::to_string(ids.size()) + " exceeds maximum " +
                      std::to_string(length));
  }
  TokenSequence seq;
  seq.ids.assign(length - ids.size(), kPadId);
  seq.ids.insert(seq.ids.end(), ids.begin(), ids.end());
  return seq;
}

PaddedBatch pad_and_mask(std::span<const std::vector<TokenId>> batch, std::size_t length) {
  PaddedBatch out;
  for (const auto& ids : batch) {
    out.sequences.push_back(pad_sequence(ids, length));
    std::vector<bool> m(length, false);
    for (std::size_t i = length - ids.size(); i < length; ++i) m[i] = true;
    out.mask.push_back(std::move(m));
  }
  return out;
}

DatasetSplit load_dataset(const std::filesystem::path& path, SplitName name, const EmbeddingTable& table,
                          const ImageFeatureMap& images, std::size_t max_length) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset " + path.string());
  const std::string src = path.string();
  DatasetSplit split{name, {}};
  std::string line;
  std::size_t lineno = 0;
  auto to_sequence = [&](std::string_view text, const char* what) {
    auto words = tokenize(text);
    if (words.empty()) throw ParseError(src, lineno, std::string(what) + " has no tokens");
    auto ids = table.encode(words);
    if (ids.size() > max_length) {
      throw LengthError(src + ":" + std::to_string(lineno) + ": " + what + " has " + std::to_string(ids.size()) +
                        " tokens, maximum is " + std::to_string(max_length));
    }
    return pad_sequence(ids, max_length);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto f = split_on(line, '\t');
    if (f.size() != 9) {
      throw ParseError(src, lineno,
                       "expected 9 tab-separated fields (id, qtype, image, label, question, 4 answers), got " +
                           std::to_string(f.size()));
    }
    QaSample s;
    s.id = std::string(f[0]);
    if (s.id.empty()) throw ParseError(src, lineno, "empty question id");
    auto qt = parse_qtype(f[1]);
    if (!qt) throw ParseError(src, lineno, "unknown question type '" + std::string(f[1]) + "'");
    s.qtype = *qt;
    s.image_ref = std::string(f[2]);
    auto img = images.find(s.image_ref);
    if (img == images.end()) {
      throw MissingImageError(src + ":" + std::to_string(lineno) + ": no image features for '" + s.image_ref + "'");
    }
    s.image = img->second;
    int label = -1;
    if (!io::parse_int(f[3], label) || label < 0 || label >= static_cast<int>(kNumCandidates)) {
      throw ParseError(src, lineno, "label must be an integer in 0..3, got '" + std::string(f[3]) + "'");
    }
    s.label = static_cast<OptionIndex>(label);
    s.question = to_sequence(f[4], "question");
    for (std::size_t k = 0; k < kNumCandidates; ++k) s.answers[k] = to_sequence(f[5 + k], "answer");
    split.samples.push_back(std::move(s));
  }
  return split;
}

void write_dataset(const std::filesystem::path& path, const DatasetSplit& split, const EmbeddingTable& table) {
  std::string out;
  for (const auto& s : split.samples) {
    out += s.id + '\t' + qtype_name(s.qtype) + '\t' + s.image_ref + '\t' + std::to_string(int(s.label)) + '\t' +
           join_tokens(s.question, table);
    for (const auto& a : s.answers) out += '\t' + join_tokens(a, table);
    out += '\n';
  }
  io::write_file(path, out);
}

void check_disjoint(std::span<const DatasetSplit> splits) {
  std::map<std::string, SplitName, std::less<>> owner;
  for (const auto& split : splits) {
    for (const auto& s : split.samples) {
      auto [it, inserted] = owner.emplace(s.image_ref, split.name);
      if (!inserted && it->second != split.name) {
        throw SplitContaminationError("image '" + s.image_ref + "' appears in both " + split_name(it->second) +
                                      " and " + split_name(split.name));
      }
    }
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embeddings " + path.string());
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;
  std::unordered_set<std::string> seen;
  std::size_t dim = expected_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = split_ws(line);
    if (f.empty()) continue;
    const std::size_t values = f.size() - 1;
    if (dim == 0) dim = values;
    if (values != dim || dim == 0) {
      throw DimensionError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                           " values, got " + std::to_string(values));
    }
    std::string tok(f[0]);
    if (!seen.insert(tok).second) {
      throw DuplicateTokenError(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" + tok + "'");
    }
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!io::parse_double(f[i + 1], v[i])) {
        throw ParseError(path.string(), lineno, "bad number '" + std::string(f[i + 1]) + "'");
      }
    }
    tokens.push_back(std::move(tok));
    vectors.push_back(std::move(v));
  }
  if (dim == 0) throw DimensionError(path.string() + ": empty embedding file and no expected dimension");
  return EmbeddingTable(dim, std::move(tokens), vectors);
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::string out;
  for (TokenId id = 1; id < table.oov_id(); ++id) {
    out += table.token(id);
    for (double x : table.row(id).values()) out += ' ' + io::format_double(x);
    out += '\n';
  }
  io::write_file(path, out);
}

ImageFeatureMap load_image_features(const std::filesystem::path& path) {
  const std::string data = io::read_file(path);
  io::ByteReader r(data, path.string());
  if (r.bytes(kImageMagic.size()) != kImageMagic) throw CorruptFileError(path.string() + ": bad image-feature magic");
  const auto version = r.u32();
  if (version != kImageVersion) {
    throw VersionMismatchError(path.string() + ": image-feature version " + std::to_string(version) +
                               ", expected " + std::to_string(kImageVersion));
  }
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  const std::size_t channels = r.u32();
  const std::uint64_t count = r.u64();
  if (rows != cols || rows == 0 || channels == 0) {
    throw ShapeMismatchError(path.string() + ": unsupported grid " + std::to_string(rows) + "x" +
                             std::to_string(cols) + "x" + std::to_string(channels));
  }
  const std::size_t n = rows * cols * channels;
  ImageFeatureMap out;
  for (std::uint64_t e = 0; e < count; ++e) {
    std::string ref = r.str32();
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    if (!out.emplace(ref, std::make_shared<const ImageGrid>(rows, channels, std::move(values))).second) {
      throw CorruptFileError(path.string() + ": duplicate image ref '" + ref + "'");
    }
  }
  if (!r.at_end()) throw CorruptFileError(path.string() + ": trailing bytes after last entry");
  return out;
}

void write_image_features(const std::filesystem::path& path, const ImageFeatureMap& images) {
  io::ByteWriter w;
  w.bytes(kImageMagic);
  w.u32(kImageVersion);
  std::size_t g = 1, c = 1;
  if (!images.empty()) {
    g = images.begin()->second->grid();
    c = images.begin()->second->channels();
  }
  w.u32(static_cast<std::uint32_t>(g));
  w.u32(static_cast<std::uint32_t>(g));
  w.u32(static_cast<std::uint32_t>(c));
  w.u64(images.size());
  for (const auto& [ref, img] : images) {
    if (img->grid() != g || img->channels() != c) {
      throw ShapeMismatchError("image '" + ref + "' does not share the declared grid shape");
    }
    w.str32(ref);
    for (double x : img->features.values()) w.f64(x);
  }
  io::write_file(path, w.buffer());
}

}  // namespace mcvqa
