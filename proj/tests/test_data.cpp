#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mcvqa/data.hpp"
#include "mcvqa/errors.hpp"
#include "mcvqa/synthetic.hpp"

using namespace mcvqa;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("mcvqa_test_data_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const std::string& f) const { return path_ / f; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EmbeddingTable small_table() {
  return EmbeddingTable(2, {"what", "is", "red", "blue", "green", "black", "cat"},
                        {{1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {2, 2}, {3, 1}});
}

ImageFeatureMap small_images() {
  ImageFeatureMap m;
  m["img1"] = std::make_shared<const ImageGrid>(1, 2, std::vector<double>{0.5, 1.5});
  m["img2"] = std::make_shared<const ImageGrid>(1, 2, std::vector<double>{-1.0, 2.0});
  return m;
}

const char* kThreeRecords =
    "q1\twhat\timg1\t0\tWhat is red?\tred\tblue\tgreen\tblack\n"
    "q2\twho\timg2\t3\tis cat\tblue cat\tred\tgreen\tblack\n"
    "q3\twhy\timg1\t1\tWHAT, is?\tgreen\tred red\tzebra\tcat\n";

}  // namespace

TEST(Tokenize, LowercaseAndSplit) {
  EXPECT_EQ(tokenize("What's the CAT-color?"), (std::vector<std::string>{"what", "s", "the", "cat", "color"}));
  EXPECT_TRUE(tokenize(" ,;! ").empty());
}

TEST(LoadDataset, ThreeLines) {
  TempDir dir("three");
  write_text(dir / "train.tsv", kThreeRecords);
  auto table = small_table();
  auto split = load_dataset(dir / "train.tsv", SplitName::train, table, small_images(), 6);
  ASSERT_EQ(split.samples.size(), 3u);
  const auto& s = split.samples[0];
  EXPECT_EQ(s.id, "q1");
  EXPECT_EQ(s.qtype, QuestionType::what);
  EXPECT_EQ(s.image_ref, "img1");
  EXPECT_EQ(s.question.ids, (std::vector<TokenId>{0, 0, 0, 1, 2, 3}));
  EXPECT_EQ(split.samples[1].label, 3);
  EXPECT_EQ(split.samples[2].qtype, QuestionType::why);
  EXPECT_EQ(split.samples[2].answers[2].tokens().back(), table.oov_id());
  EXPECT_EQ(split.samples[2].image.get(), split.samples[0].image.get());
}

TEST(LoadDataset, ThreeAnswersIsParseErrorNamingLine) {
  TempDir dir("three_answers");
  write_text(dir / "bad.tsv", std::string(kThreeRecords) + "q4\twhat\timg1\t0\twhat\tred\tblue\tgreen\n");
  try {
    load_dataset(dir / "bad.tsv", SplitName::train, small_table(), small_images());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos);
  }
}

TEST(LoadDataset, RecordErrors) {
  TempDir dir("errors");
  auto table = small_table();
  auto images = small_images();
  write_text(dir / "label.tsv", "q1\twhat\timg1\t4\twhat\tred\tblue\tgreen\tblack\n");
  EXPECT_THROW(load_dataset(dir / "label.tsv", SplitName::train, table, images), ParseError);
  write_text(dir / "qtype.tsv", "q1\twhich\timg1\t0\twhat\tred\tblue\tgreen\tblack\n");
  EXPECT_THROW(load_dataset(dir / "qtype.tsv", SplitName::train, table, images), ParseError);
  write_text(dir / "image.tsv", "q1\twhat\timg9\t0\twhat\tred\tblue\tgreen\tblack\n");
  EXPECT_THROW(load_dataset(dir / "image.tsv", SplitName::train, table, images), MissingImageError);
  write_text(dir / "long.tsv", "q1\twhat\timg1\t0\twhat is red blue\tred\tblue\tgreen\tblack\n");
  EXPECT_THROW(load_dataset(dir / "long.tsv", SplitName::train, table, images, 3), LengthError);
  EXPECT_THROW(load_dataset(dir / "missing.tsv", SplitName::train, table, images), LoadError);
}

TEST(LoadDataset, RewriteRoundTrips) {
  TempDir dir("rewrite");
  write_text(dir / "a.tsv", kThreeRecords);
  auto table = small_table();
  auto images = small_images();
  auto a = load_dataset(dir / "a.tsv", SplitName::val, table, images, 8);
  write_dataset(dir / "b.tsv", a, table);
  auto b = load_dataset(dir / "b.tsv", SplitName::val, table, images, 8);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_EQ(a.samples[i].question, b.samples[i].question);
    EXPECT_EQ(a.samples[i].answers, b.samples[i].answers);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    EXPECT_EQ(a.samples[i].qtype, b.samples[i].qtype);
    EXPECT_EQ(a.samples[i].image_ref, b.samples[i].image_ref);
  }
  write_dataset(dir / "c.tsv", b, table);
  EXPECT_EQ(read_bytes(dir / "b.tsv"), read_bytes(dir / "c.tsv"));
}

TEST(CheckDisjoint, SharedImageIsContamination) {
  TempDir dir("disjoint");
  write_text(dir / "train.tsv", kThreeRecords);
  write_text(dir / "test.tsv", "t1\twhat\timg2\t0\twhat\tred\tblue\tgreen\tblack\n");
  auto table = small_table();
  auto images = small_images();
  std::vector<DatasetSplit> splits{load_dataset(dir / "train.tsv", SplitName::train, table, images),
                                   load_dataset(dir / "test.tsv", SplitName::test, table, images)};
  EXPECT_THROW(check_disjoint(splits), SplitContaminationError);
  splits[1].samples.clear();
  EXPECT_NO_THROW(check_disjoint(splits));
}

TEST(LoadEmbeddings, Layout) {
  TempDir dir("emb");
  write_text(dir / "e.txt", "cat 1 2 3\ndog 4 5 6\n");
  auto t = load_embeddings(dir / "e.txt", 3);
  EXPECT_EQ(t.vocab_size(), 4u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(t.row(0).values(), (Vector{0, 0, 0}));
  EXPECT_EQ(t.row(t.lookup("dog")).values(), (Vector{4, 5, 6}));
  EXPECT_EQ(t.lookup("emu"), 3);
}

TEST(LoadEmbeddings, ShortLineIsDimensionError) {
  TempDir dir("emb_dim");
  write_text(dir / "e.txt", "cat 1 2 3\ndog 4 5\n");
  EXPECT_THROW(load_embeddings(dir / "e.txt", 3), DimensionError);
  EXPECT_THROW(load_embeddings(dir / "e.txt"), DimensionError);
  write_text(dir / "f.txt", "cat 1 2 3\n");
  EXPECT_THROW(load_embeddings(dir / "f.txt", 4), DimensionError);
}

TEST(LoadEmbeddings, DuplicateToken) {
  TempDir dir("emb_dup");
  write_text(dir / "e.txt", "cat 1 2\ndog 3 4\ncat 5 6\n");
  EXPECT_THROW(load_embeddings(dir / "e.txt", 2), DuplicateTokenError);
}

TEST(LoadEmbeddings, RoundTrip) {
  TempDir dir("emb_rt");
  auto t = small_table();
  write_embeddings(dir / "e.txt", t);
  auto u = load_embeddings(dir / "e.txt", 2);
  EXPECT_EQ(u.fingerprint(), t.fingerprint());
}

TEST(ImageFeatures, SevenBySevenBy2048) {
  TempDir dir("img_big");
  std::vector<double> v(7 * 7 * 2048);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 97) / 7.0;
  ImageFeatureMap m;
  m["a"] = std::make_shared<const ImageGrid>(7, 2048, v);
  write_image_features(dir / "f.bin", m);
  auto loaded = load_image_features(dir / "f.bin");
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded.at("a")->features.size(), 100352u);
  EXPECT_EQ(loaded.at("a")->features.values(), v);
}

TEST(ImageFeatures, TruncatedEntry) {
  TempDir dir("img_trunc");
  write_image_features(dir / "f.bin", small_images());
  auto bytes = read_bytes(dir / "f.bin");
  write_text(dir / "g.bin", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_image_features(dir / "g.bin"), TruncatedFileError);
}

TEST(ImageFeatures, EmptyFileWithZeroCount) {
  TempDir dir("img_empty");
  write_image_features(dir / "f.bin", {});
  EXPECT_TRUE(load_image_features(dir / "f.bin").empty());
}

TEST(ImageFeatures, HeaderErrors) {
  TempDir dir("img_header");
  write_image_features(dir / "f.bin", small_images());
  auto bytes = read_bytes(dir / "f.bin");
  auto magic = bytes;
  magic[0] = 'Z';
  write_text(dir / "m.bin", magic);
  EXPECT_THROW(load_image_features(dir / "m.bin"), CorruptFileError);
  auto version = bytes;
  version[4] = 2;
  write_text(dir / "v.bin", version);
  EXPECT_THROW(load_image_features(dir / "v.bin"), VersionMismatchError);
  ImageFeatureMap mixed = small_images();
  mixed["img3"] = std::make_shared<const ImageGrid>(2, 2, std::vector<double>(8, 0.0));
  EXPECT_THROW(write_image_features(dir / "x.bin", mixed), ShapeMismatchError);
}

TEST(PadAndMask, Examples) {
  std::vector<std::vector<TokenId>> batch{{3, 4}, {1, 2, 3, 4}, {7, 8, 9, 10, 11}};
  auto p = pad_and_mask(std::span(batch).first(2), 4);
  EXPECT_EQ(p.sequences[0].ids, (std::vector<TokenId>{0, 0, 3, 4}));
  EXPECT_EQ(p.mask[0], (std::vector<bool>{false, false, true, true}));
  EXPECT_EQ(p.sequences[1].ids, batch[1]);
  EXPECT_EQ(p.mask[1], std::vector<bool>(4, true));
  EXPECT_THROW(pad_and_mask(batch, 4), LengthError);
}

TEST(Synthetic, OracleAnswerAppearsExactlyOnce) {
  SyntheticTaskSpec spec;
  spec.train = 400;
  spec.val = 100;
  spec.test = 100;
  spec.seed = 3;
  auto data = generate_synthetic(spec);
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    for (const auto& s : split->samples) {
      const auto oracle = synthetic_oracle(s, data.table, spec);
      int hits = 0;
      for (std::size_t k = 0; k < kNumCandidates; ++k) {
        ASSERT_EQ(s.answers[k].tokens().size(), 1u);
        if (data.table.token(s.answers[k].tokens()[0]) == oracle) {
          ++hits;
          EXPECT_EQ(k, s.label);
        }
      }
      EXPECT_EQ(hits, 1) << s.id;
    }
  }
}

TEST(Synthetic, CellOnlyImagesShareOneBag) {
  SyntheticTaskSpec spec;
  spec.cell_fraction = 1.0;
  spec.train = 300;
  spec.val = 50;
  spec.test = 50;
  auto data = generate_synthetic(spec);
  const auto first = bag_of_images(*data.images.begin()->second);
  for (const auto& [ref, img] : data.images) EXPECT_EQ(bag_of_images(*img), first) << ref;
  for (const auto& s : data.train.samples) EXPECT_EQ(bag_of_images(*s.image), first);
}

TEST(Synthetic, MajorityOnlySolvableFromBag) {
  SyntheticTaskSpec spec;
  spec.cell_fraction = 0.0;
  spec.train = 300;
  spec.val = 50;
  spec.test = 50;
  auto data = generate_synthetic(spec);
  const auto& names = synthetic_color_names();
  for (const auto& s : data.train.samples) {
    auto bag = bag_of_images(*s.image);
    auto best = std::max_element(bag.begin(), bag.begin() + spec.colors) - bag.begin();
    for (std::size_t col = 0; col < spec.colors; ++col)
      if (static_cast<std::ptrdiff_t>(col) != best) EXPECT_LT(bag[col], bag[best]);
    EXPECT_EQ(data.table.token(s.answers[s.label].tokens()[0]), names[best]);
  }
}

TEST(Synthetic, SplitsAreImageDisjoint) {
  auto data = generate_synthetic(SyntheticTaskSpec{});
  std::vector<DatasetSplit> splits{data.train, data.val, data.test};
  EXPECT_NO_THROW(check_disjoint(splits));
  EXPECT_EQ(data.train.samples.size(), 4000u);
  EXPECT_EQ(data.val.samples.size(), 1000u);
  EXPECT_EQ(data.test.samples.size(), 1000u);
}

TEST(Synthetic, SameSeedByteIdentical) {
  TempDir a("syn_a"), b("syn_b"), c("syn_c");
  SyntheticTaskSpec spec;
  spec.train = 200;
  spec.val = 50;
  spec.test = 50;
  write_synthetic(a.path(), generate_synthetic(spec));
  write_synthetic(b.path(), generate_synthetic(spec));
  spec.seed = 2;
  write_synthetic(c.path(), generate_synthetic(spec));
  for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "embeddings.txt", "images.bin"}) {
    EXPECT_EQ(read_bytes(a / f), read_bytes(b / f)) << f;
  }
  EXPECT_NE(read_bytes(a / "train.tsv"), read_bytes(c / "train.tsv"));
}

TEST(Synthetic, WrittenFilesLoadBack) {
  TempDir dir("syn_load");
  SyntheticTaskSpec spec;
  spec.train = 100;
  spec.val = 20;
  spec.test = 20;
  auto data = generate_synthetic(spec);
  write_synthetic(dir.path(), data);
  auto table = load_embeddings(dir / "embeddings.txt", spec.embed_dim);
  auto images = load_image_features(dir / "images.bin");
  auto train = load_dataset(dir / "train.tsv", SplitName::train, table, images);
  ASSERT_EQ(train.samples.size(), data.train.samples.size());
  for (std::size_t i = 0; i < train.samples.size(); ++i) {
    EXPECT_EQ(train.samples[i].label, data.train.samples[i].label);
    EXPECT_EQ(train.samples[i].question.tokens().size(), data.train.samples[i].question.tokens().size());
    EXPECT_EQ(train.samples[i].image->features, data.train.samples[i].image->features);
  }
}

TEST(Synthetic, InvalidSpecs) {
  SyntheticTaskSpec spec;
  spec.colors = 3;
  EXPECT_THROW(generate_synthetic(spec), ConfigError);
  spec = SyntheticTaskSpec{};
  spec.channels = 5;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SyntheticTaskSpec{};
  spec.cell_fraction = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
}
