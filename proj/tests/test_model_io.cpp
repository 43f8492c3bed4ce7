#include <gtest/gtest.h>

#include <cstring>

#include <tripscore/model_io.hpp>

#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace tripscore;
using namespace tripscore::testing;

namespace {

EmbeddingModel trained(TrainMode mode, bool train_words = false) {
  SyntheticOptions o;
  o.docs_per_topic = {10, 10};
  o.mixed_subjects = 2;
  o.tokens_per_doc = 40;
  auto docs = make_synthetic(o).docs();
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.dim = 8;
  cfg.window = 2;
  cfg.epochs = 2;
  cfg.min_count = 1;
  cfg.seed = 9;
  cfg.train_words = train_words;
  return train(docs, cfg);
}

void expect_same(const EmbeddingModel& a, const EmbeddingModel& b) {
  EXPECT_EQ(a.config, b.config);
  EXPECT_EQ(a.vocab.words, b.vocab.words);
  EXPECT_EQ(a.vocab.counts, b.vocab.counts);
  EXPECT_EQ(a.vocab.noise_cdf, b.vocab.noise_cdf);
  EXPECT_EQ(a.doc_labels, b.doc_labels);
  EXPECT_EQ(a.doc_index, b.doc_index);
  // Bitwise, not merely ==, so that -0.0 and NaN payloads would be caught.
  for (auto [x, y] : {std::pair{&a.params.doc, &b.params.doc}, {&a.params.word_in, &b.params.word_in},
                      {&a.params.word_out, &b.params.word_out}}) {
    ASSERT_EQ(x->rows(), y->rows());
    ASSERT_EQ(x->cols(), y->cols());
    EXPECT_EQ(0, std::memcmp(x->values().data(), y->values().data(), x->values().size() * sizeof(float)));
  }
}

}  // namespace

TEST(ModelIo, RoundTripIsBitwise) {
  TempDir dir;
  for (auto [mode, words] : {std::pair{TrainMode::dbow, false}, {TrainMode::dbow, true},
                             {TrainMode::dm_concat, false}, {TrainMode::dm_avg, false}}) {
    auto m = trained(mode, words);
    save_model(m, dir / "m.pvec");
    auto back = load_model(dir / "m.pvec");
    expect_same(m, back);
    EXPECT_EQ(serialize_model(back), serialize_model(m));
    EXPECT_FALSE(std::filesystem::exists(dir / "m.pvec.partial"));
  }
}

TEST(ModelIo, HeaderLayout) {
  auto bytes = serialize_model(trained(TrainMode::dbow));
  EXPECT_EQ(bytes.substr(0, 4), "PVEC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8), kModelFormatVersion);
}

TEST(ModelIo, BadMagic) {
  auto bytes = serialize_model(trained(TrainMode::dbow));
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_model(bytes), BadMagicError);
  EXPECT_THROW(deserialize_model("PV"), BadMagicError);
}

TEST(ModelIo, VersionMismatch) {
  auto bytes = serialize_model(trained(TrainMode::dbow));
  bytes[4] = 2;
  EXPECT_THROW(deserialize_model(bytes), VersionMismatchError);
}

TEST(ModelIo, TruncatedMidMatrixNamesLengths) {
  auto bytes = serialize_model(trained(TrainMode::dm_concat));
  bytes.resize(bytes.size() - 100);
  try {
    deserialize_model(bytes);
    FAIL() << "expected TruncatedModelError";
  } catch (const TruncatedModelError& e) {
    EXPECT_GT(e.expected(), e.actual());
    const std::string what = e.what();
    EXPECT_NE(what.find("word_out_vectors"), std::string::npos) << what;
    EXPECT_NE(what.find(std::to_string(e.expected())), std::string::npos);
    EXPECT_NE(what.find(std::to_string(e.actual())), std::string::npos);
  }
}

TEST(ModelIo, EveryTruncationIsRejected) {
  auto bytes = serialize_model(trained(TrainMode::dbow));
  for (std::size_t n = 0; n < bytes.size(); n += 7) {
    EXPECT_THROW(deserialize_model(std::string_view(bytes).substr(0, n)), ModelFormatError) << n;
  }
}

TEST(ModelIo, ChecksumMismatch) {
  auto bytes = serialize_model(trained(TrainMode::dbow));
  bytes[bytes.size() / 2] ^= 0x01;
  EXPECT_THROW(deserialize_model(bytes), ChecksumError);
}

TEST(ModelIo, MissingFileIsIoError) {
  EXPECT_THROW(load_model("/nonexistent/model.pvec"), IoError);
}

TEST(ModelIo, Crc32KnownValue) {
  EXPECT_EQ(crc32("123456789"), 0xCBF43926u);
}
