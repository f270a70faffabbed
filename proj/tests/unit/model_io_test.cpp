#include <gtest/gtest.h>

#include <filesystem>

#include "kickscore/model_io.hpp"
#include "test_support.hpp"

using namespace kickscore;
using namespace kickscore::svm;

namespace {

ErrorCode load_error(std::span<const std::uint8_t> bytes) {
  try {
    deserialize_model(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

std::vector<FeatureVector> random_inputs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& data = kstest::small_dataset();
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::normal_distribution<double> noise(0, 0.3);
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = data[pick(rng)].x;
    for (auto& x : v) x *= 1.0 + noise(rng);
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(ModelIo, SingleRoundTripIsBitExact) {
  const TechniqueModel model = *kstest::small_model();
  const auto path = (std::filesystem::temp_directory_path() / "kickscore_model_test.ksmdl").string();
  save_model(model, path);
  const auto back = load_model(path);
  std::filesystem::remove(path);
  ASSERT_TRUE(std::holds_alternative<SvmModel>(back));
  EXPECT_EQ(serialize_model(back), serialize_model(model));
  const auto& a = std::get<SvmModel>(model);
  const auto& b = std::get<SvmModel>(back);
  for (const auto& v : random_inputs(100, 3)) {
    const auto da = decision_values(a, v);
    const auto db = decision_values(b, v);
    ASSERT_EQ(da.size(), db.size());
    for (std::size_t k = 0; k < da.size(); ++k) EXPECT_EQ(std::bit_cast<std::uint64_t>(da[k]), std::bit_cast<std::uint64_t>(db[k]));
  }
}

TEST(ModelIo, EnsembleRoundTrip) {
  const auto [train, test] = stratified_split(kstest::small_dataset(), 0.5, 2);
  const TechniqueModel ens = train_ensemble(train, {}, 3, 4);
  const auto bytes = serialize_model(ens);
  EXPECT_EQ(bytes[13 + kLabelCount], 1);  // kind byte
  const auto back = deserialize_model(bytes);
  ASSERT_TRUE(std::holds_alternative<EnsembleModel>(back));
  EXPECT_EQ(serialize_model(back), bytes);
  for (const auto& s : test) {
    const auto pa = predict(ens, s.x);
    const auto pb = predict(back, s.x);
    EXPECT_EQ(pa.label, pb.label);
    EXPECT_EQ(pa.confidence, pb.confidence);
  }
}

TEST(ModelIo, HeaderLayout) {
  const auto bytes = serialize_model(*kstest::small_model());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "KSMDL");
  EXPECT_EQ(bytes[5] | (bytes[6] << 8), kModelFormatVersion);
  EXPECT_EQ(bytes[7] | (bytes[8] << 8), kFeatureSchemaVersion);
  EXPECT_EQ(bytes[9], kLabelCount);
  for (std::size_t i = 0; i < kLabelCount; ++i) EXPECT_EQ(bytes[13 + i], i);
}

TEST(ModelIo, TruncatedIsCorruptPayload) {
  const auto bytes = serialize_model(*kstest::small_model());
  for (std::size_t len : {std::size_t{6}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_EQ(load_error(std::span(bytes.data(), len)), ErrorCode::CorruptPayload) << len;
}

TEST(ModelIo, DamagedIsCorruptPayload) {
  auto bytes = serialize_model(*kstest::small_model());
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_EQ(load_error(bytes), ErrorCode::CorruptPayload);
}

TEST(ModelIo, SchemaOrFormatChangeIsVersionMismatch) {
  auto m = *kstest::small_model();
  m.schema_version = 2;
  EXPECT_EQ(load_error(serialize_model(m)), ErrorCode::VersionMismatch);
  auto bytes = serialize_model(*kstest::small_model());
  bytes[5] = 9;
  EXPECT_EQ(load_error(bytes), ErrorCode::VersionMismatch);
}

TEST(ModelIo, BadMagic) {
  auto bytes = serialize_model(*kstest::small_model());
  bytes[0] = 'X';
  EXPECT_EQ(load_error(bytes), ErrorCode::BadMagic);
  EXPECT_EQ(load_error(std::span(bytes.data(), 3)), ErrorCode::BadMagic);
}

TEST(ModelIo, MissingFileIsIo) {
  try {
    load_model("/nonexistent/model.ksmdl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}
