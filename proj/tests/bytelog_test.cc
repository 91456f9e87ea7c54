#include "bcfp/bytelog.h"

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "bcfp/error.h"
#include "bcfp/opcodes.h"
#include "test_util.h"

namespace bcfp {
namespace {

using testing::RandomRecord;
using testing::ReadFixture;

TEST(ParseLogTest, ListingFixtureFields) {
  const ParseLogResult result = ParseLog(ReadFixture("listing3.log"));
  ASSERT_TRUE(result.diagnostics.empty());
  ASSERT_EQ(result.records.size(), 1u);
  const FunctionRecord& r = result.records[0];
  EXPECT_EQ(r.script_url, "https://example.com/fpjs.js");
  EXPECT_EQ(r.script_id, 3u);
  EXPECT_EQ(r.function_name, "gatherFingerprint");
  EXPECT_EQ(r.parameter_count, 1u);
  EXPECT_EQ(r.register_count, 4u);
  EXPECT_EQ(r.frame_size, 32u);
  ASSERT_EQ(r.opcodes.size(), 26u);
  EXPECT_EQ(r.opcodes.front(), "DefineNamedOwnProperty");
  EXPECT_EQ(r.opcodes.back(), "Return");
}

TEST(ParseLogTest, ListingRoundTripIsByteIdentical) {
  const std::string text = ReadFixture("listing3.log");
  const ParseLogResult result = ParseLog(text);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(SerializeRecord(result.records[0]), text);
}

TEST(ParseLogTest, EmptyInput) {
  const ParseLogResult result = ParseLog("");
  EXPECT_TRUE(result.records.empty());
  EXPECT_TRUE(result.diagnostics.empty());
}

TEST(ParseLogTest, BlankBytecodeSectionIsMalformed) {
  const std::string text =
      "Script URL: https://a.example/x.js\nScript ID: 1\n"
      "Function name: f\nBytecode: \nParameter count 0\nRegister count 0\n"
      "Frame size 0\n\n"
      "Script URL: https://a.example/x.js\nScript ID: 1\n"
      "Function name: g\nBytecode: \nParameter count 0\nRegister count 1\n"
      "Frame size 8\nLdar,Return\n";
  const ParseLogResult result = ParseLog(text);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].function_name, "g");
  ASSERT_EQ(result.diagnostics.size(), 1u);
  EXPECT_EQ(result.diagnostics[0].line_no, 1u);
}

TEST(ParseLogTest, MissingHeaderIsMalformedAndParsingContinues) {
  const std::string text =
      "Script URL: https://a.example/x.js\nFunction name: f\nBytecode: \n"
      "Parameter count 0\nRegister count 0\nFrame size 0\nReturn\n\n"
      "Script URL: https://a.example/x.js\nScript ID: 2\n"
      "Function name: g\nBytecode: \nParameter count 0\nRegister count 1\n"
      "Frame size 8\nReturn\n";
  const ParseLogResult result = ParseLog(text);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].script_id, 2u);
  EXPECT_EQ(result.diagnostics.size(), 1u);
}

TEST(ParseLogTest, TrailingCommasAndExtraBlankLines) {
  const std::string text =
      "\n\nScript URL: https://a.example/x.js\nScript ID: 7\n"
      "Function name: f\nBytecode: \nParameter count 2\nRegister count 3\n"
      "Frame size 24\nLdar,Star0,\nAdd,\nReturn,\n\n\n";
  const ParseLogResult result = ParseLog(text);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.records[0].opcodes,
            (std::vector<std::string>{"Ldar", "Star0", "Add", "Return"}));
  EXPECT_TRUE(result.diagnostics.empty());
}

TEST(ParseLogTest, EmptyFunctionNameIsAnonymous) {
  const std::string text =
      "Script URL: https://a.example/x.js\nScript ID: 7\n"
      "Function name: \nBytecode: \nParameter count 0\nRegister count 0\n"
      "Frame size 0\nReturn\n";
  const ParseLogResult result = ParseLog(text);
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_TRUE(result.records[0].IsAnonymous());
}

TEST(ParseLogTest, RandomRecordsRoundTripAndConcatenate) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FunctionRecord> a, b;
    for (uint64_t i = 0, n = rng.Below(6); i < n; ++i)
      a.push_back(RandomRecord(rng));
    for (uint64_t i = 0, n = 1 + rng.Below(6); i < n; ++i)
      b.push_back(RandomRecord(rng));
    const std::string ta = SerializeLog(a);
    const std::string tb = SerializeLog(b);
    const ParseLogResult pa = ParseLog(ta);
    const ParseLogResult pb = ParseLog(tb);
    EXPECT_EQ(pa.records, a);
    EXPECT_EQ(pb.records, b);
    const ParseLogResult pab = ParseLog(ta + "\n" + tb);
    std::vector<FunctionRecord> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    EXPECT_EQ(pab.records, ab);
    // Serialization is a fixed point.
    EXPECT_EQ(SerializeLog(pa.records), ta);
  }
}

TEST(ParseLogTest, OpcodeLinesRespectWidth) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::string text = SerializeRecord(RandomRecord(rng, 200));
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
      EXPECT_LE(line.size(), kOpcodeLineWidth);
  }
}

TEST(VocabularyTest, FirstSeenOrdering) {
  FunctionRecord r;
  r.opcodes = {"Ldar", "Return", "Ldar"};
  const Vocabulary v = BuildVocabulary(std::span(&r, 1));
  EXPECT_EQ(v.size(), 4);
  EXPECT_EQ(v.IdOf("Ldar"), 2);
  EXPECT_EQ(v.IdOf("Return"), 3);
  EXPECT_EQ(v.IdOf("<pad>"), Vocabulary::kUnkId);
  EXPECT_EQ(v.MnemonicOf(0), "<pad>");
  EXPECT_EQ(v.MnemonicOf(1), "<unk>");
  EXPECT_THROW(v.MnemonicOf(4), Error);
}

TEST(VocabularyTest, KnownTokenListIsBijective) {
  FunctionRecord r;
  for (std::string_view op : KnownOpcodes())
    r.opcodes.emplace_back(op);
  const Vocabulary v = BuildVocabulary(std::span(&r, 1));
  const std::set<std::string_view> distinct(KnownOpcodes().begin(),
                                            KnownOpcodes().end());
  EXPECT_EQ(distinct.size(), KnownOpcodes().size());
  EXPECT_EQ(v.size(), static_cast<int32_t>(distinct.size()) + 2);
  for (int32_t id = Vocabulary::kFirstRealId; id < v.size(); ++id)
    EXPECT_EQ(v.IdOf(v.MnemonicOf(id)), id);
}

TEST(VocabularyTest, SaveLoadRoundTrip) {
  Rng rng(5);
  std::vector<FunctionRecord> records;
  for (int i = 0; i < 30; ++i)
    records.push_back(RandomRecord(rng));
  const Vocabulary v = BuildVocabulary(records);
  const Vocabulary w = Vocabulary::FromText(v.ToText());
  EXPECT_EQ(v, w);
  EXPECT_EQ(v.Fingerprint(), w.Fingerprint());
  EXPECT_THROW(Vocabulary::FromText("Ldar\nLdar\n"), Error);
}

TEST(TokenizeTest, LookupUnknownAndTruncation) {
  FunctionRecord r;
  r.opcodes = {"Ldar", "Return"};
  const Vocabulary v = BuildVocabulary(std::span(&r, 1));
  EXPECT_EQ(Tokenize(r, v), (std::vector<int32_t>{2, 3}));
  r.opcodes = {"Ldar", "NotARealOp"};
  EXPECT_EQ(Tokenize(r, v), (std::vector<int32_t>{2, 1}));
  r.opcodes.assign(600, "Return");
  const auto ids = Tokenize(r, v, 512);
  EXPECT_EQ(ids.size(), 512u);
  EXPECT_EQ(ids.front(), 3);
  EXPECT_THROW(Tokenize(r, v, 0), Error);
}

TEST(TokenizeTest, LengthAndNoPadProperty) {
  Rng rng(11);
  std::vector<FunctionRecord> records;
  for (int i = 0; i < 40; ++i)
    records.push_back(RandomRecord(rng, 300));
  const Vocabulary v = BuildVocabulary(records);
  for (const auto& r : records) {
    const size_t cap = 1 + rng.Below(300);
    const auto ids = Tokenize(r, v, cap);
    EXPECT_EQ(ids.size(), std::min(r.opcodes.size(), cap));
    for (int32_t id : ids)
      EXPECT_NE(id, Vocabulary::kPadId);
  }
}

}  // namespace
}  // namespace bcfp
