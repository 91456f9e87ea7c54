#include "bcfp/syngen.h"

#include <map>
#include <set>

#include <gtest/gtest.h>

#include "bcfp/error.h"
#include "bcfp/labeler.h"
#include "bcfp/opcodes.h"

namespace bcfp {
namespace {

CorpusSpec SmallSpec(uint64_t seed) {
  CorpusSpec s;
  s.n_scripts = 100;
  s.fp_fraction = 0.05;
  s.seed = seed;
  return s;
}

TEST(SyngenTest, RegeneratingIsByteIdentical) {
  const auto a = Generate(SmallSpec(5));
  const auto b = Generate(SmallSpec(5));
  EXPECT_EQ(a.LogText(), b.LogText());
  EXPECT_EQ(a.TraceJson(), b.TraceJson());
  EXPECT_EQ(a.ManifestJsonl(), b.ManifestJsonl());
  const auto c = Generate(SmallSpec(6));
  EXPECT_NE(a.LogText(), c.LogText());
}

TEST(SyngenTest, LabelerReproducesManifest) {
  for (uint64_t seed : {1, 2, 3}) {
    CorpusSpec spec = SmallSpec(seed);
    spec.near_miss_fraction = 0.5;
    const auto corpus = Generate(spec);
    const auto parsed = ParseTraces(corpus.TraceJson());
    ASSERT_TRUE(parsed.diagnostics.empty());
    const auto groups = GroupByFunction(FilterEvents(parsed.events));
    std::map<FunctionKey, TechniqueSet> found;
    for (const auto& v : LabelTraces(groups))
      found[v.key] = v.techniques;
    std::set<NearMiss> near_misses;
    size_t fp = 0;
    for (const ManifestEntry& m : corpus.manifest) {
      const TechniqueSet got = found.count(m.key) ? found[m.key] : TechniqueSet{};
      EXPECT_EQ(got, m.techniques) << m.key.function_name;
      if (m.is_fp) {
        ++fp;
        EXPECT_EQ(m.techniques.size(), 1u);
      }
      near_misses.insert(m.near_miss);
    }
    EXPECT_GT(fp, 0u);
    EXPECT_EQ(near_misses.size(), 8u);  // every near miss plus none
  }
}

TEST(SyngenTest, ParseLosesNoRecords) {
  const auto corpus = Generate(SmallSpec(7));
  const auto parsed = ParseLog(corpus.LogText());
  EXPECT_TRUE(parsed.diagnostics.empty());
  ASSERT_EQ(parsed.records.size(), corpus.manifest.size());
  EXPECT_EQ(parsed.records, corpus.records);
  for (size_t i = 0; i < parsed.records.size(); ++i) {
    const auto& r = parsed.records[i];
    EXPECT_EQ(FunctionKey({r.script_url, r.script_id, r.function_name}),
              corpus.manifest[i].key);
    EXPECT_EQ(r.opcodes.size(), corpus.manifest[i].opcode_count);
  }
  const auto back = ManifestFromJsonl(corpus.ManifestJsonl());
  ASSERT_EQ(back.size(), corpus.manifest.size());
  for (size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].key, corpus.manifest[i].key);
    EXPECT_EQ(back[i].techniques, corpus.manifest[i].techniques);
    EXPECT_EQ(back[i].near_miss, corpus.manifest[i].near_miss);
  }
}

TEST(SyngenTest, LengthRegimes) {
  CorpusSpec spec;
  spec.n_functions = 5000;
  spec.seed = 11;
  const auto corpus = Generate(spec);
  ASSERT_EQ(corpus.records.size(), 5000u);
  size_t non_fp = 0, short_non_fp = 0, fp = 0, fp_in_band = 0;
  for (const auto& m : corpus.manifest) {
    if (m.is_fp) {
      ++fp;
      fp_in_band += m.opcode_count >= 100 && m.opcode_count <= 1000;
    } else {
      ++non_fp;
      short_non_fp += m.opcode_count < 100;
    }
  }
  EXPECT_EQ(fp, 250u);
  EXPECT_GE(static_cast<double>(short_non_fp), 0.85 * static_cast<double>(non_fp));
  EXPECT_EQ(fp_in_band, fp);
}

TEST(SyngenTest, FpScriptsAreMixedAndCarryMotif) {
  const CorpusSpec spec = SmallSpec(8);
  const auto corpus = Generate(spec);
  std::map<std::string, std::pair<int, int>> per_script;  // fp, non-fp
  for (size_t i = 0; i < corpus.manifest.size(); ++i) {
    const auto& m = corpus.manifest[i];
    auto& c = per_script[m.key.script_url];
    (m.is_fp ? c.first : c.second) += 1;
    const auto& ops = corpus.records[i].opcodes;
    EXPECT_EQ(ops.back(), "Return");
    for (const auto& op : ops)
      EXPECT_TRUE(IsKnownOpcode(op)) << op;
    const auto hit = std::search(ops.begin(), ops.end(), spec.motif.begin(),
                                 spec.motif.end());
    if (m.is_fp) {
      ASSERT_GE(m.motif_offset, 0);
      EXPECT_EQ(hit - ops.begin(), m.motif_offset);
      EXPECT_LE(static_cast<size_t>(m.motif_offset) + spec.motif.size(),
                kFunctionMaxLen);
    } else {
      EXPECT_EQ(hit, ops.end());
      EXPECT_EQ(m.motif_offset, -1);
    }
  }
  for (const auto& [url, c] : per_script) {
    if (c.first > 0)
      EXPECT_GE(c.second, 1) << url;
  }
}

TEST(SyngenTest, RenamedMotifIsDisjoint) {
  const auto a = CorpusSpec::DefaultMotif();
  const auto b = CorpusSpec::RenamedMotif();
  ASSERT_EQ(a.size(), b.size());
  for (const auto& op : a)
    EXPECT_EQ(std::find(b.begin(), b.end(), op), b.end());
  CorpusSpec spec = SmallSpec(9);
  spec.motif = b;
  const auto corpus = Generate(spec);
  for (const auto& rec : corpus.records) {
    for (const auto& op : rec.opcodes)
      EXPECT_EQ(std::find(a.begin(), a.end(), op), a.end());
  }
}

TEST(SyngenTest, InvalidSpecs) {
  auto expect_invalid = [](const CorpusSpec& s) {
    try {
      Generate(s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
    }
  };
  CorpusSpec s;
  s.fp_fraction = 0;
  expect_invalid(s);
  s.fp_fraction = 1;
  expect_invalid(s);
  s = CorpusSpec{};
  s.motif = {"Ldar", "Star1", "Return"};
  expect_invalid(s);
  s.motif = {"Ldar", "Star1", "Return", "NotAnOpcode"};
  expect_invalid(s);
  s = CorpusSpec{};
  s.n_scripts = 0;
  expect_invalid(s);
  s = CorpusSpec{};
  s.fp_fraction = 0.9;  // cannot keep FP scripts mixed
  s.functions_per_script_median = 2;
  s.functions_per_script_sigma = 0;
  expect_invalid(s);
}

TEST(SyngenTest, SpecJsonRoundTrip) {
  CorpusSpec s;
  s.n_functions = 123;
  s.motif = CorpusSpec::RenamedMotif();
  s.fp_length.median = 400;
  const auto back = CorpusSpec::FromJson(s.ToJson());
  EXPECT_EQ(back.ToJson(), s.ToJson());
  EXPECT_EQ(CorpusSpec::FromJson({{"motif", "renamed"}}).motif,
            CorpusSpec::RenamedMotif());
  EXPECT_THROW(CorpusSpec::FromJson({{"fpFraction", "x"}}), Error);
}

}  // namespace
}  // namespace bcfp
