// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcfp/bytelog.h"
#include "bcfp/dataset.h"
#include "bcfp/labeler.h"
#include "bcfp/metrics.h"
#include "bcfp/nn/ops.h"
#include "bcfp/pipeline.h"
#include "bcfp/random.h"
#include "bcfp/signatures.h"
#include "bcfp/syngen.h"
#include "bcfp/text_util.h"
#include "bcfp/transformer.h"
#include "gradcheck.h"
#include "oracles.h"
#include "primitive_checks.h"
#include "test_util.h"

namespace bcfp {
namespace {

namespace fs = std::filesystem;
using nn::Graph;
using nn::Var;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       since)
      .count();
}

// ---- 1 ----

Outcome FormatFidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string text = testing::ReadFixture("listing3.log");
  const ParseLogResult parsed = ParseLog(text);
  bool ok = parsed.diagnostics.empty() && parsed.records.size() == 1;
  std::string detail = "records=" + std::to_string(parsed.records.size());
  if (ok) {
    const FunctionRecord& r = parsed.records[0];
    ok = r.function_name == "gatherFingerprint" && r.script_id == 3 &&
         r.opcodes.size() == 26;
    const bool round_trip = SerializeRecord(r) == text;
    ok = ok && round_trip;
    detail += " name=" + r.function_name +
              " scriptId=" + std::to_string(r.script_id) +
              " opcodes=" + std::to_string(r.opcodes.size()) +
              " roundTrip=" + (round_trip ? "identical" : "differs");
  }
  const double t = Seconds(t0);
  return {ok && t < 1.0, detail + Fmt(" time=%.3fs (<1s)", t)};
}

// ---- 2 ----

Outcome HeuristicExactness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto doc =
      nlohmann::json::parse(testing::ReadFixture("heuristic_traces.json"));
  const std::map<std::string, Technique> prefixes = {
      {"canvas_", Technique::kCanvas},
      {"font_", Technique::kCanvasFont},
      {"audio_", Technique::kAudio},
      {"webrtc_", Technique::kWebRtc}};
  std::map<Technique, int> positives, negatives;
  std::set<std::string> names;
  size_t agree = 0;
  for (const auto& c : doc) {
    const std::string name = c.at("name").get<std::string>();
    names.insert(name);
    const TechniqueSet expected = TechniqueSet::FromNames(
        c.at("expected").get<std::vector<std::string>>());
    FunctionTrace trace;
    trace.key = {"https://fixture.example/", 0, name};
    trace.events = ParseTraces(c.at("events").dump()).events;
    const HeuristicVerdict v = LabelTrace(trace);
    agree += v.techniques == expected && v.is_fp == !expected.empty();
    for (const auto& [prefix, t] : prefixes) {
      if (!name.starts_with(prefix))
        continue;
      if (expected.Contains(t))
        ++positives[t];
      else if (expected.empty())
        ++negatives[t];
    }
  }
  bool composition = doc.size() >= 20;
  for (Technique t : kAllTechniques)
    composition = composition && positives[t] >= 2 && negatives[t] >= 3;
  for (const char* required :
       {"canvas_nine_chars", "font_19_measure", "font_exactly_20_fonts",
        "audio_missing_getchanneldata", "webrtc_missing_setlocaldescription"})
    composition = composition && names.contains(required);
  const double t = Seconds(t0);
  const bool ok = composition && agree == doc.size() && t < 1.0;
  return {ok, Fmt("cases=%zu agreement=%zu/%zu composition=%s time=%.3fs (<1s)",
                  doc.size(), agree, doc.size(), composition ? "ok" : "short",
                  t)};
}

// ---- 3 ----

Outcome JoinOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260101);
  const auto c = testing::RandomJoinCorpus(rng, 1000);
  const Vocabulary vocab = BuildVocabulary(c.records);
  const JoinResult joined = JoinLabels(c.records, c.verdicts, vocab);
  const auto oracle = testing::BruteForceJoin(c.records, c.verdicts, vocab);
  const bool equal = joined.examples == oracle;
  const double t = Seconds(t0);
  return {equal && t < 5.0,
          Fmt("records=%zu verdicts=%zu joined=%zu oracle=%zu %s time=%.2fs "
              "(<5s)",
              c.records.size(), c.verdicts.size(), joined.examples.size(),
              oracle.size(), equal ? "exact" : "MISMATCH", t)};
}

// ---- 4 ----

ModelConfig SmallModel(ModelVariant variant, int vocab) {
  ModelConfig c = variant == ModelVariant::kFunction
                      ? ModelConfig::FunctionDefaults(vocab)
                      : ModelConfig::ScriptDefaults(vocab);
  c.embed_dim = 8;
  c.num_heads = 2;
  c.ffn_dim = 12;
  c.num_layers = 2;
  c.max_len = 64;
  c.dense_head_dims = {6, 4};
  return c;
}

std::vector<int32_t> RandomIds(Rng& rng, size_t len, int vocab) {
  std::vector<int32_t> ids;
  for (size_t i = 0; i < len; ++i) {
    ids.push_back(Vocabulary::kFirstRealId +
                  static_cast<int32_t>(rng.Below(
                      static_cast<uint64_t>(vocab - Vocabulary::kFirstRealId))));
  }
  return ids;
}

Outcome GradientChecks() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4);
  double worst_primitive = 0;
  std::string worst_name;
  size_t primitive_checks = 0;
  for (int round = 0; round < 5; ++round) {
    for (auto& c : testing::RandomPrimitiveCases(rng)) {
      const auto r = testing::CheckGradients(c.fn, c.inputs, rng, 100);
      ++primitive_checks;
      if (r.max_rel_error > worst_primitive) {
        worst_primitive = r.max_rel_error;
        worst_name = c.name;
      }
    }
  }
  double worst_model = 0;
  for (ModelVariant variant : {ModelVariant::kFunction, ModelVariant::kScript}) {
    ModelConfig cfg = SmallModel(variant, 24);
    cfg.dropout_rate = 0.1;
    TransformerClassifier m(cfg, 8);
    std::vector<std::vector<int32_t>> seqs;
    std::vector<double> labels;
    for (int i = 0; i < 3; ++i) {
      seqs.push_back(RandomIds(rng, 3 + rng.Below(9), 24));
      labels.push_back(static_cast<double>(i % 2));
    }
    auto params = m.parameters();
    const auto per_sequence = testing::CheckParameterGradients(
        params,
        [&](Graph& g) {
          std::vector<Var> terms;
          for (size_t i = 0; i < seqs.size(); ++i) {
            const Var z = m.Logit(g, seqs[i], nn::Mask(seqs[i].size(), 1),
                                  true, 100 + i);
            terms.push_back(nn::BceWithLogits(g, z, std::span(&labels[i], 1)));
          }
          return nn::SumAll(g, nn::ConcatRows(g, terms));
        },
        rng, 100);
    std::vector<std::span<const int32_t>> views(seqs.begin(), seqs.end());
    const auto packed = testing::CheckParameterGradients(
        params,
        [&](Graph& g) {
          return nn::BceWithLogits(g, m.PackedLogits(g, views, true, 99),
                                   labels);
        },
        rng, 100);
    worst_model = std::max(
        {worst_model, per_sequence.max_rel_error, packed.max_rel_error});
  }
  const double t = Seconds(t0);
  const bool ok = worst_primitive < 1e-4 && worst_model < 1e-3 && t < 120.0;
  return {ok, Fmt("primitive checks=%zu worst=%.2e (%s, <1e-4) end-to-end "
                  "worst=%.2e (<1e-3) probes=100 time=%.1fs (<120s)",
                  primitive_checks, worst_primitive, worst_name.c_str(),
                  worst_model, t)};
}

// ---- 5 ----

Outcome PaddingInvariance() {
  Rng rng(5);
  double worst = 0;
  int cases = 0;
  for (ModelVariant variant : {ModelVariant::kFunction, ModelVariant::kScript}) {
    TransformerClassifier m(SmallModel(variant, 40), 17);
    for (int c = 0; c < 100; ++c, ++cases) {
      const auto ids = RandomIds(rng, 1 + rng.Below(30), 40);
      double plain = 0;
      double padded_logit = 0;
      {
        Graph g(false);
        plain = g.value(m.Logit(g, ids, nn::Mask(ids.size(), 1), false, 0))(0, 0);
      }
      auto padded = ids;
      padded.resize(ids.size() + 1 + rng.Below(30), Vocabulary::kPadId);
      nn::Mask mask(padded.size(), 0);
      std::fill(mask.begin(), mask.begin() + static_cast<ptrdiff_t>(ids.size()),
                1);
      {
        Graph g(false);
        padded_logit = g.value(m.Logit(g, padded, mask, false, 0))(0, 0);
      }
      // Batched path: the same sequence padded inside a batch.
      const auto batch = m.Forward(MakeBatch(std::vector{ids, padded}));
      const double p_plain = 1 / (1 + std::exp(-plain));
      worst = std::max({worst, std::abs(padded_logit - plain),
                        std::abs(batch[0] - p_plain)});
    }
  }
  return {worst <= 1e-9,
          Fmt("cases=%d max|diff|=%.2e (tol 1e-9)", cases, worst)};
}

// ---- 6, 7, 12 share one corpus ----

struct Scores {
  double accuracy = 0;
  double recall = 0;
};

template <typename Example>
Scores Score(TransformerClassifier& m, std::span<const Example> test) {
  const auto p = m.PredictProba(TokenSequences<Example>(test));
  const EvalReport r = Evaluate(Labels<Example>(test), p);
  return {r.accuracy, r.recall};
}

struct LearningState {
  CorpusSpec spec;
  GeneratedCorpus corpus;
  Vocabulary vocab;
  Datasets data;
  SplitSpec split;
  std::unique_ptr<TransformerClassifier> function_model;
  double function_recall = -1;
};

TrainConfig FunctionTrainConfig(uint64_t seed) {
  TrainConfig tc = TrainConfig::FunctionDefaults();
  tc.seed = seed;
  tc.stop_loss = 0.01;
  return tc;
}

Outcome LearningSanity(LearningState& s) {
  const auto t0 = std::chrono::steady_clock::now();
  s.spec.n_functions = 5000;
  s.spec.fp_fraction = 0.05;
  s.spec.seed = 601;
  s.split.neg_to_pos_ratio = 20;
  s.split.seed = 602;
  s.corpus = Generate(s.spec);
  s.vocab = BuildVocabulary(s.corpus.records);
  s.data = BuildDatasets(s.corpus.records, LabelEvents(s.corpus.events),
                         s.vocab, s.split);
  const auto& train = s.data.functions.train;
  const auto& test = s.data.functions.test;
  const auto seqs = TokenSequences<LabeledExample>(train);
  const auto labels = Labels<LabeledExample>(train);
  const TrainConfig tc = FunctionTrainConfig(603);

  TrainReport ra, rb;
  s.function_model =
      TrainTransformer(seqs, labels, ModelConfig::FunctionDefaults(0),
                       s.vocab.size(), tc, &ra);
  const Scores tx = Score<LabeledExample>(*s.function_model, test);
  s.function_recall = tx.recall;
  const auto again = TrainTransformer(
      seqs, labels, ModelConfig::FunctionDefaults(0), s.vocab.size(), tc, &rb);
  const auto test_seqs = TokenSequences<LabeledExample>(test);
  const bool reproducible =
      ra.epoch_loss == rb.epoch_loss &&
      s.function_model->PredictProba(test_seqs) == again->PredictProba(test_seqs);

  EmbedConfig ec = EmbedConfig::SkipGramDefaults();
  ec.seed = 604;
  const auto emb = TrainSkipGram(seqs, s.vocab.size(), ec);
  ForestConfig fc;
  fc.seed = 605;
  const auto forest =
      RandomForest::Fit(AveragedFeatures(train, emb), labels, fc);
  const EvalReport rf = Evaluate(Labels<LabeledExample>(test),
                                 forest.PredictProba(AveragedFeatures(test, emb)));
  const double t = Seconds(t0);
  const bool ok = tx.accuracy >= 0.95 && tx.recall >= 0.90 &&
                  ra.epoch_loss.size() <= 16 && reproducible &&
                  rf.accuracy >= 0.90 && t < 900.0;
  size_t train_fp = 0;
  for (int y : labels)
    train_fp += static_cast<size_t>(y);
  return {ok,
          Fmt("train=%zu (fp %zu) test=%zu transformer acc=%.4f (>=0.95) "
              "recall=%.4f (>=0.90) epochs=%zu (<=16) reproducible=%s "
              "forest acc=%.4f (>=0.90) time=%.0fs (<900s)",
              train.size(), train_fp, test.size(), tx.accuracy, tx.recall,
              ra.epoch_loss.size(), reproducible ? "yes" : "NO", rf.accuracy,
              t)};
}

Outcome ScriptParity(LearningState& s) {
  if (s.function_recall < 0)
    return {false, "function-level model unavailable"};
  const auto& train = s.data.scripts.train;
  TrainConfig tc = TrainConfig::ScriptDefaults();
  tc.seed = 701;
  tc.stop_loss = 0.01;
  TrainReport report;
  const auto model = TrainTransformer(
      TokenSequences<ScriptExample>(train), Labels<ScriptExample>(train),
      ModelConfig::ScriptDefaults(0), s.vocab.size(), tc, &report);
  const Scores sc = Score<ScriptExample>(*model, s.data.scripts.test);
  const bool ok =
      sc.recall >= 0.90 && sc.recall >= s.function_recall - 0.02;
  return {ok, Fmt("scripts train=%zu test=%zu recall=%.4f (>=0.90, >= "
                  "function %.4f - 0.02) acc=%.4f epochs=%zu",
                  train.size(), s.data.scripts.test.size(), sc.recall,
                  s.function_recall, sc.accuracy, report.epoch_loss.size())};
}

Outcome Augmentation(LearningState& s) {
  if (!s.function_model)
    return {false, "function-level model unavailable"};
  CorpusSpec renamed = s.spec;
  renamed.seed = 1201;
  renamed.motif = CorpusSpec::RenamedMotif();
  const GeneratedCorpus b = Generate(renamed);
  const auto b_verdicts = LabelEvents(b.events);

  // Unaugmented: the original model and vocabulary.
  const Datasets b_old = BuildDatasets(b.records, b_verdicts, s.vocab, s.split);
  const Scores before =
      Score<LabeledExample>(*s.function_model, b_old.functions.test);

  // Augmented: joint vocabulary, training on both corpora.
  std::vector<FunctionRecord> all = s.corpus.records;
  all.insert(all.end(), b.records.begin(), b.records.end());
  const Vocabulary joint = BuildVocabulary(all);
  const Datasets a_new = BuildDatasets(
      s.corpus.records, LabelEvents(s.corpus.events), joint, s.split);
  const Datasets b_new = BuildDatasets(b.records, b_verdicts, joint, s.split);
  std::vector<LabeledExample> train = a_new.functions.train;
  train.insert(train.end(), b_new.functions.train.begin(),
               b_new.functions.train.end());
  const auto model = TrainTransformer(
      TokenSequences<LabeledExample>(train), Labels<LabeledExample>(train),
      ModelConfig::FunctionDefaults(0), joint.size(), FunctionTrainConfig(1202));
  const Scores after = Score<LabeledExample>(*model, b_new.functions.test);
  const bool ok = before.recall < 0.5 && after.recall >= 0.85;
  return {ok, Fmt("renamed-motif test=%zu recall unaugmented=%.4f (<0.5) "
                  "augmented=%.4f (>=0.85) augmented train=%zu",
                  b_new.functions.test.size(), before.recall, after.recall,
                  train.size())};
}

// ---- 8 ----

Outcome MetricOracles() {
  Rng rng(8);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 2 + rng.Below(199);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) {
      y[i] = rng.Bernoulli(0.3);
      s[i] = rng.Bernoulli(0.5) ? static_cast<double>(rng.Below(10)) / 10.0
                                : rng.Uniform();
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(RocAuc(y, s) - testing::PairwiseAuc(y, s)));
  }
  const EvalReport worked = PointMetrics(Confusion{3, 1, 5, 1});
  const bool exact = worked.precision == 0.75 && worked.recall == 0.75 &&
                     worked.accuracy == 0.8;
  return {worst <= 1e-9 && exact,
          Fmt("roc_auc max|diff| vs pairwise=%.2e over 100 instances (tol "
              "1e-9); worked example P=%.2f R=%.2f A=%.2f %s",
              worst, worked.precision, worked.recall, worked.accuracy,
              exact ? "exact" : "WRONG")};
}

// ---- 9 ----

Outcome SignatureSoundness() {
  const auto t0 = std::chrono::steady_clock::now();
  CorpusSpec spec;
  spec.n_functions = 10000;
  spec.seed = 901;
  const auto corpus = Generate(spec);
  const auto& records = corpus.records;
  Rng rng(902);
  std::set<std::vector<std::string>> signed_seqs;
  std::vector<SignatureSource> sources;
  // FP functions first, then random others until 500 distinct sequences.
  for (size_t i = 0; i < records.size() && signed_seqs.size() < 500; ++i) {
    if (corpus.manifest[i].is_fp && signed_seqs.insert(records[i].opcodes).second)
      sources.push_back({records[i].opcodes, corpus.manifest[i].techniques,
                         records[i].script_url});
  }
  while (signed_seqs.size() < 500) {
    const auto& r = records[rng.Below(records.size())];
    if (signed_seqs.insert(r.opcodes).second)
      sources.push_back({r.opcodes, {}, r.script_url});
  }
  const auto built = BuildSignatureSet(sources);
  const auto decisions = MatchAll(records, built.set);
  const bool parallel_matches_serial =
      decisions == MatchAllSerial(records, built.set);
  size_t fn = 0, fp = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const bool should = signed_seqs.contains(records[i].opcodes);
    const bool blocked = decisions[i] == MatchDecision::kBlock;
    fn += should && !blocked;
    fp += !should && blocked;
  }
  size_t hash_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ops = testing::RandomOpcodes(rng, 1 + rng.Below(300));
    hash_mismatch += HashSequence(ops) != testing::ReferenceFnv(ops);
  }
  const double t = Seconds(t0);
  const bool ok = fn == 0 && (fp == 0 || built.collisions > 0) &&
                  hash_mismatch == 0 && parallel_matches_serial && t < 10.0;
  return {ok, Fmt("functions=%zu signed=%zu FN=%zu FP=%zu collisions=%zu "
                  "reference-hash mismatches=%zu/1000 parallel=serial:%s "
                  "time=%.2fs (<10s)",
                  records.size(), built.set.size(), fn, fp, built.collisions,
                  hash_mismatch, parallel_matches_serial ? "yes" : "NO", t)};
}

// ---- 10 ----

Outcome MatcherPerformance() {
  Rng rng(10);
  const std::vector<size_t> lengths = {10,  20,   50,   100,  200,  500,
                                       1000, 2000, 5000, 10000};
  SignatureSet sigs;
  for (int i = 0; i < 500; ++i)
    sigs.Insert(HashSequence(testing::RandomOpcodes(rng, 1 + rng.Below(200))));
  std::vector<double> xs, ys;
  double median_100 = 0;
  for (size_t len : lengths) {
    std::vector<FunctionRecord> records(200);
    for (auto& r : records)
      r.opcodes = testing::RandomOpcodes(rng, len);
    const auto report = BenchMatcher(records, sigs, 10);
    xs.push_back(static_cast<double>(len));
    ys.push_back(report.mean_ns);
    if (len == 100)
      median_100 = report.p50_ns;
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  const double slope = sxy / sxx;
  return {r2 > 0.9 && median_100 < 10000.0,
          Fmt("linear fit over lengths 10..10000: R^2=%.4f (>0.9) slope=%.2f "
              "ns/opcode; median at 100 opcodes=%.0f ns (<10000 ns)",
              r2, slope, median_100)};
}

// ---- 11 ----

std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file())
      continue;
    std::string text = ReadFileOrThrow(e.path().string());
    const std::string rel = fs::relative(e.path(), root).string();
    if (rel.starts_with("run_")) {
      auto j = nlohmann::json::parse(text);
      j.erase("wallTimeSeconds");
      text = j.dump();
    }
    files[rel] = std::move(text);
  }
  return files;
}

Outcome PipelineDeterminism() {
  const fs::path base = fs::temp_directory_path() /
                        ("bcfp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  const std::string cli = BCFP_CLI_PATH;
  const std::vector<std::string> steps = {
      "syngen", "parse", "ingest", "label", "build-dataset", "train-embed",
      "train-rf", "train-tx --level function", "train-tx --level script",
      "eval", "sign", "match"};
  const std::string common =
      " --seed 1111 --set embed.epochs=10 --set forest.nTrees=50"
      " --set functionTrain.epochs=3 --set scriptTrain.epochs=3"
      " --set functionModel.embedDim=64 --set functionModel.ffnDim=128"
      " '--set=functionModel.denseHeadDims=[64,32]' > /dev/null";
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = base / ("run" + std::to_string(run));
    for (const std::string& step : steps) {
      const std::string cmd =
          cli + " " + step + " --out " + out.string() + common;
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        fs::remove_all(base);
        return {false, "step '" + step + "' exited with " + std::to_string(rc)};
      }
    }
    runs.push_back(Snapshot(out));
  }
  size_t differing = 0;
  std::string first_diff;
  for (const auto& [name, text] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != text) {
      ++differing;
      if (first_diff.empty())
        first_diff = name;
    }
  }
  const bool eval_ok = runs[0].contains(artifact::kEvalReport);
  const bool same_set = runs[0].size() == runs[1].size();
  fs::remove_all(base);
  return {differing == 0 && same_set && eval_ok,
          Fmt("stages=%zu artifacts=%zu differing=%zu%s%s", steps.size(),
              runs[0].size(), differing,
              first_diff.empty() ? "" : " first=", first_diff.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace bcfp

int main() {
  using namespace bcfp;
  LearningState learning;
  const std::vector<Criterion> criteria = {
      {1, "format fidelity", FormatFidelity},
      {2, "heuristic exactness", HeuristicExactness},
      {3, "join oracle", JoinOracle},
      {4, "gradient checks", GradientChecks},
      {5, "padding invariance", PaddingInvariance},
      {6, "learning sanity", [&] { return LearningSanity(learning); }},
      {7, "script-level parity", [&] { return ScriptParity(learning); }},
      {8, "metric oracles", MetricOracles},
      {9, "signature soundness", SignatureSoundness},
      {10, "matcher performance", MatcherPerformance},
      {11, "pipeline determinism", PipelineDeterminism},
      {12, "augmentation path", [&] { return Augmentation(learning); }},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2d %-22s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), Seconds(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
