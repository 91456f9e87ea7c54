#include "bcfp/pipeline.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>

#include "bcfp/error.h"
#include "bcfp/hash.h"
#include "bcfp/random.h"
#include "bcfp/signatures.h"
#include "bcfp/text_util.h"

namespace bcfp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 12> kStages = {
    "syngen",    "parse",    "ingest",  "label", "build-dataset", "train-embed",
    "train-rf",  "train-tx", "eval",    "sign",  "match",         "bench"};

constexpr std::array<std::string_view, 3> kModels = {"tx-function",
                                                     "tx-script", "rf"};

// ---- config sections ----

json SplitToJson(const SplitSpec& s) {
  return {{"trainFraction", s.train_fraction},
          {"negToPosRatio", s.neg_to_pos_ratio},
          {"positiveDuplication", s.positive_duplication}};
}

void SplitFromJson(const json& j, SplitSpec& s) {
  s.train_fraction = j.value("trainFraction", s.train_fraction);
  s.neg_to_pos_ratio = j.value("negToPosRatio", s.neg_to_pos_ratio);
  s.positive_duplication = j.value("positiveDuplication", s.positive_duplication);
}

json EmbedToJson(const EmbedConfig& c) {
  return {{"mode", EmbeddingModeName(c.mode)},
          {"dim", c.dim},
          {"window", c.window},
          {"epochs", c.epochs},
          {"negativeSamples", c.negative_samples},
          {"learningRate", c.learning_rate},
          {"minN", c.min_n},
          {"maxN", c.max_n},
          {"bucketCount", c.bucket_count}};
}

void EmbedFromJson(const json& j, EmbedConfig& c) {
  if (j.contains("mode")) {
    // Switching mode picks up that mode's defaults first.
    c = j.at("mode").get<std::string>() == "subword"
            ? EmbedConfig::SubwordDefaults()
            : EmbedConfig::SkipGramDefaults();
    c.mode = EmbeddingModeFromName(j.at("mode").get<std::string>());
  }
  c.dim = j.value("dim", c.dim);
  c.window = j.value("window", c.window);
  c.epochs = j.value("epochs", c.epochs);
  c.negative_samples = j.value("negativeSamples", c.negative_samples);
  c.learning_rate = j.value("learningRate", c.learning_rate);
  c.min_n = j.value("minN", c.min_n);
  c.max_n = j.value("maxN", c.max_n);
  c.bucket_count = j.value("bucketCount", c.bucket_count);
}

json ModelToJson(const ModelConfig& c) {
  json j = c.ToJson();
  j.erase("variant");
  j.erase("vocabSize");
  return j;
}

void ModelFromJson(const json& j, ModelConfig& c) {
  c.embed_dim = j.value("embedDim", c.embed_dim);
  c.num_layers = j.value("numLayers", c.num_layers);
  c.num_heads = j.value("numHeads", c.num_heads);
  c.ffn_dim = j.value("ffnDim", c.ffn_dim);
  c.dropout_rate = j.value("dropoutRate", c.dropout_rate);
  c.max_len = j.value("maxLen", c.max_len);
  c.use_conv_frontend = j.value("useConvFrontend", c.use_conv_frontend);
  c.dense_head_dims = j.value("denseHeadDims", c.dense_head_dims);
}

json TrainToJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batchSize", c.batch_size},
          {"learningRate", c.adam.lr},
          {"stopLoss", c.stop_loss}};
}

void TrainFromJson(const json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batchSize", c.batch_size);
  c.adam.lr = j.value("learningRate", c.adam.lr);
  c.stop_loss = j.value("stopLoss", c.stop_loss);
}

void ValidateTrain(const TrainConfig& c, const char* what) {
  if (c.epochs < 1 || c.batch_size < 1 || !(c.adam.lr >= 0) ||
      !(c.stop_loss >= 0)) {
    Fail(ErrorCode::kConfigError, std::string(what) +
                                      ": epochs and batchSize must be "
                                      "positive, learningRate/stopLoss >= 0");
  }
}

// ---- artifact I/O ----

std::string FormatScores(std::span<const double> scores) {
  std::string out;
  char buf[32];
  for (double s : scores) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", s);
    out += buf;
  }
  return out;
}

std::vector<double> ParseScores(std::string_view text, const std::string& what) {
  std::vector<double> out;
  size_t line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    const std::string t(TrimWhitespace(line));
    if (t.empty())
      continue;
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size())
      Fail(ErrorCode::kSchemaError, what + " line " + std::to_string(line_no) +
                                        ": not a number");
    out.push_back(v);
  }
  return out;
}

std::string VerdictsToJsonl(std::span<const HeuristicVerdict> verdicts) {
  std::string out;
  for (const HeuristicVerdict& v : verdicts) {
    out += json{{"scriptUrl", v.key.script_url},
                {"scriptId", v.key.script_id},
                {"functionName", v.key.function_name},
                {"isFp", v.is_fp},
                {"techniques", v.techniques.Names()}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<HeuristicVerdict> VerdictsFromJsonl(std::string_view text) {
  std::vector<HeuristicVerdict> out;
  for (std::string_view line : SplitLines(text)) {
    if (TrimWhitespace(line).empty())
      continue;
    try {
      const json j = json::parse(line);
      HeuristicVerdict v;
      v.key = {j.at("scriptUrl").get<std::string>(),
               j.at("scriptId").get<uint64_t>(),
               j.at("functionName").get<std::string>()};
      v.is_fp = j.at("isFp").get<bool>();
      v.techniques = TechniqueSet::FromNames(
          j.at("techniques").get<std::vector<std::string>>());
      out.push_back(std::move(v));
    } catch (const json::exception& e) {
      Fail(ErrorCode::kSchemaError, std::string("verdicts: ") + e.what());
    }
  }
  return out;
}

std::vector<std::string> ListFiles(const std::string& dir,
                                   std::string_view extension) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    Fail(ErrorCode::kIoError, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension)
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty())
    Fail(ErrorCode::kIoError,
         "no *" + std::string(extension) + " files in " + dir);
  return out;
}

// Tracks inputs, outputs and counts for one run summary.
class Stage {
 public:
  Stage(std::string_view name, const PipelineConfig& cfg)
      : name_(name), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(cfg.output_dir);
  }

  std::string Read(const std::string& path) {
    std::string text = ReadFileOrThrow(path);
    inputs_[fs::path(path).filename().string()] = ToHex64(Fnv1a64(text));
    return text;
  }
  std::string ReadOut(std::string_view name) {
    return Read(cfg_.OutPath(name));
  }

  void Write(const std::string& path, std::string_view contents) {
    const fs::path p(path);
    if (p.has_parent_path())
      fs::create_directories(p.parent_path());
    WriteFileOrThrow(path, contents);
    outputs_[p.filename().string()] = ToHex64(Fnv1a64(contents));
  }
  void WriteOut(std::string_view name, std::string_view contents) {
    Write(cfg_.OutPath(name), contents);
  }

  json& counts() { return counts_; }

  json Finish() {
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
    // Paths stay out of the hash so relocated runs compare equal.
    json settings = cfg_.ToJson();
    settings.erase("paths");
    json summary = {{"subcommand", name_},
                    {"seed", cfg_.seed},
                    {"configHash", ToHex64(Fnv1a64(settings.dump()))},
                    {"inputs", inputs_},
                    {"outputs", outputs_},
                    {"counts", counts_},
                    {"wallTimeSeconds", wall}};
    WriteFileOrThrow(cfg_.OutPath("run_" + name_ + ".json"),
                     summary.dump(2) + "\n");
    return summary;
  }

 private:
  std::string name_;
  const PipelineConfig& cfg_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  json counts_ = json::object();
};

std::string TxName(std::string_view level) {
  return "tx_" + std::string(level) + ".json";
}
std::string SidecarName(std::string_view level) {
  return "tx_" + std::string(level) + ".sidecar.json";
}

// ---- stages ----

void RunSyngen(Stage& st, const PipelineConfig& cfg) {
  const GeneratedCorpus corpus = Generate(cfg.corpus);
  st.Write((fs::path(cfg.LogsDir()) / artifact::kCorpusLog).string(),
           corpus.LogText());
  st.Write((fs::path(cfg.TracesDir()) / artifact::kCorpusTraces).string(),
           corpus.TraceJson());
  st.WriteOut(artifact::kManifest, corpus.ManifestJsonl());
  size_t fp = 0;
  for (const auto& m : corpus.manifest)
    fp += m.is_fp;
  st.counts() = {{"functions", corpus.records.size()},
                 {"fpFunctions", fp},
                 {"traceEvents", corpus.events.size()}};
}

void RunParse(Stage& st, const PipelineConfig& cfg) {
  std::vector<FunctionRecord> records;
  size_t diagnostics = 0;
  const auto files = ListFiles(cfg.LogsDir(), ".log");
  for (const std::string& f : files) {
    ParseLogResult r = ParseLog(st.Read(f));
    diagnostics += r.diagnostics.size();
    for (auto& rec : r.records)
      records.push_back(std::move(rec));
  }
  if (records.empty())
    Fail(ErrorCode::kEmptyCorpus, "no parseable records in " + cfg.LogsDir());
  st.WriteOut(artifact::kRecords, SerializeLog(records));
  const Vocabulary vocab = BuildVocabulary(records);
  st.WriteOut(artifact::kVocab, vocab.ToText());
  st.counts() = {{"files", files.size()},
                 {"records", records.size()},
                 {"malformed", diagnostics},
                 {"vocabSize", vocab.size()}};
}

void RunIngest(Stage& st, const PipelineConfig& cfg) {
  std::vector<TraceEvent> events;
  size_t diagnostics = 0;
  size_t raw = 0;
  const auto files = ListFiles(cfg.TracesDir(), ".json");
  for (const std::string& f : files) {
    ParseTracesResult r = ParseTraces(st.Read(f));
    diagnostics += r.diagnostics.size();
    raw += r.events.size();
    for (auto& e : FilterEvents(r.events))
      events.push_back(std::move(e));
  }
  st.WriteOut(artifact::kEvents, SerializeTraces(events));
  st.counts() = {{"files", files.size()},
                 {"events", raw},
                 {"kept", events.size()},
                 {"schemaErrors", diagnostics},
                 {"functions", GroupByFunction(events).size()}};
}

void RunLabel(Stage& st, const PipelineConfig&) {
  const auto parsed = ParseTraces(st.ReadOut(artifact::kEvents));
  const auto verdicts = LabelEvents(parsed.events);
  st.WriteOut(artifact::kVerdicts, VerdictsToJsonl(verdicts));
  json per = json::object();
  size_t fp = 0;
  for (Technique t : kAllTechniques)
    per[std::string(TechniqueName(t))] = 0;
  for (const auto& v : verdicts) {
    fp += v.is_fp;
    for (const auto& name : v.techniques.Names())
      per[name] = per[name].get<size_t>() + 1;
  }
  st.counts() = {{"tracedFunctions", verdicts.size()},
                 {"fpFunctions", fp},
                 {"techniques", per}};
}

void RunBuildDataset(Stage& st, const PipelineConfig& cfg) {
  const auto records = ParseLog(st.ReadOut(artifact::kRecords)).records;
  const auto vocab = Vocabulary::FromText(st.ReadOut(artifact::kVocab));
  const auto verdicts = VerdictsFromJsonl(st.ReadOut(artifact::kVerdicts));
  const Datasets d = BuildDatasets(records, verdicts, vocab, cfg.split);
  st.WriteOut(artifact::kFunctionTrain, ToJsonl(d.functions.train));
  st.WriteOut(artifact::kFunctionTest, ToJsonl(d.functions.test));
  st.WriteOut(artifact::kScriptTrain, ToJsonl(d.scripts.train));
  st.WriteOut(artifact::kScriptTest, ToJsonl(d.scripts.test));
  auto positives = [](const auto& v) {
    size_t n = 0;
    for (const auto& e : v)
      n += e.label == Label::kFp;
    return n;
  };
  st.counts() = {
      {"joined", d.joined},
      {"dropped", d.dropped},
      {"functions", d.deduped_functions},
      {"scripts", d.deduped_scripts},
      {"functionTrain", d.functions.train.size()},
      {"functionTrainFp", positives(d.functions.train)},
      {"functionTest", d.functions.test.size()},
      {"functionTestFp", positives(d.functions.test)},
      {"scriptTrain", d.scripts.train.size()},
      {"scriptTrainFp", positives(d.scripts.train)},
      {"scriptTest", d.scripts.test.size()},
      {"scriptTestFp", positives(d.scripts.test)}};
}

void RunTrainEmbed(Stage& st, const PipelineConfig& cfg) {
  const auto vocab = Vocabulary::FromText(st.ReadOut(artifact::kVocab));
  const auto train =
      LabeledExamplesFromJsonl(st.ReadOut(artifact::kFunctionTrain));
  EmbedReport report;
  const auto emb = TrainEmbeddings(
      TokenSequences<LabeledExample>(train), vocab, cfg.embed, &report);
  st.WriteOut(artifact::kEmbeddings, emb.ToText(vocab));
  st.counts() = {{"sequences", train.size()},
                 {"pairsPerEpoch", report.pairs_per_epoch},
                 {"finalLoss", report.epoch_loss.empty()
                                   ? 0.0
                                   : report.epoch_loss.back()}};
}

void RunTrainRf(Stage& st, const PipelineConfig& cfg) {
  const auto vocab = Vocabulary::FromText(st.ReadOut(artifact::kVocab));
  const auto emb =
      EmbeddingMatrix::FromText(st.ReadOut(artifact::kEmbeddings), vocab);
  const auto train =
      LabeledExamplesFromJsonl(st.ReadOut(artifact::kFunctionTrain));
  const auto forest = RandomForest::Fit(
      AveragedFeatures(train, emb), Labels<LabeledExample>(train), cfg.forest);
  st.WriteOut(artifact::kForest, forest.ToJson().dump() + "\n");
  size_t nodes = 0;
  for (const auto& t : forest.trees())
    nodes += t.nodes().size();
  st.counts() = {{"samples", train.size()},
                 {"trees", forest.trees().size()},
                 {"nodes", nodes}};
}

void RunTrainTx(Stage& st, const PipelineConfig& cfg,
                const StageOptions& opt) {
  const ModelVariant variant = ModelVariantFromName(opt.level);
  const auto vocab = Vocabulary::FromText(st.ReadOut(artifact::kVocab));
  std::vector<std::vector<int32_t>> seqs;
  std::vector<int> labels;
  if (variant == ModelVariant::kFunction) {
    const auto train =
        LabeledExamplesFromJsonl(st.ReadOut(artifact::kFunctionTrain));
    seqs = TokenSequences<LabeledExample>(train);
    labels = Labels<LabeledExample>(train);
  } else {
    const auto train =
        ScriptExamplesFromJsonl(st.ReadOut(artifact::kScriptTrain));
    seqs = TokenSequences<ScriptExample>(train);
    labels = Labels<ScriptExample>(train);
  }
  const bool fn = variant == ModelVariant::kFunction;
  TrainReport report;
  const auto model =
      TrainTransformer(seqs, labels, fn ? cfg.function_model : cfg.script_model,
                       vocab.size(), fn ? cfg.function_train : cfg.script_train,
                       &report);
  st.WriteOut(TxName(opt.level), model->CheckpointJson().dump() + "\n");
  st.WriteOut(SidecarName(opt.level),
              TransformerClassifier::Sidecar(model->config(),
                                             vocab.Fingerprint())
                      .dump(2) +
                  "\n");
  st.counts() = {{"sequences", seqs.size()},
                 {"epochs", report.epoch_loss.size()},
                 {"epochLoss", report.epoch_loss}};
}

std::vector<double> ScoreTransformer(Stage& st, const PipelineConfig& cfg,
                                     std::string_view level,
                                     const Vocabulary& vocab,
                                     std::span<const std::vector<int32_t>> seqs) {
  const json sidecar = json::parse(st.ReadOut(SidecarName(level)));
  const std::string fp = sidecar.value("vocabFingerprint", "");
  if (fp != ToHex64(vocab.Fingerprint()))
    Fail(ErrorCode::kSchemaError,
         "model was trained against a different vocabulary");
  TransformerClassifier model(ModelConfig::FromJson(sidecar.at("model")), 0);
  model.LoadCheckpointJson(json::parse(st.ReadOut(TxName(level))));
  (void)cfg;
  return model.PredictProba(seqs);
}

void RunEval(Stage& st, const PipelineConfig& cfg, const StageOptions& opt) {
  std::vector<std::pair<std::string, EvalReport>> rows;
  json reports = json::object();
  if (!opt.scores_file.empty()) {
    const auto scores = ParseScores(st.Read(opt.scores_file), "scores");
    std::vector<int> labels;
    if (!opt.labels_file.empty()) {
      for (double v : ParseScores(st.Read(opt.labels_file), "labels")) {
        if (v != 0 && v != 1)
          Fail(ErrorCode::kSchemaError, "labels must be 0 or 1");
        labels.push_back(static_cast<int>(v));
      }
    } else {
      const auto test =
          LabeledExamplesFromJsonl(st.ReadOut(artifact::kFunctionTest));
      labels = Labels<LabeledExample>(test);
    }
    rows.emplace_back("scores", Evaluate(labels, scores, cfg.eval_threshold));
  } else {
    std::vector<std::string> models = opt.models;
    if (models.empty()) {
      for (std::string_view m : kModels) {
        const std::string needed =
            m == "rf" ? artifact::kForest
                      : TxName(m == "tx-function" ? "function" : "script");
        if (fs::exists(cfg.OutPath(needed)))
          models.emplace_back(m);
      }
      if (models.empty())
        Fail(ErrorCode::kIoError, "eval: no trained model in " + cfg.output_dir);
    }
    const auto vocab = Vocabulary::FromText(st.ReadOut(artifact::kVocab));
    for (const std::string& m : models) {
      std::vector<double> scores;
      std::vector<int> labels;
      if (m == "tx-function" || m == "rf") {
        const auto test =
            LabeledExamplesFromJsonl(st.ReadOut(artifact::kFunctionTest));
        labels = Labels<LabeledExample>(test);
        if (m == "rf") {
          const auto emb = EmbeddingMatrix::FromText(
              st.ReadOut(artifact::kEmbeddings), vocab);
          const auto forest = RandomForest::FromJson(
              json::parse(st.ReadOut(artifact::kForest)));
          scores = forest.PredictProba(AveragedFeatures(test, emb));
        } else {
          scores = ScoreTransformer(st, cfg, "function", vocab,
                                    TokenSequences<LabeledExample>(test));
        }
      } else if (m == "tx-script") {
        const auto test =
            ScriptExamplesFromJsonl(st.ReadOut(artifact::kScriptTest));
        labels = Labels<ScriptExample>(test);
        scores = ScoreTransformer(st, cfg, "script", vocab,
                                  TokenSequences<ScriptExample>(test));
      } else {
        Fail(ErrorCode::kConfigError, "eval: unknown model '" + m + "'");
      }
      st.WriteOut("scores_" + m + ".txt", FormatScores(scores));
      rows.emplace_back(m, Evaluate(labels, scores, cfg.eval_threshold));
    }
  }
  for (const auto& [name, report] : rows)
    reports[name] = report.ToJson();
  const std::string table = FormatReportTable(rows);
  st.WriteOut(artifact::kEvalReport, reports.dump(2) + "\n");
  st.WriteOut(artifact::kEvalTable, table);
  st.counts() = {{"reports", reports}, {"table", table}};
}

void RunSign(Stage& st, const PipelineConfig& cfg) {
  const auto records = ParseLog(st.ReadOut(artifact::kRecords)).records;
  const auto verdicts = VerdictsFromJsonl(st.ReadOut(artifact::kVerdicts));
  std::map<FunctionKey, TechniqueSet> fp;
  for (const auto& v : verdicts) {
    if (v.is_fp)
      fp[v.key] |= v.techniques;
  }
  std::vector<SignatureSource> sources;
  for (const auto& r : records) {
    const auto it = fp.find({r.script_url, r.script_id, r.function_name});
    if (it != fp.end() && !r.opcodes.empty())
      sources.push_back({r.opcodes, it->second, r.script_url});
  }
  const auto built = BuildSignatureSet(sources);
  st.Write(cfg.SignatureFile(), built.set.ToText());
  st.counts() = {{"fpRecords", sources.size()},
                 {"signatures", built.set.size()},
                 {"collisions", built.collisions}};
}

std::vector<FunctionRecord> MatchInput(Stage& st, const PipelineConfig& cfg,
                                       const StageOptions& opt) {
  const std::string text = opt.input_log.empty()
                               ? st.ReadOut(artifact::kRecords)
                               : st.Read(opt.input_log);
  (void)cfg;
  return ParseLog(text).records;
}

void RunMatch(Stage& st, const PipelineConfig& cfg, const StageOptions& opt) {
  const auto sigs = SignatureSet::FromText(st.Read(cfg.SignatureFile()));
  const auto records = MatchInput(st, cfg, opt);
  const auto decisions = MatchAll(records, sigs);
  std::string out;
  size_t blocked = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    const bool block = decisions[i] == MatchDecision::kBlock;
    blocked += block;
    out += json{{"scriptUrl", records[i].script_url},
                {"scriptId", records[i].script_id},
                {"functionName", records[i].function_name},
                {"decision", block ? "block" : "allow"}}
               .dump();
    out += '\n';
  }
  st.WriteOut(artifact::kMatches, out);
  st.counts() = {{"functions", records.size()},
                 {"blocked", blocked},
                 {"allowed", records.size() - blocked},
                 {"signatures", sigs.size()}};
}

void RunBench(Stage& st, const PipelineConfig& cfg, const StageOptions& opt) {
  const auto sigs = SignatureSet::FromText(st.Read(cfg.SignatureFile()));
  const auto records = MatchInput(st, cfg, opt);
  const auto r = BenchMatcher(records, sigs, cfg.bench_repetitions);
  const json report = {{"functions", r.functions},
                       {"blocked", r.blocked},
                       {"meanNs", r.mean_ns},
                       {"p5Ns", r.p5_ns},
                       {"p25Ns", r.p25_ns},
                       {"p50Ns", r.p50_ns},
                       {"p75Ns", r.p75_ns},
                       {"p95Ns", r.p95_ns},
                       {"functionsPerSecond", r.functions_per_second},
                       {"repetitionMeanNs", r.repetition_mean_ns}};
  st.WriteOut(artifact::kBench, report.dump(2) + "\n");
  st.counts() = {{"functions", r.functions},
                 {"blocked", r.blocked},
                 {"p50Ns", r.p50_ns}};
}

}  // namespace

std::string PipelineConfig::LogsDir() const {
  return logs_dir.empty() ? (fs::path(output_dir) / "logs").string()
                          : logs_dir;
}

std::string PipelineConfig::TracesDir() const {
  return traces_dir.empty() ? (fs::path(output_dir) / "traces").string()
                            : traces_dir;
}

std::string PipelineConfig::SignatureFile() const {
  return signature_file.empty() ? OutPath(artifact::kSignatures)
                                : signature_file;
}

std::string PipelineConfig::OutPath(std::string_view name) const {
  return (fs::path(output_dir) / std::string(name)).string();
}

void PipelineConfig::DeriveSeeds() {
  corpus.seed = DeriveSeed(seed, "syngen");
  split.seed = DeriveSeed(seed, "split");
  embed.seed = DeriveSeed(seed, "embed");
  forest.seed = DeriveSeed(seed, "forest");
  function_train.seed = DeriveSeed(seed, "train-function");
  script_train.seed = DeriveSeed(seed, "train-script");
}

json PipelineConfig::ToJson() const {
  json syngen = corpus.ToJson();
  syngen.erase("seed");
  return {{"seed", seed},
          {"paths",
           {{"outputDir", output_dir},
            {"logsDir", logs_dir},
            {"tracesDir", traces_dir},
            {"signatureFile", signature_file}}},
          {"syngen", syngen},
          {"split", SplitToJson(split)},
          {"embed", EmbedToJson(embed)},
          {"forest", [&] {
             json f = forest.ToJson();
             f.erase("seed");
             return f;
           }()},
          {"functionModel", ModelToJson(function_model)},
          {"scriptModel", ModelToJson(script_model)},
          {"functionTrain", TrainToJson(function_train)},
          {"scriptTrain", TrainToJson(script_train)},
          {"evalThreshold", eval_threshold},
          {"benchRepetitions", bench_repetitions}};
}

PipelineConfig PipelineConfig::FromJson(const json& j) {
  PipelineConfig c;
  try {
    if (!j.is_object())
      Fail(ErrorCode::kConfigError, "config must be a JSON object");
    static const std::array<std::string_view, 13> kKeys = {
        "seed",         "paths",         "syngen",        "split",
        "embed",        "forest",        "functionModel", "scriptModel",
        "functionTrain", "scriptTrain",  "evalThreshold", "benchRepetitions",
        "$comment"};
    for (const auto& [key, _] : j.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
        Fail(ErrorCode::kConfigError, "config: unknown key '" + key + "'");
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      c.output_dir = p.value("outputDir", c.output_dir);
      c.logs_dir = p.value("logsDir", c.logs_dir);
      c.traces_dir = p.value("tracesDir", c.traces_dir);
      c.signature_file = p.value("signatureFile", c.signature_file);
    }
    if (j.contains("syngen"))
      c.corpus = CorpusSpec::FromJson(j.at("syngen"));
    if (j.contains("split"))
      SplitFromJson(j.at("split"), c.split);
    if (j.contains("embed"))
      EmbedFromJson(j.at("embed"), c.embed);
    if (j.contains("forest"))
      c.forest = ForestConfig::FromJson(j.at("forest"));
    if (j.contains("functionModel"))
      ModelFromJson(j.at("functionModel"), c.function_model);
    if (j.contains("scriptModel"))
      ModelFromJson(j.at("scriptModel"), c.script_model);
    if (j.contains("functionTrain"))
      TrainFromJson(j.at("functionTrain"), c.function_train);
    if (j.contains("scriptTrain"))
      TrainFromJson(j.at("scriptTrain"), c.script_train);
    c.eval_threshold = j.value("evalThreshold", c.eval_threshold);
    c.bench_repetitions = j.value("benchRepetitions", c.bench_repetitions);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigError, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kConfigError)
      Fail(ErrorCode::kConfigError, e.what());
    throw;
  }
  c.DeriveSeeds();
  // Module validators report kInvalidArgument/kInvalidSpec; surface them as
  // configuration problems.
  try {
    c.corpus.Validate();
    if (!(c.split.train_fraction > 0 && c.split.train_fraction < 1) ||
        c.split.neg_to_pos_ratio < 1 || c.split.positive_duplication < 1)
      Fail(ErrorCode::kConfigError, "split: invalid settings");
    c.embed.Validate();
    c.forest.Validate();
    for (ModelConfig m : {c.function_model, c.script_model}) {
      m.vocab_size = Vocabulary::kFirstRealId + 1;  // real size known later
      m.Validate();
    }
  } catch (const Error& e) {
    Fail(ErrorCode::kConfigError, e.what());
  }
  ValidateTrain(c.function_train, "functionTrain");
  ValidateTrain(c.script_train, "scriptTrain");
  if (!(c.eval_threshold >= 0 && c.eval_threshold <= 1))
    Fail(ErrorCode::kConfigError, "evalThreshold must lie in [0, 1]");
  if (c.bench_repetitions < 1)
    Fail(ErrorCode::kConfigError, "benchRepetitions must be positive");
  return c;
}

void ApplyOverride(json& config, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    Fail(ErrorCode::kConfigError,
         "override must look like key.path=value: " + std::string(assignment));
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded())
    value = raw;
  json defaults = PipelineConfig{}.ToJson();
  json* node = &config;
  const json* known = &defaults;
  size_t begin = 0;
  while (true) {
    const size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty() || !known->is_object() || !known->contains(key))
      Fail(ErrorCode::kConfigError, "unknown config key '" + path + "'");
    known = &known->at(key);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object())
      (*node)[key] = json::object();
    node = &(*node)[key];
    begin = dot + 1;
  }
}

std::vector<HeuristicVerdict> LabelEvents(std::span<const TraceEvent> events) {
  const auto groups = GroupByFunction(FilterEvents(events));
  return LabelTraces(groups);
}

Datasets BuildDatasets(std::span<const FunctionRecord> records,
                       std::span<const HeuristicVerdict> verdicts,
                       const Vocabulary& vocab, const SplitSpec& split) {
  Datasets d;
  const JoinResult joined = JoinLabels(records, verdicts, vocab);
  d.joined = joined.examples.size();
  d.dropped = joined.dropped_anonymous + joined.dropped_invalid_url;
  const DedupeResult deduped = Dedupe(joined.examples);
  d.deduped_functions = deduped.examples.size();
  d.functions = BalanceAndSplit(deduped.examples, split);
  const ScriptDedupeResult scripts =
      BuildScriptExamples(joined.examples, records, vocab);
  d.deduped_scripts = scripts.examples.size();
  SplitSpec script_split = split;
  script_split.seed = DeriveSeed(split.seed, "scripts");
  d.scripts = BalanceAndSplit(scripts.examples, script_split);
  return d;
}

nn::Matrix AveragedFeatures(std::span<const LabeledExample> examples,
                            const EmbeddingMatrix& emb) {
  nn::Matrix x(static_cast<Eigen::Index>(examples.size()), emb.dim);
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto v = AverageVector(examples[i].token_ids, emb);
    for (int k = 0; k < emb.dim; ++k)
      x(static_cast<Eigen::Index>(i), k) = v[static_cast<size_t>(k)];
  }
  return x;
}

std::unique_ptr<TransformerClassifier> TrainTransformer(
    std::span<const std::vector<int32_t>> sequences,
    std::span<const int> labels, ModelConfig model, int vocab_size,
    const TrainConfig& train, TrainReport* report) {
  model.vocab_size = vocab_size;
  auto clf = std::make_unique<TransformerClassifier>(
      model, DeriveSeed(train.seed, "init"));
  TrainReport r = clf->Train(sequences, labels, train);
  if (report)
    *report = std::move(r);
  return clf;
}

std::span<const std::string_view> StageNames() {
  return kStages;
}

json RunStage(std::string_view name, const PipelineConfig& cfg,
              const StageOptions& options) {
  if (std::find(kStages.begin(), kStages.end(), name) == kStages.end())
    Fail(ErrorCode::kConfigError, "unknown subcommand '" + std::string(name) +
                                      "'");
  // Both model levels keep their own run summary.
  Stage st(name == "train-tx" ? "train-tx_" + options.level : std::string(name),
           cfg);
  if (name == "syngen")
    RunSyngen(st, cfg);
  else if (name == "parse")
    RunParse(st, cfg);
  else if (name == "ingest")
    RunIngest(st, cfg);
  else if (name == "label")
    RunLabel(st, cfg);
  else if (name == "build-dataset")
    RunBuildDataset(st, cfg);
  else if (name == "train-embed")
    RunTrainEmbed(st, cfg);
  else if (name == "train-rf")
    RunTrainRf(st, cfg);
  else if (name == "train-tx")
    RunTrainTx(st, cfg, options);
  else if (name == "eval")
    RunEval(st, cfg, options);
  else if (name == "sign")
    RunSign(st, cfg);
  else if (name == "match")
    RunMatch(st, cfg, options);
  else
    RunBench(st, cfg, options);
  return st.Finish();
}

}  // namespace bcfp
