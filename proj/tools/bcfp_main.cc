// Command-line driver: one subcommand per pipeline stage.

#include <iostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bcfp/error.h"
#include "bcfp/pipeline.h"
#include "bcfp/text_util.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string StageDescription(std::string_view name) {
  static const std::pair<std::string_view, std::string_view> kDescriptions[] = {
      {"syngen", "Generate a synthetic log, trace and manifest corpus"},
      {"parse", "Parse bytecode logs into records and a vocabulary"},
      {"ingest", "Decode trace JSON into API call events"},
      {"label", "Apply the fingerprinting heuristics to events"},
      {"build-dataset", "Join, dedupe, balance and split examples"},
      {"train-embed", "Train opcode embeddings"},
      {"train-rf", "Train the random forest on averaged embeddings"},
      {"train-tx", "Train a transformer classifier"},
      {"eval", "Score test sets and write metrics"},
      {"sign", "Emit signatures for fingerprinting functions"},
      {"match", "Match a log against the signature file"},
      {"bench", "Time the signature matcher"},
  };
  for (const auto& [n, d] : kDescriptions)
    if (n == name)
      return std::string(d);
  return {};
}

struct GlobalFlags {
  std::string config_file;
  std::string output_dir;
  std::string logs_dir;
  std::string traces_dir;
  std::string signature_file;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_set = false;
};

bcfp::PipelineConfig LoadConfig(const GlobalFlags& flags) {
  nlohmann::json j = nlohmann::json::object();
  if (!flags.config_file.empty()) {
    std::string text;
    try {
      text = bcfp::ReadFileOrThrow(flags.config_file);
    } catch (const bcfp::Error& e) {
      bcfp::Fail(bcfp::ErrorCode::kConfigError, e.what());
    }
    j = nlohmann::json::parse(text, nullptr, false, /*ignore_comments=*/true);
    if (j.is_discarded())
      bcfp::Fail(bcfp::ErrorCode::kConfigError,
                 "config file is not valid JSON: " + flags.config_file);
  }
  for (const std::string& o : flags.overrides)
    bcfp::ApplyOverride(j, o);
  if (flags.seed_set)
    j["seed"] = flags.seed;
  auto set_path = [&](const char* key, const std::string& v) {
    if (!v.empty())
      j["paths"][key] = v;
  };
  set_path("outputDir", flags.output_dir);
  set_path("logsDir", flags.logs_dir);
  set_path("tracesDir", flags.traces_dir);
  set_path("signatureFile", flags.signature_file);
  return bcfp::PipelineConfig::FromJson(j);
}

int ExitCodeFor(bcfp::ErrorCode code) {
  switch (code) {
    case bcfp::ErrorCode::kConfigError:
    case bcfp::ErrorCode::kInvalidSpec:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bytecode fingerprinting detection pipeline"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  GlobalFlags flags;
  app.add_option("-c,--config", flags.config_file, "JSON config file");
  app.add_option("-o,--out", flags.output_dir, "Output directory");
  app.add_option("--logs", flags.logs_dir, "Bytecode log directory");
  app.add_option("--traces", flags.traces_dir, "Trace JSON directory");
  app.add_option("--signatures", flags.signature_file, "Signature file");
  app.add_option("--set", flags.overrides,
                 "Config override key.path=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", flags.seed, "Top-level seed");

  bcfp::StageOptions opts;
  for (std::string_view name : bcfp::StageNames()) {
    CLI::App* sub = app.add_subcommand(std::string(name),
                                        StageDescription(name));
    if (name == "train-tx") {
      sub->add_option("--level", opts.level, "function or script")
          ->check(CLI::IsMember({"function", "script"}));
    } else if (name == "eval") {
      sub->add_option("--model", opts.models,
                      "tx-function, tx-script or rf (repeatable)")
          ->check(CLI::IsMember({"tx-function", "tx-script", "rf"}));
      sub->add_option("--scores-file", opts.scores_file,
                      "Score per line; evaluated instead of a model");
      sub->add_option("--labels-file", opts.labels_file,
                      "0/1 label per line for --scores-file");
    } else if (name == "match" || name == "bench") {
      sub->add_option("--input", opts.input_log,
                      "Bytecode log to match (default records.log)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  flags.seed_set = seed_opt->count() > 0;
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    const bcfp::PipelineConfig cfg = LoadConfig(flags);
    const nlohmann::json summary = bcfp::RunStage(name, cfg, opts);
    const nlohmann::json& counts = summary.at("counts");
    if (name == "eval")
      std::cout << counts.at("table").get<std::string>();
    else
      std::cout << name << ": " << counts.dump() << "\n";
    return 0;
  } catch (const bcfp::Error& e) {
    std::cerr << "bcfp " << name << ": " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "bcfp " << name << ": " << e.what() << "\n";
    return kExitData;
  }
}
