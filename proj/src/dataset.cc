#include "bcfp/dataset.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "bcfp/error.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"
#include "bcfp/traces.h"

namespace bcfp {

namespace {

using nlohmann::json;

struct SequenceHash {
  size_t operator()(const std::vector<int32_t>& ids) const {
    uint64_t h = 0x84222325cbf29ce4ULL;
    for (int32_t id : ids)
      h = Mix64(h ^ static_cast<uint32_t>(id));
    return static_cast<size_t>(h);
  }
};

template <typename Example>
Split<Example> BalanceAndSplitImpl(std::span<const Example> examples,
                                   const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    Fail(ErrorCode::kInvalidArgument, "train_fraction must be in (0, 1)");
  if (spec.neg_to_pos_ratio < 1 || spec.positive_duplication < 1)
    Fail(ErrorCode::kInvalidArgument, "ratio and duplication must be >= 1");

  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < examples.size(); ++i)
    (examples[i].label == Label::kFp ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    Fail(ErrorCode::kInsufficientClass,
         "need both classes (FP=" + std::to_string(pos.size()) +
             ", NonFP=" + std::to_string(neg.size()) + ")");

  Rng split_rng(DeriveSeed(spec.seed, "split"));
  auto partition = [&](std::vector<size_t> idx) {
    split_rng.Shuffle(idx);
    const auto n_train = static_cast<size_t>(
        std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    std::vector<size_t> train(idx.begin(), idx.begin() + n_train);
    std::vector<size_t> test(idx.begin() + n_train, idx.end());
    return std::pair(std::move(train), std::move(test));
  };
  auto [pos_train, pos_test] = partition(pos);
  auto [neg_train, neg_test] = partition(neg);

  Split<Example> split;
  // Undersample training negatives.
  Rng sample_rng(DeriveSeed(spec.seed, "undersample"));
  const size_t wanted =
      static_cast<size_t>(spec.neg_to_pos_ratio) * pos_train.size();
  if (wanted >= neg_train.size()) {
    split.negatives_capped = wanted > neg_train.size();
  } else {
    sample_rng.Shuffle(neg_train);
    neg_train.resize(wanted);
  }

  std::vector<size_t> train_idx;
  for (int d = 0; d < spec.positive_duplication; ++d)
    train_idx.insert(train_idx.end(), pos_train.begin(), pos_train.end());
  train_idx.insert(train_idx.end(), neg_train.begin(), neg_train.end());
  Rng order_rng(DeriveSeed(spec.seed, "train-order"));
  std::sort(train_idx.begin(), train_idx.end());
  order_rng.Shuffle(train_idx);

  std::vector<size_t> test_idx = pos_test;
  test_idx.insert(test_idx.end(), neg_test.begin(), neg_test.end());
  std::sort(test_idx.begin(), test_idx.end());

  std::unordered_map<std::vector<int32_t>, int, SequenceHash> seen;
  for (size_t i : train_idx)
    seen.emplace(examples[i].token_ids, 0);
  for (size_t i : test_idx) {
    if (seen.contains(examples[i].token_ids))
      Fail(ErrorCode::kInvalidArgument,
           "token sequence appears in both train and test; dedupe first");
  }

  for (size_t i : train_idx)
    split.train.push_back(examples[i]);
  for (size_t i : test_idx)
    split.test.push_back(examples[i]);
  return split;
}

json ExampleToJson(const LabeledExample& e) {
  return {{"domain", e.domain},
          {"scriptUrl", e.script_url},
          {"scriptId", e.script_id},
          {"functionName", e.function_name},
          {"tokenIds", e.token_ids},
          {"label", LabelName(e.label)},
          {"techniques", e.techniques.Names()}};
}

json ExampleToJson(const ScriptExample& e) {
  return {{"domain", e.domain},
          {"scriptUrl", e.script_url},
          {"scriptId", e.script_id},
          {"tokenIds", e.token_ids},
          {"label", LabelName(e.label)},
          {"techniques", e.techniques.Names()}};
}

template <typename Fn>
void ForEachJsonLine(std::string_view text, Fn&& fn) {
  size_t line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    if (TrimWhitespace(line).empty())
      continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      Fail(ErrorCode::kSchemaError,
           "line " + std::to_string(line_no) + ": expected JSON object");
    try {
      fn(obj);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kSchemaError,
           "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::string_view LabelName(Label label) {
  return label == Label::kFp ? "FP" : "NonFP";
}

Label LabelFromName(std::string_view name) {
  if (name == "FP")
    return Label::kFp;
  if (name == "NonFP")
    return Label::kNonFp;
  Fail(ErrorCode::kSchemaError, "unknown label '" + std::string(name) + "'");
}

JoinResult JoinLabels(std::span<const FunctionRecord> records,
                      std::span<const HeuristicVerdict> verdicts,
                      const Vocabulary& vocab, size_t max_len) {
  std::unordered_map<FunctionKey, const HeuristicVerdict*, FunctionKeyHash>
      by_key;
  by_key.reserve(verdicts.size());
  for (const HeuristicVerdict& v : verdicts) {
    if (!by_key.emplace(v.key, &v).second) {
      Fail(ErrorCode::kDuplicateVerdictKey,
           v.key.script_url + "#" + std::to_string(v.key.script_id) + ":" +
               v.key.function_name);
    }
  }

  JoinResult result;
  for (size_t i = 0; i < records.size(); ++i) {
    const FunctionRecord& r = records[i];
    if (r.IsAnonymous()) {
      ++result.dropped_anonymous;
      continue;
    }
    if (!IsWebScriptUrl(r.script_url)) {
      ++result.dropped_invalid_url;
      continue;
    }
    LabeledExample e;
    e.domain = UrlHost(r.script_url);
    e.script_url = r.script_url;
    e.script_id = r.script_id;
    e.function_name = r.function_name;
    e.token_ids = Tokenize(r, vocab, max_len);
    e.log_index = i;
    auto it = by_key.find({r.script_url, r.script_id, r.function_name});
    if (it != by_key.end()) {
      ++result.matched_verdicts;
      if (it->second->is_fp) {
        e.label = Label::kFp;
        e.techniques = it->second->techniques;
      }
    }
    result.examples.push_back(std::move(e));
  }
  return result;
}

DedupeResult Dedupe(std::span<const LabeledExample> examples) {
  DedupeResult result;
  std::unordered_map<std::vector<int32_t>, size_t, SequenceHash> slot;
  std::unordered_map<std::vector<int32_t>, uint8_t, SequenceHash> labels_seen;
  for (const LabeledExample& e : examples) {
    labels_seen[e.token_ids] |= e.label == Label::kFp ? 2 : 1;
    auto [it, inserted] = slot.try_emplace(e.token_ids, result.examples.size());
    if (inserted) {
      result.examples.push_back(e);
      continue;
    }
    ++result.removed;
    LabeledExample& kept = result.examples[it->second];
    if (kept.label == Label::kNonFp && e.label == Label::kFp)
      kept = e;
  }
  for (const auto& [seq, mask] : labels_seen) {
    if (mask == 3)
      ++result.conflicts;
  }
  return result;
}

ScriptDedupeResult BuildScriptExamples(std::span<const LabeledExample> examples,
                                       std::span<const FunctionRecord> records,
                                       const Vocabulary& vocab,
                                       size_t max_len) {
  struct Group {
    ScriptExample script;
    std::vector<size_t> members;  // indices into |examples|
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, uint64_t>, size_t> index;
  for (size_t i = 0; i < examples.size(); ++i) {
    const LabeledExample& e = examples[i];
    auto [it, inserted] =
        index.try_emplace({e.script_url, e.script_id}, groups.size());
    if (inserted) {
      Group g;
      g.script.script_url = e.script_url;
      g.script.script_id = e.script_id;
      g.script.domain = e.domain;
      groups.push_back(std::move(g));
    }
    groups[it->second].members.push_back(i);
  }

  ScriptDedupeResult result;
  std::unordered_map<std::vector<int32_t>, size_t, SequenceHash> slot;
  for (Group& g : groups) {
    std::sort(g.members.begin(), g.members.end(), [&](size_t a, size_t b) {
      return examples[a].log_index < examples[b].log_index;
    });
    for (size_t m : g.members) {
      const LabeledExample& e = examples[m];
      if (e.log_index >= records.size())
        Fail(ErrorCode::kInvalidArgument, "example log_index out of range");
      if (e.label == Label::kFp) {
        g.script.label = Label::kFp;
        g.script.techniques |= e.techniques;
      }
      const size_t room = max_len - std::min(max_len, g.script.token_ids.size());
      if (room == 0)
        continue;
      std::vector<int32_t> ids =
          Tokenize(records[e.log_index].opcodes, vocab, room);
      g.script.token_ids.insert(g.script.token_ids.end(), ids.begin(),
                                ids.end());
    }
    auto [it, inserted] =
        slot.try_emplace(g.script.token_ids, result.examples.size());
    if (inserted) {
      result.examples.push_back(std::move(g.script));
      continue;
    }
    ++result.removed;
    if (g.script.label == Label::kFp) {
      result.examples[it->second].label = Label::kFp;
      result.examples[it->second].techniques |= g.script.techniques;
    }
  }
  return result;
}

Split<LabeledExample> BalanceAndSplit(std::span<const LabeledExample> examples,
                                      const SplitSpec& spec) {
  return BalanceAndSplitImpl(examples, spec);
}

Split<ScriptExample> BalanceAndSplit(std::span<const ScriptExample> examples,
                                     const SplitSpec& spec) {
  return BalanceAndSplitImpl(examples, spec);
}

std::string ToJsonl(std::span<const LabeledExample> examples) {
  std::string out;
  for (const LabeledExample& e : examples)
    out += ExampleToJson(e).dump() + "\n";
  return out;
}

std::string ToJsonl(std::span<const ScriptExample> examples) {
  std::string out;
  for (const ScriptExample& e : examples)
    out += ExampleToJson(e).dump() + "\n";
  return out;
}

std::vector<LabeledExample> LabeledExamplesFromJsonl(std::string_view text) {
  std::vector<LabeledExample> out;
  ForEachJsonLine(text, [&](const json& obj) {
    LabeledExample e;
    e.domain = obj.value("domain", "");
    e.script_url = obj.at("scriptUrl").get<std::string>();
    e.script_id = obj.at("scriptId").get<uint64_t>();
    e.function_name = obj.at("functionName").get<std::string>();
    e.token_ids = obj.at("tokenIds").get<std::vector<int32_t>>();
    e.label = LabelFromName(obj.at("label").get<std::string>());
    e.techniques = TechniqueSet::FromNames(
        obj.value("techniques", std::vector<std::string>{}));
    e.log_index = out.size();
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<ScriptExample> ScriptExamplesFromJsonl(std::string_view text) {
  std::vector<ScriptExample> out;
  ForEachJsonLine(text, [&](const json& obj) {
    ScriptExample e;
    e.domain = obj.value("domain", "");
    e.script_url = obj.at("scriptUrl").get<std::string>();
    e.script_id = obj.at("scriptId").get<uint64_t>();
    e.token_ids = obj.at("tokenIds").get<std::vector<int32_t>>();
    e.label = LabelFromName(obj.at("label").get<std::string>());
    e.techniques = TechniqueSet::FromNames(
        obj.value("techniques", std::vector<std::string>{}));
    out.push_back(std::move(e));
  });
  return out;
}

}  // namespace bcfp
