#include "bcfp/signatures.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bcfp/error.h"
#include "bcfp/hash.h"
#include "bcfp/text_util.h"

namespace bcfp {

namespace {

double Percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty())
    return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string JoinOpcodes(std::span<const std::string> opcodes) {
  std::string s;
  for (size_t i = 0; i < opcodes.size(); ++i) {
    if (i)
      s += ',';
    s += opcodes[i];
  }
  return s;
}

}  // namespace

uint64_t HashSequence(std::span<const std::string> opcodes) {
  if (opcodes.empty())
    Fail(ErrorCode::kEmptySequence, "cannot hash an empty opcode sequence");
  uint64_t h = kFnv64Offset;
  for (size_t i = 0; i < opcodes.size(); ++i) {
    if (i)
      h = Fnv1a64(",", h);
    h = Fnv1a64(opcodes[i], h);
  }
  return h;
}

void SignatureSet::Insert(uint64_t hash, TechniqueSet techniques,
                          std::string_view script_url) {
  auto [it, inserted] = index_.try_emplace(hash, entries_.size());
  if (inserted) {
    entries_.push_back({hash, techniques, std::string(script_url)});
    return;
  }
  entries_[it->second].techniques |= techniques;
}

std::vector<SignatureEntry> SignatureSet::Entries() const {
  std::vector<SignatureEntry> out = entries_;
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.hash < b.hash; });
  return out;
}

std::string SignatureSet::ToText() const {
  std::string out;
  for (const SignatureEntry& e : Entries()) {
    out += ToHex64(e.hash);
    if (!e.techniques.empty() || !e.script_url.empty()) {
      out += " #";
      const auto names = e.techniques.Names();
      for (size_t i = 0; i < names.size(); ++i) {
        if (i)
          out += '|';
        out += names[i];
      }
      out += ',';
      out += e.script_url;
    }
    out += '\n';
  }
  return out;
}

SignatureSet SignatureSet::FromText(std::string_view text) {
  SignatureSet set;
  size_t line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    if (size_t hash_mark = line.find('#'); hash_mark != std::string_view::npos)
      line = line.substr(0, hash_mark);
    line = TrimWhitespace(line);
    if (line.empty())
      continue;
    bool ok = line.size() == 16;
    uint64_t value = 0;
    for (char c : line) {
      int digit = -1;
      if (c >= '0' && c <= '9')
        digit = c - '0';
      else if (c >= 'a' && c <= 'f')
        digit = c - 'a' + 10;
      if (digit < 0) {
        ok = false;
        break;
      }
      value = (value << 4) | static_cast<uint64_t>(digit);
    }
    if (!ok) {
      Fail(ErrorCode::kSchemaError,
           "signature line " + std::to_string(line_no) +
               ": expected 16 lowercase hex digits");
    }
    set.Insert(value);
  }
  return set;
}

SignatureBuildResult BuildSignatureSet(
    std::span<const SignatureSource> sources) {
  SignatureBuildResult result;
  std::unordered_map<uint64_t, std::string> preimage;
  for (const SignatureSource& s : sources) {
    const uint64_t h = HashSequence(s.opcodes);
    std::string joined = JoinOpcodes(s.opcodes);
    auto [it, inserted] = preimage.try_emplace(h, joined);
    if (!inserted && it->second != joined) {
      ++result.collisions;
      continue;
    }
    result.set.Insert(h, s.techniques, s.script_url);
  }
  return result;
}

SignatureBuildResult BuildSignatureSet(std::span<const LabeledExample> examples,
                                       const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> sequences;
  std::vector<SignatureSource> sources;
  for (const LabeledExample& e : examples) {
    if (e.label != Label::kFp || e.token_ids.empty())
      continue;
    std::vector<std::string> ops;
    ops.reserve(e.token_ids.size());
    for (int32_t id : e.token_ids)
      ops.push_back(vocab.MnemonicOf(id));
    sequences.push_back(std::move(ops));
  }
  size_t k = 0;
  for (const LabeledExample& e : examples) {
    if (e.label != Label::kFp || e.token_ids.empty())
      continue;
    sources.push_back({sequences[k++], e.techniques, e.script_url});
  }
  return BuildSignatureSet(sources);
}

MatchDecision Match(std::span<const std::string> opcodes,
                    const SignatureSet& sigs) {
  if (opcodes.empty() || sigs.empty())
    return MatchDecision::kAllow;
  return sigs.Contains(HashSequence(opcodes)) ? MatchDecision::kBlock
                                              : MatchDecision::kAllow;
}

MatchDecision Match(const FunctionRecord& record, const SignatureSet& sigs) {
  return Match(record.opcodes, sigs);
}

std::vector<MatchDecision> MatchAll(std::span<const FunctionRecord> records,
                                    const SignatureSet& sigs) {
  std::vector<MatchDecision> out(records.size(), MatchDecision::kAllow);
  const auto n = static_cast<ptrdiff_t>(records.size());
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<size_t>(i)] = Match(records[static_cast<size_t>(i)], sigs);
  return out;
}

std::vector<MatchDecision> MatchAllSerial(
    std::span<const FunctionRecord> records, const SignatureSet& sigs) {
  std::vector<MatchDecision> out;
  out.reserve(records.size());
  for (const FunctionRecord& r : records)
    out.push_back(Match(r, sigs));
  return out;
}

LatencyReport BenchMatcher(std::span<const FunctionRecord> records,
                           const SignatureSet& sigs, int repetitions) {
  if (repetitions < 1)
    Fail(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  using Clock = std::chrono::steady_clock;
  LatencyReport report;
  report.functions = records.size();
  std::vector<double> samples;
  samples.reserve(records.size() * static_cast<size_t>(repetitions));
  double total_ns = 0.0;
  for (int rep = 0; rep < repetitions; ++rep) {
    double rep_ns = 0.0;
    size_t blocked = 0;
    for (const FunctionRecord& r : records) {
      const auto t0 = Clock::now();
      const MatchDecision d = Match(r, sigs);
      const auto t1 = Clock::now();
      const double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
      blocked += d == MatchDecision::kBlock;
      samples.push_back(ns);
      rep_ns += ns;
    }
    report.blocked = blocked;
    total_ns += rep_ns;
    report.repetition_mean_ns.push_back(
        records.empty() ? 0.0 : rep_ns / static_cast<double>(records.size()));
  }
  std::sort(samples.begin(), samples.end());
  if (!samples.empty()) {
    report.mean_ns = total_ns / static_cast<double>(samples.size());
    report.p5_ns = Percentile(samples, 0.05);
    report.p25_ns = Percentile(samples, 0.25);
    report.p50_ns = Percentile(samples, 0.50);
    report.p75_ns = Percentile(samples, 0.75);
    report.p95_ns = Percentile(samples, 0.95);
    report.functions_per_second =
        total_ns > 0 ? 1e9 * static_cast<double>(samples.size()) / total_ns
                     : 0.0;
  }
  return report;
}

}  // namespace bcfp
