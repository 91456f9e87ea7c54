#include "bcfp/syngen.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "bcfp/error.h"
#include "bcfp/opcodes.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"

namespace bcfp {

namespace {

using nlohmann::json;

constexpr size_t kReservedCount = 24;
constexpr size_t kMotifLength = 12;

constexpr std::string_view kNameStems[] = {
    "init",   "render", "collect", "handler", "update", "load",
    "format", "parse",  "track",   "measure", "draw",   "sync",
};

constexpr std::string_view kTextAlphabet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ";

void CheckLength(const LengthDistribution& d, const char* what) {
  if (!(d.median > 0) || !(d.sigma >= 0) || !std::isfinite(d.median) ||
      !std::isfinite(d.sigma)) {
    Fail(ErrorCode::kInvalidSpec,
         std::string("syngen: ") + what + " needs median > 0, sigma >= 0");
  }
  if (d.min < 1 || d.min > d.max) {
    Fail(ErrorCode::kInvalidSpec,
         std::string("syngen: ") + what + " needs 1 <= min <= max");
  }
}

uint32_t SampleLength(Rng& rng, const LengthDistribution& d) {
  const double v = std::round(rng.LogNormal(std::log(d.median), d.sigma));
  const double clamped =
      std::clamp(v, static_cast<double>(d.min), static_cast<double>(d.max));
  return static_cast<uint32_t>(clamped);
}

json LengthToJson(const LengthDistribution& d) {
  return {{"median", d.median}, {"sigma", d.sigma}, {"min", d.min},
          {"max", d.max}};
}

LengthDistribution LengthFromJson(const json& j, LengthDistribution d) {
  d.median = j.value("median", d.median);
  d.sigma = j.value("sigma", d.sigma);
  d.min = j.value("min", d.min);
  d.max = j.value("max", d.max);
  return d;
}

// Background mnemonics in rank order with a Zipf CDF over them.
class OpcodeSampler {
 public:
  OpcodeSampler(const CorpusSpec& spec) {
    std::set<std::string_view> excluded(ReservedMotifOpcodes().begin(),
                                        ReservedMotifOpcodes().end());
    for (const std::string& m : spec.motif)
      excluded.insert(m);
    double total = 0;
    for (std::string_view op : KnownOpcodes()) {
      if (excluded.contains(op))
        continue;
      ops_.emplace_back(op);
      total += 1.0 / std::pow(static_cast<double>(ops_.size()),
                              spec.zipf_exponent);
      cdf_.push_back(total);
    }
    for (double& c : cdf_)
      c /= total;
  }

  const std::string& Sample(Rng& rng) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.Uniform());
    const auto i = std::min(static_cast<size_t>(it - cdf_.begin()),
                            ops_.size() - 1);
    return ops_[i];
  }

 private:
  std::vector<std::string> ops_;
  std::vector<double> cdf_;
};

std::string RandomText(Rng& rng, size_t code_points) {
  std::string s;
  // One multi-byte character keeps byte length above the code-point count.
  const size_t wide_at = rng.Below(code_points);
  for (size_t i = 0; i < code_points; ++i) {
    if (i == wide_at)
      s += "\xc3\xa9";  // U+00E9
    else
      s += kTextAlphabet[rng.Below(kTextAlphabet.size())];
  }
  return s;
}

std::string FontName(size_t i) {
  return std::to_string(10 + i % 7) + "px font-" + std::to_string(i);
}

// Appends events for one function.
class TraceWriter {
 public:
  TraceWriter(std::vector<TraceEvent>& out, const FunctionKey& key,
              std::string page_url)
      : out_(out), key_(key), page_url_(std::move(page_url)) {}

  void Emit(std::string api, std::vector<std::string> args = {}) {
    TraceEvent e;
    e.api = std::move(api);
    e.args = std::move(args);
    e.script_url = key_.script_url;
    e.script_id = key_.script_id;
    e.function_name = key_.function_name;
    e.line = 1 + static_cast<uint32_t>(count_ / 4);
    e.column = 1 + 8 * static_cast<uint32_t>(count_ % 4);
    e.page_url = page_url_;
    out_.push_back(std::move(e));
    ++count_;
  }

 private:
  std::vector<TraceEvent>& out_;
  const FunctionKey& key_;
  std::string page_url_;
  size_t count_ = 0;
};

constexpr std::string_view kCtx = "CanvasRenderingContext2D.";

void CanvasTrace(TraceWriter& w, Rng& rng, size_t text_len, bool state_call) {
  w.Emit(std::string(kCtx) + "fillStyle.set", {"#f60"});
  w.Emit(std::string(kCtx) + "fillText",
         {RandomText(rng, text_len), std::to_string(rng.Below(20)), "15"});
  if (state_call)
    w.Emit(std::string(kCtx) + "save");
  if (rng.Bernoulli(0.5))
    w.Emit("HTMLCanvasElement.toDataURL");
  else
    w.Emit(std::string(kCtx) + "toDataURL", {"image/png"});
}

void FontTrace(TraceWriter& w, size_t fonts, size_t calls) {
  const size_t steps = std::max(fonts, calls);
  for (size_t i = 0; i < steps; ++i) {
    w.Emit(std::string(kCtx) + "font.set", {FontName(i % fonts)});
    if (i < calls)
      w.Emit(std::string(kCtx) + "measureText", {"mmmmmmmmmmlli"});
  }
}

void AudioSetup(TraceWriter& w) {
  w.Emit("BaseAudioContext.createOscillator");
  w.Emit("BaseAudioContext.createDynamicsCompressor");
  w.Emit("AudioNode.connect");
  w.Emit("AudioNode.connect");
  w.Emit("OfflineAudioContext.startRendering");
}

void WebRtcTrace(TraceWriter& w, Rng& rng, bool local_description) {
  w.Emit("RTCPeerConnection.createDataChannel", {""});
  if (rng.Bernoulli(0.5))
    w.Emit("RTCPeerConnection.createOffer");
  if (local_description)
    w.Emit("RTCPeerConnection.setLocalDescription");
}

void PositiveTrace(TraceWriter& w, Rng& rng, Technique t) {
  switch (t) {
    case Technique::kCanvas:
      CanvasTrace(w, rng, 10 + rng.Below(21), false);
      break;
    case Technique::kCanvasFont: {
      const size_t fonts = 21 + rng.Below(20);
      FontTrace(w, fonts, fonts + rng.Below(10));
      break;
    }
    case Technique::kAudio:
      AudioSetup(w);
      w.Emit("AudioBuffer.getChannelData", {"0"});
      break;
    case Technique::kWebRtc:
      WebRtcTrace(w, rng, true);
      break;
  }
}

void NearMissTrace(TraceWriter& w, Rng& rng, NearMiss n) {
  switch (n) {
    case NearMiss::kNone:
      break;
    case NearMiss::kShortFillText:
      CanvasTrace(w, rng, 9, false);
      break;
    case NearMiss::kCanvasStateCall:
      CanvasTrace(w, rng, 10 + rng.Below(21), true);
      break;
    case NearMiss::kFewMeasureText:
      FontTrace(w, 25, 19);
      break;
    case NearMiss::kTwentyFonts:
      FontTrace(w, 20, 25);
      break;
    case NearMiss::kNoChannelData:
      AudioSetup(w);
      break;
    case NearMiss::kChannelDataFirst:
      w.Emit("AudioBuffer.getChannelData", {"0"});
      AudioSetup(w);
      break;
    case NearMiss::kNoLocalDescription:
      WebRtcTrace(w, rng, false);
      break;
  }
}

constexpr NearMiss kNearMisses[] = {
    NearMiss::kShortFillText,  NearMiss::kCanvasStateCall,
    NearMiss::kFewMeasureText, NearMiss::kTwentyFonts,
    NearMiss::kNoChannelData,  NearMiss::kChannelDataFirst,
    NearMiss::kNoLocalDescription,
};

NearMiss NearMissFromName(std::string_view name) {
  if (name == NearMissName(NearMiss::kNone))
    return NearMiss::kNone;
  for (NearMiss n : kNearMisses) {
    if (NearMissName(n) == name)
      return n;
  }
  Fail(ErrorCode::kSchemaError, "manifest: unknown nearMiss '" +
                                    std::string(name) + "'");
}

}  // namespace

const std::vector<std::string>& ReservedMotifOpcodes() {
  static const std::vector<std::string> reserved = [] {
    const auto known = KnownOpcodes();
    return std::vector<std::string>(known.end() - kReservedCount, known.end());
  }();
  return reserved;
}

std::vector<std::string> CorpusSpec::DefaultMotif() {
  const auto& r = ReservedMotifOpcodes();
  return {r.begin(), r.begin() + kMotifLength};
}

std::vector<std::string> CorpusSpec::RenamedMotif() {
  const auto& r = ReservedMotifOpcodes();
  return {r.begin() + kMotifLength, r.begin() + 2 * kMotifLength};
}

std::string_view NearMissName(NearMiss n) {
  switch (n) {
    case NearMiss::kNone:
      return "none";
    case NearMiss::kShortFillText:
      return "shortFillText";
    case NearMiss::kCanvasStateCall:
      return "canvasStateCall";
    case NearMiss::kFewMeasureText:
      return "fewMeasureText";
    case NearMiss::kTwentyFonts:
      return "twentyFonts";
    case NearMiss::kNoChannelData:
      return "noChannelData";
    case NearMiss::kChannelDataFirst:
      return "channelDataFirst";
    case NearMiss::kNoLocalDescription:
      return "noLocalDescription";
  }
  return "";
}

void CorpusSpec::Validate() const {
  if (n_functions == 0 && n_scripts == 0)
    Fail(ErrorCode::kInvalidSpec, "syngen: n_scripts must be positive");
  if (!(functions_per_script_median > 0) ||
      !(functions_per_script_sigma >= 0)) {
    Fail(ErrorCode::kInvalidSpec,
         "syngen: functions_per_script needs median > 0, sigma >= 0");
  }
  if (!(fp_fraction > 0 && fp_fraction < 1))
    Fail(ErrorCode::kInvalidSpec, "syngen: fp_fraction must lie in (0,1)");
  CheckLength(non_fp_length, "non_fp_length");
  CheckLength(fp_length, "fp_length");
  if (motif.size() < 4)
    Fail(ErrorCode::kInvalidSpec, "syngen: motif needs at least 4 opcodes");
  for (const std::string& m : motif) {
    if (!IsKnownOpcode(m))
      Fail(ErrorCode::kInvalidSpec, "syngen: unknown motif opcode '" + m + "'");
  }
  // Motif plus the trailing Return must fit in the tokenized prefix.
  if (fp_length.max < motif.size() + 1 || motif.size() + 1 > kFunctionMaxLen)
    Fail(ErrorCode::kInvalidSpec, "syngen: fp_length.max too small for motif");
  if (!(near_miss_fraction >= 0 && near_miss_fraction <= 1))
    Fail(ErrorCode::kInvalidSpec,
         "syngen: near_miss_fraction must lie in [0,1]");
  if (!(zipf_exponent > 0) || !std::isfinite(zipf_exponent))
    Fail(ErrorCode::kInvalidSpec, "syngen: zipf_exponent must be positive");
}

json CorpusSpec::ToJson() const {
  return {{"nScripts", n_scripts},
          {"nFunctions", n_functions},
          {"functionsPerScriptMedian", functions_per_script_median},
          {"functionsPerScriptSigma", functions_per_script_sigma},
          {"fpFraction", fp_fraction},
          {"nonFpLength", LengthToJson(non_fp_length)},
          {"fpLength", LengthToJson(fp_length)},
          {"motif", motif},
          {"nearMissFraction", near_miss_fraction},
          {"zipfExponent", zipf_exponent},
          {"seed", seed}};
}

CorpusSpec CorpusSpec::FromJson(const json& j) {
  CorpusSpec s;
  try {
    if (!j.is_object())
      Fail(ErrorCode::kConfigError, "syngen spec must be an object");
    s.n_scripts = j.value("nScripts", s.n_scripts);
    s.n_functions = j.value("nFunctions", s.n_functions);
    s.functions_per_script_median =
        j.value("functionsPerScriptMedian", s.functions_per_script_median);
    s.functions_per_script_sigma =
        j.value("functionsPerScriptSigma", s.functions_per_script_sigma);
    s.fp_fraction = j.value("fpFraction", s.fp_fraction);
    if (j.contains("nonFpLength"))
      s.non_fp_length = LengthFromJson(j.at("nonFpLength"), s.non_fp_length);
    if (j.contains("fpLength"))
      s.fp_length = LengthFromJson(j.at("fpLength"), s.fp_length);
    if (j.contains("motif")) {
      const json& m = j.at("motif");
      if (m.is_string() && m.get<std::string>() == "renamed")
        s.motif = RenamedMotif();
      else if (m.is_string() && m.get<std::string>() == "default")
        s.motif = DefaultMotif();
      else
        s.motif = m.get<std::vector<std::string>>();
    }
    s.near_miss_fraction = j.value("nearMissFraction", s.near_miss_fraction);
    s.zipf_exponent = j.value("zipfExponent", s.zipf_exponent);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kConfigError, std::string("syngen spec: ") + e.what());
  }
  return s;
}

GeneratedCorpus Generate(const CorpusSpec& spec) {
  spec.Validate();
  const OpcodeSampler sampler(spec);

  // Script sizes.
  Rng size_rng(DeriveSeed(spec.seed, "syngen-sizes"));
  std::vector<size_t> sizes;
  size_t total = 0;
  while (spec.n_functions > 0 ? total < spec.n_functions
                              : sizes.size() < spec.n_scripts) {
    const double k = std::round(size_rng.LogNormal(
        std::log(spec.functions_per_script_median),
        spec.functions_per_script_sigma));
    size_t n = static_cast<size_t>(std::clamp(k, 2.0, 1e6));
    if (spec.n_functions > 0)
      n = std::min(n, spec.n_functions - total);
    sizes.push_back(n);
    total += n;
  }

  // FP slots: one slot per multi-function script is held back so every FP
  // script stays mixed.
  Rng label_rng(DeriveSeed(spec.seed, "syngen-labels"));
  std::vector<size_t> candidates;
  std::vector<size_t> script_of(total);
  {
    size_t base = 0;
    for (size_t s = 0; s < sizes.size(); ++s) {
      const size_t held = sizes[s] >= 2 ? label_rng.Below(sizes[s]) : 0;
      for (size_t j = 0; j < sizes[s]; ++j) {
        script_of[base + j] = s;
        if (sizes[s] >= 2 && j != held)
          candidates.push_back(base + j);
      }
      base += sizes[s];
    }
  }
  const auto n_fp = static_cast<size_t>(
      std::llround(spec.fp_fraction * static_cast<double>(total)));
  if (n_fp > candidates.size())
    Fail(ErrorCode::kInvalidSpec,
         "syngen: fp_fraction too high for mixed FP scripts");
  label_rng.Shuffle(candidates);
  std::vector<bool> is_fp(total, false);
  for (size_t i = 0; i < n_fp; ++i)
    is_fp[candidates[i]] = true;

  GeneratedCorpus out;
  out.records.reserve(total);
  out.manifest.reserve(total);
  Rng rng(DeriveSeed(spec.seed, "syngen-content"));
  size_t index = 0;
  for (size_t s = 0; s < sizes.size(); ++s) {
    const std::string host = "site" + std::to_string(s / 2) + ".example";
    const std::string script_url =
        "https://" + host + "/static/app" + std::to_string(s) + ".js";
    const std::string page_url = "https://" + host + "/";
    const uint64_t script_id = 3 + s;
    for (size_t j = 0; j < sizes[s]; ++j, ++index) {
      const bool fp = is_fp[index];
      FunctionRecord rec;
      rec.script_url = script_url;
      rec.script_id = script_id;
      rec.function_name = std::string(kNameStems[rng.Below(std::size(kNameStems))]) +
                          "_" + std::to_string(j);
      rec.parameter_count = static_cast<uint32_t>(rng.Below(4));
      rec.register_count = 1 + static_cast<uint32_t>(rng.Below(24));
      rec.frame_size = 8 * rec.register_count;

      const uint32_t len =
          std::max<uint32_t>(SampleLength(rng, fp ? spec.fp_length
                                                  : spec.non_fp_length),
                             fp ? static_cast<uint32_t>(spec.motif.size() + 1)
                                : 1);
      rec.opcodes.reserve(len);
      for (uint32_t k = 0; k + 1 < len; ++k)
        rec.opcodes.push_back(sampler.Sample(rng));
      rec.opcodes.emplace_back("Return");

      ManifestEntry m;
      m.key = {rec.script_url, rec.script_id, rec.function_name};
      m.is_fp = fp;
      m.opcode_count = len;
      TraceWriter writer(out.events, m.key, page_url);
      if (fp) {
        const size_t window = std::min<size_t>(len - 1, kFunctionMaxLen);
        const size_t at = rng.Below(window - spec.motif.size() + 1);
        std::copy(spec.motif.begin(), spec.motif.end(),
                  rec.opcodes.begin() + static_cast<std::ptrdiff_t>(at));
        m.motif_offset = static_cast<int64_t>(at);
        const Technique t = kAllTechniques[rng.Below(std::size(kAllTechniques))];
        m.techniques.Insert(t);
        PositiveTrace(writer, rng, t);
      } else if (rng.Bernoulli(spec.near_miss_fraction)) {
        m.near_miss = kNearMisses[rng.Below(std::size(kNearMisses))];
        NearMissTrace(writer, rng, m.near_miss);
      }
      out.records.push_back(std::move(rec));
      out.manifest.push_back(std::move(m));
    }
  }
  return out;
}

std::string GeneratedCorpus::LogText() const {
  return SerializeLog(records);
}

std::string GeneratedCorpus::TraceJson() const {
  return SerializeTraces(events);
}

std::string GeneratedCorpus::ManifestJsonl() const {
  std::string out;
  for (const ManifestEntry& m : manifest) {
    const json line = {{"scriptUrl", m.key.script_url},
                       {"scriptId", m.key.script_id},
                       {"functionName", m.key.function_name},
                       {"label", m.is_fp ? "FP" : "NonFP"},
                       {"techniques", m.techniques.Names()},
                       {"nearMiss", NearMissName(m.near_miss)},
                       {"opcodeCount", m.opcode_count},
                       {"motifOffset", m.motif_offset}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<ManifestEntry> ManifestFromJsonl(std::string_view text) {
  std::vector<ManifestEntry> out;
  size_t line_no = 0;
  for (std::string_view line : SplitLines(text)) {
    ++line_no;
    if (TrimWhitespace(line).empty())
      continue;
    try {
      const json j = json::parse(line);
      ManifestEntry m;
      m.key.script_url = j.at("scriptUrl").get<std::string>();
      m.key.script_id = j.at("scriptId").get<uint64_t>();
      m.key.function_name = j.at("functionName").get<std::string>();
      const std::string label = j.at("label").get<std::string>();
      if (label != "FP" && label != "NonFP")
        Fail(ErrorCode::kSchemaError, "manifest: bad label '" + label + "'");
      m.is_fp = label == "FP";
      m.techniques = TechniqueSet::FromNames(
          j.at("techniques").get<std::vector<std::string>>());
      m.near_miss = NearMissFromName(j.value("nearMiss", "none"));
      m.opcode_count = j.value("opcodeCount", size_t{0});
      m.motif_offset = j.value("motifOffset", int64_t{-1});
      out.push_back(std::move(m));
    } catch (const json::exception& e) {
      Fail(ErrorCode::kSchemaError, "manifest line " + std::to_string(line_no) +
                                        ": " + e.what());
    }
  }
  return out;
}

}  // namespace bcfp
