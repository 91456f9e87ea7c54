#include "bcfp/labeler.h"

#include <algorithm>
#include <array>
#include <bit>
#include <unordered_set>

#include "bcfp/text_util.h"

namespace bcfp {

namespace {

constexpr std::array<std::string_view, 2> kContexts = {
    "CanvasRenderingContext2D", "OffscreenCanvasRenderingContext2D"};

constexpr size_t kMinCanvasTextLength = 10;
constexpr size_t kMinMeasureTextCalls = 20;
constexpr size_t kMinDistinctFonts = 21;  // "more than 20"

bool IsContextMethod(std::string_view api, std::string_view method) {
  for (std::string_view ctx : kContexts) {
    if (api.size() == ctx.size() + 1 + method.size() && api.starts_with(ctx) &&
        api[ctx.size()] == '.' && api.ends_with(method)) {
      return true;
    }
  }
  return false;
}

bool IsToDataUrl(std::string_view api) {
  return IsContextMethod(api, "toDataURL") ||
         api == "HTMLCanvasElement.toDataURL";
}

bool IsCanvasStateCall(std::string_view api) {
  return IsContextMethod(api, "save") || IsContextMethod(api, "restore") ||
         IsContextMethod(api, "addEventListener") ||
         api == "HTMLCanvasElement.addEventListener";
}

bool IsAudioSetupCall(std::string_view api) {
  return api == "BaseAudioContext.createOscillator" ||
         api == "BaseAudioContext.createDynamicsCompressor" ||
         api == "OfflineAudioContext.startRendering" ||
         api == "AudioNode.connect";
}

}  // namespace

std::string_view TechniqueName(Technique t) {
  switch (t) {
    case Technique::kCanvas:
      return "Canvas";
    case Technique::kCanvasFont:
      return "CanvasFont";
    case Technique::kAudio:
      return "Audio";
    case Technique::kWebRtc:
      return "WebRTC";
  }
  return "";
}

std::optional<Technique> TechniqueFromName(std::string_view name) {
  for (Technique t : kAllTechniques) {
    if (TechniqueName(t) == name)
      return t;
  }
  return std::nullopt;
}

TechniqueSet::TechniqueSet(std::initializer_list<Technique> techniques) {
  for (Technique t : techniques)
    Insert(t);
}

size_t TechniqueSet::size() const {
  return static_cast<size_t>(std::popcount(bits_));
}

std::vector<Technique> TechniqueSet::ToVector() const {
  std::vector<Technique> out;
  for (Technique t : kAllTechniques) {
    if (Contains(t))
      out.push_back(t);
  }
  return out;
}

std::vector<std::string> TechniqueSet::Names() const {
  std::vector<std::string> out;
  for (Technique t : ToVector())
    out.emplace_back(TechniqueName(t));
  return out;
}

TechniqueSet TechniqueSet::FromNames(std::span<const std::string> names) {
  TechniqueSet set;
  for (const std::string& name : names) {
    if (auto t = TechniqueFromName(name))
      set.Insert(*t);
  }
  return set;
}

bool CanvasHeuristic(const FunctionTrace& trace) {
  bool fill_text = false;
  bool long_text = false;
  bool to_data_url = false;
  for (const TraceEvent& e : trace.events) {
    if (IsCanvasStateCall(e.api))
      return false;
    if (IsContextMethod(e.api, "fillText")) {
      fill_text = true;
      if (!e.args.empty() &&
          CountCodePoints(e.args.front()) >= kMinCanvasTextLength) {
        long_text = true;
      }
    } else if (IsToDataUrl(e.api)) {
      to_data_url = true;
    }
  }
  return fill_text && long_text && to_data_url;
}

bool CanvasFontHeuristic(const FunctionTrace& trace) {
  size_t measure_calls = 0;
  std::unordered_set<std::string_view> fonts;
  for (const TraceEvent& e : trace.events) {
    std::string_view api = e.api;
    if (api.ends_with(".measureText")) {
      ++measure_calls;
    } else if (api.ends_with(".font.set") && !e.args.empty()) {
      fonts.insert(e.args.front());
    }
  }
  return measure_calls >= kMinMeasureTextCalls &&
         fonts.size() >= kMinDistinctFonts;
}

bool AudioHeuristic(const FunctionTrace& trace) {
  bool seen_setup = false;
  for (const TraceEvent& e : trace.events) {
    if (IsAudioSetupCall(e.api))
      seen_setup = true;
    else if (seen_setup && e.api == "AudioBuffer.getChannelData")
      return true;
  }
  return false;
}

bool WebRtcHeuristic(const FunctionTrace& trace) {
  bool offer = false;
  bool local_description = false;
  for (const TraceEvent& e : trace.events) {
    if (e.api == "RTCPeerConnection.createDataChannel" ||
        e.api == "RTCPeerConnection.createOffer") {
      offer = true;
    } else if (e.api == "RTCPeerConnection.setLocalDescription") {
      local_description = true;
    }
  }
  return offer && local_description;
}

HeuristicVerdict LabelTrace(const FunctionTrace& trace) {
  HeuristicVerdict verdict;
  verdict.key = trace.key;
  if (CanvasHeuristic(trace))
    verdict.techniques.Insert(Technique::kCanvas);
  if (CanvasFontHeuristic(trace))
    verdict.techniques.Insert(Technique::kCanvasFont);
  if (AudioHeuristic(trace))
    verdict.techniques.Insert(Technique::kAudio);
  if (WebRtcHeuristic(trace))
    verdict.techniques.Insert(Technique::kWebRtc);
  verdict.is_fp = !verdict.techniques.empty();
  return verdict;
}

std::vector<HeuristicVerdict> LabelTraces(std::span<const FunctionTrace> traces) {
  std::vector<HeuristicVerdict> verdicts(traces.size());
  const auto n = static_cast<int64_t>(traces.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (int64_t i = 0; i < n; ++i)
    verdicts[static_cast<size_t>(i)] = LabelTrace(traces[static_cast<size_t>(i)]);
  return verdicts;
}

}  // namespace bcfp
