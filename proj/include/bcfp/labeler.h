#ifndef BCFP_LABELER_H_
#define BCFP_LABELER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfp/traces.h"

namespace bcfp {

enum class Technique : uint8_t { kCanvas = 0, kCanvasFont, kAudio, kWebRtc };

inline constexpr Technique kAllTechniques[] = {
    Technique::kCanvas, Technique::kCanvasFont, Technique::kAudio,
    Technique::kWebRtc};

std::string_view TechniqueName(Technique t);
std::optional<Technique> TechniqueFromName(std::string_view name);

// Small bit set over the four techniques.
class TechniqueSet {
 public:
  TechniqueSet() = default;
  TechniqueSet(std::initializer_list<Technique> techniques);

  void Insert(Technique t) { bits_ |= Bit(t); }
  bool Contains(Technique t) const { return bits_ & Bit(t); }
  bool empty() const { return bits_ == 0; }
  size_t size() const;
  std::vector<Technique> ToVector() const;
  std::vector<std::string> Names() const;
  static TechniqueSet FromNames(std::span<const std::string> names);

  TechniqueSet& operator|=(TechniqueSet other) {
    bits_ |= other.bits_;
    return *this;
  }
  friend bool operator==(TechniqueSet, TechniqueSet) = default;

 private:
  static uint8_t Bit(Technique t) { return uint8_t{1} << static_cast<int>(t); }
  uint8_t bits_ = 0;
};

struct HeuristicVerdict {
  FunctionKey key;
  bool is_fp = false;
  TechniqueSet techniques;
};

// fillText (>= 10 code points) and toDataURL present; no save/restore/
// addEventListener on the rendering context.
bool CanvasHeuristic(const FunctionTrace& trace);

// >= 20 measureText calls and > 20 distinct font values set.
bool CanvasFontHeuristic(const FunctionTrace& trace);

// An audio graph creation call followed later by AudioBuffer.getChannelData.
bool AudioHeuristic(const FunctionTrace& trace);

// createDataChannel/createOffer together with setLocalDescription.
bool WebRtcHeuristic(const FunctionTrace& trace);

HeuristicVerdict LabelTrace(const FunctionTrace& trace);

// Parallel over traces; output order matches input order.
std::vector<HeuristicVerdict> LabelTraces(std::span<const FunctionTrace> traces);

}  // namespace bcfp

#endif  // BCFP_LABELER_H_
