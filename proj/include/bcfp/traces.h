#ifndef BCFP_TRACES_H_
#define BCFP_TRACES_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bcfp {

// (script URL, script ID, function name): the join key shared by bytecode
// logs and execution traces.
struct FunctionKey {
  std::string script_url;
  uint64_t script_id = 0;
  std::string function_name;

  friend auto operator<=>(const FunctionKey&, const FunctionKey&) = default;
  friend bool operator==(const FunctionKey&, const FunctionKey&) = default;
};

struct FunctionKeyHash {
  size_t operator()(const FunctionKey& key) const;
};

// One high-entropy API call observed by the tracing extension.
struct TraceEvent {
  std::string api;  // Dotted identifier, e.g. "CanvasRenderingContext2D.fillText".
  std::vector<std::string> args;
  std::string script_url;
  uint64_t script_id = 0;
  std::string function_name;
  uint32_t line = 0;
  uint32_t column = 0;
  std::string page_url;

  FunctionKey key() const { return {script_url, script_id, function_name}; }

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct FunctionTrace {
  FunctionKey key;
  std::vector<TraceEvent> events;
};

struct SchemaDiagnostic {
  size_t index = 0;  // Position of the object in the input array.
  std::string field;
  std::string reason;
};

struct ParseTracesResult {
  std::vector<TraceEvent> events;
  std::vector<SchemaDiagnostic> diagnostics;
};

// Parses a JSON array of event objects. Objects with a missing or mistyped
// required field are skipped and reported. Throws Error(kSchemaError) when the
// document is not valid JSON or is not an array.
ParseTracesResult ParseTraces(std::string_view raw_json);

std::string SerializeTraces(std::span<const TraceEvent> events);

// False for empty URLs, internal browser/extension/engine sources, and
// anything that is not an absolute http(s) URL.
bool IsWebScriptUrl(std::string_view url);

std::vector<TraceEvent> FilterEvents(std::span<const TraceEvent> events);

// One group per distinct key, in first-occurrence order.
std::vector<FunctionTrace> GroupByFunction(std::span<const TraceEvent> events);

// Host part of an http(s) URL, or empty.
std::string UrlHost(std::string_view url);

}  // namespace bcfp

#endif  // BCFP_TRACES_H_
