#include "bcfp/traces.h"

#include <array>
#include <cctype>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "bcfp/error.h"
#include "bcfp/hash.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"

namespace bcfp {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kInvalidPrefixes = {
    "chrome:", "chrome-extension", "file:", "v8/", "devtools:"};

// Reads a required string field; records a diagnostic and returns false when
// absent or mistyped.
bool RequireString(const json& obj, const char* field, size_t index,
                   std::string& out, ParseTracesResult& result) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    result.diagnostics.push_back({index, field, "missing"});
    return false;
  }
  if (!it->is_string()) {
    result.diagnostics.push_back({index, field, "expected string"});
    return false;
  }
  out = it->get<std::string>();
  return true;
}

// CDP reports scriptId as a decimal string; plain integers are accepted too.
std::optional<uint64_t> AsScriptId(const json& value) {
  if (value.is_number_unsigned())
    return value.get<uint64_t>();
  if (value.is_number_integer()) {
    const int64_t v = value.get<int64_t>();
    if (v >= 0)
      return static_cast<uint64_t>(v);
    return std::nullopt;
  }
  if (value.is_string())
    return ParseUint64(value.get<std::string>());
  return std::nullopt;
}

std::optional<uint32_t> AsPosition(const json& value) {
  if (value.is_number_unsigned() || value.is_number_integer()) {
    const int64_t v = value.get<int64_t>();
    if (v >= 0 && v <= UINT32_MAX)
      return static_cast<uint32_t>(v);
  }
  return std::nullopt;
}

std::optional<TraceEvent> ParseEvent(const json& obj, size_t index,
                                     ParseTracesResult& result) {
  if (!obj.is_object()) {
    result.diagnostics.push_back({index, "", "expected object"});
    return std::nullopt;
  }
  TraceEvent event;
  if (!RequireString(obj, "api", index, event.api, result))
    return std::nullopt;
  if (event.api.empty() || event.api.find('.') == std::string::npos) {
    result.diagnostics.push_back({index, "api", "expected dotted identifier"});
    return std::nullopt;
  }
  if (!RequireString(obj, "scriptUrl", index, event.script_url, result))
    return std::nullopt;
  auto id = obj.find("scriptId");
  if (id == obj.end()) {
    result.diagnostics.push_back({index, "scriptId", "missing"});
    return std::nullopt;
  }
  auto id_value = AsScriptId(*id);
  if (!id_value) {
    result.diagnostics.push_back(
        {index, "scriptId", "expected non-negative integer"});
    return std::nullopt;
  }
  event.script_id = *id_value;
  if (!RequireString(obj, "functionName", index, event.function_name, result))
    return std::nullopt;

  if (auto args = obj.find("args"); args != obj.end() && !args->is_null()) {
    if (!args->is_array()) {
      result.diagnostics.push_back({index, "args", "expected array"});
      return std::nullopt;
    }
    for (const json& arg : *args)
      event.args.push_back(arg.is_string() ? arg.get<std::string>()
                                           : arg.dump());
  }
  for (auto [field, target] : {std::pair{"line", &event.line},
                               std::pair{"column", &event.column}}) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null())
      continue;
    auto pos = AsPosition(*it);
    if (!pos) {
      result.diagnostics.push_back(
          {index, field, "expected non-negative integer"});
      return std::nullopt;
    }
    *target = *pos;
  }
  if (auto page = obj.find("pageUrl"); page != obj.end() && !page->is_null()) {
    if (!page->is_string()) {
      result.diagnostics.push_back({index, "pageUrl", "expected string"});
      return std::nullopt;
    }
    event.page_url = page->get<std::string>();
  }
  return event;
}

}  // namespace

size_t FunctionKeyHash::operator()(const FunctionKey& key) const {
  uint64_t h = Fnv1a64(key.script_url);
  h = Mix64(h ^ key.script_id);
  return static_cast<size_t>(Fnv1a64(key.function_name, h));
}

ParseTracesResult ParseTraces(std::string_view raw_json) {
  json doc = json::parse(raw_json, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded())
    Fail(ErrorCode::kSchemaError, "trace file is not valid JSON");
  if (!doc.is_array())
    Fail(ErrorCode::kSchemaError, "trace file must be a JSON array");
  ParseTracesResult result;
  result.events.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) {
    if (auto event = ParseEvent(doc[i], i, result))
      result.events.push_back(std::move(*event));
  }
  return result;
}

std::string SerializeTraces(std::span<const TraceEvent> events) {
  json doc = json::array();
  for (const TraceEvent& e : events) {
    doc.push_back({{"api", e.api},
                   {"args", e.args},
                   {"scriptUrl", e.script_url},
                   {"scriptId", e.script_id},
                   {"functionName", e.function_name},
                   {"line", e.line},
                   {"column", e.column},
                   {"pageUrl", e.page_url}});
  }
  return doc.dump(1) + "\n";
}

bool IsWebScriptUrl(std::string_view url) {
  if (url.empty())
    return false;
  for (std::string_view prefix : kInvalidPrefixes) {
    if (url.starts_with(prefix))
      return false;
  }
  return !UrlHost(url).empty();
}

std::string UrlHost(std::string_view url) {
  std::string_view rest;
  if (url.starts_with("https://"))
    rest = url.substr(8);
  else if (url.starts_with("http://"))
    rest = url.substr(7);
  else
    return {};
  const size_t end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, end);
  if (size_t at = authority.rfind('@'); at != std::string_view::npos)
    authority = authority.substr(at + 1);
  if (size_t colon = authority.rfind(':'); colon != std::string_view::npos &&
                                           authority.find(']') ==
                                               std::string_view::npos)
    authority = authority.substr(0, colon);
  if (authority.empty() ||
      authority.find_first_of(" \t") != std::string_view::npos)
    return {};
  std::string host(authority);
  for (char& c : host)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return host;
}

std::vector<TraceEvent> FilterEvents(std::span<const TraceEvent> events) {
  std::vector<TraceEvent> kept;
  kept.reserve(events.size());
  for (const TraceEvent& e : events) {
    if (IsWebScriptUrl(e.script_url))
      kept.push_back(e);
  }
  return kept;
}

std::vector<FunctionTrace> GroupByFunction(std::span<const TraceEvent> events) {
  std::vector<FunctionTrace> groups;
  std::unordered_map<FunctionKey, size_t, FunctionKeyHash> index;
  for (const TraceEvent& e : events) {
    FunctionKey key = e.key();
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted)
      groups.push_back({std::move(key), {}});
    groups[it->second].events.push_back(e);
  }
  return groups;
}

}  // namespace bcfp
