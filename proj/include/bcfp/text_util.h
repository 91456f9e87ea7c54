#ifndef BCFP_TEXT_UTIL_H_
#define BCFP_TEXT_UTIL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bcfp {

std::string_view TrimWhitespace(std::string_view s);

// Splits on '\n', dropping one trailing '\r' per line. A trailing newline does
// not produce an empty final line.
std::vector<std::string_view> SplitLines(std::string_view text);

// Fields separated by runs of spaces or tabs.
std::vector<std::string_view> SplitWhitespace(std::string_view s);

std::optional<uint64_t> ParseUint64(std::string_view s);

// Number of Unicode code points in a UTF-8 string (continuation bytes are not
// counted; invalid sequences count one per non-continuation byte).
size_t CountCodePoints(std::string_view utf8);

std::string ToHex64(uint64_t value);

std::string ReadFileOrThrow(const std::string& path);
void WriteFileOrThrow(const std::string& path, std::string_view contents);

}  // namespace bcfp

#endif  // BCFP_TEXT_UTIL_H_
