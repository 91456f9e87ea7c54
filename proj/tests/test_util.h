#ifndef BCFP_TESTS_TEST_UTIL_H_
#define BCFP_TESTS_TEST_UTIL_H_

#include <string>
#include <vector>

#include "bcfp/bytelog.h"
#include "bcfp/opcodes.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"

namespace bcfp::testing {

inline std::string FixturePath(const std::string& name) {
  return std::string(BCFP_FIXTURE_DIR) + "/" + name;
}

inline std::string ReadFixture(const std::string& name) {
  return ReadFileOrThrow(FixturePath(name));
}

inline std::vector<std::string> RandomOpcodes(Rng& rng, size_t n) {
  const auto known = KnownOpcodes();
  std::vector<std::string> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.emplace_back(known[rng.Below(known.size())]);
  return out;
}

inline FunctionRecord RandomRecord(Rng& rng, size_t max_ops = 80) {
  FunctionRecord r;
  r.script_url = "https://site" + std::to_string(rng.Below(20)) + ".example/s" +
                 std::to_string(rng.Below(5)) + ".js";
  r.script_id = rng.Below(1000);
  r.function_name = "fn" + std::to_string(rng.Below(100000));
  r.parameter_count = static_cast<uint32_t>(rng.Below(6));
  r.register_count = static_cast<uint32_t>(rng.Below(30));
  r.frame_size = r.register_count * 8;
  r.opcodes = RandomOpcodes(rng, 1 + rng.Below(max_ops));
  return r;
}

}  // namespace bcfp::testing

#endif  // BCFP_TESTS_TEST_UTIL_H_
