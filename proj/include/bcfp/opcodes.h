#ifndef BCFP_OPCODES_H_
#define BCFP_OPCODES_H_

#include <span>
#include <string_view>

namespace bcfp {

// The V8 Ignition opcode universe (355 mnemonics).
std::span<const std::string_view> KnownOpcodes();

bool IsKnownOpcode(std::string_view mnemonic);

}  // namespace bcfp

#endif  // BCFP_OPCODES_H_
