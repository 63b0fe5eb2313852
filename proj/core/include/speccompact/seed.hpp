#pragma once

#include <cstdint>
#include <string_view>

namespace speccompact {

// Per-phase seeds are derived from one master seed: the phase tag is hashed
// with 64-bit FNV-1a, xor-ed into the master seed, and the result is passed
// through one splitmix64 finalization round.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace speccompact
