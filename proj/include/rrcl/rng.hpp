// SPDX-License-Identifier: Apache-2.0
//
// Purpose-keyed random streams: every consumer derives its own generator from
// (seed, purpose, index) so adding a draw in one place never shifts another.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rrcl {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view purpose,
                                std::uint64_t index = 0) {
  return std::mt19937_64(mix_seed(seed, purpose, index));
}

}  // namespace rrcl
