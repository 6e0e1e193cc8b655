// SPDX-License-Identifier: Apache-2.0

#include "rrcl/rng.hpp"

namespace rrcl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(splitmix64(splitmix64(seed) ^ h) ^ index);
}

}  // namespace rrcl
