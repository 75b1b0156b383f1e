#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xhaul {

/// Deterministic seed mixing (splitmix64). Used to derive independent
/// named streams from one master seed so that, e.g., the agent's
/// exploration draws never perturb the environment's randomness.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for stream `name` at index `index` (episode number, sweep point, ...).
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(name));
  return splitmix64(h + 0x9e3779b97f4a7c15ULL * (index + 1));
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::string_view name,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(stream_seed(master, name, index));
}

}  // namespace xhaul
