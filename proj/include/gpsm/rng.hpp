#pragma once

#include <cstdint>
#include <random>

namespace gpsm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream for (root seed, purpose tag, index). Streams depend
/// only on these three values, never on scheduling.
inline Rng stream_rng(std::uint64_t root, std::uint64_t tag, std::uint64_t index) {
  const std::uint64_t a = mix64(root ^ mix64(tag));
  const std::uint64_t b = mix64(a ^ mix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t kBootstrap = 0xb0075;
inline constexpr std::uint64_t kReplicate = 0x5e91;
inline constexpr std::uint64_t kGenerate = 0x9e4e;
}  // namespace stream

}  // namespace gpsm
