#pragma once

#include <cstdint>
#include <random>

namespace safelink {

// Splitmix64 finalizer. Derives an independent sub-stream seed from a root
// seed and a stream index so that model init, offline sampling, and per-event
// sampling never share state.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [lo, hi) from the top 53 bits of one engine draw.
// Bypasses std::uniform_real_distribution, whose output is not pinned by the
// standard; this keeps sample streams identical across platforms.
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace safelink
