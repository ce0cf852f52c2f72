#pragma once
#include <cstdint>
#include <random>

namespace nvlambda {

// splitmix64: fast seed mixer (Steele/Lea/Flood; public-domain reference
// constants). Used to derive independent, scheduling-independent RNG streams
// from a master seed so that parallel work gives identical results no matter
// how it is carved up across threads.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive a stream seed from (master, a, b, c); any unused index is 0.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc908ULL);
  s = splitmix64(s ^ splitmix64(a));
  s = splitmix64(s ^ splitmix64(b ^ 0x3c6ef372fe94f82bULL));
  s = splitmix64(s ^ splitmix64(c ^ 0xa54ff53a5f1d36f1ULL));
  return s;
}

// Per-stream engine; a fresh engine per (task, index) keeps results
// independent of loop scheduling.
inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::mt19937_64(derive_seed(master, a, b, c));
}

}  // namespace nvlambda
