#ifndef NODALPERC_RNG_HPP
#define NODALPERC_RNG_HPP

#include <cstdint>
#include <random>

namespace nodalperc {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream `stream` under master seed `seed`. Streams are
/// decorrelated by two rounds of splitmix so neighbouring indices
/// do not produce neighbouring engine states.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return Engine(stream_seed(seed, stream));
}

}  // namespace nodalperc

#endif  // NODALPERC_RNG_HPP
