#pragma once

#include <cstdint>
#include <random>

namespace dfca {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent child seed from a parent seed and a tag.
///
/// All randomness in a run hangs off one master seed:
///
///     master
///       ├─ derive(master, Stream::topology)
///       ├─ derive(master, Stream::data)
///       │    ├─ derive(data, 0)                 class centers
///       │    ├─ derive(data, 1 + i)             client i samples
///       │    └─ derive(derive(data, split), i)  client i train/test split
///       ├─ derive(master, Stream::init)
///       │    ├─ derive(derive(init, 0), j)      GI model j
///       │    └─ derive(derive(init, 1 + i), j)  LI model j of client i
///       └─ derive(master, Stream::rounds)
///            └─ derive(rounds, t)               round t (see RoundPlan)
///
/// Changing one knob only perturbs the streams that consume it.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, Tags... rest) {
  return derive_seed(derive_seed(parent, tag), rest...);
}

enum class Stream : std::uint64_t {
  topology = 1,
  data = 2,
  init = 3,
  rounds = 4,
  split = 5,
};

inline std::uint64_t derive_seed(std::uint64_t parent, Stream s) {
  return derive_seed(parent, static_cast<std::uint64_t>(s));
}

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t parent, Stream s, Tags... rest) {
  return derive_seed(derive_seed(parent, s), rest...);
}

}  // namespace dfca
