#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pb2 {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream...) tuple. Every random decision
/// in a run draws from a stream keyed by what it is for and when it happens,
/// so a run can be resumed at any round without saving generator state.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// Stream tags.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kExploit = 2;
inline constexpr std::uint64_t kExplore = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kHyperparams = 5;
inline constexpr std::uint64_t kTrainer = 6;
inline constexpr std::uint64_t kBenchmark = 7;
}  // namespace stream

}  // namespace pb2
