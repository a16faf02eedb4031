#pragma once

// Seeded randomness with a fixed, documented algorithm so draws can be
// reproduced outside C++:
//   generator  std::mt19937_64 (MT19937-64, standard seeding)
//   index      rejection sampling: draw x until x < n * floor(2^64 / n),
//              return x % n
//   unit       (x >> 11) * 2^-53
//   sub-seed   splitmix64(seed + stream)

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace tomsim {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;
std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform_unit(Rng& rng);

// Partial Fisher-Yates: for i in [0, n), swap(i, i + uniform_index(size - i)).
// Returns the first n indices of the shuffled identity permutation.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

}  // namespace tomsim
